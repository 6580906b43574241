"""Deterministic trial-parallel Monte Carlo.

Trial i draws from PCG64 seeded by SeedSequence([master_seed, i]), whose
entropy pool hash-mixes both words into 128 bits. Results therefore depend
only on (config, master_seed, i), never on thread count or scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from mplab.errors import ConfigError, RunError

GENERATOR = "numpy PCG64 seeded by SeedSequence([master_seed, trial_index])"
_BLOCK = 64


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    seed_stream: str
    payload: dict


def trial_seed(master_seed: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed, trial_index])


def trial_rng(master_seed: int, trial_index: int) -> tuple[np.random.Generator, str]:
    """Generator for one trial plus a hex tag of its 128-bit mixed seed."""
    ss = trial_seed(master_seed, trial_index)
    tag = "".join(f"{w:016x}" for w in ss.generate_state(2, np.uint64))
    return np.random.Generator(np.random.PCG64(ss)), tag


def _flatten(payload):
    out = {}
    for key, value in payload.items():
        if isinstance(value, (list, tuple, np.ndarray)):
            for i, v in enumerate(np.asarray(value, dtype=float).ravel(), start=1):
                out[f"{key}_{i}"] = float(v)
        else:
            out[key] = float(value)
    return out


def _run_block(trial_fn, master_seed, indices):
    records = []
    for i in indices:
        rng, tag = trial_rng(master_seed, i)
        records.append(TrialRecord(i, tag, _flatten(trial_fn(rng))))
    return records


def run_monte_carlo(config, trial_fn=None) -> list[TrialRecord]:
    """Run ``config.trials`` trials and return their records ordered by index.

    ``trial_fn(rng) -> dict`` defaults to the suite's own trial. Vector
    payload entries are flattened to ``name_1, name_2, ...``.
    """
    if trial_fn is None:
        from mplab.runner.suites import trial_function

        trial_fn = trial_function(config)
    total = config.trials
    if total < 1:
        raise ConfigError("trials must be >= 1")
    blocks = [range(s, min(s + _BLOCK, total)) for s in range(0, total, _BLOCK)]
    results: list[list[TrialRecord] | None] = [None] * len(blocks)
    try:
        if config.threads == 1 or len(blocks) == 1:
            for b, idx in enumerate(blocks):
                results[b] = _run_block(trial_fn, config.master_seed, idx)
        else:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                futures = [pool.submit(_run_block, trial_fn, config.master_seed, idx) for idx in blocks]
                for b, fut in enumerate(futures):
                    results[b] = fut.result()
    except MemoryError as exc:
        done = sum(len(r) for r in results if r is not None)
        raise RunError(
            f"out of memory after {done} of {total} trials", completed=done, total=total
        ) from exc
    return [rec for block in results for rec in block]


def throughput(trials: int, wall_seconds: float) -> float:
    return trials / wall_seconds if wall_seconds > 0 else math.inf
