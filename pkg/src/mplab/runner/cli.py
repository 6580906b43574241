"""Command line entry point: ``mplab <suite> --n ... --trials ... --seed ...``."""

from __future__ import annotations

import argparse
import sys

from mplab.errors import ConfigError, MplabError
from mplab.runner.config import SUITES, from_mapping, load_config
from mplab.runner.report import emit_report, format_float
from mplab.runner.suites import VERIFY


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mplab", description="Monte Carlo checks for Ginibre product Lyapunov exponents.")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--n", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--p", type=float, help="moment order (moments suite)")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, dest="master_seed")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", dest="output_path")
    p.add_argument("--format", dest="output_format", choices=("json", "csv"))
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--path", choices=("fast", "slow"), help="normality sampling path")
    p.add_argument("--doubling", action="store_true", default=None, help="triangle: also run at (2n, 2N)")
    p.add_argument("--timing", action="store_true", help="include timing in the JSON report")
    return p


def _summary(report) -> str:
    lines = []
    for c in report.criteria:
        status = "INFO" if c.passed is None else ("PASS" if c.passed else "FAIL")
        lines.append(f"{status} {c.name} [{c.paper_tag}] value={format_float(c.value)} "
                     f"threshold={format_float(c.threshold)}")
    for note in report.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fields = {k: v for k, v in vars(args).items() if k not in ("config", "timing")}
    try:
        if args.config:
            cfg = load_config(args.config, **fields)
        else:
            cfg = from_mapping({}, **fields)
        report = VERIFY[cfg.suite](cfg)
        if cfg.output_path:
            emit_report(report, cfg.output_format, cfg.output_path, include_timing=args.timing)
    except ConfigError as exc:
        print(f"mplab: config error: {exc}", file=sys.stderr)
        return 2
    except MplabError as exc:
        print(f"mplab: error: {exc}", file=sys.stderr)
        return 2
    print(_summary(report))
    t = report.timing
    print(f"wall_seconds={t['wall_seconds']:.3f} trials_per_second={t['trials_per_second']:.1f}",
          file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
