"""
Command-line front end.

    weighted-semigroup run-suite --config run.yaml --out results/
    weighted-semigroup verify-weights --config run.yaml
    weighted-semigroup kernel-fit --config run.yaml
    weighted-semigroup norm-equivalence --config run.yaml --refine
    weighted-semigroup report results/report.json --out plots/

Exit status: 0 when every check passes, 1 when any fails, 2 on a
configuration, usage or construction error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import RunConfig, config_from_dict, parse_config
from .errors import ConfigError, DomainError, EllipticityError, ResolutionError
from .estimates import run_suite
from .reporting import TABLE_NAME, load_document, render_csv, report_document, write_outputs

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SUBCOMMAND_HELP = {
    "verify-weights": "weight admissibility and the ratio lemma",
    "kernel-fit": "Gaussian envelope fit of the kernel gradient",
    "norm-equivalence": "operator-power norm sandwich",
    "run-suite": "every configured check in order",
}

SUBCOMMAND_CHECKS = {
    "verify-weights": ("weights", "lemma"),
    "kernel-fit": ("kernel",),
    "norm-equivalence": ("norm_equivalence",),
    "run-suite": None,
}


def _checks_list(text: str) -> list[str]:
    return [c.strip() for c in text.split(",") if c.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weighted-semigroup",
        description="Numerical checks of weighted Sobolev estimates for divergence-form heat semigroups.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in SUBCOMMAND_CHECKS:
        p = sub.add_parser(name, help=SUBCOMMAND_HELP[name])
        p.add_argument("--config", metavar="PATH", help="YAML or JSON run config (defaults if omitted)")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides config output)")
        p.add_argument("--seed", type=int, help="ensemble and sampling seed (overrides config)")
        p.add_argument("--checks", type=_checks_list, metavar="LIST",
                       help="comma-separated checks to run, in order")
        p.add_argument("--refine", action="store_true", default=None,
                       help="also run at h/2 for stability verdicts")

    p = sub.add_parser("report", help="re-render the CSV table from a stored report.json")
    p.add_argument("report_json", metavar="REPORT", help="path to a stored report.json")
    p.add_argument("--out", metavar="DIR", required=True)
    return parser


def load_config(path) -> RunConfig:
    return config_from_dict({}) if path is None else parse_config(path)


def _run(args) -> int:
    cfg = load_config(args.config)
    checks = args.checks
    if checks is None and SUBCOMMAND_CHECKS[args.command] is not None:
        checks = list(SUBCOMMAND_CHECKS[args.command])
    cfg = cfg.with_overrides(seed=args.seed, checks=checks, refine=args.refine, output=args.out)
    reports = run_suite(cfg)
    document = report_document(reports, cfg.to_dict())
    paths = write_outputs(document, cfg.output)
    for rep in reports:
        print(f"{rep.check_name}: {rep.verdict}")
    print(f"report written to {paths['report']}")
    return EXIT_OK if document["overall"] == "pass" else EXIT_FAIL


def _report(args) -> int:
    document = load_document(args.report_json)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / TABLE_NAME).write_text(render_csv(document))
    print(f"{out / TABLE_NAME} regenerated from {args.report_json}")
    return EXIT_OK if document.get("overall") == "pass" else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "report":
            return _report(args)
        return _run(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (EllipticityError, DomainError, ResolutionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
