"""Command-line entry points.

Subcommands: generate, assemble, verify, certify, report.  Exit codes:
0 success, 2 configuration error, 3 infeasible energy target, 4 residual
failure, 5 certificate failure, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .domain import InfeasibleEnergyError
from .runner import (
    MUTATIONS,
    ArtifactError,
    run_assemble,
    run_certify,
    run_generate,
    run_verify,
)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_RESIDUAL = 4
EXIT_CERTIFICATE = 5


def _add_common(parser):
    parser.add_argument("--config", default=None, help="TOML configuration path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the first ensemble seed")
    parser.add_argument("--cells", type=int, default=None,
                        help="override the spatial resolution (cells per axis)")
    parser.add_argument("--steps", type=int, default=None,
                        help="override the noise grid step count")


def _overrides(args) -> dict:
    out: dict = {}
    if args.seed is not None:
        out.setdefault("ensemble", {})["seeds"] = [args.seed]
    if args.cells is not None:
        out.setdefault("grids", {})["cells"] = [args.cells, args.cells]
    if args.steps is not None:
        out.setdefault("grids", {})["steps"] = args.steps
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wildeuler",
        description="Build and verify weak solutions of the noise-driven "
                    "compressible Euler system.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build fields and certificates")
    _add_common(p)

    p = sub.add_parser("assemble", help="tie a generated field to a noise path")
    _add_common(p)
    p.add_argument("--artifacts", required=True, help="directory from 'generate'")

    p = sub.add_parser("verify", help="run the weak-form residual suite")
    _add_common(p)
    p.add_argument("--artifacts", required=True, help="directory from 'generate'")
    p.add_argument("--mutate", choices=MUTATIONS, default=None,
                   help="apply a negative-control mutation")
    p.add_argument("--rates", action="store_true",
                   help="measure convergence orders on a refinement ladder")

    p = sub.add_parser("certify", help="branch-family nonuniqueness certificates")
    _add_common(p)

    p = sub.add_parser("report", help="summarize a run directory")
    p.add_argument("rundir", help="directory holding reports.json or nonuniqueness.json")
    return parser


def _cmd_generate(args) -> int:
    config = load_config(args.config, _overrides(args))
    result = run_generate(config, args.out)
    print(f"generate: wrote field + {len(result['certificates'])} certificate(s) "
          f"to {result['outdir']} (config {config.hash})")
    return EXIT_OK


def _cmd_assemble(args) -> int:
    config = load_config(args.config, _overrides(args))
    result = run_assemble(config, args.artifacts, args.out, seed=args.seed)
    led = result["ledger"]
    print(f"assemble: mass drift {led.mass_drift():.2e}, "
          f"energy gap {led.energy_gap():.2e}; snapshots in {result['outdir']}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    config = load_config(args.config, _overrides(args))
    result = run_verify(config, args.artifacts, args.out,
                        mutate=args.mutate, rates=args.rates)
    for seed, reports in result["reports"].items():
        for eq, rep in reports.items():
            flag = "pass" if rep.passed else "FAIL"
            print(f"  [{flag}] seed {seed} {eq}: sup {rep.sup_residual:.3e} "
                  f"(tol {rep.tolerance:.3e})")
    print(f"  causality: {'pass' if result['causality'].passed else 'FAIL'}")
    if result["passed"]:
        print("verify: all residuals within tolerance")
        return EXIT_OK
    print(f"verify: failures {result['failures']}")
    return EXIT_RESIDUAL


def _cmd_certify(args) -> int:
    config = load_config(args.config, _overrides(args))
    result = run_certify(config, args.out)
    for pair in result["pairs"]:
        cert = pair["certificate"]
        dmax = max(cert["distances"])
        print(f"  seeds {pair['seeds']}: {'pass' if cert['passed'] else 'FAIL'} "
              f"(max distance {dmax:.4f})")
    if result["passed"]:
        print("certify: all pairs distinct with shared initial data")
        return EXIT_OK
    return EXIT_CERTIFICATE


def _cmd_report(args) -> int:
    rundir = Path(args.rundir)
    shown = False
    reports = rundir / "reports.json"
    if reports.is_file():
        payload = json.loads(reports.read_text())
        print(f"verification run (mutation={payload['mutation']}):")
        for seed, eqs in payload["reports"].items():
            for eq, rep in eqs.items():
                flag = "pass" if rep["passed"] else "FAIL"
                print(f"  [{flag}] seed {seed} {eq}: sup {rep['sup_residual']:.3e}")
        print(f"  causality: {'pass' if payload['causality']['passed'] else 'FAIL'}")
        print(f"  overall: {'pass' if payload['passed'] else 'FAIL'}")
        shown = True
    nonuni = rundir / "nonuniqueness.json"
    if nonuni.is_file():
        payload = json.loads(nonuni.read_text())
        print("nonuniqueness certificates:")
        for pair in payload["pairs"]:
            cert = pair["certificate"]
            print(f"  seeds {pair['seeds']}: {'pass' if cert['passed'] else 'FAIL'} "
                  f"max distance {max(cert['distances']):.4f}")
        shown = True
    manifest = rundir / "manifest.json"
    if manifest.is_file() and not shown:
        print(manifest.read_text())
        shown = True
    if not shown:
        print(f"nothing to report under {rundir}", file=sys.stderr)
        return EXIT_UNEXPECTED
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "assemble": _cmd_assemble,
    "verify": _cmd_verify,
    "certify": _cmd_certify,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InfeasibleEnergyError as exc:
        print(f"infeasible energy target: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactError as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pragma: no cover - defensive
        print(f"unexpected failure: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
