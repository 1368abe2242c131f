"""
Command-line entry point: rieszlab verify | unbounded | hn | bounded | expand | serve
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import uvicorn

from src.experiments.reports import ExperimentReport
from src.experiments.runner import BOUNDED_CHECKS, expand, run_bounded, run_hn, run_unbounded, run_verify
from src.experiments.suites import SUITES
from src.quadrature.quadrature import ScanReport
from src.utils.config import Config
from src.utils.errors import RieszLabError

logger = logging.getLogger(__name__)


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rieszlab", description="Riesz transforms on ax+b groups: numerical laboratory")
    parser.add_argument("--log-level", default=None, help="logging level (default RIESZLAB_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, tol: bool = True):
        if tol:
            p.add_argument("--tol", type=float, default=None, help="tolerance (default RIESZLAB_TOL)")
        p.add_argument("--seed", type=int, default=None, help="random seed (default RIESZLAB_SEED)")
        p.add_argument("--out", type=Path, default=None, help="write the JSON report here")

    verify = sub.add_parser("verify", help="run an oracle suite")
    verify.add_argument("suite", choices=sorted(SUITES))
    common(verify)

    unbounded = sub.add_parser("unbounded", help="unboundedness scan of a counterexample")
    unbounded.add_argument("kind", choices=["s1", "s0", "sij"])
    unbounded.add_argument("--i", type=int, default=0)
    unbounded.add_argument("--j", type=int, default=0)
    unbounded.add_argument("--tmax", type=float, default=None, help="largest truncation bound")
    unbounded.add_argument("--t-list", type=_float_list, default=None, help="explicit truncation bounds, comma-separated")
    unbounded.add_argument("--samples", type=int, default=10000)
    unbounded.add_argument("--direct", action="store_true", help="also scan the operator image of the atom")
    unbounded.add_argument("--budget", type=int, default=None, help="quadrature panel budget")
    unbounded.add_argument("--csv", type=Path, default=None, help="write the scan curve as CSV")
    common(unbounded)

    hn = sub.add_parser("hn", help="level sets and norms of the h_N family")
    hn.add_argument("--n-list", type=_int_list, default=[2, 3, 4])
    hn.add_argument("--p", type=int, default=4)
    hn.add_argument("--q", type=int, default=2)
    hn.add_argument("--draws", type=int, default=20)
    hn.add_argument("--grid", type=int, default=16, dest="patches", help="random patches per scale band")
    hn.add_argument("--heights", type=int, default=4)
    hn.add_argument("--l-factor", type=float, default=1.05, help="L = factor * e^N")
    hn.add_argument("--i", type=int, default=0)
    hn.add_argument("--j", type=int, default=0)
    common(hn, tol=False)

    bounded = sub.add_parser("bounded", help="numerical evidence for a bounded operator")
    bounded.add_argument("check", choices=list(BOUNDED_CHECKS))
    bounded.add_argument("--budget", type=int, default=None, help="quadrature panel budget")
    common(bounded, tol=False)

    expansion = sub.add_parser("expand", help="derived expansions of k_ij and X_2 k_ij")
    expansion.add_argument("--i", type=int, default=0)
    expansion.add_argument("--j", type=int, default=0)
    expansion.add_argument("--order", type=int, default=None)
    expansion.add_argument("--out", type=Path, default=None)

    serve = sub.add_parser("serve", help="start the HTTP surface")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    return parser


def _under_output_dir(path: Optional[Path], config: Config) -> Optional[Path]:
    """Relative report paths land under RIESZLAB_OUTPUT_DIR"""
    if path is None or path.is_absolute():
        return path
    return Path(config.output_dir) / path


def _emit(report: ExperimentReport, out: Optional[Path]) -> int:
    if out is not None:
        report.write(out)
    else:
        print(report.to_json())
    if not report.passed:
        detail = report.failed_stage or ", ".join(report.failing())
        logger.error(f"{report.id} failed: {detail}")
    return report.exit_code


def _dispatch(args: argparse.Namespace, config: Config) -> int:
    for name in ("out", "csv"):
        if hasattr(args, name):
            setattr(args, name, _under_output_dir(getattr(args, name), config))

    if args.command == "verify":
        return _emit(run_verify(args.suite, args.tol, args.seed), args.out)

    if args.command == "unbounded":
        report = run_unbounded(args.kind, args.i, args.j, T_list=args.t_list, T_max=args.tmax, tol=args.tol,
                               seed=args.seed, samples=args.samples, direct=args.direct, budget=args.budget)
        if args.csv is not None and "scan" in report.artifacts:
            args.csv.parent.mkdir(parents=True, exist_ok=True)
            args.csv.write_text(ScanReport(**report.artifacts["scan"]).to_csv())
            logger.info(f"Scan curve written to {args.csv}")
        return _emit(report, args.out)

    if args.command == "hn":
        report = run_hn(args.n_list, args.p, args.q, args.draws, args.patches, args.heights, args.i, args.j,
                        seed=args.seed, L_factor=args.l_factor)
        return _emit(report, args.out)

    if args.command == "bounded":
        return _emit(run_bounded(args.check, seed=args.seed, budget=args.budget), args.out)

    if args.command == "expand":
        text = json.dumps(expand(args.i, args.j, args.order), sort_keys=True, indent=2)
        if args.out is not None:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            args.out.write_text(text + "\n")
        else:
            print(text)
        return 0

    if args.command == "serve":
        uvicorn.run("main:app", host=args.host or config.host, port=args.port or config.port,
                    reload=config.debug, log_level=config.log_level.lower())
        return 0

    raise RieszLabError(f"unknown command {args.command!r}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2

    config = Config()
    logging.basicConfig(level=(args.log_level or config.log_level).upper(), stream=sys.stderr)
    if not config.validate_config():
        return 2

    try:
        return _dispatch(args, config)
    except RieszLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected failure: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
