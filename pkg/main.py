import argparse
import logging
import sys
from typing import List, Optional

from run import build_spec, cmd_bench, cmd_check, cmd_list, cmd_run, load_spec, set_override, SWEEPS
from src.ocp_.errors import ConfigurationError

# Flag dest -> spec key
OVERRIDES = {
    "benchmark": "benchmark",
    "mode": "sqp.mode",
    "scheme": "integrator.scheme",
    "steps": "integrator.steps",
    "condensing": "condensing.mode",
    "qp_path": "qp.path",
    "cmon": "cmon.enabled",
    "eta_pri": "cmon.eta_pri",
    "eta_dual": "cmon.eta_dual",
    "max_iters": "sqp.max_iters",
    "kkt_tol": "sqp.kkt_tol",
    "t_end": "sim.t_end",
    "seed": "sim.seed",
    "noise_std": "sim.noise_std",
    "workers": "workers",
    "out": "out",
    "repeats": "repeats",
    "sweep": "sweep",
}


def _add_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec", help="JSON run spec; flags override its values")
    parser.add_argument("--benchmark", help="Benchmark name (see list-benchmarks)")
    parser.add_argument("--mode", choices=("converge", "rti"), help="SQP mode")
    parser.add_argument("--scheme", choices=("erk4", "irk-gl2", "irk-gl3"), help="Integrator")
    parser.add_argument("--steps", type=int, help="Integrator steps per shooting interval")
    parser.add_argument("--condensing", choices=("none", "full"), help="Condensing mode")
    parser.add_argument("--qp-path", choices=("dense", "sparse"), help="QP solver path")
    parser.add_argument(
        "--cmon", action="store_true", default=None, help="Enable adaptive sensitivity updates"
    )
    parser.add_argument("--eta-pri", type=float, help="CMoN primal threshold")
    parser.add_argument("--eta-dual", type=float, help="CMoN dual threshold")
    parser.add_argument("--max-iters", type=int, help="SQP iteration cap")
    parser.add_argument("--kkt-tol", type=float, help="SQP KKT tolerance")
    parser.add_argument("--t-end", type=float, help="Simulated time in seconds")
    parser.add_argument("--seed", type=int, help="Noise seed")
    parser.add_argument("--noise-std", type=float, help="Measurement noise standard deviation")
    parser.add_argument("--workers", type=int, help="Stage-loop threads (0: one per CPU)")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--quiet", action="store_true", help="Disable progress bars")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More log output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="NMPC solver toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Closed-loop simulation")
    _add_options(run_parser)
    check_parser = commands.add_parser("check", help="Open-loop solve and KKT check")
    _add_options(check_parser)
    bench_parser = commands.add_parser("bench", help="Per-phase timing statistics")
    _add_options(bench_parser)
    bench_parser.add_argument("--repeats", type=int, help="Runs per variant")
    bench_parser.add_argument("--sweep", choices=SWEEPS, help="Variant family")
    commands.add_parser("list-benchmarks", help="List registered benchmarks")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-benchmarks":
        return cmd_list()

    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        data = load_spec(args.spec)
        for dest, key in OVERRIDES.items():
            set_override(data, key, getattr(args, dest, None))
        spec = build_spec(data)
    except ConfigurationError as err:
        print(f"Invalid input: {err}", file=sys.stderr)
        return 2

    progress = not args.quiet
    try:
        if args.command == "run":
            return cmd_run(spec, progress)
        if args.command == "check":
            return cmd_check(spec)
        return cmd_bench(spec, progress)
    except ConfigurationError as err:
        print(f"Invalid input: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
