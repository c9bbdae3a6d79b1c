"""
Command-line front end.

    kcoherence measure STATE --k K [--which robustness|geometric|both] [--oracle]
    kcoherence convert SOURCE TARGET --k K [--p P]
    kcoherence sweep --dim D --k K --pairs N [--seed S] --out FILE [--workers W]
    kcoherence witness TARGET --k K [--seed S]

Results go to stdout, diagnostics to stderr. Exit codes: 2 unreadable or
invalid input, 3 parameter out of range, 4 state is not a resource state,
5 requested probability above the conversion bound, 6 output not writable.
"""

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .codecs.csv import csv_codec
from .errors import (
    BoundViolationError, CoherenceError, InvalidScaleError,
    LevelOutOfRangeError, NotAResourceStateError, OracleError,
)
from .measures import geometric_k, geometric_k_oracle, robustness_k, robustness_k_oracle
from .oracles import OracleBudget, sample_pure
from .statespace import as_level, load_state
from .transforms import convert, nonisolation_witness

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RANGE = 3
EXIT_NOT_RESOURCE = 4
EXIT_BOUND = 5
EXIT_OUTPUT = 6


@dataclass(frozen=True)
class SweepRow:
    dim: int
    k: int
    source_seed: int
    target_seed: int
    g_source: float
    r_target: float
    p_max: float
    feasible: bool
    verified: bool


def cmd_measure(
    state_file: str,
    k: int,
    which: str = "both",
    oracle: bool = False,
    budget: Optional[OracleBudget] = None,
) -> str:
    """Closed-form R_k and/or G_k, G_{k+1}, one ``name value`` line each.

    With ``oracle`` every line is followed by the oracle value and the absolute
    deviation.
    """
    state = load_state(state_file)
    as_level(k).check(state.dim, low=2)
    lines = []

    def emit(name: str, value: float, check: Optional[Callable[[], float]]) -> None:
        lines.append(f"{name} {value!r}")
        if oracle and check is not None:
            reference = check()
            lines.append(f"{name} oracle {reference!r} deviation {abs(reference - value)!r}")

    if which in ("robustness", "both"):
        emit(f"R_{k}", robustness_k(state, k).value, lambda: robustness_k_oracle(state, k, budget).value)
    if which in ("geometric", "both"):
        emit(f"G_{k}", geometric_k(state, k).value, lambda: geometric_k_oracle(state, k))
        if k < state.dim:
            emit(f"G_{k + 1}", geometric_k(state, k + 1).value, lambda: geometric_k_oracle(state, k + 1))
    return "\n".join(lines)


def cmd_convert(
    source_file: str,
    target_file: str,
    k: int,
    p: Optional[float] = None,
    budget: Optional[OracleBudget] = None,
) -> str:
    """JSON conversion report; with ``p`` the map at that scale is embedded."""
    source = load_state(source_file)
    target = load_state(target_file)
    return convert(source, target, k, p, budget).to_json()


def _sweep_row(dim: int, k: int, source_seed: int, target_seed: int, budget: OracleBudget) -> SweepRow:
    source = sample_pure(dim, source_seed, min_rank=k + 1)
    target = sample_pure(dim, target_seed, min_rank=k + 1)
    report = convert(source, target, k, budget=budget)
    try:
        convert(source, target, k, report.p_max, budget)
        verified = True
    except (OracleError, BoundViolationError) as e:
        logger.warning("pair (%d, %d) failed verification: %s", source_seed, target_seed, e)
        verified = False
    return SweepRow(
        dim=dim,
        k=k,
        source_seed=source_seed,
        target_seed=target_seed,
        g_source=report.g_source,
        r_target=report.r_target,
        p_max=report.p_max,
        feasible=report.deterministic_feasible,
        verified=verified,
    )


def cmd_sweep(
    dim: int,
    k: int,
    pairs: int,
    seed: int,
    out: str,
    budget: Optional[OracleBudget] = None,
    workers: Optional[int] = None,
) -> List[SweepRow]:
    """Random resource pairs to CSV, rows in pair order whatever the worker count.

    Pair i uses seeds drawn from ``default_rng(seed)``; ``verified`` records
    that the map at ``p_max`` sends the source to ``p_max`` times the target.
    """
    as_level(k).check(dim, low=2, high=dim - 1)
    if pairs < 1:
        raise ValueError(f"pairs must be at least 1, got: {pairs}")
    budget = budget or OracleBudget()
    seeds = np.random.default_rng(seed).integers(0, 2 ** 63 - 1, size=(pairs, 2))

    def evaluate(pair: np.ndarray) -> SweepRow:
        return _sweep_row(dim, k, int(pair[0]), int(pair[1]), budget)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        rows = list(executor.map(evaluate, seeds))

    with open(out, "w", newline="", encoding="utf-8") as stream:
        csv_codec.write(SweepRow, rows, stream)
    logger.info("wrote %d rows to %s", len(rows), out)
    return rows


def cmd_witness(target_file: str, k: int, seed: int = 0, budget: Optional[OracleBudget] = None) -> str:
    """JSON with the witness state, G_{k+1}(witness), the threshold and the map."""
    target = load_state(target_file)
    return nonisolation_witness(target, k, budget, seed).to_json()


def _budget(args: argparse.Namespace) -> OracleBudget:
    return OracleBudget(
        max_iterations=args.budget_iters,
        restarts=args.budget_restarts,
        seed=args.seed,
        tolerance=args.tol,
    )


def _run_measure(args: argparse.Namespace) -> int:
    print(cmd_measure(args.state, args.k, args.which, args.oracle, _budget(args)))
    return EXIT_OK


def _run_convert(args: argparse.Namespace) -> int:
    print(cmd_convert(args.source, args.target, args.k, args.p, _budget(args)))
    return EXIT_OK


def _run_sweep(args: argparse.Namespace) -> int:
    cmd_sweep(args.dim, args.k, args.pairs, args.seed, args.out, _budget(args), args.workers)
    return EXIT_OK


def _run_witness(args: argparse.Namespace) -> int:
    print(cmd_witness(args.target, args.k, args.seed, _budget(args)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kcoherence",
        description="Multilevel coherence measures and k-coherence-preserving state conversion.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log oracle progress to stderr.")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--k", type=int, required=True, help="Coherence level k.")
    common.add_argument("--seed", type=int, default=0, help="Random seed. Default: 0.")
    common.add_argument(
        "--budget-iters", type=int, default=2000,
        help="Oracle iteration limit. Default: 2000.",
    )
    common.add_argument(
        "--budget-restarts", type=int, default=20,
        help="Oracle restarts. Default: 20.",
    )
    common.add_argument(
        "--tol", type=float, default=1e-7,
        help="Certificate residual tolerance. Default: 1e-7.",
    )

    commands = parser.add_subparsers(dest="command", required=True)

    measure = commands.add_parser("measure", parents=[common], help="Robustness and geometric measures of a state.")
    measure.add_argument("state", help="State JSON file.")
    measure.add_argument(
        "--which", choices=("robustness", "geometric", "both"), default="both",
        help="Measures to print. Default: both.",
    )
    measure.add_argument("--oracle", action="store_true", help="Also print oracle values and deviations.")
    measure.set_defaults(handler=_run_measure)

    convert_ = commands.add_parser("convert", parents=[common], help="Conversion report for a state pair.")
    convert_.add_argument("source", help="Source state JSON file.")
    convert_.add_argument("target", help="Target state JSON file.")
    convert_.add_argument("--p", type=float, default=None, help="Build the map with this success probability.")
    convert_.set_defaults(handler=_run_convert)

    sweep = commands.add_parser("sweep", parents=[common], help="Random pairs to CSV.")
    sweep.add_argument("--dim", type=int, required=True, help="Dimension d.")
    sweep.add_argument("--pairs", type=int, required=True, help="Number of sampled pairs.")
    sweep.add_argument("--out", required=True, help="Output CSV file.")
    sweep.add_argument(
        "--workers", type=int, default=None,
        help="Number of worker threads (default: the executor's choice).",
    )
    sweep.set_defaults(handler=_run_sweep)

    witness = commands.add_parser("witness", parents=[common], help="Non-isolation witness for a target state.")
    witness.add_argument("target", help="Target state JSON file.")
    witness.set_defaults(handler=_run_witness)

    return parser


def _exit_code(error: Exception) -> int:
    if isinstance(error, (LevelOutOfRangeError, InvalidScaleError)):
        return EXIT_RANGE
    if isinstance(error, NotAResourceStateError):
        return EXIT_NOT_RESOURCE
    if isinstance(error, BoundViolationError):
        return EXIT_BOUND
    return EXIT_INPUT


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (None, 0) else EXIT_INPUT

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except OSError as e:
        print(f"error: cannot write output: {e}", file=sys.stderr)
        return EXIT_OUTPUT
    except (CoherenceError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return _exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
