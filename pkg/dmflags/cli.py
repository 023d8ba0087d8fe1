"""Command-line front end: ``python -m dmflags <command> <problem.json>``.

Exit codes: 0 when the computation succeeded (or the checked statement
holds), 1 when a mathematical verdict fails, 2 for input errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Mapping
from fractions import Fraction
from pathlib import Path
from typing import Any

from dmflags import config
from dmflags.dm_core import DiffModule, DmMorphism, dm_check, homology
from dmflags.errors import DmflagsError, ParseError, SchemaError
from dmflags.flags import FreeFlag, is_anchored_resolution, minimize_anchor, transfer_anchor
from dmflags.homalg import betti_numbers
from dmflags.ktheory import adams_euler, dutta_sequence, frobenius_dm, tensor_length_test, trc_check
from dmflags.matrix import RingMatrix
from dmflags.resolve import AnchoredResolution, ce_resolution, degenerate_to_homology, functorial_degeneration, quasiminimal
from dmflags.samples import default_rng, random_flagged_perturbation
from dmflags.serialize import (
    Problem,
    build_report,
    dm_to_json,
    dumps,
    flag_order,
    flag_to_json,
    load_problem,
    matrix_rows,
)


logger = logging.getLogger("dmflags")

EXIT_OK = 0
EXIT_FAILS = 1
EXIT_INPUT = 2

Outcome = tuple[dict[str, Any], int]

LIFT_PROVENANCE = "Gröbner normal-form lifts; syzygies by Schreyer's construction; first admissible unit pivot"


# ---------------------------------------------------------------------- #
# helpers
# ---------------------------------------------------------------------- #


def _number(value: int | float | Fraction | None) -> int | str | None:
    if value is None:
        return None
    if isinstance(value, float):
        return "inf"
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else str(value)
    return value


def _keyed(mapping: Mapping[int, Any]) -> dict[str, Any]:
    return {str(k): v for k, v in sorted(mapping.items())}


def _columns_in_order(matrix: RingMatrix, F: FreeFlag) -> RingMatrix:
    return matrix.submatrix(range(matrix.nrows), flag_order(F))


def _between(matrix: RingMatrix, source: FreeFlag, target: FreeFlag) -> list[list[str]]:
    return matrix_rows(matrix.submatrix(flag_order(target), flag_order(source)))


def _anchored(A: AnchoredResolution) -> dict[str, Any]:
    F = A.flag
    return {
        "flag": flag_to_json(F),
        "rank": F.rank,
        "height": F.height,
        "anchored": is_anchored_resolution(F),
        "augmentation": matrix_rows(_columns_in_order(A.augmentation.matrix, F)),
        "betti": {
            str(j): {str(i): _keyed(row) for i, row in betti_numbers(C).items()}
            for j, C in sorted(A.anchor_resolutions.items())
        },
        "homology": _keyed({k: _number(v) for k, v in homology(F.module).lengths.items()}),
    }


def _task_int(problem: Problem, args: argparse.Namespace, name: str, default: int | None = None) -> int | None:
    value = getattr(args, name, None)
    if value is None:
        value = problem.task.get(name, default)
    if value is not None and (not isinstance(value, int) or isinstance(value, bool)):
        raise SchemaError(f"expected an integer, got {value!r}", f"$.task.{name}")
    return value


def _minimize(problem: Problem) -> bool:
    value = problem.task.get("minimize", False)
    if not isinstance(value, bool):
        raise SchemaError("expected a boolean", "$.task.minimize")
    return value


# ---------------------------------------------------------------------- #
# commands
# ---------------------------------------------------------------------- #


def cmd_check(problem: Problem, args: argparse.Namespace) -> Outcome:
    graded = problem.task.get("graded", False)
    report = dm_check(problem.module(problem.task_name("input", "D")), graded=bool(graded))
    result = {
        "passed": report.passed,
        "square_zero": report.square_zero,
        "degree_ok": report.degree_ok,
        "homogeneous": report.homogeneous,
        "offending": [{"from": src, "to": dst, "reason": reason} for src, dst, reason in report.offending],
    }
    return result, EXIT_OK if report.passed else EXIT_FAILS


def cmd_homology(problem: Problem, args: argparse.Namespace) -> Outcome:
    H = homology(problem.module(problem.task_name("input", "D")))
    result = {
        "lengths": _keyed({k: _number(v) for k, v in H.lengths.items()}),
        "total": _number(H.total),
        "support": H.support,
    }
    return result, EXIT_OK


def cmd_ce_res(problem: Problem, args: argparse.Namespace) -> Outcome:
    D = problem.module(problem.task_name("input", "D"))
    ce = ce_resolution(D, _minimize(problem), args.length_cap)
    result = {
        "flag": flag_to_json(ce.flag),
        "rank": ce.flag.rank,
        "height": ce.flag.height,
        "pieces": ce.summary(),
        "augmentation": matrix_rows(_columns_in_order(ce.augmentation.matrix, ce.flag)),
    }
    return result, EXIT_OK


def cmd_anchor(problem: Problem, args: argparse.Namespace) -> Outcome:
    D = problem.module(problem.task_name("input", "D"))
    return _anchored(degenerate_to_homology(D, _minimize(problem), args.length_cap)), EXIT_OK


def cmd_quasimin(problem: Problem, args: argparse.Namespace) -> Outcome:
    D = problem.module(problem.task_name("input", "D"))
    return _anchored(quasiminimal(D, args.length_cap)), EXIT_OK


def cmd_lift(problem: Problem, args: argparse.Namespace) -> Outcome:
    phi = problem.get(problem.task_name("morphism", "phi"), DmMorphism)
    source, target, psi, square = functorial_degeneration(phi, _minimize(problem))
    result = {
        "source": flag_to_json(source.flag),
        "target": flag_to_json(target.flag),
        "psi": _between(psi.matrix, source.flag, target.flag),
        "homotopy": matrix_rows(_columns_in_order(square.h, source.flag)),
        "square_verified": not square.problems(),
    }
    return result, EXIT_OK


def cmd_perturb(problem: Problem, args: argparse.Namespace) -> Outcome:
    """Perturb a flag and move the result onto its minimized anchor."""
    F = problem.flag(problem.task_name("input", "F"))
    name = problem.task.get("perturbation")
    if name is None:
        delta = random_flagged_perturbation(default_rng(args.seed), F)
        origin = "random"
    else:
        delta = problem.get(name, RingMatrix)
        if delta.shape != (F.rank, F.rank):
            raise SchemaError(f"perturbation has shape {delta.shape}, expected {(F.rank, F.rank)}", "$.task.perturbation")
        origin = name
    perturbed = F.with_module(F.module.perturbed(delta)).verified()
    sdr, small_flag = minimize_anchor(perturbed)
    small, retract = transfer_anchor(perturbed, sdr, small_flag)
    side = retract.side_conditions
    result = {
        "perturbation": origin,
        "delta": _between(delta, F, F),
        "big_rank": perturbed.rank,
        "small": flag_to_json(small),
        "small_rank": small.rank,
        "strong": retract.is_strong,
        "side_conditions": {"h_squared": side.h_squared, "h_iota": side.h_iota, "p_h": side.p_h},
    }
    return result, EXIT_OK


def cmd_adams(problem: Problem, args: argparse.Namespace) -> Outcome:
    k = _task_int(problem, args, "k", 2)
    euler = adams_euler(problem.module(problem.task_name("input", "D")), k)
    return {"chi_psi": euler.chi_psi, "chi": euler.chi, "factor": _number(euler.factor), "k": k}, EXIT_OK


def cmd_trc(problem: Problem, args: argparse.Namespace) -> Outcome:
    verdict = trc_check(problem.module(problem.task_name("input", "D")), _task_int(problem, args, "codim"))
    return verdict.to_dict(), EXIT_FAILS if verdict.status == "fails" else EXIT_OK


def cmd_tensor_test(problem: Problem, args: argparse.Namespace) -> Outcome:
    left = problem.task_name("input", "D")
    D = problem.get(left, DiffModule, FreeFlag)
    D_prime = problem.get(problem.task_name("right", left), DiffModule, FreeFlag)
    report = tensor_length_test(D, D_prime)
    result = report.to_dict() | {"h_left": _number(report.h_left), "rank_right": report.rank_right}
    return result, EXIT_FAILS if report.comparison == "exceeds" else EXIT_OK


def cmd_frobenius(problem: Problem, args: argparse.Namespace) -> Outcome:
    e = _task_int(problem, args, "e", 1)
    if e < 0:
        raise SchemaError("the Frobenius exponent must be nonnegative", "$.task.e")
    D = problem.module(problem.task_name("input", "D"))
    result: dict[str, Any] = {"e": e, "module": dm_to_json(frobenius_dm(D, e))}
    try:
        result["dutta"] = dutta_sequence(D, e).to_dict()
    except DmflagsError as exc:
        logger.warning("no Dutta sequence: %s", exc)
        result["dutta"] = None
    return result, EXIT_OK


COMMANDS: dict[str, tuple[Callable[[Problem, argparse.Namespace], Outcome], str]] = {
    "check": (cmd_check, "verify square-zero, component degrees and (task.graded) homogeneity"),
    "homology": (cmd_homology, "homology lengths per component"),
    "ce-res": (cmd_ce_res, "Cartan-Eilenberg flag resolution"),
    "anchor": (cmd_anchor, "anchored resolution on resolutions of the homology"),
    "quasimin": (cmd_quasimin, "quasiminimal anchored resolution"),
    "lift": (cmd_lift, "flag-preserving lift of a morphism with its homotopy square"),
    "perturb": (cmd_perturb, "perturb a flag and transfer it to its minimized anchor"),
    "adams": (cmd_adams, "Euler characteristic of the cyclic Adams operation"),
    "trc": (cmd_trc, "total rank inequality verdict"),
    "tensor-test": (cmd_tensor_test, "h(D ⊗ D') against h(D) rank(D')"),
    "frobenius": (cmd_frobenius, "Frobenius pullback and Dutta sequence"),
}


# ---------------------------------------------------------------------- #
# entry point
# ---------------------------------------------------------------------- #


def _nonnegative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("problem", type=Path, help="JSON problem file")
    common.add_argument("--ring-order", choices=["grevlex", "lex"], help="override the ring block's monomial order")
    common.add_argument("--length-cap", type=_nonnegative, help=f"resolution length cap (default {config.LENGTH_CAP})")
    common.add_argument("--codim", type=_nonnegative, help="codimension of the homology support (trc)")
    common.add_argument("--seed", type=_nonnegative, help=f"seed for randomized perturbations (default {config.SEED})")
    common.add_argument("--threads", type=int, help="worker threads (overrides DMFLAGS_THREADS)")
    common.add_argument("--log-level", default=config.LOG_LEVEL, help="logging level on stderr")
    common.add_argument("--output", type=Path, help="write the report here instead of stdout")

    parser = argparse.ArgumentParser(prog="dmflags", description="Exact computations with flags of differential modules.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        command = sub.add_parser(name, parents=[common], help=help_text)
        if name == "adams":
            command.add_argument("--k", type=int, help="prime power of the operation (default 2)")
        if name == "frobenius":
            command.add_argument("--e", type=_nonnegative, help="Frobenius exponent (default 1)")
    return parser


def _options(args: argparse.Namespace) -> dict[str, Any]:
    names = ("ring_order", "length_cap", "codim", "seed", "k", "e")
    return {name: getattr(args, name, None) for name in names}


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads is not None:
        config.THREADS = max(1, args.threads)
    handler, _ = COMMANDS[args.command]
    try:
        problem = load_problem(args.problem, args.ring_order)
        result, code = handler(problem, args)
    except (SchemaError, ParseError) as exc:
        print(f"dmflags: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"dmflags: cannot read {args.problem}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INPUT
    except DmflagsError as exc:
        print(f"dmflags: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT

    options = _options(args) | {"lifts": LIFT_PROVENANCE if args.command in ("ce-res", "anchor", "quasimin", "lift") else None}
    text = dumps(build_report(args.command, problem, result, options))
    if args.output is not None:
        args.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    logger.info("%s finished with exit code %d", args.command, code)
    return code


def main() -> None:
    raise SystemExit(run())
