#!/usr/bin/env python3
"""Run the dmflags test stages in order, fastest first."""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
from dataclasses import dataclass


@dataclass(frozen=True)
class Stage:
    """A certification stage."""

    name: str
    command: list[str]
    full_only: bool = False


def pytest_stage(name: str, marker: str, *paths: str, full_only: bool = False) -> Stage:
    return Stage(
        name=name,
        command=["uv", "run", "pytest", *(paths or ("tests",)), "-m", marker, "--maxfail=1"],
        full_only=full_only,
    )


STAGES = [
    pytest_stage("unit", "unit and not slow"),
    pytest_stage("golden", "golden and not slow"),
    pytest_stage("cli", "cli and not slow", "tests/cli"),
    pytest_stage("property", "property and not slow and not acceptance"),
    pytest_stage("acceptance", "acceptance and not slow"),
    pytest_stage("slow", "slow", full_only=True),
]

STAGE_NAMES = tuple(stage.name for stage in STAGES)


def parse_args() -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(description="Run dmflags certification checks.")
    parser.add_argument(
        "--full",
        action="store_true",
        help="Also run the slow stage (two-variable Adams operations, random flag sweeps).",
    )
    parser.add_argument(
        "--stage",
        choices=["all", *STAGE_NAMES],
        default="all",
        help="Run a single stage.",
    )
    parser.add_argument("--cases", type=int, help="Randomized cases per property suite (DMFLAGS_PROPERTY_CASES).")
    parser.add_argument("--seed", type=int, help="Seed for the randomized suites (DMFLAGS_SEED).")
    return parser.parse_args()


def stage_command(stage: Stage) -> list[str]:
    """Return the stage command with shared pytest reporting flags."""
    command = list(stage.command)
    if "pytest" in command:
        command.append(f"--junitxml=results/{stage.name}.xml")
    return command


def run_stage(stage: Stage, env: dict[str, str]) -> int:
    """Run one stage and return its exit code."""
    command = stage_command(stage)
    print(f"\n==> {stage.name}", flush=True)
    print(" ".join(command), flush=True)
    return subprocess.run(command, check=False, env=env).returncode


def main() -> int:
    """Run certification stages."""
    args = parse_args()

    if args.stage == "slow" and not args.full:
        print("--stage slow requires --full.", file=sys.stderr)
        return 2
    if args.cases is not None and args.cases < 1:
        print("--cases must be positive.", file=sys.stderr)
        return 2

    env = dict(os.environ)
    if args.cases is not None:
        env["DMFLAGS_PROPERTY_CASES"] = str(args.cases)
    if args.seed is not None:
        env["DMFLAGS_SEED"] = str(args.seed)

    stages = [
        stage
        for stage in STAGES
        if (args.stage == "all" or stage.name == args.stage) and (args.full or not stage.full_only)
    ]

    # A unit failure stops the run; other failures are collected for the summary.
    executed: list[str] = []
    failed: list[str] = []
    for stage in stages:
        executed.append(stage.name)
        if run_stage(stage, env) != 0:
            failed.append(stage.name)
            if stage.name == "unit":
                break

    print("\n==> certification summary", flush=True)
    for name in executed:
        outcome = "FAILED" if name in failed else "passed"
        print(f"  {name}: {outcome}", flush=True)

    if failed:
        print(f"\n{len(failed)} stage(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
