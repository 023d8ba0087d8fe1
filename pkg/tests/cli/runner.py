"""
CLI test runner for dmflags.

Runs ``python -m dmflags`` in a subprocess to:
- Feed it shipped or generated problem files
- Capture exit codes, reports and stderr
- Assert on verdicts and report contents
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


REPO_ROOT = Path(__file__).resolve().parents[2]
PROBLEMS = REPO_ROOT / "problems"

# Wall-clock budget per invocation; the Adams and resolution commands on
# two-variable inputs are the slow ones.
CLI_TIMEOUT = float(os.environ.get("DMFLAGS_CLI_TIMEOUT", "300"))


@dataclass
class CliResult:
    """One finished ``dmflags`` invocation."""

    args: list[str]
    returncode: int
    stdout: str
    stderr: str
    output_file: Path | None = field(default=None, repr=False)

    @property
    def is_success(self) -> bool:
        return self.returncode == 0

    @property
    def is_failure(self) -> bool:
        return self.returncode == 1

    @property
    def is_input_error(self) -> bool:
        return self.returncode == 2

    @property
    def text(self) -> str:
        if self.output_file is not None:
            return self.output_file.read_text(encoding="utf-8")
        return self.stdout

    @property
    def report(self) -> dict[str, Any]:
        """The decoded report; raises if the command printed none."""
        if not self.text:
            raise AssertionError(f"no report from {' '.join(self.args)}; stderr:\n{self.stderr}")
        return json.loads(self.text)

    @property
    def result(self) -> dict[str, Any]:
        return self.report["result"]


class CliRunner:
    """
    Subprocess runner for the ``dmflags`` command line.

    The package is put on ``PYTHONPATH`` so the runner works from a source
    checkout without installing anything.
    """

    def __init__(
        self,
        python: str = sys.executable,
        problems: Path = PROBLEMS,
        env: dict[str, str] | None = None,
        timeout: float = CLI_TIMEOUT,
    ):
        self.python = python
        self.problems = problems
        self.timeout = timeout
        self.env = dict(os.environ)
        self.env["PYTHONPATH"] = os.pathsep.join(
            filter(None, [str(REPO_ROOT), self.env.get("PYTHONPATH", "")])
        )
        self.env.update(env or {})

    def problem(self, name: str) -> Path:
        path = self.problems / name
        if not path.exists():
            raise FileNotFoundError(f"no shipped problem {name}")
        return path

    # === Running ===

    def run(self, command: str, problem: str | Path, *extra: str, output: Path | None = None) -> CliResult:
        """Run one command. ``problem`` is a shipped file name or a path."""
        path = problem if isinstance(problem, Path) else self.problem(problem)
        args = [self.python, "-m", "dmflags", command, str(path), *extra]
        if output is not None:
            args += ["--output", str(output)]
        proc = subprocess.run(
            args,
            capture_output=True,
            text=True,
            encoding="utf-8",
            env=self.env,
            cwd=REPO_ROOT,
            timeout=self.timeout,
            check=False,
        )
        return CliResult(args[2:], proc.returncode, proc.stdout, proc.stderr, output)

    def run_data(self, command: str, data: dict[str, Any], directory: Path, *extra: str) -> CliResult:
        """Write ``data`` as a problem file under ``directory`` and run it."""
        path = directory / f"{command}.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return self.run(command, path, *extra)

    # === Assertions ===

    def assert_exit(self, result: CliResult, code: int) -> None:
        if result.returncode != code:
            msg = (
                f"{' '.join(result.args)} exited with {result.returncode}, expected {code}\n"
                f"stderr:\n{result.stderr}"
            )
            raise AssertionError(msg)

    def assert_stderr_contains(self, result: CliResult, pattern: str) -> None:
        if pattern not in result.stderr:
            raise AssertionError(f"'{pattern}' not found in stderr:\n{result.stderr}")

    def assert_result_matches(self, result: CliResult, expected: dict[str, Any]) -> None:
        """Every key of ``expected`` appears in the report result with that value."""
        actual = result.result
        wrong = {k: actual.get(k) for k, v in expected.items() if actual.get(k) != v}
        if wrong:
            raise AssertionError(f"unexpected result fields {wrong}; expected {expected}")
