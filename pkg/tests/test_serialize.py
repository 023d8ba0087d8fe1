"""Tests for problem files and report envelopes.

Run with: pytest tests/test_serialize.py -v
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from dmflags.dm_core import DiffModule
from dmflags.errors import SchemaError
from dmflags.flags import FreeFlag
from dmflags.matrix import RingMatrix
from dmflags.serialize import (
    build_report,
    dumps,
    flag_order,
    load_problem,
    parse_problem,
    problem_file,
    ring_to_json,
)


PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def minimal_problem(**objects) -> dict:
    return {
        "ring": {"field": "QQ", "variables": ["x", "y"]},
        "objects": objects,
        "task": {"command": "check", "input": "D"},
    }


def square_dm(entries) -> dict:
    return {
        "kind": "dm",
        "d": 1,
        "components": [{"j": 0, "rank": 2}],
        "blocks": [{"from_j": 0, "entries": entries}],
    }


@pytest.mark.unit
class TestProblemFiles:
    """The shipped problem files decode to the named examples."""

    def test_worked_example(self, be) -> None:
        problem = load_problem(PROBLEMS / "be_example.json")
        assert problem.module("D") == be.D
        assert problem.task_name("command") == "quasimin"
        assert problem.source == "be_example.json"

    def test_golden_flag(self, be) -> None:
        problem = load_problem(PROBLEMS / "golden" / "be_example.quasimin.json")
        F = problem.flag("F")
        assert F.module == be.F.module
        assert F.flag == be.F.flag
        assert problem.get("eta").matrix == be.eta.matrix

    def test_kdelta(self, kdelta) -> None:
        F = load_problem(PROBLEMS / "kdelta.json").flag("K")
        assert F.module == kdelta.module
        assert F.flag == kdelta.flag

    def test_failure_retract(self, failure) -> None:
        assert load_problem(PROBLEMS / "failure_retract.json").module("D") == failure

    def test_ring_order_override(self) -> None:
        problem = load_problem(PROBLEMS / "be_example.json", order="lex")
        assert ring_to_json(problem.ring)["order"] == "lex"


@pytest.mark.unit
class TestSchemaErrors:
    """Every rejection names the offending location."""

    def test_missing_ring(self) -> None:
        with pytest.raises(SchemaError) as excinfo:
            parse_problem({"objects": {}})
        assert excinfo.value.location == "$.ring"

    def test_unknown_field(self) -> None:
        data = minimal_problem()
        data["ring"]["field"] = "ZZ"
        with pytest.raises(SchemaError) as excinfo:
            parse_problem(data)
        assert excinfo.value.location == "$.ring.field"

    def test_bad_polynomial(self) -> None:
        data = minimal_problem(D=square_dm([["x", "x +* y"], ["0", "0"]]))
        with pytest.raises(SchemaError) as excinfo:
            parse_problem(data)
        assert excinfo.value.location == "$.objects.D.blocks[0].entries[0][1]"

    def test_wrong_row_count(self) -> None:
        with pytest.raises(SchemaError, match="expected 2 rows") as excinfo:
            parse_problem(minimal_problem(D=square_dm([["x", "y"]])))
        assert excinfo.value.location == "$.objects.D.blocks[0].entries"

    def test_unknown_kind(self) -> None:
        with pytest.raises(SchemaError) as excinfo:
            parse_problem(minimal_problem(D={"kind": "sheaf"}))
        assert excinfo.value.location == "$.objects.D.kind"

    def test_colliding_components(self) -> None:
        D = {"kind": "dm", "d": 2, "components": [{"j": 0, "rank": 1}, {"j": 2, "rank": 1}]}
        with pytest.raises(SchemaError, match="collides"):
            parse_problem(minimal_problem(D=D))

    def test_morphism_needs_earlier_objects(self) -> None:
        eta = {"kind": "morphism", "source": "F", "target": "D", "entries": []}
        with pytest.raises(SchemaError) as excinfo:
            parse_problem(minimal_problem(eta=eta))
        assert excinfo.value.location == "$.objects.eta.source"

    def test_flag_block_into_missing_component(self) -> None:
        F = {
            "kind": "flag",
            "d": 1,
            "components": [{"i": 1, "j": 0, "rank": 1}],
            "strata": [{"t": 0, "blocks": [{"from": [1, 0], "entries": [["x"]]}]}],
        }
        with pytest.raises(SchemaError, match="undeclared component"):
            parse_problem(minimal_problem(F=F))

    def test_invalid_json(self, tmp_path: Path) -> None:
        path = tmp_path / "broken.json"
        path.write_text('{"ring": ', encoding="utf-8")
        with pytest.raises(SchemaError) as excinfo:
            load_problem(path)
        assert excinfo.value.location.startswith("line 1")

    def test_lookups(self) -> None:
        problem = parse_problem(minimal_problem(D=square_dm([["0", "0"], ["0", "0"]])))
        with pytest.raises(SchemaError, match="undefined object"):
            problem.get("E")
        with pytest.raises(SchemaError, match="wrong kind"):
            problem.flag("D")
        with pytest.raises(SchemaError, match="missing field"):
            problem.task_name("morphism")


@pytest.mark.unit
class TestWriting:
    """Encoders, reports and their determinism."""

    def test_problem_file_round_trip(self, be, kdelta) -> None:
        data = problem_file(be.D.ring, {"D": be.D, "F": be.F}, {"command": "quasimin"})
        problem = parse_problem(json.loads(dumps(data)))
        assert problem.module("D") == be.D
        assert problem.flag("F").module == be.F.module
        again = parse_problem(problem_file(kdelta.ring, {"K": kdelta}, {}))
        assert again.flag("K").module == kdelta.module

    def test_flag_order(self, be, kdelta) -> None:
        assert flag_order(be.F) == [0, 1, 2, 3]
        assert flag_order(kdelta) == list(range(8))

    def test_matrix_objects(self, qq_xy) -> None:
        x, _ = qq_xy.gens
        data = minimal_problem(M={"kind": "matrix", "rows": 1, "cols": 2, "entries": [["x", 0]]})
        assert parse_problem(data).get("M", RingMatrix) == RingMatrix.from_rows(qq_xy, [[x, 0]])

    def test_unencodable_object(self, qq_xy) -> None:
        with pytest.raises(TypeError):
            problem_file(qq_xy, {"n": 3}, {})

    def test_report_is_deterministic(self) -> None:
        data = minimal_problem(D=square_dm([["0", "0"], ["0", "0"]]))
        first = build_report("check", parse_problem(data), {"passed": True}, {"seed": None, "length_cap": 16})
        second = build_report("check", parse_problem(json.loads(json.dumps(data))), {"passed": True}, {"length_cap": 16})
        assert dumps(first) == dumps(second)
        assert first["provenance"]["options"] == {"length_cap": 16}
        assert dumps(first).endswith("}\n")

    def test_kinds_are_typed(self) -> None:
        problem = parse_problem(minimal_problem(D=square_dm([["0", "0"], ["0", "0"]])))
        assert isinstance(problem.get("D", DiffModule, FreeFlag), DiffModule)
