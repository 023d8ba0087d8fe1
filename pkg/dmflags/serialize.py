"""JSON problem files and reports.

A problem file has three blocks::

    {
      "ring": {"field": "QQ", "variables": ["x", "y"], "order": "grevlex"},
      "objects": {"D": {"kind": "dm", ...}, ...},
      "task": {"command": "quasimin", "input": "D"}
    }

Object kinds:

``dm``
    ``{d, components: [{j, rank, degrees}], blocks: [{from_j, entries}], shift}``;
    ``entries`` are the rows of ``d_j: D_j -> D_{j-1}``.
``flag``
    ``{d, components: [{i, j, rank, degrees}], strata: [{t, blocks: [{from: [i, j], entries}]}], shift}``;
    a block of stratum ``t`` maps component ``(i, j)`` to ``(i - t - 1, j + t)``.
``morphism``
    ``{source, target, entries}`` with ``source``/``target`` naming other
    objects; rows and columns follow the internal generator order.
``matrix``
    ``{rows, cols, entries}``.

Polynomials are strings in the syntax of :func:`dmflags.coeff_ring.parse_poly`.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from sympy.polys.rings import PolyRing

from dmflags.coeff_ring import Field, field_of, format_poly, make_ring, order_name, parse_poly
from dmflags.dm_core import DiffModule, DmMorphism, normalize_key
from dmflags.errors import DmflagsError, ParseError, SchemaError
from dmflags.flags import FreeFlag
from dmflags.matrix import GradedFreeModule, RingMatrix


logger = logging.getLogger(__name__)

KINDS = ("dm", "flag", "morphism", "matrix")


# ---------------------------------------------------------------------- #
# reading
# ---------------------------------------------------------------------- #


def _expect(value: Any, kind: type | tuple[type, ...], where: str) -> Any:
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        names = kind.__name__ if isinstance(kind, type) else " or ".join(k.__name__ for k in kind)
        raise SchemaError(f"expected {names}, got {type(value).__name__}", where)
    return value


def _field(data: Mapping, key: str, kind: type | tuple[type, ...], where: str, default: Any = ...) -> Any:
    if key not in data:
        if default is ...:
            raise SchemaError(f"missing field {key!r}", where)
        return default
    return _expect(data[key], kind, f"{where}.{key}")


def read_matrix(ring: PolyRing, rows: Any, nrows: int, ncols: int, where: str) -> RingMatrix:
    """Dense rows of polynomial strings (or integers) into a matrix of the given shape."""
    _expect(rows, list, where)
    if len(rows) != nrows and not (nrows == 0 and not rows):
        raise SchemaError(f"expected {nrows} rows, got {len(rows)}", where)
    entries = {}
    for r, row in enumerate(rows):
        _expect(row, list, f"{where}[{r}]")
        if len(row) != ncols:
            raise SchemaError(f"expected {ncols} columns, got {len(row)}", f"{where}[{r}]")
        for c, text in enumerate(row):
            _expect(text, (str, int), f"{where}[{r}][{c}]")
            try:
                value = parse_poly(ring, str(text))
            except ParseError as exc:
                raise SchemaError(str(exc), f"{where}[{r}][{c}]") from exc
            if value:
                entries[(r, c)] = value
    return RingMatrix.build(ring, nrows, ncols, entries)


def read_ring(data: Any, order: str | None = None, where: str = "$.ring") -> PolyRing:
    _expect(data, dict, where)
    try:
        field_ = Field.parse(_field(data, "field", str, where))
    except (ParseError, ValueError) as exc:
        raise SchemaError(str(exc), f"{where}.field") from exc
    variables = _field(data, "variables", list, where)
    if not variables or not all(isinstance(v, str) and v.isidentifier() for v in variables):
        raise SchemaError("variables must be a nonempty list of identifiers", f"{where}.variables")
    chosen = order or _field(data, "order", str, where, "grevlex")
    try:
        return make_ring(field_, variables, chosen)
    except ValueError as exc:
        raise SchemaError(str(exc), f"{where}.order") from exc


def _components(data: Mapping, where: str, flagged: bool) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    out = []
    seen = set()
    for n, comp in enumerate(_field(data, "components", list, where)):
        at = f"{where}.components[{n}]"
        _expect(comp, dict, at)
        index = (_field(comp, "i", int, at), _field(comp, "j", int, at)) if flagged else (_field(comp, "j", int, at),)
        if index in seen:
            raise SchemaError(f"component {index} listed twice", at)
        seen.add(index)
        rank = _field(comp, "rank", int, at)
        degrees = tuple(_field(comp, "degrees", list, at, [0] * rank))
        if len(degrees) != rank or not all(isinstance(g, int) for g in degrees):
            raise SchemaError(f"degrees must be {rank} integers", f"{at}.degrees")
        out.append((index, degrees))
    return out


def read_dm(ring: PolyRing, data: Mapping, where: str) -> DiffModule:
    d = _field(data, "d", int, where)
    if d < 0:
        raise SchemaError("modulus must be nonnegative", f"{where}.d")
    components: dict[int, GradedFreeModule] = {}
    for (j,), degrees in _components(data, where, flagged=False):
        key = normalize_key(j, d)
        if key in components:
            raise SchemaError(f"component {j} collides with {key} mod {d}", f"{where}.components")
        components[key] = GradedFreeModule(degrees)
    blocks: dict[int, RingMatrix] = {}
    for n, block in enumerate(_field(data, "blocks", list, where, [])):
        at = f"{where}.blocks[{n}]"
        _expect(block, dict, at)
        source = normalize_key(_field(block, "from_j", int, at), d)
        target = normalize_key(source - 1, d)
        if source not in components:
            raise SchemaError(f"block from undeclared component {source}", f"{at}.from_j")
        rows = components[target].rank if target in components else 0
        blocks[source] = read_matrix(ring, block.get("entries", []), rows, components[source].rank, f"{at}.entries")
    shift = _field(data, "shift", int, where, 0)
    return DiffModule.from_blocks(ring, d, components, blocks, shift)


def read_flag(ring: PolyRing, data: Mapping, where: str) -> FreeFlag:
    d = _field(data, "d", int, where)
    if d < 1:
        raise SchemaError("flags need a modulus of at least 1", f"{where}.d")
    generators: list[tuple[int, int, int]] = []
    start: dict[tuple[int, int], tuple[int, int]] = {}
    for (i, j), degrees in _components(data, where, flagged=True):
        if i < 0:
            raise SchemaError("flag degrees must be nonnegative", f"{where}.components")
        j = normalize_key(j, d)
        start[(i, j)] = (len(generators), len(degrees))
        generators.extend((i, j, deg) for deg in degrees)
    n = len(generators)
    entries = {}
    for s, stratum in enumerate(_field(data, "strata", list, where, [])):
        at = f"{where}.strata[{s}]"
        _expect(stratum, dict, at)
        t = _field(stratum, "t", int, at)
        if t < 0:
            raise SchemaError("stratum index must be nonnegative", f"{at}.t")
        for b, block in enumerate(_field(stratum, "blocks", list, at)):
            bat = f"{at}.blocks[{b}]"
            _expect(block, dict, bat)
            origin = _field(block, "from", list, bat)
            if len(origin) != 2 or not all(isinstance(v, int) for v in origin):
                raise SchemaError("from must be [i, j]", f"{bat}.from")
            src = (origin[0], normalize_key(origin[1], d))
            dst = (src[0] - t - 1, normalize_key(src[1] + t, d))
            if src not in start:
                raise SchemaError(f"block from undeclared component {src}", f"{bat}.from")
            if dst not in start:
                raise SchemaError(f"block into undeclared component {dst}", f"{bat}.from")
            (c0, cols), (r0, rows) = start[src], start[dst]
            matrix = read_matrix(ring, _field(block, "entries", list, bat), rows, cols, f"{bat}.entries")
            for (r, c), value in matrix.items():
                entries[(r0 + r, c0 + c)] = value
    shift = _field(data, "shift", int, where, 0)
    return FreeFlag.from_generators(ring, d, generators, RingMatrix.build(ring, n, n, entries), shift)


@dataclass(frozen=True, eq=False)
class Problem:
    ring: PolyRing
    objects: Mapping[str, Any]
    task: Mapping[str, Any]
    digest: str
    source: str = "<input>"

    def get(self, name: str, *kinds: type, where: str = "$.task") -> Any:
        if name not in self.objects:
            raise SchemaError(f"undefined object {name!r}", where)
        value = self.objects[name]
        if kinds and not isinstance(value, kinds):
            raise SchemaError(f"object {name!r} has the wrong kind for this command", where)
        return value

    def module(self, name: str, where: str = "$.task") -> DiffModule:
        value = self.get(name, DiffModule, FreeFlag, where=where)
        return value.module if isinstance(value, FreeFlag) else value

    def flag(self, name: str, where: str = "$.task") -> FreeFlag:
        return self.get(name, FreeFlag, where=where)

    def task_name(self, key: str, default: str | None = None) -> str:
        value = self.task.get(key, default)
        if value is None:
            raise SchemaError(f"missing field {key!r}", "$.task")
        return _expect(value, str, f"$.task.{key}")


def digest_of(data: Any) -> str:
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_problem(data: Any, order: str | None = None, source: str = "<input>") -> Problem:
    """Validate a decoded problem file and build its objects.

    Objects may refer to earlier ones (morphisms name their source and
    target), so they are read in file order.
    """
    _expect(data, dict, "$")
    ring = read_ring(data.get("ring"), order)
    objects: dict[str, Any] = {}
    for name, body in _field(data, "objects", dict, "$").items():
        where = f"$.objects.{name}"
        _expect(body, dict, where)
        kind = _field(body, "kind", str, where)
        if kind not in KINDS:
            raise SchemaError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}", f"{where}.kind")
        try:
            objects[name] = _read_object(ring, kind, body, objects, where)
        except SchemaError:
            raise
        except DmflagsError as exc:
            raise SchemaError(str(exc), where) from exc
    task = _field(data, "task", dict, "$", {})
    problem = Problem(ring, objects, task, digest_of(data), source)
    logger.debug("parsed %s: %d objects over %s", source, len(objects), field_of(ring))
    return problem


def _read_object(ring: PolyRing, kind: str, body: Mapping, objects: Mapping[str, Any], where: str) -> Any:
    if kind == "dm":
        return read_dm(ring, body, where)
    if kind == "flag":
        return read_flag(ring, body, where)
    if kind == "matrix":
        rows, cols = _field(body, "rows", int, where), _field(body, "cols", int, where)
        return read_matrix(ring, _field(body, "entries", list, where), rows, cols, f"{where}.entries")
    ends = []
    for end in ("source", "target"):
        name = _field(body, end, str, where)
        value = objects.get(name)
        if not isinstance(value, (DiffModule, FreeFlag)):
            raise SchemaError(f"{end} {name!r} is not an earlier dm or flag object", f"{where}.{end}")
        ends.append(value.module if isinstance(value, FreeFlag) else value)
    source, target = ends
    matrix = read_matrix(ring, _field(body, "entries", list, where), target.rank, source.rank, f"{where}.entries")
    return DmMorphism(source, target, matrix)


def load_problem(path: str | Path, order: str | None = None) -> Problem:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from exc
    return parse_problem(data, order, path.name)


# ---------------------------------------------------------------------- #
# writing
# ---------------------------------------------------------------------- #


def matrix_rows(M: RingMatrix) -> list[list[str]]:
    return [[format_poly(M[r, c]) for c in range(M.ncols)] for r in range(M.nrows)]


def ring_to_json(ring: PolyRing) -> dict:
    return {
        "field": str(field_of(ring)),
        "variables": [str(s) for s in ring.symbols],
        "order": order_name(ring),
    }


def dm_to_json(D: DiffModule) -> dict:
    blocks = []
    for key in D.keys:
        block = D.boundary(key)
        if not block.is_zero():
            blocks.append({"from_j": key, "entries": matrix_rows(block)})
    return {
        "kind": "dm",
        "d": D.modulus,
        "components": [
            {"j": key, "rank": D.component(key).rank, "degrees": list(D.component(key).degrees)}
            for key in D.keys
        ],
        "blocks": blocks,
        "shift": D.shift,
    }


def flag_to_json(F: FreeFlag) -> dict:
    components = F.components
    degrees = F.module.degrees
    strata = []
    for t, matrix in F.strata().items():
        blocks = []
        for (i, j), cols in components.items():
            dst = (i - t - 1, normalize_key(j + t, F.modulus))
            if dst not in components:
                continue
            block = matrix.submatrix(components[dst], cols)
            if not block.is_zero():
                blocks.append({"from": [i, j], "entries": matrix_rows(block)})
        if blocks:
            strata.append({"t": t, "blocks": blocks})
    return {
        "kind": "flag",
        "d": F.modulus,
        "components": [
            {"i": i, "j": j, "rank": len(gens), "degrees": [degrees[g] for g in gens]}
            for (i, j), gens in components.items()
        ],
        "strata": strata,
        "shift": F.module.shift,
    }


def flag_order(F: FreeFlag) -> list[int]:
    """Generator indices of ``F`` in the order :func:`read_flag` gives the output of :func:`flag_to_json`."""
    listed = [g for gens in F.components.values() for g in gens]
    key_of = F.module.key_of
    return sorted(listed, key=lambda g: key_of[g])


def build_report(command: str, problem: Problem, result: Mapping[str, Any], options: Mapping[str, Any]) -> dict:
    """The report envelope; identical input gives an identical report."""
    return {
        "command": command,
        "ring": ring_to_json(problem.ring),
        "result": dict(result),
        "provenance": {
            "input": problem.source,
            "input_sha256": problem.digest,
            "options": {k: v for k, v in sorted(options.items()) if v is not None},
        },
    }


def dumps(report: Mapping[str, Any]) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def problem_file(ring: PolyRing, objects: Mapping[str, Any], task: Mapping[str, Any]) -> dict:
    """Inverse of :func:`parse_problem` for modules, flags and matrices."""
    encoded = {}
    for name, value in objects.items():
        if isinstance(value, FreeFlag):
            encoded[name] = flag_to_json(value)
        elif isinstance(value, DiffModule):
            encoded[name] = dm_to_json(value)
        elif isinstance(value, RingMatrix):
            encoded[name] = {"kind": "matrix", "rows": value.nrows, "cols": value.ncols, "entries": matrix_rows(value)}
        else:
            raise TypeError(f"cannot encode {type(value).__name__}")
    return {"ring": ring_to_json(ring), "objects": encoded, "task": dict(task)}
