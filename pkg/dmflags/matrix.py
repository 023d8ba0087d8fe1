"""Sparse matrices over polynomial rings and graded free modules.

A :class:`RingMatrix` is a map of free modules ``R^ncols -> R^nrows`` acting
on column vectors. Only nonzero entries are stored. Degree labels are not
part of the matrix; they belong to the :class:`GradedFreeModule` at either
end.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field

from sympy.polys.rings import PolyElement, PolyRing

from dmflags.coeff_ring import is_unit, poly_degree
from dmflags.errors import NotInvertibleError, RingMismatchError, ShapeError


Vector = dict[int, PolyElement]


@dataclass(frozen=True)
class GradedFreeModule:
    """Free module with one internal degree per generator."""

    degrees: tuple[int, ...] = ()

    @property
    def rank(self) -> int:
        return len(self.degrees)

    def shifted(self, amount: int) -> GradedFreeModule:
        return GradedFreeModule(tuple(deg + amount for deg in self.degrees))

    def __add__(self, other: GradedFreeModule) -> GradedFreeModule:
        return GradedFreeModule(self.degrees + other.degrees)


@dataclass(frozen=True, eq=False)
class RingMatrix:
    """An ``nrows x ncols`` matrix with polynomial entries."""

    ring: PolyRing
    nrows: int
    ncols: int
    entries: Mapping[tuple[int, int], PolyElement] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.nrows < 0 or self.ncols < 0:
            raise ShapeError("matrix dimensions must be nonnegative")
        for (i, j), value in self.entries.items():
            if not (0 <= i < self.nrows and 0 <= j < self.ncols):
                raise ShapeError(f"entry ({i}, {j}) outside {self.shape}")
            if value.ring is not self.ring:
                raise RingMismatchError(f"entry ({i}, {j}) belongs to another ring")

    # ------------------------------------------------------------------ #
    # construction
    # ------------------------------------------------------------------ #

    @classmethod
    def build(
        cls,
        ring: PolyRing,
        nrows: int,
        ncols: int,
        entries: Mapping[tuple[int, int], PolyElement] | Iterable[tuple[tuple[int, int], PolyElement]],
    ) -> RingMatrix:
        """Build from possibly-zero entries, dropping zeros."""
        items = entries.items() if isinstance(entries, Mapping) else entries
        return cls(ring, nrows, ncols, {key: value for key, value in items if value})

    @classmethod
    def zeros(cls, ring: PolyRing, nrows: int, ncols: int) -> RingMatrix:
        return cls(ring, nrows, ncols, {})

    @classmethod
    def identity(cls, ring: PolyRing, n: int) -> RingMatrix:
        return cls(ring, n, n, {(i, i): ring.one for i in range(n)})

    @classmethod
    def from_rows(cls, ring: PolyRing, rows: Sequence[Sequence[PolyElement | int]], ncols: int | None = None) -> RingMatrix:
        width = ncols if ncols is not None else (len(rows[0]) if rows else 0)
        entries = {}
        for i, row in enumerate(rows):
            if len(row) != width:
                raise ShapeError(f"row {i} has {len(row)} entries, expected {width}")
            for j, value in enumerate(row):
                value = ring(value) if not isinstance(value, PolyElement) else value
                if value:
                    entries[(i, j)] = value
        return cls(ring, len(rows), width, entries)

    @classmethod
    def from_columns(cls, ring: PolyRing, nrows: int, columns: Sequence[Mapping[int, PolyElement]]) -> RingMatrix:
        entries = {
            (i, j): value
            for j, column in enumerate(columns)
            for i, value in column.items()
            if value
        }
        return cls(ring, nrows, len(columns), entries)

    @classmethod
    def block(
        cls,
        ring: PolyRing,
        row_sizes: Sequence[int],
        col_sizes: Sequence[int],
        blocks: Mapping[tuple[int, int], RingMatrix],
    ) -> RingMatrix:
        """Assemble a block matrix; missing blocks are zero."""
        row_offsets = offsets(row_sizes)
        col_offsets = offsets(col_sizes)
        entries: dict[tuple[int, int], PolyElement] = {}
        for (bi, bj), sub in blocks.items():
            if sub.shape != (row_sizes[bi], col_sizes[bj]):
                raise ShapeError(
                    f"block ({bi}, {bj}) has shape {sub.shape}, expected {(row_sizes[bi], col_sizes[bj])}"
                )
            for (i, j), value in sub.entries.items():
                entries[(row_offsets[bi] + i, col_offsets[bj] + j)] = value
        return cls(ring, sum(row_sizes), sum(col_sizes), entries)

    @classmethod
    def hstack(cls, ring: PolyRing, nrows: int, parts: Sequence[RingMatrix]) -> RingMatrix:
        return cls.block(ring, [nrows], [p.ncols for p in parts], {(0, k): p for k, p in enumerate(parts)})

    @classmethod
    def vstack(cls, ring: PolyRing, ncols: int, parts: Sequence[RingMatrix]) -> RingMatrix:
        return cls.block(ring, [p.nrows for p in parts], [ncols], {(k, 0): p for k, p in enumerate(parts)})

    @classmethod
    def embedding(cls, ring: PolyRing, n: int, positions: Sequence[int]) -> RingMatrix:
        """``n x len(positions)`` matrix sending basis vector k to ``e_{positions[k]}``."""
        return cls(ring, n, len(positions), {(p, k): ring.one for k, p in enumerate(positions)})

    @classmethod
    def projection(cls, ring: PolyRing, n: int, positions: Sequence[int]) -> RingMatrix:
        return cls.embedding(ring, n, positions).transpose()

    # ------------------------------------------------------------------ #
    # access
    # ------------------------------------------------------------------ #

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    def __getitem__(self, key: tuple[int, int]) -> PolyElement:
        return self.entries.get(key, self.ring.zero)

    def is_zero(self) -> bool:
        return not self.entries

    def column(self, j: int) -> Vector:
        return {i: value for (i, c), value in self.entries.items() if c == j}

    def columns(self) -> list[Vector]:
        cols: list[Vector] = [{} for _ in range(self.ncols)]
        for (i, j), value in self.entries.items():
            cols[j][i] = value
        return cols

    def rows(self) -> list[list[PolyElement]]:
        return [[self[i, j] for j in range(self.ncols)] for i in range(self.nrows)]

    def items(self) -> Iterator[tuple[tuple[int, int], PolyElement]]:
        return iter(sorted(self.entries.items()))

    def unit_positions(self) -> list[tuple[int, int]]:
        """Positions of nonzero constant entries, row-major."""
        return sorted(key for key, value in self.entries.items() if is_unit(value))

    def max_degree(self) -> float | int:
        return max((poly_degree(v)[0] for v in self.entries.values()), default=0)

    # ------------------------------------------------------------------ #
    # arithmetic
    # ------------------------------------------------------------------ #

    def _check(self, other: RingMatrix) -> None:
        if other.ring is not self.ring:
            raise RingMismatchError("matrices belong to different rings")

    def __add__(self, other: RingMatrix) -> RingMatrix:
        self._check(other)
        if self.shape != other.shape:
            raise ShapeError(f"cannot add {self.shape} and {other.shape}")
        entries = dict(self.entries)
        for key, value in other.entries.items():
            total = entries.get(key, self.ring.zero) + value
            if total:
                entries[key] = total
            else:
                entries.pop(key, None)
        return RingMatrix(self.ring, self.nrows, self.ncols, entries)

    def __neg__(self) -> RingMatrix:
        return RingMatrix(self.ring, self.nrows, self.ncols, {k: -v for k, v in self.entries.items()})

    def __sub__(self, other: RingMatrix) -> RingMatrix:
        return self + (-other)

    def __matmul__(self, other: RingMatrix) -> RingMatrix:
        self._check(other)
        if self.ncols != other.nrows:
            raise ShapeError(f"cannot multiply {self.shape} by {other.shape}")
        by_col: dict[int, list[tuple[int, PolyElement]]] = defaultdict(list)
        for (i, k), value in self.entries.items():
            by_col[k].append((i, value))
        acc: dict[tuple[int, int], PolyElement] = {}
        for (k, j), right in other.entries.items():
            for i, left in by_col.get(k, ()):
                key = (i, j)
                acc[key] = acc.get(key, self.ring.zero) + left * right
        return RingMatrix.build(self.ring, self.nrows, other.ncols, acc)

    def scale(self, factor: PolyElement | int) -> RingMatrix:
        factor = self.ring(factor)
        return RingMatrix.build(self.ring, self.nrows, self.ncols, {k: v * factor for k, v in self.entries.items()})

    def map_entries(self, func: Callable[[PolyElement], PolyElement]) -> RingMatrix:
        return RingMatrix.build(self.ring, self.nrows, self.ncols, {k: func(v) for k, v in self.entries.items()})

    def apply(self, vector: Mapping[int, PolyElement]) -> Vector:
        """Matrix times a sparse column vector."""
        out: Vector = {}
        for (i, k), value in self.entries.items():
            coeff = vector.get(k)
            if coeff:
                out[i] = out.get(i, self.ring.zero) + value * coeff
        return {i: v for i, v in out.items() if v}

    def power(self, exponent: int) -> RingMatrix:
        if self.nrows != self.ncols:
            raise ShapeError("only square matrices have powers")
        result = RingMatrix.identity(self.ring, self.nrows)
        for _ in range(exponent):
            result = result @ self
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RingMatrix):
            return NotImplemented
        return (
            self.ring is other.ring
            and self.shape == other.shape
            and dict(self.entries) == dict(other.entries)
        )

    __hash__ = None  # type: ignore[assignment]

    # ------------------------------------------------------------------ #
    # reshaping
    # ------------------------------------------------------------------ #

    def transpose(self) -> RingMatrix:
        return RingMatrix(self.ring, self.ncols, self.nrows, {(j, i): v for (i, j), v in self.entries.items()})

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> RingMatrix:
        row_index = {r: k for k, r in enumerate(rows)}
        col_index = {c: k for k, c in enumerate(cols)}
        return RingMatrix(
            self.ring,
            len(rows),
            len(cols),
            {
                (row_index[i], col_index[j]): v
                for (i, j), v in self.entries.items()
                if i in row_index and j in col_index
            },
        )

    # ------------------------------------------------------------------ #
    # inversion
    # ------------------------------------------------------------------ #

    def inverse(self) -> RingMatrix:
        """Two-sided inverse by Gauss-Jordan elimination on constant pivots.

        Succeeds exactly when every elimination step finds a unit pivot,
        which covers the degree-0 isomorphisms of graded free modules.
        """
        if self.nrows != self.ncols:
            raise NotInvertibleError(f"non-square matrix {self.shape}")
        n = self.nrows
        ring = self.ring
        domain = ring.domain
        rows = [dict() for _ in range(n)]
        for (i, j), value in self.entries.items():
            rows[i][j] = value
        inv = [{i: ring.one} for i in range(n)]
        used: set[int] = set()
        pivot_row_of: dict[int, int] = {}
        for col in range(n):
            pivot = next(
                (r for r in range(n) if r not in used and is_unit(rows[r].get(col, ring.zero))),
                None,
            )
            if pivot is None:
                raise NotInvertibleError(f"no unit pivot in column {col}")
            used.add(pivot)
            pivot_row_of[col] = pivot
            unit_inv = domain.quo(domain.one, rows[pivot][col].LC)
            rows[pivot] = _scale_row(rows[pivot], unit_inv)
            inv[pivot] = _scale_row(inv[pivot], unit_inv)
            for r in range(n):
                factor = rows[r].get(col)
                if r == pivot or not factor:
                    continue
                rows[r] = _axpy(rows[r], -factor, rows[pivot])
                inv[r] = _axpy(inv[r], -factor, inv[pivot])
        entries = {}
        for col, r in pivot_row_of.items():
            for j, value in inv[r].items():
                entries[(col, j)] = value
        return RingMatrix.build(ring, n, n, entries)


def offsets(sizes: Sequence[int]) -> list[int]:
    out, total = [], 0
    for size in sizes:
        out.append(total)
        total += size
    return out


def _scale_row(row: dict[int, PolyElement], unit: object) -> dict[int, PolyElement]:
    return {j: v.mul_ground(unit) for j, v in row.items()}


def _axpy(row: dict[int, PolyElement], factor: PolyElement, other: dict[int, PolyElement]) -> dict[int, PolyElement]:
    out = dict(row)
    for j, value in other.items():
        total = out.get(j, factor.ring.zero) + factor * value
        if total:
            out[j] = total
        else:
            out.pop(j, None)
    return out


def column_degrees(matrix: RingMatrix, row_degrees: Sequence[int], shift: int = 0) -> tuple[int, ...]:
    """Generator degrees making ``matrix`` homogeneous of degree ``shift``.

    Column c gets ``deg(entry) + row_degrees[r] - shift`` read off its first
    nonzero entry; zero columns get degree 0.
    """
    degrees = []
    for column in matrix.columns():
        if not column:
            degrees.append(0)
            continue
        r = min(column)
        degrees.append(int(poly_degree(column[r])[0]) + row_degrees[r] - shift)
    return tuple(degrees)
