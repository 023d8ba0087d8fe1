"""ℤ/dℤ-graded differential modules.

A :class:`DiffModule` is a free module split into components indexed by
``j`` in ℤ/dℤ (or ℤ when ``modulus == 0``) together with one square-zero
differential of degree -1. The differential is stored as a single matrix
over all generators; components occupy contiguous index ranges in
increasing key order.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol

from sympy.polys.rings import PolyElement, PolyRing

from dmflags import config
from dmflags.coeff_ring import field_of, is_unit, poly_degree
from dmflags.errors import CharacteristicError, InvalidArgumentError, InvariantError, ShapeError
from dmflags.groebner import Subquotient, syzygies
from dmflags.matrix import GradedFreeModule, RingMatrix


logger = logging.getLogger(__name__)

Label = tuple[int, int]  # (component key, internal degree)


def normalize_key(key: int, modulus: int) -> int:
    return key % modulus if modulus else key


def labelled_order(labels: Sequence[Label], modulus: int) -> list[int]:
    """Stable permutation sorting generators by component key."""
    return sorted(range(len(labels)), key=lambda i: normalize_key(labels[i][0], modulus))


@dataclass(frozen=True, eq=False)
class DiffModule:
    """Free module with components and a square-zero differential."""

    ring: PolyRing
    modulus: int
    components: Mapping[int, GradedFreeModule]
    differential: RingMatrix
    shift: int = 0

    def __post_init__(self) -> None:
        if self.modulus < 0:
            raise InvalidArgumentError("modulus must be nonnegative")
        for key in self.components:
            if self.modulus and not 0 <= key < self.modulus:
                raise ShapeError(f"component key {key} outside 0..{self.modulus - 1}")
        if self.differential.shape != (self.rank, self.rank):
            raise ShapeError(f"differential shape {self.differential.shape} does not match rank {self.rank}")

    # ------------------------------------------------------------------ #
    # construction
    # ------------------------------------------------------------------ #

    @classmethod
    def from_labelled(
        cls,
        ring: PolyRing,
        modulus: int,
        labels: Sequence[Label],
        matrix: RingMatrix,
        shift: int = 0,
    ) -> DiffModule:
        """Build from per-generator labels, sorting generators by component."""
        order = labelled_order(labels, modulus)
        components: dict[int, list[int]] = {}
        for i in order:
            components.setdefault(normalize_key(labels[i][0], modulus), []).append(labels[i][1])
        return cls(
            ring,
            modulus,
            {key: GradedFreeModule(tuple(degs)) for key, degs in sorted(components.items())},
            matrix.submatrix(order, order),
            shift,
        )

    @classmethod
    def from_blocks(
        cls,
        ring: PolyRing,
        modulus: int,
        components: Mapping[int, GradedFreeModule],
        blocks: Mapping[int, RingMatrix],
        shift: int = 0,
    ) -> DiffModule:
        """Build from the maps ``d_j: D_j -> D_{j-1}`` keyed by source ``j``."""
        components = {normalize_key(k, modulus): m for k, m in sorted(components.items())}
        rank = sum(m.rank for m in components.values())
        shell = cls(ring, modulus, components, RingMatrix.zeros(ring, rank, rank), shift)
        entries: dict[tuple[int, int], PolyElement] = {}
        for source, block in blocks.items():
            target = shell.target_key(source)
            expected = (shell.component(target).rank, shell.component(source).rank)
            if block.shape != expected:
                raise ShapeError(f"block from {source} has shape {block.shape}, expected {expected}")
            row0, col0 = shell.offset(target), shell.offset(source)
            for (i, j), value in block.entries.items():
                entries[(row0 + i, col0 + j)] = value
        return shell.with_differential(RingMatrix.build(ring, rank, rank, entries))

    @classmethod
    def zero(cls, ring: PolyRing, modulus: int) -> DiffModule:
        return cls(ring, modulus, {}, RingMatrix.zeros(ring, 0, 0))

    @classmethod
    def free(cls, ring: PolyRing, modulus: int, key: int = 0, degrees: Sequence[int] = (0,)) -> DiffModule:
        """Free module concentrated in one component with zero differential."""
        n = len(degrees)
        return cls(ring, modulus, {normalize_key(key, modulus): GradedFreeModule(tuple(degrees))}, RingMatrix.zeros(ring, n, n))

    # ------------------------------------------------------------------ #
    # layout
    # ------------------------------------------------------------------ #

    @property
    def keys(self) -> list[int]:
        return sorted(self.components)

    @property
    def rank(self) -> int:
        return sum(module.rank for module in self.components.values())

    def component(self, key: int) -> GradedFreeModule:
        return self.components.get(normalize_key(key, self.modulus), GradedFreeModule())

    def offset(self, key: int) -> int:
        key = normalize_key(key, self.modulus)
        return sum(self.components[k].rank for k in self.keys if k < key)

    def positions(self, key: int) -> range:
        start = self.offset(key)
        return range(start, start + self.component(key).rank)

    @property
    def labels(self) -> list[Label]:
        return [(key, deg) for key in self.keys for deg in self.components[key].degrees]

    @property
    def key_of(self) -> list[int]:
        return [key for key, _ in self.labels]

    @property
    def degrees(self) -> list[int]:
        return [deg for _, deg in self.labels]

    def target_key(self, key: int) -> int:
        return normalize_key(key - 1, self.modulus)

    def boundary(self, key: int) -> RingMatrix:
        """The block ``d_key: D_key -> D_{key-1}``."""
        return self.differential.submatrix(self.positions(self.target_key(key)), self.positions(key))

    def with_differential(self, differential: RingMatrix) -> DiffModule:
        return DiffModule(self.ring, self.modulus, self.components, differential, self.shift)

    def perturbed(self, delta: RingMatrix) -> DiffModule:
        return self.with_differential(self.differential + delta)

    def to_dm(self) -> DiffModule:
        return self

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiffModule):
            return NotImplemented
        return (
            self.ring is other.ring
            and self.modulus == other.modulus
            and self.labels == other.labels
            and self.shift == other.shift
            and self.differential == other.differential
        )

    __hash__ = None  # type: ignore[assignment]

    def verified(self, graded: bool = False) -> DiffModule:
        report = dm_check(self, graded=graded)
        if not report.passed:
            raise InvariantError(f"not a differential module: {report.summary()}")
        return self


def direct_sum(*modules: DiffModule) -> DiffModule:
    if not modules:
        raise ValueError("direct_sum needs at least one module")
    ring, modulus = modules[0].ring, modules[0].modulus
    labels: list[Label] = []
    for module in modules:
        labels.extend(module.labels)
    sizes = [m.rank for m in modules]
    matrix = RingMatrix.block(ring, sizes, sizes, {(k, k): m.differential for k, m in enumerate(modules)})
    return DiffModule.from_labelled(ring, modulus, labels, matrix, modules[0].shift)


# ---------------------------------------------------------------------- #
# checks
# ---------------------------------------------------------------------- #


@dataclass(frozen=True)
class DmCheckReport:
    """Outcome of :func:`dm_check`; offending blocks are (source, target) keys."""

    square_zero: bool
    degree_ok: bool
    homogeneous: bool
    offending: tuple[tuple[int, int, str], ...] = ()

    @property
    def passed(self) -> bool:
        return self.square_zero and self.degree_ok and self.homogeneous

    def summary(self) -> str:
        return "; ".join(f"{reason} in block {src}->{dst}" for src, dst, reason in self.offending) or "ok"


def dm_check(D: DiffModule, graded: bool = False) -> DmCheckReport:
    """Verify square-zero, degree -1 and (when ``graded``) homogeneity."""
    key_of, degrees = D.key_of, D.degrees
    offending: list[tuple[int, int, str]] = []
    degree_ok = True
    homogeneous = True
    for (r, c), value in D.differential.items():
        if key_of[r] != D.target_key(key_of[c]):
            degree_ok = False
            offending.append((key_of[c], key_of[r], "wrong component degree"))
        if graded:
            deg, homog = poly_degree(value)
            if not homog or deg != degrees[c] - degrees[r] + D.shift:
                homogeneous = False
                offending.append((key_of[c], key_of[r], "inhomogeneous entry"))
    square = D.differential @ D.differential
    bad = sorted({(key_of[c], key_of[r]) for (r, c), _ in square.items()})
    offending.extend((src, dst, "square is nonzero") for src, dst in bad)
    return DmCheckReport(not bad, degree_ok, homogeneous, tuple(dict.fromkeys(offending)))


# ---------------------------------------------------------------------- #
# morphisms, homotopies, squares
# ---------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class DmMorphism:
    """Degree-0 map commuting with the differentials."""

    source: DiffModule
    target: DiffModule
    matrix: RingMatrix

    def __post_init__(self) -> None:
        if self.matrix.shape != (self.target.rank, self.source.rank):
            raise ShapeError(f"morphism matrix {self.matrix.shape} does not fit {self.target.rank}x{self.source.rank}")

    @classmethod
    def identity(cls, D: DiffModule) -> DmMorphism:
        return cls(D, D, RingMatrix.identity(D.ring, D.rank))

    @classmethod
    def zero(cls, source: DiffModule, target: DiffModule) -> DmMorphism:
        return cls(source, target, RingMatrix.zeros(source.ring, target.rank, source.rank))

    def __matmul__(self, other: DmMorphism) -> DmMorphism:
        return DmMorphism(other.source, self.target, self.matrix @ other.matrix)

    def __add__(self, other: DmMorphism) -> DmMorphism:
        return DmMorphism(self.source, self.target, self.matrix + other.matrix)

    def __sub__(self, other: DmMorphism) -> DmMorphism:
        return DmMorphism(self.source, self.target, self.matrix - other.matrix)

    def __neg__(self) -> DmMorphism:
        return DmMorphism(self.source, self.target, -self.matrix)

    def problems(self) -> list[str]:
        out = []
        src_keys, dst_keys = self.source.key_of, self.target.key_of
        if any(dst_keys[r] != src_keys[c] for (r, c), _ in self.matrix.items()):
            out.append("entries between different components")
        if self.target.differential @ self.matrix != self.matrix @ self.source.differential:
            out.append("does not commute with the differentials")
        return out

    def verified(self) -> DmMorphism:
        problems = self.problems()
        if problems:
            raise InvariantError(f"not a DM morphism: {', '.join(problems)}")
        return self


def is_homotopy(f: RingMatrix, g: RingMatrix, h: RingMatrix, source: DiffModule, target: DiffModule) -> bool:
    """``f - g == d h + h d``."""
    return f - g == target.differential @ h + h @ source.differential


@dataclass(frozen=True, eq=False)
class HomotopySquare:
    """Square ``φ: C→D``, ``φ′: C′→D′``, ``ψ: C→C′``, ``ν: D→D′`` with
    ``φ′ψ - νφ = d h + h d``."""

    phi: DmMorphism
    phi_prime: DmMorphism
    psi: DmMorphism
    nu: DmMorphism
    h: RingMatrix

    def problems(self) -> list[str]:
        out = []
        if self.psi.source is not self.phi.source and self.psi.source != self.phi.source:
            out.append("ψ does not start at the source of φ")
        if self.nu.source is not self.phi.target and self.nu.source != self.phi.target:
            out.append("ν does not start at the target of φ")
        if self.h.shape != (self.phi_prime.target.rank, self.phi.source.rank):
            out.append("homotopy has the wrong shape")
            return out
        lhs = self.phi_prime.matrix @ self.psi.matrix - self.nu.matrix @ self.phi.matrix
        rhs = self.phi_prime.target.differential @ self.h + self.h @ self.phi.source.differential
        if lhs != rhs:
            out.append("φ′ψ - νφ differs from dh + hd")
        return out

    def verified(self) -> HomotopySquare:
        problems = self.problems()
        if problems:
            raise InvariantError(f"invalid homotopy square: {', '.join(problems)}")
        return self

    @classmethod
    def identity(cls, phi: DmMorphism) -> HomotopySquare:
        zero = RingMatrix.zeros(phi.source.ring, phi.target.rank, phi.source.rank)
        return cls(phi, phi, DmMorphism.identity(phi.source), DmMorphism.identity(phi.target), zero)

    def then(self, other: HomotopySquare) -> HomotopySquare:
        """Paste ``other`` (starting at ``phi_prime``) after this square."""
        h = other.nu.matrix @ self.h + other.h @ self.psi.matrix
        return HomotopySquare(self.phi, other.phi_prime, other.psi @ self.psi, other.nu @ self.nu, h)


def _cone_parts(phi: DmMorphism) -> tuple[DiffModule, list[int]]:
    source, target = phi.source, phi.target
    ring = source.ring
    labels = target.labels + [
        (normalize_key(key + 1, source.modulus), deg - source.shift) for key, deg in source.labels
    ]
    sizes = [target.rank, source.rank]
    matrix = RingMatrix.block(
        ring,
        sizes,
        sizes,
        {(0, 0): target.differential, (0, 1): -phi.matrix, (1, 1): -source.differential},
    )
    order = labelled_order(labels, source.modulus)
    return DiffModule.from_labelled(ring, source.modulus, labels, matrix, target.shift), order


def dm_cone(phi: DmMorphism) -> DiffModule:
    """Cone on ``target ⊕ source[1]`` with differential ``[[d′, -φ], [0, -d]]``."""
    return _cone_parts(phi)[0]


def cone_functor(square: HomotopySquare) -> DmMorphism:
    """The induced map ``Cone(φ) -> Cone(φ′)``, block form ``[[ν, h], [0, ψ]]``."""
    square.verified()
    cone, order = _cone_parts(square.phi)
    cone_prime, order_prime = _cone_parts(square.phi_prime)
    ring = cone.ring
    matrix = RingMatrix.block(
        ring,
        [square.phi_prime.target.rank, square.phi_prime.source.rank],
        [square.phi.target.rank, square.phi.source.rank],
        {(0, 0): square.nu.matrix, (0, 1): square.h, (1, 1): square.psi.matrix},
    )
    return DmMorphism(cone, cone_prime, matrix.submatrix(order_prime, order))


class Equivalence(Protocol):
    """Homotopy-equivalence data with ``ι p - 1 = d h + h d`` on the big side."""

    @property
    def p(self) -> DmMorphism: ...

    @property
    def iota(self) -> DmMorphism: ...

    @property
    def h(self) -> RingMatrix: ...


def transport_square(square: HomotopySquare, left: Equivalence, right: Equivalence) -> HomotopySquare:
    """Move the sources of a square along equivalences ``C ⇄ C̃`` and ``C′ ⇄ C̃′``.

    ``left.p: C -> C̃`` and ``right.p: C′ -> C̃′``; the new square has maps
    ``φ ι``, ``φ′ ι′``, ``p′ ψ ι``, ``ν`` and homotopy ``(h + φ′ s′ ψ) ι``.
    """
    square.verified()
    if left.p.source != square.phi.source or right.p.source != square.phi_prime.source:
        raise InvariantError("connection mismatch: equivalences do not start at the square's sources")
    iota, iota_prime = left.iota, right.iota
    phi = square.phi @ iota
    phi_prime = square.phi_prime @ iota_prime
    psi = right.p @ square.psi @ iota
    h = (square.h + square.phi_prime.matrix @ right.h @ square.psi.matrix) @ iota.matrix
    return HomotopySquare(phi, phi_prime, psi, square.nu, h).verified()


# ---------------------------------------------------------------------- #
# unit cancellation
# ---------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class Reduction:
    """Outcome of Gaussian cancellation of unit entries.

    ``kept`` lists surviving generators (original indices, increasing);
    ``p``, ``iota``, ``h`` form a strong deformation retract onto the small
    differential in the ``ιp - 1 = dh + hd`` convention.
    """

    kept: tuple[int, ...]
    differential: RingMatrix
    p: RingMatrix
    iota: RingMatrix
    h: RingMatrix


def gaussian_reduction(
    D: DiffModule,
    allow: Callable[[int, int], bool] | None = None,
) -> Reduction:
    """Cancel unit entries ``D[a, b]`` (``a != b``) until none remain.

    Pivots are chosen deterministically: lowest internal degree of the
    column, then row, then column. ``allow(a, b)`` can veto pivots.
    """
    ring, n = D.ring, D.rank
    domain = ring.domain
    degrees = D.degrees
    dmat: dict[tuple[int, int], PolyElement] = dict(D.differential.entries)
    p_rows: dict[int, dict[int, PolyElement]] = {i: {i: ring.one} for i in range(n)}
    iota_cols: dict[int, dict[int, PolyElement]] = {i: {i: ring.one} for i in range(n)}
    h: dict[tuple[int, int], PolyElement] = {}
    alive = set(range(n))
    steps = 0
    while True:
        candidates = [
            (degrees[b], a, b)
            for (a, b), value in dmat.items()
            if a != b and is_unit(value) and (allow is None or allow(a, b))
        ]
        if not candidates:
            break
        _, a, b = min(candidates)
        steps += 1
        u_inv = domain.quo(domain.one, dmat[(a, b)].LC)
        column_b = {v: val for (v, c), val in dmat.items() if c == b and v not in (a, b)}
        row_a = {w: val for (r, w), val in dmat.items() if r == a and w not in (a, b)}
        for v, dvb in column_b.items():
            factor = dvb.mul_ground(u_inv)
            for w, daw in row_a.items():
                value = dmat.get((v, w), ring.zero) - factor * daw
                if value:
                    dmat[(v, w)] = value
                else:
                    dmat.pop((v, w), None)
        dmat = {key: val for key, val in dmat.items() if a not in key and b not in key}
        p_a = p_rows[a]
        for v, dvb in column_b.items():
            p_rows[v] = _row_axpy(p_rows[v], -dvb.mul_ground(u_inv), p_a)
        iota_b = iota_cols[b]
        for w, daw in row_a.items():
            iota_cols[w] = _row_axpy(iota_cols[w], -daw.mul_ground(u_inv), iota_b)
        for r, ival in iota_b.items():
            for c, pval in p_a.items():
                value = h.get((r, c), ring.zero) - (ival * pval).mul_ground(u_inv)
                if value:
                    h[(r, c)] = value
                else:
                    h.pop((r, c), None)
        alive -= {a, b}
        del p_rows[a], p_rows[b], iota_cols[a], iota_cols[b]
    kept = tuple(sorted(alive))
    index = {g: k for k, g in enumerate(kept)}
    small = RingMatrix.build(ring, len(kept), len(kept), {(index[r], index[c]): v for (r, c), v in dmat.items()})
    p = RingMatrix.build(ring, len(kept), n, {(index[v], c): val for v, row in p_rows.items() for c, val in row.items()})
    iota = RingMatrix.build(ring, n, len(kept), {(r, index[w]): val for w, col in iota_cols.items() for r, val in col.items()})
    if steps:
        logger.debug("cancelled %d unit pairs, rank %d -> %d", steps, n, len(kept))
    return Reduction(kept, small, p, iota, RingMatrix.build(ring, n, n, h))


def _row_axpy(row: dict[int, PolyElement], factor: PolyElement, other: Mapping[int, PolyElement]) -> dict[int, PolyElement]:
    out = dict(row)
    for k, value in other.items():
        total = out.get(k, factor.ring.zero) + factor * value
        if total:
            out[k] = total
        else:
            out.pop(k, None)
    return out


def reduced_module(D: DiffModule, reduction: Reduction) -> DiffModule:
    labels = D.labels
    return DiffModule(
        D.ring,
        D.modulus,
        _components_from_labels([labels[i] for i in reduction.kept], D.modulus),
        reduction.differential,
        D.shift,
    )


def _components_from_labels(labels: Sequence[Label], modulus: int) -> dict[int, GradedFreeModule]:
    components: dict[int, list[int]] = {}
    for key, deg in labels:
        components.setdefault(normalize_key(key, modulus), []).append(deg)
    return {key: GradedFreeModule(tuple(d)) for key, d in sorted(components.items())}


# ---------------------------------------------------------------------- #
# homology
# ---------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class HomologyDegree:
    """``H_key = Z_key / B_key`` with cycles in the original module's coordinates."""

    key: int
    cycles: RingMatrix
    subquotient: Subquotient
    length: int | float

    def presentation(self) -> RingMatrix:
        return self.subquotient.presentation()


@dataclass(frozen=True, eq=False)
class Homology:
    degrees: Mapping[int, HomologyDegree]

    @property
    def lengths(self) -> dict[int, int | float]:
        return {key: deg.length for key, deg in sorted(self.degrees.items())}

    @property
    def total(self) -> int | float:
        return sum(self.lengths.values())

    @property
    def support(self) -> list[int]:
        return [key for key, length in self.lengths.items() if length]

    def __getitem__(self, key: int) -> HomologyDegree:
        return self.degrees[key]


def homology(D: DiffModule, reduce: bool = True) -> Homology:
    """Per-component homology with lengths; unit cancellation first when ``reduce``."""
    if reduce:
        reduction = gaussian_reduction(D)
        small = reduced_module(D, reduction)
        iota = reduction.iota
    else:
        small, iota = D, RingMatrix.identity(D.ring, D.rank)

    def one_degree(key: int) -> HomologyDegree:
        if small.component(key).rank == 0:
            empty = RingMatrix.zeros(D.ring, 0, 0)
            cycles = RingMatrix.zeros(D.ring, D.rank, 0)
            return HomologyDegree(key, cycles, Subquotient(empty, empty), 0)
        cycles = syzygies(small.boundary(key))
        sub = Subquotient(cycles, small.boundary(key + 1))
        embed = iota.submatrix(range(D.rank), small.positions(key))
        return HomologyDegree(key, embed @ cycles, sub, sub.length())

    keys = D.keys
    if config.THREADS > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=config.THREADS) as pool:
            results = list(pool.map(one_degree, keys))
    else:
        results = [one_degree(key) for key in keys]
    return Homology({res.key: res for res in results})


# ---------------------------------------------------------------------- #
# fold / unfold
# ---------------------------------------------------------------------- #


def fold(C: object, target_modulus: int) -> DiffModule:
    """Sum components along congruence classes mod ``target_modulus``."""
    D = C.to_dm() if not isinstance(C, DiffModule) else C
    e = D.modulus
    if target_modulus < 0:
        raise InvalidArgumentError("modulus must be nonnegative")
    if target_modulus == 0 and e != 0:
        raise ShapeError(f"cannot unfold modulus {e} to a ℤ-grading")
    if target_modulus and e and e % target_modulus:
        raise ShapeError(f"modulus {target_modulus} does not divide {e}")
    labels = [(normalize_key(key, target_modulus), deg) for key, deg in D.labels]
    return DiffModule.from_labelled(D.ring, target_modulus, labels, D.differential, D.shift)


@dataclass(frozen=True, eq=False)
class Unfolded:
    """ℤ/2 × ℤ/dℤ unfolding: two copies with crossed differentials.

    ``module`` is the total fold (modulus d); ``parity[i]`` is the ℤ/2
    label of generator i.
    """

    module: DiffModule
    parity: tuple[int, ...]

    def total_fold(self) -> DiffModule:
        return self.module

    def to_cyclic(self) -> DiffModule:
        """Re-encode the bigrading as ℤ/2dℤ (odd d only, by CRT)."""
        d = self.module.modulus
        if d == 0 or d % 2 == 0:
            raise ShapeError("ℤ/2 × ℤ/dℤ is cyclic only for odd d")
        labels = [
            (next(n for n in range(2 * d) if n % d == key and n % 2 == par), deg)
            for (key, deg), par in zip(self.module.labels, self.parity)
        ]
        return DiffModule.from_labelled(self.module.ring, 2 * d, labels, self.module.differential, self.module.shift)


def unfold_z2(D: DiffModule) -> Unfolded:
    n = D.rank
    labels = D.labels + D.labels
    matrix = RingMatrix.block(D.ring, [n, n], [n, n], {(0, 1): D.differential, (1, 0): D.differential})
    parity = [0] * n + [1] * n
    order = labelled_order(labels, D.modulus)
    module = DiffModule.from_labelled(D.ring, D.modulus, labels, matrix, D.shift)
    return Unfolded(module, tuple(parity[i] for i in order))


# ---------------------------------------------------------------------- #
# monoidal structure
# ---------------------------------------------------------------------- #


def koszul_sign(key: int) -> int:
    return -1 if key % 2 else 1


def _check_monoidal(D: DiffModule, E: DiffModule) -> None:
    if D.ring is not E.ring:
        raise ShapeError("modules over different rings")
    if D.modulus != E.modulus:
        raise ShapeError(f"moduli differ: {D.modulus} and {E.modulus}")
    if D.modulus % 2 == 1 and field_of(D.ring).characteristic != 2:
        raise CharacteristicError(
            f"tensor and hom with odd modulus {D.modulus} need characteristic 2"
        )


def tensor_layout(D: DiffModule, E: DiffModule) -> tuple[DiffModule, list[tuple[int, int]]]:
    """``D ⊗ E`` and, per generator, the pair of factor generators."""
    _check_monoidal(D, E)
    ring, m = D.ring, E.rank
    d_labels, e_labels = D.labels, E.labels
    pairs = [(a, b) for a in range(D.rank) for b in range(m)]
    labels = [(d_labels[a][0] + e_labels[b][0], d_labels[a][1] + e_labels[b][1]) for a, b in pairs]
    entries: dict[tuple[int, int], PolyElement] = {}
    for (r, c), value in D.differential.entries.items():
        for b in range(m):
            entries[(r * m + b, c * m + b)] = value
    for (r, c), value in E.differential.entries.items():
        for a in range(D.rank):
            signed = value if koszul_sign(d_labels[a][0]) > 0 else -value
            key = (a * m + r, a * m + c)
            entries[key] = entries.get(key, ring.zero) + signed
    matrix = RingMatrix.build(ring, len(pairs), len(pairs), entries)
    order = labelled_order(labels, D.modulus)
    module = DiffModule.from_labelled(ring, D.modulus, labels, matrix, D.shift)
    return module, [pairs[i] for i in order]


def dm_tensor(D: DiffModule, E: DiffModule) -> DiffModule:
    """``d(a⊗b) = da⊗b + (-1)^{|a|} a⊗db``."""
    return tensor_layout(D, E)[0]


def dm_hom(D: DiffModule, E: DiffModule) -> DiffModule:
    """``Hom(D, E)`` with ``∂f = d_E f - (-1)^{|f|} f d_D``.

    Generator ``(a, b)`` is the map sending ``e_a`` to ``e_b``.
    """
    _check_monoidal(D, E)
    ring = D.ring
    d_labels, e_labels = D.labels, E.labels
    pairs = [(a, b) for a in range(D.rank) for b in range(E.rank)]
    index = {pair: k for k, pair in enumerate(pairs)}
    labels = [
        (normalize_key(e_labels[b][0] - d_labels[a][0], D.modulus), e_labels[b][1] - d_labels[a][1])
        for a, b in pairs
    ]
    e_cols: dict[int, list[tuple[int, PolyElement]]] = {}
    for (r, c), value in E.differential.entries.items():
        e_cols.setdefault(c, []).append((r, value))
    d_rows: dict[int, list[tuple[int, PolyElement]]] = {}
    for (r, c), value in D.differential.entries.items():
        d_rows.setdefault(r, []).append((c, value))
    entries: dict[tuple[int, int], PolyElement] = {}
    for col, (a, b) in enumerate(pairs):
        sign = koszul_sign(labels[col][0])
        for r, value in e_cols.get(b, ()):
            key = (index[(a, r)], col)
            entries[key] = entries.get(key, ring.zero) + value
        for c, value in d_rows.get(a, ()):
            key = (index[(c, b)], col)
            entries[key] = entries.get(key, ring.zero) - (value if sign > 0 else -value)
    matrix = RingMatrix.build(ring, len(pairs), len(pairs), entries)
    return DiffModule.from_labelled(ring, D.modulus, labels, matrix, E.shift)
