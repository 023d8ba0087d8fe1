"""Chain complexes of graded free modules and their resolutions.

Homological indexing throughout: ``d_i: C_i -> C_{i-1}``. A complex converts
to a ℤ-graded :class:`~dmflags.dm_core.DiffModule` (``to_dm``) and back
(``ChainComplex.from_dm``), so cones, tensor products, Hom complexes and
minimization reuse the differential-module engine.
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

from sympy.polys.rings import PolyRing

from dmflags import config
from dmflags.dm_core import (
    DiffModule,
    DmMorphism,
    dm_check,
    dm_cone,
    dm_hom,
    dm_tensor,
)
from dmflags.errors import InvalidArgumentError, InvariantError, LengthCapError, NotExactError, ShapeError
from dmflags.groebner import lift_matrix, module_gb, syzygies
from dmflags.matrix import GradedFreeModule, RingMatrix, column_degrees
from dmflags.perturb import SdrData, cancel_units


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ChainComplex:
    ring: PolyRing
    modules: Mapping[int, GradedFreeModule]
    differentials: Mapping[int, RingMatrix]

    def __post_init__(self) -> None:
        for i, d in self.differentials.items():
            expected = (self.rank(i - 1), self.rank(i))
            if d.shape != expected:
                raise ShapeError(f"d_{i} has shape {d.shape}, expected {expected}")

    @classmethod
    def from_dm(cls, D: DiffModule) -> ChainComplex:
        if D.modulus != 0:
            raise ShapeError(f"a chain complex needs a ℤ-graded module, got modulus {D.modulus}")
        modules = {key: D.component(key) for key in D.keys}
        differentials = {
            key: D.boundary(key) for key in D.keys if D.component(key - 1).rank
        }
        return cls(D.ring, modules, differentials)

    @classmethod
    def zero(cls, ring: PolyRing) -> ChainComplex:
        return cls(ring, {}, {})

    @property
    def support(self) -> tuple[int, int]:
        """``(lo, hi)`` of the nonzero modules; ``(0, -1)`` when empty."""
        nonzero = [i for i, m in self.modules.items() if m.rank]
        return (min(nonzero), max(nonzero)) if nonzero else (0, -1)

    def module(self, i: int) -> GradedFreeModule:
        return self.modules.get(i, GradedFreeModule())

    def rank(self, i: int) -> int:
        return self.module(i).rank

    def d(self, i: int) -> RingMatrix:
        if i in self.differentials:
            return self.differentials[i]
        return RingMatrix.zeros(self.ring, self.rank(i - 1), self.rank(i))

    @property
    def ranks(self) -> tuple[int, ...]:
        lo, hi = self.support
        return tuple(self.rank(i) for i in range(lo, hi + 1))

    def shifted(self, amount: int) -> ChainComplex:
        """``C[amount]_j = C_{amount + j}`` with differential ``(-1)^amount d``."""
        sign = -1 if amount % 2 else 1
        modules = {i - amount: m for i, m in self.modules.items()}
        differentials = {i - amount: d if sign > 0 else -d for i, d in self.differentials.items()}
        return ChainComplex(self.ring, modules, differentials)

    def to_dm(self) -> DiffModule:
        components = {i: m for i, m in self.modules.items() if m.rank}
        blocks = {i: d for i, d in self.differentials.items() if i in components and self.rank(i - 1)}
        return DiffModule.from_blocks(self.ring, 0, components, blocks)

    def problems(self, graded: bool = False) -> list[str]:
        report = dm_check(self.to_dm(), graded=graded)
        return [] if report.passed else [report.summary()]

    def verified(self, graded: bool = False) -> ChainComplex:
        problems = self.problems(graded)
        if problems:
            raise InvariantError(f"not a chain complex: {problems[0]}")
        return self


@dataclass(frozen=True, eq=False)
class Resolution(ChainComplex):
    """A complex ``F`` with an augmentation onto ``coker(presentation)``.

    ``augmentation`` maps ``F_0`` into the free module ``R^m`` whose
    quotient by the columns of ``presentation`` is the resolved module.
    """

    presentation: RingMatrix = None  # type: ignore[assignment]
    augmentation: RingMatrix = None  # type: ignore[assignment]

    @property
    def complex(self) -> ChainComplex:
        return ChainComplex(self.ring, self.modules, self.differentials)

    def with_complex(self, complex_: ChainComplex, augmentation: RingMatrix) -> Resolution:
        return Resolution(complex_.ring, complex_.modules, complex_.differentials, self.presentation, augmentation)

    def augmentation_problems(self) -> list[str]:
        out = []
        composite = self.augmentation @ self.d(1)
        if not composite.is_zero():
            gb = module_gb(self.presentation, track=False)
            if not all(gb.contains(column) for column in composite.columns() if column):
                out.append("augmentation does not vanish on the image of d_1")
        cover = RingMatrix.hstack(self.ring, self.presentation.nrows, [self.augmentation, self.presentation])
        gb = module_gb(cover, track=False)
        identity = RingMatrix.identity(self.ring, self.presentation.nrows)
        if not all(gb.contains(column) for column in identity.columns()):
            out.append("augmentation is not surjective")
        return out


@dataclass(frozen=True, eq=False)
class ChainMap:
    """Components ``f_i: C_i -> D_{i + degree_shift}`` with ``d f = (-1)^shift f d``."""

    source: ChainComplex
    target: ChainComplex
    components: Mapping[int, RingMatrix]
    degree_shift: int = 0

    def component(self, i: int) -> RingMatrix:
        if i in self.components:
            return self.components[i]
        return RingMatrix.zeros(self.source.ring, self.target.rank(i + self.degree_shift), self.source.rank(i))

    @classmethod
    def identity(cls, C: ChainComplex) -> ChainMap:
        return cls(C, C, {i: RingMatrix.identity(C.ring, m.rank) for i, m in C.modules.items()})

    def __matmul__(self, other: ChainMap) -> ChainMap:
        shift = self.degree_shift + other.degree_shift
        keys = set(other.components)
        return ChainMap(
            other.source,
            self.target,
            {i: self.component(i + other.degree_shift) @ other.component(i) for i in keys},
            shift,
        )

    def problems(self) -> list[str]:
        sign = -1 if self.degree_shift % 2 else 1
        lo, hi = self.source.support
        out = []
        for i in range(lo, hi + 1):
            left = self.target.d(i + self.degree_shift) @ self.component(i)
            right = self.component(i - 1) @ self.source.d(i)
            if left != (right if sign > 0 else -right):
                out.append(f"square at degree {i} does not commute")
        return out

    def verified(self) -> ChainMap:
        problems = self.problems()
        if problems:
            raise InvariantError(f"not a chain map: {problems[0]}")
        return self

    def to_dm_morphism(self) -> DmMorphism:
        if self.degree_shift:
            raise ShapeError("only degree-0 chain maps are DM morphisms")
        source, target = self.source.to_dm(), self.target.to_dm()
        entries = {}
        for i, block in self.components.items():
            if not self.source.rank(i) or not self.target.rank(i):
                continue
            rows, cols = target.offset(i), source.offset(i)
            for (r, c), value in block.entries.items():
                entries[(rows + r, cols + c)] = value
        return DmMorphism(source, target, RingMatrix.build(source.ring, target.rank, source.rank, entries))


# ---------------------------------------------------------------------- #
# resolutions
# ---------------------------------------------------------------------- #


def _minimal_columns(matrix: RingMatrix, degrees: Sequence[int]) -> list[int]:
    """Indices of a generating subset of the columns; minimal for graded input."""
    keep = [j for j, column in enumerate(matrix.columns()) if column]
    for j in sorted(keep, key=lambda j: (-degrees[j], -j)):
        others = [matrix.column(k) for k in keep if k != j]
        if others and module_gb(others, matrix.nrows, ring=matrix.ring, track=False).contains(matrix.column(j)):
            keep.remove(j)
    return sorted(keep)


def free_resolution(
    presentation: RingMatrix,
    minimize: bool = True,
    length_cap: int | None = None,
    row_degrees: Sequence[int] | None = None,
) -> Resolution:
    """Resolve ``coker(presentation)`` by iterated syzygies.

    Each syzygy module is pruned to a generating set that is minimal for
    homogeneous input, which makes the process stop by the Hilbert syzygy
    theorem; ``length_cap`` guards the rest.
    """
    cap = config.LENGTH_CAP if length_cap is None else length_cap
    if cap < 0:
        raise InvalidArgumentError("length_cap must be nonnegative")
    ring, m = presentation.ring, presentation.nrows
    degrees = tuple(row_degrees) if row_degrees is not None else (0,) * m
    if len(degrees) != m:
        raise ShapeError(f"{len(degrees)} row degrees for {m} rows")
    modules = {0: GradedFreeModule(degrees)}
    differentials: dict[int, RingMatrix] = {}
    current = presentation
    i = 1
    while current.ncols:
        if i > cap:
            raise LengthCapError(f"resolution exceeds length cap {cap}")
        col_degrees = column_degrees(current, modules[i - 1].degrees)
        if i > 1:
            kept = _minimal_columns(current, col_degrees)
            current = current.submatrix(range(current.nrows), kept)
            col_degrees = tuple(col_degrees[j] for j in kept)
        if not current.ncols:
            break
        modules[i] = GradedFreeModule(col_degrees)
        differentials[i] = current
        logger.debug("resolution step %d: rank %d", i, current.ncols)
        current = syzygies(current)
        i += 1
    res = Resolution(ring, modules, differentials, presentation, RingMatrix.identity(ring, m))
    res.verified()
    if minimize:
        res = minimize_resolution(res)
    logger.info("resolution ranks %s", res.ranks)
    return res


def minimize_complex(C: ChainComplex) -> tuple[ChainComplex, SdrData]:
    """Cancel constant entries; returns the small complex and the retract onto it."""
    sdr, _ = cancel_units(C.to_dm())
    return ChainComplex.from_dm(sdr.small), sdr


def minimize_resolution(res: Resolution) -> Resolution:
    small, sdr = minimize_complex(res.complex)
    iota0 = sdr.iota.matrix.submatrix(sdr.big.positions(0), sdr.small.positions(0))
    return res.with_complex(small, res.augmentation @ iota0)


def betti_numbers(C: ChainComplex) -> dict[int, dict[int, int]]:
    """Graded Betti numbers ``{i: {internal degree: count}}``."""
    lo, hi = C.support
    return {i: dict(sorted(Counter(C.module(i).degrees).items())) for i in range(lo, hi + 1)}


def lift_columns(target: RingMatrix, through: RingMatrix) -> RingMatrix:
    """``X`` with ``through @ X == target``; columns of ``through`` lift to unit vectors."""
    exact = {}
    columns = through.columns()
    for j, column in enumerate(target.columns()):
        if column and column in columns:
            exact[j] = columns.index(column)
    rest = [j for j in range(target.ncols) if j not in exact]
    lifted = lift_matrix(target.submatrix(range(target.nrows), rest), through) if rest else None
    out = {}
    for j, k in exact.items():
        out[(k, j)] = through.ring.one
    if lifted is not None:
        for (r, c), value in lifted.entries.items():
            out[(r, rest[c])] = value
    return RingMatrix.build(through.ring, through.ncols, target.ncols, out)


def lift_modulo(target: RingMatrix, through: RingMatrix, relations: RingMatrix) -> RingMatrix:
    """``X`` with ``through @ X ≡ target`` modulo the columns of ``relations``."""
    stacked = RingMatrix.hstack(target.ring, target.nrows, [through, relations])
    full = lift_columns(target, stacked)
    return full.submatrix(range(through.ncols), range(target.ncols))


def comparison_lift(f: RingMatrix, F: Resolution, F_prime: Resolution) -> ChainMap:
    """Chain map ``F -> F′`` over the module map ``f: R^m -> R^{m′}``."""
    ring = F.ring
    lo, hi = F.support
    components: dict[int, RingMatrix] = {}
    if F.rank(0):
        components[0] = lift_modulo(f @ F.augmentation, F_prime.augmentation, F_prime.presentation)
    for i in range(max(lo, 1), hi + 1):
        previous = components.get(i - 1, RingMatrix.zeros(ring, F_prime.rank(i - 1), F.rank(i - 1)))
        image = previous @ F.d(i)
        if not F_prime.rank(i):
            if not image.is_zero():
                raise InvariantError(f"lift fails at degree {i}: target resolution ends")
            components[i] = RingMatrix.zeros(ring, 0, F.rank(i))
            continue
        components[i] = lift_columns(image, F_prime.d(i))
    return ChainMap(F, F_prime, components).verified()


# ---------------------------------------------------------------------- #
# Horseshoe lemma
# ---------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class ShortExactSequence:
    """``0 -> coker(P_A) -i-> coker(P_B) -π-> coker(P_C) -> 0``."""

    inclusion: RingMatrix
    projection: RingMatrix
    p_a: RingMatrix
    p_b: RingMatrix
    p_c: RingMatrix

    def problems(self) -> list[str]:
        ring = self.inclusion.ring
        out = []
        gb_c = module_gb(self.p_c, track=False)
        gb_b_rel = module_gb(self.p_b, track=False)
        if not all(gb_b_rel.contains(c) for c in (self.inclusion @ self.p_a).columns() if c):
            out.append("i does not respect the relations of A")
        composite = self.projection @ self.inclusion
        if not all(gb_c.contains(c) for c in composite.columns() if c):
            out.append("π ∘ i is nonzero")
        cover = module_gb(RingMatrix.hstack(ring, self.p_c.nrows, [self.projection, self.p_c]), track=False)
        if not all(cover.contains(e) for e in RingMatrix.identity(ring, self.p_c.nrows).columns()):
            out.append("π is not surjective")
        m_a = self.inclusion.ncols
        kernel_i = syzygies(RingMatrix.hstack(ring, self.p_b.nrows, [self.inclusion, self.p_b]))
        gb_a = module_gb(self.p_a, track=False)
        top = kernel_i.submatrix(range(m_a), range(kernel_i.ncols))
        if not all(gb_a.contains(c) for c in top.columns() if c):
            out.append("i is not injective")
        m_b = self.projection.ncols
        kernel_pi = syzygies(RingMatrix.hstack(ring, self.p_c.nrows, [self.projection, self.p_c]))
        middle = kernel_pi.submatrix(range(m_b), range(kernel_pi.ncols))
        gb_b = module_gb(RingMatrix.hstack(ring, self.p_b.nrows, [self.inclusion, self.p_b]), track=False)
        if not all(gb_b.contains(c) for c in middle.columns() if c):
            out.append("kernel of π is larger than the image of i")
        return out


def horseshoe(
    ses: ShortExactSequence,
    FA: Resolution,
    FC: Resolution,
) -> tuple[Resolution, dict[int, RingMatrix]]:
    """Resolution of the middle term with differential ``[[d^A, α], [0, d^C]]``.

    Returns the resolution and the connecting blocks ``α_i: FC_i -> FA_{i-1}``.
    """
    problems = ses.problems()
    if problems:
        raise NotExactError(f"not a short exact sequence: {'; '.join(problems)}")
    ring = ses.inclusion.ring
    lam = lift_modulo(FC.augmentation, ses.projection, ses.p_c)
    augmentation = RingMatrix.hstack(ring, ses.p_b.nrows, [ses.inclusion @ FA.augmentation, lam])
    hi = max(FA.support[1], FC.support[1], 0)
    alphas: dict[int, RingMatrix] = {}
    for i in range(1, hi + 1):
        if not FC.rank(i) or not FA.rank(i - 1):
            alphas[i] = RingMatrix.zeros(ring, FA.rank(i - 1), FC.rank(i))
            continue
        if i == 1:
            # λ d^C_1 lies in im i + im P_B; its i-part lifts through ε_A modulo P_A.
            image = lam @ FC.d(1)
            split = lift_modulo(image, ses.inclusion, ses.p_b)
            alphas[1] = lift_modulo(-split, FA.augmentation, ses.p_a)
        else:
            image = -(alphas[i - 1] @ FC.d(i))
            alphas[i] = lift_columns(image, FA.d(i - 1)) if not image.is_zero() else RingMatrix.zeros(
                ring, FA.rank(i - 1), FC.rank(i)
            )
    modules = {
        i: FA.module(i) + FC.module(i)
        for i in range(0, hi + 1)
        if FA.rank(i) + FC.rank(i)
    }
    differentials = {}
    for i in range(1, hi + 1):
        sizes_src = [FA.rank(i), FC.rank(i)]
        sizes_dst = [FA.rank(i - 1), FC.rank(i - 1)]
        differentials[i] = RingMatrix.block(
            ring, sizes_dst, sizes_src, {(0, 0): FA.d(i), (0, 1): alphas[i], (1, 1): FC.d(i)}
        )
    FB = Resolution(ring, modules, differentials, ses.p_b, augmentation).verified()
    problems = FB.augmentation_problems()
    if problems:
        raise NotExactError(f"horseshoe augmentation: {problems[0]}")
    return FB, alphas


# ---------------------------------------------------------------------- #
# cones, tensor and Hom
# ---------------------------------------------------------------------- #


def cone(f: ChainMap) -> ChainComplex:
    return ChainComplex.from_dm(dm_cone(f.to_dm_morphism()))


def tensor(C: ChainComplex, D: ChainComplex) -> ChainComplex:
    return ChainComplex.from_dm(dm_tensor(C.to_dm(), D.to_dm()))


def hom_complex(C: ChainComplex, D: ChainComplex) -> ChainComplex:
    return ChainComplex.from_dm(dm_hom(C.to_dm(), D.to_dm()))
