"""Homological perturbation.

All homotopy data follow the convention ``ι p - 1 = d h + h d`` on the big
module. A *strong* deformation retract additionally satisfies ``p ι = 1``
and the side conditions ``h h = 0``, ``h ι = 0``, ``p h = 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from dmflags import config
from dmflags.dm_core import (
    DiffModule,
    DmMorphism,
    gaussian_reduction,
    labelled_order,
    normalize_key,
    reduced_module,
)
from dmflags.errors import InvariantError, NotSmallError, ShapeError
from dmflags.matrix import RingMatrix


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SideConditions:
    h_squared: bool
    h_iota: bool
    p_h: bool

    @property
    def all(self) -> bool:
        return self.h_squared and self.h_iota and self.p_h


@dataclass(frozen=True, eq=False)
class SdrData:
    """Homotopy-equivalence data ``p: big -> small``, ``ι: small -> big``.

    ``h`` is the homotopy on ``big``. ``h_small`` is present for general
    homotopy equivalences (``p ι - 1 = d h′ + h′ d``); when it is ``None``
    the datum is a deformation retract and ``p ι = 1`` holds exactly.
    """

    big: DiffModule
    small: DiffModule
    p: DmMorphism
    iota: DmMorphism
    h: RingMatrix
    h_small: RingMatrix | None = None

    @classmethod
    def identity(cls, D: DiffModule) -> SdrData:
        one = DmMorphism.identity(D)
        return cls(D, D, one, one, RingMatrix.zeros(D.ring, D.rank, D.rank))

    @property
    def side_conditions(self) -> SideConditions:
        p, iota, h = self.p.matrix, self.iota.matrix, self.h
        return SideConditions((h @ h).is_zero(), (h @ iota).is_zero(), (p @ h).is_zero())

    @property
    def is_retract(self) -> bool:
        return self.p.matrix @ self.iota.matrix == RingMatrix.identity(self.small.ring, self.small.rank)

    @property
    def is_strong(self) -> bool:
        return self.is_retract and self.side_conditions.all

    def problems(self) -> list[str]:
        out: list[str] = []
        for name, morphism in (("p", self.p), ("ι", self.iota)):
            out.extend(f"{name}: {problem}" for problem in morphism.problems())
        big_d, small_d = self.big.differential, self.small.differential
        one_big = RingMatrix.identity(self.big.ring, self.big.rank)
        if self.iota.matrix @ self.p.matrix - one_big != big_d @ self.h + self.h @ big_d:
            out.append("ιp - 1 differs from dh + hd")
        one_small = RingMatrix.identity(self.small.ring, self.small.rank)
        p_iota = self.p.matrix @ self.iota.matrix
        if self.h_small is None:
            if p_iota != one_small:
                out.append("pι differs from the identity")
        elif p_iota - one_small != small_d @ self.h_small + self.h_small @ small_d:
            out.append("pι - 1 differs from dh′ + h′d")
        return out

    def verified(self) -> SdrData:
        problems = self.problems()
        if problems:
            raise InvariantError(f"invalid homotopy data: {'; '.join(problems)}")
        return self

    def then(self, other: SdrData) -> SdrData:
        """Compose with a retract ``other`` of ``self.small``."""
        if other.big != self.small:
            raise ShapeError("retracts do not compose: small and big modules differ")
        h = self.h + self.iota.matrix @ other.h @ self.p.matrix
        return SdrData(self.big, other.small, other.p @ self.p, self.iota @ other.iota, h)


@dataclass(frozen=True, eq=False)
class Perturbation:
    """A perturbation ``δ`` with ``(d + δ)² = 0`` on ``target``."""

    target: object
    delta: RingMatrix

    def __post_init__(self) -> None:
        D = self.module
        if self.delta.shape != D.differential.shape:
            raise ShapeError(f"perturbation shape {self.delta.shape} does not match {D.differential.shape}")

    @property
    def module(self) -> DiffModule:
        return self.target.to_dm()

    def perturbed(self) -> DiffModule:
        return self.module.perturbed(self.delta)

    def verified(self) -> Perturbation:
        total = self.module.differential + self.delta
        if not (total @ total).is_zero():
            raise InvariantError("(d + δ)² is nonzero")
        return self


def _delta(delta: Perturbation | RingMatrix) -> RingMatrix:
    return delta.delta if isinstance(delta, Perturbation) else delta


def check_small(delta: Perturbation | RingMatrix, sdr: SdrData) -> int:
    """Least ``N`` with ``(δh)^N = 0``; raises NotSmallError past the rank bound."""
    step = _delta(delta) @ sdr.h
    bound = sdr.big.rank + config.SMALL_BOUND_SLACK
    power = step
    for n in range(1, bound + 1):
        if power.is_zero():
            return n
        power = power @ step
    raise NotSmallError(f"(δh)^N is nonzero for all N <= {bound}", bound)


def make_strong(sdr: SdrData) -> SdrData:
    """Replace ``h`` so that all three side conditions hold.

    With ``k = dh + hd``: ``h ← -h k``, then ``h ← -k h``, then ``h ← -h d h``.
    """
    if sdr.h_small is not None or not sdr.is_retract:
        raise InvariantError("make_strong needs a deformation retract (pι = 1)")
    d = sdr.big.differential
    k = d @ sdr.h + sdr.h @ d
    h = -(sdr.h @ k)
    h = -(k @ h)
    h = -(h @ d @ h)
    strong = SdrData(sdr.big, sdr.small, sdr.p, sdr.iota, h).verified()
    if not strong.side_conditions.all:
        raise InvariantError("side conditions failed after strengthening")
    return strong


def _geometric(step: RingMatrix, terms: int) -> RingMatrix:
    total = RingMatrix.identity(step.ring, step.nrows)
    power = total
    for _ in range(1, terms):
        power = power @ step
        total = total + power
    return total


def perturb_sdr(sdr: SdrData, delta: Perturbation | RingMatrix) -> tuple[SdrData, Perturbation]:
    """First perturbation lemma.

    With ``A = Σ_{t<N} (δh)^t δ``: ``p∞ = p + pAh``, ``ι∞ = ι + hAι``,
    ``h∞ = h + hAh`` and ``δ∞ = pAι`` on the small module.
    """
    delta_matrix = _delta(delta)
    if not sdr.is_strong:
        logger.info("strengthening deformation retract before perturbing")
        sdr = make_strong(sdr)
    terms = check_small(delta_matrix, sdr)
    p, iota, h = sdr.p.matrix, sdr.iota.matrix, sdr.h
    a = _geometric(delta_matrix @ h, terms) @ delta_matrix
    delta_small = p @ a @ iota
    big = sdr.big.perturbed(delta_matrix)
    small = sdr.small.perturbed(delta_small)
    out = SdrData(
        big,
        small,
        DmMorphism(big, small, p + p @ a @ h),
        DmMorphism(small, big, iota + h @ a @ iota),
        h + h @ a @ h,
    ).verified()
    logger.debug("perturbed retract: rank %d -> %d, series length %d", big.rank, small.rank, terms)
    return out, Perturbation(sdr.small, delta_small)


def cancel_units(D: DiffModule, allow=None) -> tuple[SdrData, tuple[int, ...]]:
    """Strong deformation retract of ``D`` onto a module without unit entries.

    Returns the retract and the surviving generator indices of ``D``.
    """
    reduction = gaussian_reduction(D, allow)
    small = reduced_module(D, reduction)
    sdr = SdrData(
        D,
        small,
        DmMorphism(D, small, reduction.p),
        DmMorphism(small, D, reduction.iota),
        reduction.h,
    ).verified()
    return sdr, reduction.kept


# ---------------------------------------------------------------------- #
# second perturbation lemma
# ---------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class Cylinder:
    """Mapping cylinder of ``p: C -> D`` on ``C ⊕ C[1] ⊕ D`` and its retractions.

    ``d(x, y, z) = (dx + y, -dy, dz - p y)``.
    """

    module: DiffModule
    to_small: SdrData
    include: RingMatrix
    retract: RingMatrix
    homotopy: RingMatrix
    order: tuple[int, ...]


def _cylinder(he: SdrData) -> Cylinder:
    C, D = he.big, he.small
    ring, n, m = C.ring, C.rank, D.rank
    p, iota, h = he.p.matrix, he.iota.matrix, he.h
    h_small = he.h_small if he.h_small is not None else RingMatrix.zeros(ring, m, m)
    eye = RingMatrix.identity(ring, n)
    sizes = [n, n, m]
    shifted = [(normalize_key(key + 1, C.modulus), deg - C.shift) for key, deg in C.labels]
    labels = C.labels + shifted + D.labels
    d_raw = RingMatrix.block(
        ring, sizes, sizes,
        {(0, 0): C.differential, (0, 1): eye, (1, 1): -C.differential, (2, 1): -p, (2, 2): D.differential},
    )
    order = labelled_order(labels, C.modulus)
    module = DiffModule.from_labelled(ring, C.modulus, labels, d_raw, C.shift)

    def permute_rows(matrix: RingMatrix) -> RingMatrix:
        return matrix.submatrix(order, range(matrix.ncols))

    def permute_cols(matrix: RingMatrix) -> RingMatrix:
        return matrix.submatrix(range(matrix.nrows), order)

    p_d = RingMatrix.block(ring, [m], sizes, {(0, 0): p, (0, 2): RingMatrix.identity(ring, m)})
    iota_d = RingMatrix.block(ring, sizes, [m], {(2, 0): RingMatrix.identity(ring, m)})
    h_d = RingMatrix.block(ring, sizes, sizes, {(1, 0): -eye})
    to_small = SdrData(
        module,
        D,
        DmMorphism(module, D, permute_cols(p_d)),
        DmMorphism(D, module, permute_rows(iota_d)),
        permute_rows(permute_cols(h_d)),
    ).verified()

    # H′ = h - ιph + ιh′p is a homotopy for ιp - 1 coherent with h′.
    h_prime = h - iota @ p @ h + iota @ h_small @ p
    include = permute_rows(RingMatrix.block(ring, sizes, [n], {(0, 0): eye}))
    retract = permute_cols(RingMatrix.block(ring, [n], sizes, {(0, 0): eye, (0, 1): -h_prime, (0, 2): iota}))
    rho = -(h_small @ (h_small @ p - p @ h))
    homotopy = RingMatrix.block(
        ring, sizes, sizes,
        {(1, 1): -h_prime, (1, 2): iota, (2, 1): rho, (2, 2): h_small},
    )
    return Cylinder(module, to_small, include, retract, permute_rows(permute_cols(homotopy)), tuple(order))


def perturb_hequiv(he: SdrData, delta: Perturbation | RingMatrix) -> SdrData:
    """Second perturbation lemma via the mapping cylinder of ``p``.

    The cylinder retracts strongly onto the small module and contains the
    big module as a retract; the perturbation is carried into the cylinder,
    transferred with :func:`perturb_sdr` and pulled back. The result is a
    homotopy equivalence with both homotopies as witnesses.
    """
    he.verified()
    delta_matrix = _delta(delta)
    C = he.big
    cyl = _cylinder(he)
    j, q = cyl.include, cyl.retract
    if q @ j != RingMatrix.identity(C.ring, C.rank):
        raise InvariantError("cylinder retraction is not a left inverse of the inclusion")
    delta_cyl = j @ delta_matrix @ q
    perturbed_cyl, delta_small = perturb_sdr(cyl.to_small, delta_cyl)

    side = SdrData(
        cyl.module,
        C,
        DmMorphism(cyl.module, C, q),
        DmMorphism(C, cyl.module, j),
        cyl.homotopy,
    ).verified()
    k_strong = make_strong(side).h

    p_inf, iota_inf, h_inf = perturbed_cyl.p.matrix, perturbed_cyl.iota.matrix, perturbed_cyl.h
    big = C.perturbed(delta_matrix)
    small = perturbed_cyl.small
    result = SdrData(
        big,
        small,
        DmMorphism(big, small, p_inf @ j),
        DmMorphism(small, big, q @ iota_inf),
        q @ h_inf @ j,
        p_inf @ k_strong @ iota_inf,
    ).verified()
    logger.debug("second perturbation lemma: small perturbation has %d entries", len(delta_small.delta.entries))
    return result
