"""Free flags: differential modules with a flag filtration.

A :class:`FreeFlag` is a :class:`~dmflags.dm_core.DiffModule` together with
a flag degree ``i >= 0`` per generator. Generator ``g`` of module key ``k``
and flag degree ``i`` sits in the component ``D_{i, j}`` with
``j = k - i (mod d)``. The stratum ``δ_t`` collects the entries that drop
the flag degree by exactly ``t + 1``; a flag differential has no entry that
keeps or raises the flag degree.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

from sympy.polys.rings import PolyRing

from dmflags.dm_core import (
    DiffModule,
    DmMorphism,
    Unfolded,
    homology,
    labelled_order,
    normalize_key,
)
from dmflags.errors import InvariantError, NotFlagError, NotInvertibleError, ShapeError
from dmflags.homalg import ChainComplex
from dmflags.matrix import GradedFreeModule, RingMatrix
from dmflags.perturb import SdrData, cancel_units, perturb_hequiv, perturb_sdr


logger = logging.getLogger(__name__)

FlagGenerator = tuple[int, int, int]  # (flag degree i, column j, internal degree)


def _strata_split(matrix: RingMatrix, row_flag: Sequence[int], col_flag: Sequence[int], offset: int) -> dict[int, RingMatrix]:
    """Split ``matrix`` by ``col_flag - row_flag - offset``."""
    buckets: dict[int, dict] = {}
    for (r, c), value in matrix.entries.items():
        buckets.setdefault(col_flag[c] - row_flag[r] - offset, {})[(r, c)] = value
    return {t: RingMatrix(matrix.ring, matrix.nrows, matrix.ncols, entries) for t, entries in sorted(buckets.items())}


@dataclass(frozen=True, eq=False)
class FreeFlag:
    module: DiffModule
    flag: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.flag) != self.module.rank:
            raise ShapeError(f"{len(self.flag)} flag degrees for rank {self.module.rank}")
        if any(i < 0 for i in self.flag):
            raise NotFlagError("flag degrees must be nonnegative")
        for (r, c), _ in self.module.differential.items():
            if self.flag[r] >= self.flag[c]:
                src, dst = self.component_of(c), self.component_of(r)
                raise NotFlagError(
                    f"differential entry ({r}, {c}) does not drop the flag degree: {src} -> {dst}",
                    (src, dst),
                )

    # ------------------------------------------------------------------ #
    # construction
    # ------------------------------------------------------------------ #

    @classmethod
    def from_generators(
        cls,
        ring: PolyRing,
        modulus: int,
        generators: Sequence[FlagGenerator],
        matrix: RingMatrix,
        shift: int = 0,
    ) -> FreeFlag:
        """Build from ``(i, j, degree)`` generators and the total differential."""
        labels = [(normalize_key(i + j, modulus), deg) for i, j, deg in generators]
        order = labelled_order(labels, modulus)
        module = DiffModule.from_labelled(ring, modulus, labels, matrix, shift)
        return cls(module, tuple(generators[k][0] for k in order))

    @classmethod
    def from_complex(cls, C: ChainComplex, modulus: int, column: int = 0) -> FreeFlag:
        """Fold a complex into a flag with only ``δ_0``; flag degree = homological degree."""
        lo, _ = C.support
        if lo < 0:
            raise NotFlagError("complexes with negative homological degrees are not flags")
        D = C.to_dm()
        generators = [(key, column, deg) for key, deg in D.labels]
        return cls.from_generators(C.ring, modulus, generators, D.differential)

    # ------------------------------------------------------------------ #
    # layout
    # ------------------------------------------------------------------ #

    @property
    def ring(self) -> PolyRing:
        return self.module.ring

    @property
    def modulus(self) -> int:
        return self.module.modulus

    @property
    def rank(self) -> int:
        return self.module.rank

    @property
    def differential(self) -> RingMatrix:
        return self.module.differential

    def column_of(self, g: int) -> int:
        return normalize_key(self.module.key_of[g] - self.flag[g], self.modulus)

    def component_of(self, g: int) -> tuple[int, int]:
        return self.flag[g], self.column_of(g)

    @property
    def generators(self) -> list[FlagGenerator]:
        return [(self.flag[g], self.column_of(g), deg) for g, deg in enumerate(self.module.degrees)]

    @property
    def components(self) -> dict[tuple[int, int], list[int]]:
        out: dict[tuple[int, int], list[int]] = {}
        for g in range(self.rank):
            out.setdefault(self.component_of(g), []).append(g)
        return dict(sorted(out.items()))

    @property
    def height(self) -> int:
        return max(self.flag, default=0)

    def strata(self) -> dict[int, RingMatrix]:
        return _strata_split(self.differential, self.flag, self.flag, 1)

    def stratum(self, t: int) -> RingMatrix:
        return self.strata().get(t, RingMatrix.zeros(self.ring, self.rank, self.rank))

    @property
    def max_stratum(self) -> int:
        return max(self.strata(), default=-1)

    @property
    def delta0(self) -> RingMatrix:
        return self.stratum(0)

    @property
    def perturbation(self) -> RingMatrix:
        """``δ_1 + δ_2 + ...``, the part dropping flag degree by two or more."""
        return self.differential - self.delta0

    def to_dm(self) -> DiffModule:
        return self.module

    def with_module(self, module: DiffModule) -> FreeFlag:
        return FreeFlag(module, self.flag)

    def verified(self) -> FreeFlag:
        self.module.verified()
        if not (self.delta0 @ self.delta0).is_zero():
            raise InvariantError("δ_0 does not square to zero")
        return self


def flag_to_dm(F: FreeFlag) -> DiffModule:
    return F.to_dm()


def dm_to_flag(D: DiffModule, filtration: Sequence[int]) -> FreeFlag:
    """Attach flag degrees (one per generator, in ``D``'s order)."""
    return FreeFlag(D, tuple(filtration))


# ---------------------------------------------------------------------- #
# anchors
# ---------------------------------------------------------------------- #


def anchor_dm(F: FreeFlag) -> DiffModule:
    """The anchor in the flag's own generator layout (differential ``δ_0``)."""
    return F.module.with_differential(F.delta0)


def _flag_complex(F: FreeFlag, generators: Sequence[int]) -> ChainComplex:
    by_flag: dict[int, list[int]] = {}
    for g in generators:
        by_flag.setdefault(F.flag[g], []).append(g)
    degrees = F.module.degrees
    modules = {i: GradedFreeModule(tuple(degrees[g] for g in gens)) for i, gens in sorted(by_flag.items())}
    delta0 = F.delta0
    differentials = {
        i: delta0.submatrix(by_flag[i - 1], gens)
        for i, gens in by_flag.items()
        if i - 1 in by_flag
    }
    return ChainComplex(F.ring, modules, differentials)


def anchor(F: FreeFlag) -> ChainComplex:
    """``⊕_j (D_{•,j}, δ_0)`` indexed by flag degree."""
    return _flag_complex(F, range(F.rank))


def anchor_column(F: FreeFlag, j: int) -> ChainComplex:
    j = normalize_key(j, F.modulus)
    return _flag_complex(F, [g for g in range(F.rank) if F.column_of(g) == j])


def columns(F: FreeFlag) -> list[int]:
    return sorted({F.column_of(g) for g in range(F.rank)})


def is_anchored_resolution(F: FreeFlag) -> bool:
    """True iff the anchor has no homology in positive flag degree."""
    lengths = homology(anchor(F).to_dm()).lengths
    return all(not length for i, length in lengths.items() if i > 0)


def flag_homology_via_anchor(F: FreeFlag) -> dict[int, int | float]:
    """``H_j(D) = H_0(D_{•,j})`` for flags anchored on resolutions, keyed by ``j``.

    The result is cross-checked against the homology of the total module.
    """
    if not is_anchored_resolution(F):
        raise InvariantError("flag is not anchored on a resolution")
    lengths: dict[int, int | float] = {}
    for j in columns(F):
        column = anchor_column(F, j).to_dm()
        lengths[j] = homology(column).lengths.get(0, 0)
    direct = homology(F.module).lengths
    for key in set(direct) | set(lengths):
        if direct.get(key, 0) != lengths.get(key, 0):
            raise InvariantError(
                f"anchor homology {lengths.get(key, 0)} differs from module homology {direct.get(key, 0)} at {key}"
            )
    return lengths


# ---------------------------------------------------------------------- #
# morphisms
# ---------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class FlagMorphism:
    """A DM morphism whose stratum ``φ_t`` drops flag degree by ``t >= 0``."""

    source: FreeFlag
    target: FreeFlag
    matrix: RingMatrix

    def __post_init__(self) -> None:
        for (r, c), _ in self.matrix.items():
            if self.target.flag[r] > self.source.flag[c]:
                raise NotFlagError(
                    f"entry ({r}, {c}) raises flag degree {self.source.flag[c]} -> {self.target.flag[r]}",
                    (c, r),
                )

    @classmethod
    def identity(cls, F: FreeFlag) -> FlagMorphism:
        return cls(F, F, RingMatrix.identity(F.ring, F.rank))

    @property
    def dm(self) -> DmMorphism:
        return DmMorphism(self.source.module, self.target.module, self.matrix)

    def strata(self) -> dict[int, RingMatrix]:
        return _strata_split(self.matrix, self.target.flag, self.source.flag, 0)

    def stratum(self, t: int) -> RingMatrix:
        return self.strata().get(t, RingMatrix.zeros(self.matrix.ring, self.target.rank, self.source.rank))

    def __matmul__(self, other: FlagMorphism) -> FlagMorphism:
        return FlagMorphism(other.source, self.target, self.matrix @ other.matrix)

    def verified(self) -> FlagMorphism:
        self.dm.verified()
        return self


def triangular_invert(phi: FlagMorphism) -> FlagMorphism:
    """Two-sided inverse, ``Σ_k (-φ_0⁻¹ N)^k φ_0⁻¹`` with ``N`` the strictly dropping part."""
    base = phi.stratum(0)
    try:
        base_inv = base.inverse()
    except NotInvertibleError as exc:
        raise NotInvertibleError(f"anchor part is not invertible: {exc}") from exc
    rest = phi.matrix - base
    step = -(base_inv @ rest)
    total = base_inv
    term = base_inv
    for _ in range(phi.source.height + 1):
        term = step @ term
        if term.is_zero():
            break
        total = total + term
    inverse = FlagMorphism(phi.target, phi.source, total)
    one_src = RingMatrix.identity(phi.matrix.ring, phi.source.rank)
    one_dst = RingMatrix.identity(phi.matrix.ring, phi.target.rank)
    if total @ phi.matrix != one_src or phi.matrix @ total != one_dst:
        raise InvariantError("triangular inverse does not compose to the identity")
    return inverse


# ---------------------------------------------------------------------- #
# sign twist
# ---------------------------------------------------------------------- #


def _sign(parity: int) -> int:
    return -1 if parity % 2 else 1


def _signed(matrix: RingMatrix, sign) -> RingMatrix:
    return RingMatrix(
        matrix.ring,
        matrix.nrows,
        matrix.ncols,
        {(r, c): (v if sign(r, c) > 0 else -v) for (r, c), v in matrix.entries.items()},
    )


@dataclass(frozen=True, eq=False)
class TwistedFlag:
    """A flag in the sign-twisted convention: ``δ̄ δ = 0`` instead of ``δ² = 0``.

    ``δ̄`` multiplies the stratum ``δ_t`` by ``(-1)^t``.
    """

    module: DiffModule
    flag: tuple[int, ...]
    delta: RingMatrix

    def bar(self) -> RingMatrix:
        return _signed(self.delta, lambda r, c: _sign(self.flag[c] - self.flag[r] - 1))

    def unfolded(self) -> Unfolded:
        """The ℤ/2 × ℤ/dℤ module with ``δ`` from copy 0 to copy 1 and ``-δ̄`` back."""
        D, n = self.module, self.module.rank
        labels = D.labels + D.labels
        matrix = RingMatrix.block(D.ring, [n, n], [n, n], {(1, 0): self.delta, (0, 1): -self.bar()})
        parity = [0] * n + [1] * n
        order = labelled_order(labels, D.modulus)
        module = DiffModule.from_labelled(D.ring, D.modulus, labels, matrix, D.shift)
        return Unfolded(module, tuple(parity[i] for i in order))

    def to_dm(self) -> DiffModule:
        return self.unfolded().module


def twist_phi(F: FreeFlag) -> TwistedFlag:
    """Precompose the differential with ``τ = (-1)^{flag degree}``."""
    return TwistedFlag(F.module, F.flag, _signed(F.differential, lambda r, c: _sign(F.flag[c])))


def twist_phi_inverse(T: TwistedFlag) -> FreeFlag:
    delta = _signed(T.delta, lambda r, c: _sign(T.flag[c]))
    return FreeFlag(T.module.with_differential(delta), T.flag)


def twist_morphism(phi: FlagMorphism) -> RingMatrix:
    """``Φ(φ) = -φ̄``: stratum ``φ_t`` picks up ``(-1)^t``; an involution."""
    return _signed(phi.matrix, lambda r, c: _sign(phi.source.flag[c] - phi.target.flag[r]))


def twisted_morphism_problems(source: TwistedFlag, target: TwistedFlag, psi: RingMatrix) -> list[str]:
    """``δ′ψ + ψ̄δ = 0`` where ``ψ̄`` multiplies stratum ``t`` by ``(-1)^{t+1}``."""
    psi_bar = _signed(psi, lambda r, c: -_sign(source.flag[c] - target.flag[r]))
    if not (target.delta @ psi + psi_bar @ source.delta).is_zero():
        return ["δ′ψ + ψ̄δ is nonzero"]
    return []


# ---------------------------------------------------------------------- #
# transfer along anchor equivalences
# ---------------------------------------------------------------------- #


def minimize_anchor(F: FreeFlag) -> tuple[SdrData, tuple[int, ...]]:
    """Strong retract of the anchor onto its minimization and the surviving flag degrees."""
    sdr, kept = cancel_units(anchor_dm(F))
    return sdr, tuple(F.flag[g] for g in kept)


def transfer_anchor(F: FreeFlag, he: SdrData, small_flag: Sequence[int]) -> tuple[FreeFlag, SdrData]:
    """Move the flag structure of ``F`` onto ``he.small``.

    ``he`` is an equivalence from the anchor (in ``F``'s generator layout)
    to a module whose generators carry ``small_flag``. The strata ``δ_{≥1}``
    of ``F`` are treated as a perturbation of the anchor.
    """
    if he.big != anchor_dm(F):
        raise InvariantError("connection mismatch: equivalence does not start at the anchor of F")
    delta = F.perturbation
    if he.h_small is None:
        perturbed, _ = perturb_sdr(he, delta)
    else:
        perturbed = perturb_hequiv(he, delta)
    flag = FreeFlag(perturbed.small, tuple(small_flag))
    logger.debug("transferred flag: rank %d -> %d", F.rank, flag.rank)
    return flag, perturbed
