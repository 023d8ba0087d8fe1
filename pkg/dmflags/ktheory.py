"""K-theoretic invariants of ℤ/2-graded differential modules.

Tensor powers with the signed cyclic action, their eigenspace pieces and
the cyclic Adams operation, Euler characteristics, Frobenius pullbacks and
the rank inequalities checked against them.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal

import sympy
from sympy.polys.rings import PolyRing

from dmflags import config
from dmflags.coeff_ring import field_of, frobenius_power
from dmflags.dm_core import DiffModule, dm_tensor, homology, tensor_layout
from dmflags.errors import (
    CharacteristicError,
    InfiniteLengthError,
    InvalidArgumentError,
    InvariantError,
    MissingRootOfUnityError,
    ShapeError,
)
from dmflags.flags import FreeFlag
from dmflags.matrix import RingMatrix
from dmflags.resolve import quasiminimal


logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------- #
# tensor powers and eigenpieces
# ---------------------------------------------------------------------- #


def root_of_unity(ring: PolyRing, k: int) -> object:
    """A primitive ``k``-th root of unity in the coefficient field, ``k`` prime."""
    if not sympy.isprime(k):
        raise InvalidArgumentError(f"only prime k is supported, got {k}")
    p = field_of(ring).characteristic
    if p == k:
        raise CharacteristicError(f"characteristic {p} divides k = {k}")
    domain = ring.domain
    if k == 2:
        return -domain.one
    if p == 0 or (p - 1) % k:
        raise MissingRootOfUnityError(f"no primitive {k}-th root of unity over {field_of(ring)}")
    for g in range(2, p):
        if pow(g, k, p) == 1:
            return domain.convert(g)
    raise MissingRootOfUnityError(f"no primitive {k}-th root of unity over {field_of(ring)}")


def _parity(key: int) -> int:
    return key % 2


def tensor_power_cyclic(P: DiffModule, k: int) -> tuple[DiffModule, RingMatrix]:
    """``T = P^{⊗k}`` and the signed cyclic permutation ``σ``.

    ``σ(x_1 ⊗ ··· ⊗ x_k) = (-1)^{|x_k|(|x_1| + ··· + |x_{k-1}|)} x_k ⊗ x_1 ⊗ ··· ⊗ x_{k-1}``,
    the composite of ``k - 1`` adjacent Koszul-signed transpositions.
    """
    if k < 1:
        raise InvalidArgumentError("tensor power needs k >= 1")
    T, factors = P, [(a,) for a in range(P.rank)]
    for _ in range(k - 1):
        T, pairs = tensor_layout(T, P)
        factors = [factors[i] + (b,) for i, b in pairs]
    keys = P.key_of
    index = {word: g for g, word in enumerate(factors)}
    entries = {}
    for g, word in enumerate(factors):
        rotated = (word[-1],) + word[:-1]
        odd = _parity(keys[word[-1]]) * sum(_parity(keys[a]) for a in word[:-1]) % 2
        entries[(index[rotated], g)] = -T.ring.one if odd else T.ring.one
    sigma = RingMatrix(T.ring, T.rank, T.rank, entries)
    if T.differential @ sigma != sigma @ T.differential:
        raise InvariantError("cyclic permutation does not commute with the differential")
    if sigma.power(k) != RingMatrix.identity(T.ring, T.rank):
        raise InvariantError(f"cyclic permutation has order different from {k}")
    logger.debug("tensor power %d: rank %d", k, T.rank)
    return T, sigma


@dataclass(frozen=True, eq=False)
class EigenSplit:
    """``T^k(P) = ⊕_i T^{(ζ^i)}``, keyed by the exponent ``i``.

    ``bases[i]`` holds the basis of the ``ζ^i`` piece as columns in the
    coordinates of ``total``.
    """

    base: DiffModule
    power: int
    root: object
    total: DiffModule
    sigma: RingMatrix
    pieces: dict[int, DiffModule]
    bases: dict[int, RingMatrix] = field(repr=False)

    @property
    def ranks(self) -> dict[int, int]:
        return {i: piece.rank for i, piece in self.pieces.items()}

    def problems(self) -> list[str]:
        out = []
        if sum(self.ranks.values()) != self.total.rank:
            out.append(f"piece ranks {self.ranks} do not add up to {self.total.rank}")
        for i, piece in self.pieces.items():
            basis = self.bases[i]
            if self.total.differential @ basis != basis @ piece.differential:
                out.append(f"piece {i} is not closed under the differential")
        return out


def _orbits(sigma: RingMatrix) -> list[list[int]]:
    image = {c: r for (r, c), _ in sigma.items()}
    seen: set[int] = set()
    orbits = []
    for start in range(sigma.ncols):
        if start in seen:
            continue
        orbit, g = [], start
        while g not in seen:
            seen.add(g)
            orbit.append(g)
            g = image[g]
        orbits.append(orbit)
    return orbits


def eigen_split(T: DiffModule, sigma: RingMatrix, k: int, zeta: object, base: DiffModule | None = None) -> EigenSplit:
    """Split ``T`` by the projectors ``Σ_t ζ^{-it} σ^t`` (scaled by ``k``).

    ``σ`` is a signed permutation, so each orbit representative ``e`` gives
    the basis vector ``Σ_t ζ^{-it} σ^t e`` of the ``ζ^i`` piece whenever it
    is nonzero; the coefficient at ``e`` normalizes it to 1 and reads off
    coordinates of the restricted differential.
    """
    ring, domain = T.ring, T.ring.domain
    if field_of(ring).characteristic == k:
        raise CharacteristicError(f"k = {k} is not invertible")
    powers = [RingMatrix.identity(ring, T.rank)]
    for _ in range(k - 1):
        powers.append(sigma @ powers[-1])
    zeta_inv = domain.quo(domain.one, zeta)
    orbits = _orbits(sigma)
    labels = T.labels
    pieces: dict[int, DiffModule] = {}
    bases: dict[int, RingMatrix] = {}
    for i in range(k):
        projector = RingMatrix.zeros(ring, T.rank, T.rank)
        for t, power in enumerate(powers):
            projector = projector + power.scale(ring.ground_new(zeta_inv ** (i * t)))
        # orbit representatives ascend, so their labels stay sorted by key
        columns, reps = [], []
        for orbit in orbits:
            e = orbit[0]
            column = projector.column(e)
            lead = column.get(e)
            if not column:
                continue
            if not lead:
                raise InvariantError(f"orbit representative {e} missing from its projection")
            inverse = ring.ground_new(domain.quo(domain.one, lead.LC))
            columns.append({r: v * inverse for r, v in column.items()})
            reps.append(e)
        basis = RingMatrix.from_columns(ring, T.rank, columns)
        restricted = T.differential.submatrix(reps, range(T.rank)) @ basis
        pieces[i] = DiffModule.from_labelled(ring, T.modulus, [labels[e] for e in reps], restricted, T.shift)
        bases[i] = basis
    split = EigenSplit(base if base is not None else T, k, zeta, T, sigma, pieces, bases)
    problems = split.problems()
    if problems:
        raise InvariantError(f"eigenspace splitting failed: {'; '.join(problems)}")
    logger.info("eigen split of rank %d: %s", T.rank, split.ranks)
    return split


def _anchored_representative(D: DiffModule) -> DiffModule:
    return quasiminimal(D).flag.module


def _check_adams_input(D: DiffModule) -> None:
    if D.modulus != 2:
        raise ShapeError(f"cyclic Adams operations act on ℤ/2-graded modules, got modulus {D.modulus}")


def derived_eigenspace(D: DiffModule, k: int, i: int) -> DiffModule:
    """``T^k(P)^{(ζ^i)}`` for the quasiminimal resolution ``P`` of ``D``."""
    _check_adams_input(D)
    zeta = root_of_unity(D.ring, k)
    P = _anchored_representative(D)
    T, sigma = tensor_power_cyclic(P, k)
    return eigen_split(T, sigma, k, zeta, base=P).pieces[i % k]


def cyclic_adams(D: DiffModule, k: int = 2) -> tuple[DiffModule, list[DiffModule]]:
    """``ψ^k_cyc[D] = [T^k(P)^{(1)}] - [T^k(P)^{(ζ)}]`` as actual modules.

    Returns the trivial eigenpiece and the remaining pieces in exponent
    order, so the ``ζ`` piece comes first.
    """
    _check_adams_input(D)
    zeta = root_of_unity(D.ring, k)
    P = _anchored_representative(D)
    T, sigma = tensor_power_cyclic(P, k)
    split = eigen_split(T, sigma, k, zeta, base=P)
    return split.pieces[0], [split.pieces[i] for i in range(1, k)]


@dataclass(frozen=True)
class AdamsEuler:
    chi_psi: int
    chi: int

    @property
    def factor(self) -> Fraction | None:
        return Fraction(self.chi_psi, self.chi) if self.chi else None


def adams_euler(D: DiffModule, k: int = 2) -> AdamsEuler:
    """``χ(ψ^k_cyc D)`` next to ``χ(D)``."""
    plus, minus = cyclic_adams(D, k)
    modules = [plus, minus[0], D]
    if config.THREADS > 1:
        with ThreadPoolExecutor(max_workers=config.THREADS) as pool:
            profiles = list(pool.map(euler_and_profile, modules))
    else:
        profiles = [euler_and_profile(M) for M in modules]
    chi_plus, chi_zeta, chi = (profile.chi for profile in profiles)
    return AdamsEuler(chi_plus - chi_zeta, chi)


# ---------------------------------------------------------------------- #
# profiles and verdicts
# ---------------------------------------------------------------------- #


@dataclass(frozen=True)
class RankProfile:
    rank: int
    lengths: dict[int, int | float]
    dim: int
    codim: int
    modulus: int = 2

    @property
    def h(self) -> int | float:
        return sum(self.lengths.values())

    @property
    def chi(self) -> int | None:
        """``Σ (-1)^i h_i``; ``None`` for infinite length."""
        if self.h == float("inf"):
            return None
        return int(sum(length if key % 2 == 0 else -length for key, length in self.lengths.items()))

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "lengths": {str(key): _finite(value) for key, value in self.lengths.items()},
            "h": _finite(self.h),
            "chi": self.chi,
            "dim": self.dim,
            "codim": self.codim,
        }


def _finite(value: int | float) -> int | str:
    return "inf" if value == float("inf") else int(value)


def euler_and_profile(D: DiffModule, codim: int | None = None) -> RankProfile:
    """Rank, homology lengths, ``χ``, ``dim R`` and the codimension.

    For finite-length homology the codimension defaults to ``dim R``;
    otherwise it has to be supplied.
    """
    if D.modulus % 2:
        raise ShapeError(f"Euler characteristic needs an even modulus or a ℤ-grading, got {D.modulus}")
    lengths = homology(D).lengths
    dim = D.ring.ngens
    if any(length == float("inf") for length in lengths.values()):
        if codim is None:
            raise InfiniteLengthError("homology has infinite length; supply the codimension")
    elif codim is None:
        codim = dim
    return RankProfile(D.rank, lengths, dim, codim, D.modulus)


Status = Literal["holds", "fails", "inapplicable"]


@dataclass(frozen=True)
class TrcVerdict:
    status: Status
    rank: int
    bound: Fraction | None
    margin: Fraction | None
    parity_bound: int | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "rank": self.rank,
            "bound": str(self.bound) if self.bound is not None else None,
            "margin": str(self.margin) if self.margin is not None else None,
            "parity_bound": self.parity_bound,
            "reason": self.reason,
        }


def trc_verdict(profile: RankProfile) -> TrcVerdict:
    """``rank ≥ 2^{dim} |χ| / h``, and ``rank ≥ 2^c`` when the homology sits in one parity."""
    if profile.modulus != 2:
        return TrcVerdict("inapplicable", profile.rank, None, None, reason="needs a ℤ/2-graded module")
    if profile.chi is None:
        return TrcVerdict("inapplicable", profile.rank, None, None, reason="homology has infinite length")
    if not profile.h:
        return TrcVerdict("inapplicable", profile.rank, None, None, reason="homology is zero")
    bound = Fraction(2**profile.dim * abs(profile.chi)) / Fraction(profile.h)
    margin = profile.rank - bound
    parity_bound = None
    holds = margin >= 0
    if profile.h in (profile.lengths.get(0, 0), profile.lengths.get(1, 0)):
        parity_bound = 2**profile.codim
        holds = holds and profile.rank >= parity_bound
    return TrcVerdict("holds" if holds else "fails", profile.rank, bound, margin, parity_bound)


def trc_check(D: DiffModule, codim: int | None = None) -> TrcVerdict:
    if D.modulus != 2:
        return TrcVerdict("inapplicable", D.rank, None, None, reason=f"modulus {D.modulus} is not 2")
    try:
        profile = euler_and_profile(D, codim)
    except InfiniteLengthError as exc:
        return TrcVerdict("inapplicable", D.rank, None, None, reason=str(exc))
    verdict = trc_verdict(profile)
    logger.info("total rank check: %s (margin %s)", verdict.status, verdict.margin)
    return verdict


@dataclass(frozen=True)
class TensorLengthReport:
    """Both sides of ``h(D ⊗ D′) <= h(D) · rank D′``.

    ``flagged`` records whether both factors came with a free flag
    structure; without it the bound is only reported, not asserted.
    """

    h_tensor: int | float
    h_left: int | float
    rank_right: int
    tensor_rank: int
    flagged: bool = True

    @property
    def bound(self) -> int | float:
        return self.h_left * self.rank_right

    @property
    def holds(self) -> bool:
        return self.h_tensor <= self.bound

    @property
    def comparison(self) -> Literal["holds", "exceeds", "inapplicable"]:
        if not self.flagged:
            return "inapplicable"
        return "holds" if self.holds else "exceeds"

    def to_dict(self) -> dict:
        return {
            "h_tensor": _finite(self.h_tensor),
            "bound": _finite(self.bound),
            "tensor_rank": self.tensor_rank,
            "flagged": self.flagged,
            "within_bound": self.holds,
            "comparison": self.comparison,
        }


def tensor_length_test(D: DiffModule | FreeFlag, D_prime: DiffModule | FreeFlag) -> TensorLengthReport:
    """``h(D ⊗ D′)`` against ``h(D) · rank D′``.

    The bound is asserted only when both factors are free flags; plain
    differential modules get the comparison ``inapplicable``.
    """
    flagged = isinstance(D, FreeFlag) and isinstance(D_prime, FreeFlag)
    left, right = D.to_dm(), D_prime.to_dm()
    if left.modulus == 1:
        raise ShapeError("tensor lengths need modulus different from 1")
    T = dm_tensor(left, right)
    report = TensorLengthReport(homology(T).total, homology(left).total, right.rank, T.rank, flagged)
    logger.info("tensor length %s against bound %s (%s)", report.h_tensor, report.bound, report.comparison)
    return report


# ---------------------------------------------------------------------- #
# Frobenius
# ---------------------------------------------------------------------- #


def frobenius_dm(D: DiffModule, e: int) -> DiffModule:
    """Raise every differential entry to the ``p^e``-th power.

    Internal degrees and the shift scale by ``p^e`` so homogeneity is kept.
    """
    if e == 0:
        return D
    p = field_of(D.ring).characteristic
    if p == 0:
        raise CharacteristicError("Frobenius needs a ring of positive characteristic")
    q = p**e
    matrix = D.differential.map_entries(lambda value: frobenius_power(value, e))
    labels = [(key, deg * q) for key, deg in D.labels]
    return DiffModule.from_labelled(D.ring, D.modulus, labels, matrix, D.shift * q)


@dataclass(frozen=True)
class DuttaSequence:
    values: tuple[Fraction, ...]

    @property
    def stabilized(self) -> bool:
        return len(self.values) >= 2 and self.values[-1] == self.values[-2]

    def to_dict(self) -> dict:
        return {"values": [str(v) for v in self.values], "stabilized": self.stabilized}


def dutta_sequence(D: DiffModule, E: int) -> DuttaSequence:
    """``χ(F^e D) / p^{e·dim R}`` for ``e = 0..E``; no limit is claimed."""
    p = field_of(D.ring).characteristic
    if p == 0:
        raise CharacteristicError("Dutta sequences need a ring of positive characteristic")
    dim = D.ring.ngens
    values = []
    for e in range(E + 1):
        chi = euler_and_profile(frobenius_dm(D, e)).chi
        if chi is None:
            raise InfiniteLengthError(f"F^{e} D has infinite-length homology")
        values.append(Fraction(chi, p ** (e * dim)))
        logger.debug("Dutta term e=%d: %s", e, values[-1])
    return DuttaSequence(tuple(values))
