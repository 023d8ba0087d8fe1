"""Named example objects and seeded random instances.

The fixed examples are small enough to check by hand; the random builders
take a ``numpy.random.Generator`` so every suite is reproducible from one
seed.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sympy.polys.rings import PolyElement, PolyRing

from dmflags import config
from dmflags.coeff_ring import Field, field_of, make_ring, poly_degree
from dmflags.dm_core import DiffModule, DmMorphism, fold
from dmflags.errors import InvalidArgumentError
from dmflags.flags import FreeFlag
from dmflags.homalg import ChainComplex, free_resolution
from dmflags.matrix import GradedFreeModule, RingMatrix
from dmflags.perturb import SdrData


logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------- #
# Koszul complexes
# ---------------------------------------------------------------------- #


def _subsets(n: int) -> dict[int, list[tuple[int, ...]]]:
    return {k: list(itertools.combinations(range(n), k)) for k in range(n + 1)}


def koszul_complex(ring: PolyRing, elements: list[PolyElement] | None = None) -> ChainComplex:
    """Koszul complex on ``elements`` (the ring variables by default).

    ``K_k`` has basis ``e_S`` for the ``k``-subsets ``S`` in lexicographic
    order and ``d(e_S) = Σ_j (-1)^j f_{s_j} e_{S - s_j}``.
    """
    fs = list(ring.gens) if elements is None else [ring(f) for f in elements]
    weights = [max(poly_degree(f)[0], 0) for f in fs]
    subsets = _subsets(len(fs))
    index = {k: {S: i for i, S in enumerate(sets)} for k, sets in subsets.items()}
    modules = {k: GradedFreeModule(tuple(sum(weights[s] for s in S) for S in sets)) for k, sets in subsets.items()}
    differentials = {}
    for k in range(1, len(fs) + 1):
        entries = {}
        for col, S in enumerate(subsets[k]):
            for j, s in enumerate(S):
                face = S[:j] + S[j + 1 :]
                entries[(index[k - 1][face], col)] = fs[s] if j % 2 == 0 else -fs[s]
        differentials[k] = RingMatrix.build(ring, len(subsets[k - 1]), len(subsets[k]), entries)
    return ChainComplex(ring, modules, differentials).verified()


# ---------------------------------------------------------------------- #
# fixed examples
# ---------------------------------------------------------------------- #


class BeExample(NamedTuple):
    D: DiffModule
    F: FreeFlag
    eta: DmMorphism


def be_example(field: Field | None = None) -> BeExample:
    """Rank-two module over ``k[x, y]`` with ``d = [[-xy, -y^2], [x^2, xy]]``.

    ``F`` is a flag resolution of height two (generators of flag degrees
    0, 1, 1, 2) with its augmentation ``η: F -> D``.
    """
    ring = make_ring(field or Field.rationals(), ["x", "y"])
    x, y = ring.gens
    D = DiffModule.from_blocks(
        ring,
        1,
        {0: GradedFreeModule((0, 0))},
        {0: RingMatrix.from_rows(ring, [[-x * y, -y**2], [x**2, x * y]])},
        shift=2,
    ).verified()
    d_F = RingMatrix.from_rows(
        ring,
        [
            [0, x, -y, 1],
            [0, 0, 0, y],
            [0, 0, 0, x],
            [0, 0, 0, 0],
        ],
    )
    F = FreeFlag.from_generators(ring, 1, [(0, 0, 1), (1, 0, 0), (1, 0, 0), (2, 0, -1)], d_F, shift=2).verified()
    eta = RingMatrix.from_rows(ring, [[-y, 1, 0, 0], [x, 0, -1, 0]])
    return BeExample(D, F, DmMorphism(F.module, D, eta).verified())


def k_delta(field: Field | None = None) -> FreeFlag:
    """Koszul complex on ``x1, x2, x3`` folded mod 2 with ``e_∅ <- e_123`` added.

    The extra identity sits in ``δ_2``; homology is one-dimensional.
    """
    ring = make_ring(field or Field.rationals(), ["x1", "x2", "x3"])
    K = koszul_complex(ring)
    D = K.to_dm()
    matrix = D.differential + RingMatrix.build(ring, D.rank, D.rank, {(0, D.rank - 1): ring.one})
    generators = [(key, 0, deg) for key, deg in D.labels]
    return FreeFlag.from_generators(ring, 2, generators, matrix).verified()


def failure_retract(field: Field | None = None) -> DiffModule:
    """Rank-six ``ℤ/2`` module, a retract of :func:`k_delta`.

    Its tensor square has homology of length 8, more than its rank.
    """
    ring = make_ring(field or Field.rationals(), ["x1", "x2", "x3"])
    x1, x2, x3 = ring.gens
    odd_to_even = RingMatrix.from_rows(ring, [[-x2, -x3, 0], [x1, 0, -x3], [0, x1, x2]])
    even_to_odd = RingMatrix.from_rows(
        ring,
        [
            [x1 * x3, x2 * x3, x3**2],
            [-x1 * x2, -(x2**2), -x2 * x3],
            [x1**2, x1 * x2, x1 * x3],
        ],
    )
    return DiffModule.from_blocks(
        ring,
        2,
        {0: GradedFreeModule((0, 0, 0)), 1: GradedFreeModule((1, 1, 1))},
        {1: odd_to_even, 0: even_to_odd},
    ).verified()


class FoldedPair(NamedTuple):
    first: ChainComplex
    second: ChainComplex
    iso: DmMorphism


def folded_pair(field: Field | None = None) -> FoldedPair:
    """``R -0-> R -1-> R`` and ``R -1-> R -0-> R``: different complexes, one DM.

    The homology of the first sits in degree 2, of the second in degree 0;
    after folding to an ungraded module they are isomorphic via ``iso``.
    """
    ring = make_ring(field or Field.rationals(), ["x"])
    line = {i: GradedFreeModule((0,)) for i in range(3)}
    one, zero = RingMatrix.identity(ring, 1), RingMatrix.zeros(ring, 1, 1)
    first = ChainComplex(ring, line, {1: one, 2: zero}).verified()
    second = ChainComplex(ring, line, {1: zero, 2: one}).verified()
    iso = RingMatrix.build(ring, 3, 3, {(1, 0): ring.one, (2, 1): ring.one, (0, 2): ring.one})
    return FoldedPair(first, second, DmMorphism(fold(first, 1), fold(second, 1), iso).verified())


# ---------------------------------------------------------------------- #
# random instances
# ---------------------------------------------------------------------- #


def random_scalar(rng: np.random.Generator, ring: PolyRing) -> PolyElement:
    p = field_of(ring).characteristic
    if p:
        return ring(int(rng.integers(1, p)))
    value = int(rng.integers(-4, 4))
    return ring(value if value else 1)


def random_poly(rng: np.random.Generator, ring: PolyRing, max_degree: int = 1, terms: int = 2) -> PolyElement:
    """Sum of up to ``terms`` random monomials of degree at most ``max_degree``."""
    out = ring.zero
    for _ in range(terms):
        term = random_scalar(rng, ring)
        for _ in range(int(rng.integers(0, max_degree + 1))):
            term *= ring.gens[int(rng.integers(0, ring.ngens))]
        out += term
    return out


def random_unipotent(rng: np.random.Generator, F: FreeFlag, density: float = 0.3, max_degree: int = 1) -> RingMatrix:
    """``1 + N`` with ``N`` strictly lowering flag degree and keeping the module key."""
    keys, entries = F.module.key_of, {}
    for r, c in itertools.product(range(F.rank), repeat=2):
        if F.flag[r] < F.flag[c] and keys[r] == keys[c] and rng.random() < density:
            entries[(r, c)] = random_poly(rng, F.ring, max_degree)
    return RingMatrix.identity(F.ring, F.rank) + RingMatrix.build(F.ring, F.rank, F.rank, entries)


def conjugate(F: FreeFlag, g: RingMatrix) -> FreeFlag:
    """The flag with differential ``g d g^{-1}``."""
    return F.with_module(F.module.with_differential(g @ F.differential @ g.inverse()))


def random_flagged_perturbation(rng: np.random.Generator, F: FreeFlag, density: float = 0.3) -> RingMatrix:
    """``g d g^{-1} - d`` for a random unipotent ``g``; it drops flag degree by at least two."""
    return conjugate(F, random_unipotent(rng, F, density)).differential - F.differential


@dataclass(frozen=True, eq=False)
class RandomRetract:
    sdr: SdrData
    flag: FreeFlag


def random_flagged_sdr(
    rng: np.random.Generator,
    field: Field | None = None,
    levels: int = 3,
    max_pairs: int = 2,
) -> RandomRetract:
    """Strong retract of a flag onto a module with zero differential.

    The big module is a sum of free generators and contractible pairs
    ``u -> v`` one flag level apart, conjugated by a random unipotent.
    """
    ring = make_ring(field or Field.prime(101), 2)
    flags: list[int] = []
    kept: list[int] = []
    pairs: list[tuple[int, int]] = []
    for i in range(levels):
        for _ in range(int(rng.integers(0, 3)) + (1 if i == 0 else 0)):
            kept.append(len(flags))
            flags.append(i)
        if i:
            for _ in range(int(rng.integers(0, max_pairs + 1))):
                pairs.append((len(flags), len(flags) + 1))
                flags.extend([i, i - 1])
    n, m = len(flags), len(kept)
    d0 = RingMatrix.build(ring, n, n, {(v, u): ring.one for u, v in pairs})
    h0 = RingMatrix.build(ring, n, n, {(u, v): -ring.one for u, v in pairs})
    base = FreeFlag.from_generators(ring, 1, [(i, 0, 0) for i in flags], d0)
    g = random_unipotent(rng, base)
    g_inv = g.inverse()
    flag = conjugate(base, g).verified()
    small = DiffModule.free(ring, 1, 0, (0,) * m)
    sdr = SdrData(
        flag.module,
        small,
        DmMorphism(flag.module, small, RingMatrix.projection(ring, n, kept) @ g_inv),
        DmMorphism(small, flag.module, g @ RingMatrix.embedding(ring, n, kept)),
        g @ h0 @ g_inv,
    ).verified()
    logger.debug("random retract: rank %d onto %d, %d pairs", n, m, len(pairs))
    return RandomRetract(sdr, flag)


def random_monomial_ideal(rng: np.random.Generator, ring: PolyRing, max_power: int = 3, extra: int = 2) -> list[PolyElement]:
    """Monomials containing a pure power of every variable, so the quotient has finite length."""
    gens = [x ** int(rng.integers(1, max_power + 1)) for x in ring.gens]
    for _ in range(int(rng.integers(0, extra + 1))):
        monomial = ring.one
        for x in ring.gens:
            monomial *= x ** int(rng.integers(0, max_power))
        if monomial != ring.one:
            gens.append(monomial)
    return gens


def random_finite_flag(rng: np.random.Generator, field: Field | None = None, nvars: int = 2, density: float = 0.3) -> FreeFlag:
    """Minimal resolution of a random finite-length monomial quotient, folded mod 2 and conjugated."""
    ring = make_ring(field or Field.prime(101), nvars)
    gens = random_monomial_ideal(rng, ring)
    res = free_resolution(RingMatrix.from_rows(ring, [gens]))
    F = FreeFlag.from_complex(res, 2)
    return conjugate(F, random_unipotent(rng, F, density)).verified()


def random_top_perturbation(rng: np.random.Generator, F: FreeFlag, top: int = 3, max_degree: int = 1) -> RingMatrix:
    """Random nonzero ``δ`` from flag degree ``top`` to flag degree 0.

    For a folded resolution of length ``top`` the sum ``d + δ`` squares to
    zero: ``d`` vanishes on degree 0 and ``δ`` vanishes below ``top``.
    """
    if top % 2 == 0:
        raise InvalidArgumentError("δ must change parity, so top must be odd")
    if max(F.flag, default=0) > top:
        raise InvalidArgumentError(f"the flag is longer than {top}")
    sources = [c for c, i in enumerate(F.flag) if i == top]
    targets = [r for r, i in enumerate(F.flag) if i == 0]
    if not sources or not targets:
        raise InvalidArgumentError(f"the flag has nothing in degree {top} or degree 0")
    entries = {(r, c): random_poly(rng, F.ring, max_degree) for r in targets for c in sources}
    if not any(entries.values()):
        entries[(targets[0], sources[0])] = F.ring.one
    return RingMatrix.build(F.ring, F.rank, F.rank, entries)


def random_perturbed_flag(rng: np.random.Generator, field: Field | None = None, density: float = 0.3) -> FreeFlag:
    """Folded Koszul resolution of ``(x^a, y^b, z^c)`` plus a random ``δ`` from degree 3 to 0, conjugated.

    The differential is not a folded complex differential, so these flags
    lie outside the reach of :func:`random_finite_flag`.
    """
    ring = make_ring(field or Field.prime(101), 3)
    powers = [x ** int(rng.integers(1, 3)) for x in ring.gens]
    F = FreeFlag.from_complex(free_resolution(RingMatrix.from_rows(ring, [powers])), 2)
    perturbed = F.with_module(F.module.perturbed(random_top_perturbation(rng, F))).verified()
    return conjugate(perturbed, random_unipotent(rng, perturbed, density)).verified()


def default_rng(seed: int | None = None) -> np.random.Generator:
    return np.random.default_rng(config.SEED if seed is None else seed)
