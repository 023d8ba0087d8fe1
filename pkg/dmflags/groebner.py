"""Gröbner bases of submodules of free modules over a polynomial ring.

Module terms are compared position-over-term with the *lower* position
dominant, so the leading term of a vector sits in its first nonzero
coordinate. Buchberger's algorithm runs with the normal selection strategy,
the chain criterion everywhere and the product criterion for ideals.
Cofactors (expressions of basis elements in the input generators) are
tracked on request and drive :func:`lift_through`.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

from sympy.polys.rings import PolyElement, PolyRing

from dmflags.errors import NotInImageError, RingMismatchError, ShapeError
from dmflags.matrix import RingMatrix, Vector


logger = logging.getLogger(__name__)

Monomial = tuple[int, ...]


@dataclass
class _Element:
    vec: Vector
    pos: int
    lm: Monomial
    lc: object
    cof: Vector | None


def _element(vec: Vector, cof: Vector | None) -> _Element:
    pos = min(vec)
    poly = vec[pos]
    return _Element(vec, pos, poly.LM, poly.LC, cof)


def _sub_scaled(target: Vector, factor: PolyElement, source: Vector) -> Vector:
    """``target - factor * source`` on sparse vectors."""
    out = dict(target)
    for pos, value in source.items():
        total = out.get(pos, factor.ring.zero) - factor * value
        if total:
            out[pos] = total
        else:
            out.pop(pos, None)
    return out


def _divide(
    ring: PolyRing,
    vec: Mapping[int, PolyElement],
    basis: Sequence[_Element],
    by_pos: Mapping[int, Sequence[int]],
    skip: int | None = None,
) -> tuple[Vector, dict[int, PolyElement]]:
    """Full division: ``vec = sum q[i] * basis[i] + remainder``."""
    domain = ring.domain
    current = {pos: value for pos, value in vec.items() if value}
    remainder: Vector = {}
    quotients: dict[int, PolyElement] = {}
    while current:
        pos = min(current)
        poly = current[pos]
        lm, lc = poly.LM, poly.LC
        for index in by_pos.get(pos, ()):
            if index == skip:
                continue
            element = basis[index]
            quo = ring.monomial_div(lm, element.lm)
            if quo is None:
                continue
            term = ring.term_new(quo, domain.quo(lc, element.lc))
            current = _sub_scaled(current, term, element.vec)
            quotients[index] = quotients.get(index, ring.zero) + term
            break
        else:
            lead = ring.term_new(lm, lc)
            remainder[pos] = remainder.get(pos, ring.zero) + lead
            rest = poly - lead
            if rest:
                current[pos] = rest
            else:
                del current[pos]
    return remainder, {i: q for i, q in quotients.items() if q}


def _combine(ring: PolyRing, base: Vector | None, quotients: Mapping[int, PolyElement], basis: Sequence[_Element]) -> Vector | None:
    if base is None:
        return None
    out = dict(base)
    for index, quotient in quotients.items():
        out = _sub_scaled(out, quotient, basis[index].cof or {})
    return out


def _index_by_pos(basis: Sequence[_Element], alive: Sequence[bool] | None = None) -> dict[int, list[int]]:
    by_pos: dict[int, list[int]] = {}
    for index, element in enumerate(basis):
        if alive is None or alive[index]:
            by_pos.setdefault(element.pos, []).append(index)
    return by_pos


@dataclass(frozen=True, eq=False)
class ModuleGB:
    """Reduced Gröbner basis of the submodule spanned by ``generators``."""

    ring: PolyRing
    rank: int
    generators: tuple[Vector, ...]
    basis: tuple[_Element, ...]

    @property
    def vectors(self) -> list[Vector]:
        return [element.vec for element in self.basis]

    @property
    def transformation(self) -> list[Vector | None]:
        """Cofactors: ``basis[i] == sum cof[k] * generators[k]``."""
        return [element.cof for element in self.basis]

    def normal_form(self, vec: Mapping[int, PolyElement]) -> tuple[Vector, list[PolyElement]]:
        """Remainder and one quotient per basis element."""
        remainder, quotients = _divide(self.ring, vec, self.basis, _index_by_pos(self.basis))
        return remainder, [quotients.get(i, self.ring.zero) for i in range(len(self.basis))]

    def contains(self, vec: Mapping[int, PolyElement]) -> bool:
        return not self.normal_form(vec)[0]

    def lift(self, vec: Mapping[int, PolyElement]) -> Vector:
        """Coefficients ``c`` over the generators with ``sum c[k] gens[k] == vec``."""
        remainder, quotients = _divide(self.ring, vec, self.basis, _index_by_pos(self.basis))
        if remainder:
            raise NotInImageError("vector is not in the span of the generators")
        out: Vector = {}
        for index, quotient in quotients.items():
            cof = self.basis[index].cof
            if cof is None:
                raise ValueError("Gröbner basis was computed without cofactors")
            out = _sub_scaled(out, -quotient, cof)
        return out


def _spair(ring: PolyRing, a: _Element, b: _Element) -> tuple[Vector, Vector | None]:
    domain = ring.domain
    lcm = ring.monomial_lcm(a.lm, b.lm)
    ta = ring.term_new(ring.monomial_div(lcm, a.lm), domain.quo(domain.one, a.lc))
    tb = ring.term_new(ring.monomial_div(lcm, b.lm), domain.quo(domain.one, b.lc))
    vec = _sub_scaled({p: v * ta for p, v in a.vec.items()}, tb, b.vec)
    cof = None
    if a.cof is not None and b.cof is not None:
        cof = _sub_scaled({p: v * ta for p, v in a.cof.items()}, tb, b.cof)
    return vec, cof


def _buchberger(ring: PolyRing, rank: int, gens: Sequence[Vector], track: bool) -> list[_Element]:
    basis: list[_Element] = []
    for k, vec in enumerate(gens):
        if vec:
            basis.append(_element(dict(vec), {k: ring.one} if track else None))
    pairs: set[tuple[int, int]] = {
        (i, j) for i, j in itertools.combinations(range(len(basis)), 2) if basis[i].pos == basis[j].pos
    }
    treated: set[tuple[int, int]] = set()

    def pair_key(pair: tuple[int, int]) -> tuple:
        a, b = basis[pair[0]], basis[pair[1]]
        return (-a.pos, ring.order(ring.monomial_lcm(a.lm, b.lm)), pair)

    def chain_redundant(i: int, j: int) -> bool:
        lcm = ring.monomial_lcm(basis[i].lm, basis[j].lm)
        for k, element in enumerate(basis):
            if k in (i, j) or element.pos != basis[i].pos:
                continue
            if ring.monomial_div(lcm, element.lm) is None:
                continue
            if tuple(sorted((i, k))) in treated and tuple(sorted((j, k))) in treated:
                return True
        return False

    steps = 0
    while pairs:
        pair = min(pairs, key=pair_key)
        pairs.discard(pair)
        i, j = pair
        a, b = basis[i], basis[j]
        skip = rank == 1 and ring.monomial_lcm(a.lm, b.lm) == ring.monomial_mul(a.lm, b.lm)
        if not skip:
            skip = chain_redundant(i, j)
        treated.add(pair)
        if skip:
            continue
        steps += 1
        vec, cof = _spair(ring, a, b)
        remainder, quotients = _divide(ring, vec, basis, _index_by_pos(basis))
        if not remainder:
            continue
        cof = _combine(ring, cof, quotients, basis)
        new = _element(remainder, cof)
        index = len(basis)
        basis.append(new)
        pairs.update((k, index) for k in range(index) if basis[k].pos == new.pos)
    logger.debug("buchberger: %d reductions, %d basis elements before minimalization", steps, len(basis))
    return basis


def _monic(ring: PolyRing, element: _Element) -> _Element:
    inv = ring.domain.quo(ring.domain.one, element.lc)
    vec = {p: v.mul_ground(inv) for p, v in element.vec.items()}
    cof = None if element.cof is None else {p: v.mul_ground(inv) for p, v in element.cof.items()}
    return _element(vec, cof)


def _minimalize_interreduce(ring: PolyRing, basis: list[_Element]) -> list[_Element]:
    alive = [True] * len(basis)
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            if i == j or not alive[j] or a.pos != b.pos:
                continue
            if ring.monomial_div(a.lm, b.lm) is not None and (a.lm != b.lm or j < i):
                alive[i] = False
                break
    kept = [element for element, ok in zip(basis, alive) if ok]
    by_pos = _index_by_pos(kept)
    reduced: list[_Element] = list(kept)
    for index, element in enumerate(reduced):
        remainder, quotients = _divide(ring, element.vec, reduced, by_pos, skip=index)
        cof = _combine(ring, element.cof, quotients, reduced)
        reduced[index] = _monic(ring, _element(remainder, cof))
    reduced.sort(key=lambda e: ring.order(e.lm), reverse=True)
    reduced.sort(key=lambda e: e.pos)
    return reduced


def module_gb(
    gens: Sequence[Mapping[int, PolyElement]] | RingMatrix,
    rank: int | None = None,
    ring: PolyRing | None = None,
    track: bool = True,
) -> ModuleGB:
    """Reduced Gröbner basis of the span of ``gens`` inside ``R^rank``.

    ``gens`` may be a matrix, whose columns are the generators.
    """
    if isinstance(gens, RingMatrix):
        ring = gens.ring
        rank = gens.nrows
        vectors = gens.columns()
    else:
        vectors = [dict(v) for v in gens]
        if ring is None:
            rings = {id(p.ring): p.ring for v in vectors for p in v.values()}
            if len(rings) > 1:
                raise RingMismatchError("generators mix polynomial rings")
            if not rings:
                raise ValueError("a ring is required for an all-zero generator list")
            ring = next(iter(rings.values()))
    if rank is None:
        raise ValueError("ambient rank is required")
    for k, vec in enumerate(vectors):
        for pos, value in vec.items():
            if not 0 <= pos < rank:
                raise ShapeError(f"generator {k} has a coordinate at {pos} outside rank {rank}")
            if value.ring is not ring:
                raise RingMismatchError(f"generator {k} mixes polynomial rings")
    vectors = [{p: v for p, v in vec.items() if v} for vec in vectors]
    basis = _minimalize_interreduce(ring, _buchberger(ring, rank, vectors, track))
    return ModuleGB(ring, rank, tuple(vectors), tuple(basis))


def verify_groebner(gb: ModuleGB) -> bool:
    """Re-check Buchberger's criterion: every S-pair reduces to zero."""
    by_pos = _index_by_pos(gb.basis)
    for a, b in itertools.combinations(gb.basis, 2):
        if a.pos != b.pos:
            continue
        vec, _ = _spair(gb.ring, a, b)
        if _divide(gb.ring, vec, gb.basis, by_pos)[0]:
            return False
    return True


def normal_form(vec: Mapping[int, PolyElement], gb: ModuleGB) -> tuple[Vector, list[PolyElement]]:
    return gb.normal_form(vec)


def lift_through(vec: Mapping[int, PolyElement], matrix: RingMatrix) -> Vector:
    """A vector ``u`` with ``matrix @ u == vec``; raises NotInImageError."""
    if not any(vec.values()):
        return {}
    return module_gb(matrix).lift(vec)


def lift_matrix(target: RingMatrix, through: RingMatrix) -> RingMatrix:
    """A matrix ``X`` with ``through @ X == target``, column by column."""
    if target.nrows != through.nrows:
        raise ShapeError(f"cannot lift {target.shape} through {through.shape}")
    if target.is_zero():
        return RingMatrix.zeros(target.ring, through.ncols, target.ncols)
    gb = module_gb(through)
    columns = []
    for j, column in enumerate(target.columns()):
        try:
            columns.append(gb.lift(column) if column else {})
        except NotInImageError as exc:
            raise NotInImageError(f"column {j} is not in the image") from exc
    return RingMatrix.from_columns(target.ring, through.ncols, columns)


def syzygies(matrix: RingMatrix) -> RingMatrix:
    """Columns generating the kernel of ``matrix``."""
    ring, m, n = matrix.ring, matrix.nrows, matrix.ncols
    augmented = []
    for j, column in enumerate(matrix.columns()):
        vec = dict(column)
        vec[m + j] = ring.one
        augmented.append(vec)
    gb = module_gb(augmented, m + n, ring=ring, track=False)
    kernel = [
        {pos - m: value for pos, value in element.vec.items()}
        for element in gb.basis
        if element.pos >= m
    ]
    return RingMatrix.from_columns(ring, n, kernel)


def _pure_power_bounds(ring: PolyRing, monomials: Sequence[Monomial]) -> list[int] | None:
    bounds = []
    for var in range(ring.ngens):
        powers = [
            lm[var]
            for lm in monomials
            if lm[var] > 0 and all(e == 0 for k, e in enumerate(lm) if k != var)
        ]
        if not powers:
            return None
        bounds.append(min(powers))
    return bounds


def quotient_length(presentation: RingMatrix) -> int | float:
    """Vector-space dimension of ``coker(presentation)``; ``math.inf`` if infinite."""
    ring = presentation.ring
    gb = module_gb(presentation, track=False)
    total = 0
    for pos in range(presentation.nrows):
        monomials = [element.lm for element in gb.basis if element.pos == pos]
        if any(sum(lm) == 0 for lm in monomials):
            continue
        bounds = _pure_power_bounds(ring, monomials)
        if bounds is None:
            return math.inf
        for candidate in itertools.product(*(range(b) for b in bounds)):
            if all(ring.monomial_div(candidate, lm) is None for lm in monomials):
                total += 1
    return total


def krull_dimension(ideal_gens: Sequence[PolyElement], ring: PolyRing | None = None) -> int:
    """Dimension of ``R/I`` from a maximal independent set of variables; -1 for ``I = R``."""
    gens = [g for g in ideal_gens if g]
    if ring is None:
        if not ideal_gens:
            raise ValueError("a ring is required for an empty generator list")
        ring = ideal_gens[0].ring
    if not gens:
        return ring.ngens
    gb = module_gb([{0: g} for g in gens], 1, ring=ring, track=False)
    monomials = [element.lm for element in gb.basis]
    if any(sum(lm) == 0 for lm in monomials):
        return -1
    supports = [frozenset(k for k, e in enumerate(lm) if e) for lm in monomials]
    for size in range(ring.ngens, -1, -1):
        for subset in itertools.combinations(range(ring.ngens), size):
            chosen = frozenset(subset)
            if not any(support <= chosen for support in supports):
                return size
    return 0


@dataclass(frozen=True, eq=False)
class Subquotient:
    """The module ``(im G + im N) / im N`` inside a free module."""

    generators: RingMatrix
    relations: RingMatrix

    def __post_init__(self) -> None:
        if self.generators.nrows != self.relations.nrows:
            raise ShapeError("generators and relations live in different free modules")

    @property
    def ring(self) -> PolyRing:
        return self.generators.ring

    @property
    def ngens(self) -> int:
        return self.generators.ncols

    def presentation(self) -> RingMatrix:
        """Relations among the generators: a matrix with ``ngens`` rows."""
        if self.ngens == 0:
            return RingMatrix.zeros(self.ring, 0, 0)
        stacked = RingMatrix.hstack(self.ring, self.generators.nrows, [self.generators, self.relations])
        syz = syzygies(stacked)
        return syz.submatrix(range(self.ngens), range(syz.ncols))

    def length(self) -> int | float:
        return quotient_length(self.presentation())
