"""Tests for chain complexes, free resolutions and the Horseshoe lemma.

Run with: pytest tests/test_homalg.py -v
"""

from __future__ import annotations

import pytest

from dmflags.dm_core import homology
from dmflags.errors import LengthCapError, NotExactError
from dmflags.homalg import (
    ChainComplex,
    ChainMap,
    ShortExactSequence,
    betti_numbers,
    comparison_lift,
    cone,
    free_resolution,
    hom_complex,
    horseshoe,
    lift_modulo,
    minimize_complex,
    tensor,
)
from dmflags.groebner import module_gb
from dmflags.matrix import GradedFreeModule, RingMatrix
from dmflags.samples import koszul_complex


@pytest.mark.unit
class TestResolutions:
    """Iterated syzygies with pruning."""

    def test_koszul_resolution(self, qq_xy) -> None:
        """R/(x, y) is resolved by the Koszul complex."""
        x, y = qq_xy.gens
        res = free_resolution(RingMatrix.from_rows(qq_xy, [[x, y]]))
        assert res.ranks == (1, 2, 1)
        assert res.augmentation_problems() == []
        assert betti_numbers(res) == {0: {0: 1}, 1: {1: 2}, 2: {2: 1}}

    def test_square_of_maximal_ideal(self, qq_xy) -> None:
        x, y = qq_xy.gens
        res = free_resolution(RingMatrix.from_rows(qq_xy, [[x**2, x * y, y**2]]))
        assert res.ranks == (1, 3, 2)
        assert homology(res.complex.to_dm()).lengths.get(1, 0) == 0

    def test_length_cap(self, qq_xy) -> None:
        x, y = qq_xy.gens
        with pytest.raises(LengthCapError):
            free_resolution(RingMatrix.from_rows(qq_xy, [[x, y]]), length_cap=1)

    def test_negative_cap_rejected(self, qq_xy) -> None:
        with pytest.raises(ValueError):
            free_resolution(RingMatrix.from_rows(qq_xy, [[qq_xy.gens[0]]]), length_cap=-1)

    def test_minimize_cancels_units(self, qq_xy) -> None:
        """R --1--> R is contractible and minimizes to the zero complex."""
        line = GradedFreeModule((0,))
        C = ChainComplex(qq_xy, {0: line, 1: line}, {1: RingMatrix.identity(qq_xy, 1)})
        small, sdr = minimize_complex(C)
        assert small.support == (0, -1)
        assert sdr.is_retract


@pytest.mark.unit
class TestMaps:
    """Comparison lifts, cones and tensor products."""

    def test_comparison_lift_of_identity(self, qq_xy) -> None:
        x, y = qq_xy.gens
        res = free_resolution(RingMatrix.from_rows(qq_xy, [[x, y]]))
        lift = comparison_lift(RingMatrix.identity(qq_xy, 1), res, res)
        assert lift.problems() == []

    def test_comparison_lift_of_multiplication(self, qq_xy) -> None:
        """Multiplication by x: R/(x^2, y) -> R/(x, y) lifts to a chain map."""
        x, y = qq_xy.gens
        F = free_resolution(RingMatrix.from_rows(qq_xy, [[x**2, y]]))
        G = free_resolution(RingMatrix.from_rows(qq_xy, [[x, y]]))
        lift = comparison_lift(RingMatrix.from_rows(qq_xy, [[x]]), F, G)
        assert lift.problems() == []

    def test_cone_of_identity_is_exact(self, qq_xy) -> None:
        K = koszul_complex(qq_xy)
        assert homology(cone(ChainMap.identity(K)).to_dm()).total == 0

    def test_tensor_of_koszul_factors(self, qq_xy) -> None:
        """Koszul(x) ⊗ Koszul(y) = Koszul(x, y)."""
        x, y = qq_xy.gens
        T = tensor(koszul_complex(qq_xy, [x]), koszul_complex(qq_xy, [y]))
        assert T.ranks == (1, 2, 1)
        assert homology(T.to_dm()).total == 1

    def test_hom_from_the_ring(self, qq_xy) -> None:
        R = ChainComplex(qq_xy, {0: GradedFreeModule((0,))}, {})
        K = koszul_complex(qq_xy)
        H = hom_complex(R, K)
        assert H.ranks == K.ranks
        assert homology(H.to_dm()).total == 1

    def test_hom_of_koszul(self, qq_xy) -> None:
        """Hom(K, K) has the homology of Ext(k, k): length 1 + 2 + 1."""
        K = koszul_complex(qq_xy)
        H = hom_complex(K, K)
        assert H.ranks == (1, 4, 6, 4, 1)
        assert homology(H.to_dm()).total == 4

    def test_lift_modulo(self, qq_xy) -> None:
        x, y = qq_xy.gens
        target = RingMatrix.from_rows(qq_xy, [[x * y + y**2]])
        X = lift_modulo(target, RingMatrix.from_rows(qq_xy, [[x]]), RingMatrix.from_rows(qq_xy, [[y**2]]))
        residue = target - RingMatrix.from_rows(qq_xy, [[x]]) @ X
        assert module_gb([{0: y**2}], 1, ring=qq_xy, track=False).contains(residue.column(0))


@pytest.mark.unit
class TestHorseshoe:
    """0 -> R/(x) -y-> R/(xy) -> R/(y) -> 0."""

    @staticmethod
    def sequence(ring, projection=None) -> ShortExactSequence:
        x, y = ring.gens
        return ShortExactSequence(
            inclusion=RingMatrix.from_rows(ring, [[y]]),
            projection=RingMatrix.identity(ring, 1) if projection is None else projection,
            p_a=RingMatrix.from_rows(ring, [[x]]),
            p_b=RingMatrix.from_rows(ring, [[x * y]]),
            p_c=RingMatrix.from_rows(ring, [[y]]),
        )

    def test_exact_sequence_accepted(self, qq_xy) -> None:
        assert self.sequence(qq_xy).problems() == []

    def test_horseshoe_resolution(self, qq_xy) -> None:
        x, y = qq_xy.gens
        FA = free_resolution(RingMatrix.from_rows(qq_xy, [[x]]))
        FC = free_resolution(RingMatrix.from_rows(qq_xy, [[y]]))
        FB, alphas = horseshoe(self.sequence(qq_xy), FA, FC)
        assert FB.ranks == (2, 2)
        assert FB.augmentation_problems() == []
        assert set(alphas) == {1}

    def test_not_exact(self, qq_xy) -> None:
        x, _ = qq_xy.gens
        FA = free_resolution(RingMatrix.from_rows(qq_xy, [[x]]))
        FC = free_resolution(RingMatrix.from_rows(qq_xy, [[qq_xy.gens[1]]]))
        broken = self.sequence(qq_xy, RingMatrix.from_rows(qq_xy, [[x]]))
        with pytest.raises(NotExactError):
            horseshoe(broken, FA, FC)
