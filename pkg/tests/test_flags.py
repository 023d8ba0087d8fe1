"""Tests for free flags, their anchors, morphisms and sign twists.

Run with: pytest tests/test_flags.py -v
"""

from __future__ import annotations

import pytest

from dmflags.dm_core import dm_check
from dmflags.errors import InvariantError, NotFlagError, NotInvertibleError
from dmflags.flags import (
    FlagMorphism,
    FreeFlag,
    anchor,
    anchor_column,
    columns,
    dm_to_flag,
    flag_homology_via_anchor,
    flag_to_dm,
    is_anchored_resolution,
    minimize_anchor,
    transfer_anchor,
    triangular_invert,
    twist_morphism,
    twist_phi,
    twist_phi_inverse,
    twisted_morphism_problems,
)
from dmflags.matrix import RingMatrix
from dmflags.perturb import SdrData
from dmflags.samples import conjugate, koszul_complex, random_unipotent


@pytest.mark.unit
class TestLayout:
    """Generators, components and strata."""

    def test_example_strata(self, be) -> None:
        F = be.F
        assert F.flag == (0, 1, 1, 2)
        assert F.height == 2
        assert sorted(F.strata()) == [0, 1]
        assert F.perturbation == RingMatrix.build(F.ring, 4, 4, {(0, 3): F.ring.one})
        assert F.generators == [(0, 0, 1), (1, 0, 0), (1, 0, 0), (2, 0, -1)]

    def test_from_complex(self, qq_xy) -> None:
        F = FreeFlag.from_complex(koszul_complex(qq_xy), 2)
        assert F.flag == (0, 2, 1, 1)
        assert columns(F) == [0]
        assert F.max_stratum == 0
        assert F.perturbation.is_zero()
        assert list(F.components) == [(0, 0), (1, 0), (2, 0)]

    def test_kdelta_strata(self, kdelta) -> None:
        assert sorted(kdelta.strata()) == [0, 2]
        assert kdelta.height == 3

    def test_entry_must_drop_flag(self, qq_x) -> None:
        with pytest.raises(NotFlagError) as excinfo:
            FreeFlag.from_generators(qq_x, 1, [(0, 0, 0), (0, 0, 0)], RingMatrix.from_rows(qq_x, [[0, 1], [0, 0]]))
        assert excinfo.value.block == ((0, 0), (0, 0))

    def test_negative_flag_degree(self, qq_x) -> None:
        with pytest.raises(NotFlagError, match="nonnegative"):
            FreeFlag.from_generators(qq_x, 1, [(-1, 0, 0)], RingMatrix.zeros(qq_x, 1, 1))

    def test_forget_and_reattach(self, be) -> None:
        D = flag_to_dm(be.F)
        assert D == be.F.module
        assert dm_to_flag(D, be.F.flag).flag == be.F.flag
        with pytest.raises(NotFlagError):
            dm_to_flag(D, (0,) * D.rank)


@pytest.mark.unit
class TestAnchors:
    """Anchor complexes and homology through the anchor."""

    def test_example_anchor(self, be) -> None:
        A = anchor(be.F)
        assert A.ranks == (1, 2, 1)
        assert is_anchored_resolution(be.F)
        assert flag_homology_via_anchor(be.F) == {0: 1}

    def test_kdelta_homology(self, kdelta) -> None:
        assert anchor_column(kdelta, 0).ranks == (1, 3, 3, 1)
        assert flag_homology_via_anchor(kdelta) == {0: 1}

    def test_not_anchored(self, qq_x) -> None:
        F = FreeFlag.from_generators(qq_x, 1, [(0, 0, 0), (1, 0, 0)], RingMatrix.zeros(qq_x, 2, 2))
        assert not is_anchored_resolution(F)
        with pytest.raises(InvariantError, match="not anchored"):
            flag_homology_via_anchor(F)

    def test_minimize_without_units(self, be) -> None:
        sdr, small_flag = minimize_anchor(be.F)
        assert small_flag == be.F.flag
        flag, _ = transfer_anchor(be.F, sdr, small_flag)
        assert flag.differential == be.F.differential

    def test_minimize_contractible_anchor(self, qq_x) -> None:
        """``R <-[x 1]- R^2 <-(1, -x)- R`` with an extra ``x^2`` in δ_1."""
        (x,) = qq_x.gens
        d = RingMatrix.from_rows(qq_x, [[0, x, 1, x**2], [0, 0, 0, 1], [0, 0, 0, -x], [0, 0, 0, 0]])
        F = FreeFlag.from_generators(qq_x, 1, [(0, 0, 0), (1, 0, 0), (1, 0, 0), (2, 0, 0)], d).verified()
        sdr, small_flag = minimize_anchor(F)
        assert small_flag == ()
        flag, perturbed = transfer_anchor(F, sdr, small_flag)
        assert flag.rank == 0
        assert perturbed.problems() == []

    def test_transfer_needs_anchor(self, be) -> None:
        with pytest.raises(InvariantError, match="connection mismatch"):
            transfer_anchor(be.F, SdrData.identity(be.D), ())


@pytest.mark.unit
class TestMorphisms:
    """Flag morphisms and their triangular inverses."""

    def test_must_not_raise_flag(self, be) -> None:
        with pytest.raises(NotFlagError, match="raises flag degree"):
            FlagMorphism(be.F, be.F, RingMatrix.build(be.F.ring, 4, 4, {(3, 0): be.F.ring.one}))

    def test_triangular_invert(self, be, rng) -> None:
        g = random_unipotent(rng, be.F, density=1.0)
        phi = FlagMorphism(be.F, conjugate(be.F, g), g).verified()
        inverse = triangular_invert(phi)
        assert inverse.matrix == g.inverse()
        assert (phi @ inverse).matrix == RingMatrix.identity(be.F.ring, 4)

    def test_singular_anchor_part(self, be) -> None:
        phi = FlagMorphism(be.F, be.F, RingMatrix.zeros(be.F.ring, 4, 4))
        with pytest.raises(NotInvertibleError, match="anchor part"):
            triangular_invert(phi)


@pytest.mark.unit
class TestTwist:
    """The (-1)^t sign conventions."""

    def test_twisted_square_zero(self, be) -> None:
        T = twist_phi(be.F)
        assert (T.bar() @ T.delta).is_zero()
        assert dm_check(T.to_dm()).passed

    def test_twist_round_trip(self, kdelta) -> None:
        assert twist_phi_inverse(twist_phi(kdelta)).differential == kdelta.differential

    def test_morphism_twist_is_involution(self, be, rng) -> None:
        g = random_unipotent(rng, be.F, density=1.0)
        target = conjugate(be.F, g)
        phi = FlagMorphism(be.F, target, g)
        twisted = twist_morphism(phi)
        assert twist_morphism(FlagMorphism(be.F, target, twisted)) == g
        assert twisted_morphism_problems(twist_phi(be.F), twist_phi(target), twisted) == []

    def test_twisted_morphism_rejected(self, be) -> None:
        T = twist_phi(be.F)
        psi = RingMatrix.build(be.F.ring, 4, 4, {(1, 1): be.F.ring.one})
        assert twisted_morphism_problems(T, T, psi) == ["δ′ψ + ψ̄δ is nonzero"]
