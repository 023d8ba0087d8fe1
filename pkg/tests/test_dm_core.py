"""Tests for differential modules, their morphisms and homology.

Run with: pytest tests/test_dm_core.py -v
"""

from __future__ import annotations

import pytest

from dmflags import config
from dmflags.coeff_ring import Field, make_ring
from dmflags.dm_core import (
    DiffModule,
    DmMorphism,
    HomotopySquare,
    cone_functor,
    direct_sum,
    dm_check,
    dm_cone,
    dm_hom,
    dm_tensor,
    fold,
    gaussian_reduction,
    homology,
    is_homotopy,
    normalize_key,
    unfold_z2,
)
from dmflags.errors import CharacteristicError, InvariantError, ShapeError
from dmflags.matrix import GradedFreeModule, RingMatrix
from dmflags.samples import folded_pair, koszul_complex


def contractible(ring, modulus: int = 2) -> DiffModule:
    """``R --1--> R`` from component 1 to component 0."""
    return DiffModule.from_blocks(
        ring,
        modulus,
        {0: GradedFreeModule((0,)), 1: GradedFreeModule((0,))},
        {1: RingMatrix.identity(ring, 1)},
    )


@pytest.mark.unit
class TestChecks:
    """dm_check and verified."""

    def test_example_passes(self, be) -> None:
        report = dm_check(be.D, graded=True)
        assert report.passed
        assert report.summary() == "ok"

    def test_square_not_zero(self, qq_xy) -> None:
        x, _ = qq_xy.gens
        D = DiffModule.from_blocks(
            qq_xy,
            1,
            {0: GradedFreeModule((0, 0))},
            {0: RingMatrix.from_rows(qq_xy, [[x, 1], [0, x]])},
            shift=1,
        )
        report = dm_check(D)
        assert not report.square_zero
        assert (0, 0, "square is nonzero") in report.offending
        with pytest.raises(InvariantError, match="square is nonzero"):
            D.verified()

    def test_wrong_component(self, qq_xy) -> None:
        """An entry inside one component does not have degree -1."""
        x, _ = qq_xy.gens
        D = DiffModule(
            qq_xy,
            2,
            {0: GradedFreeModule((0,)), 1: GradedFreeModule((0,))},
            RingMatrix.build(qq_xy, 2, 2, {(0, 0): x}),
        )
        report = dm_check(D)
        assert not report.degree_ok
        assert (0, 0, "wrong component degree") in report.offending

    def test_homogeneity_only_when_graded(self, qq_xy) -> None:
        x, _ = qq_xy.gens
        D = DiffModule.from_blocks(
            qq_xy,
            2,
            {0: GradedFreeModule((0,)), 1: GradedFreeModule((1,))},
            {1: RingMatrix.from_rows(qq_xy, [[x + 1]])},
        )
        assert dm_check(D).passed
        assert not dm_check(D, graded=True).homogeneous

    def test_block_shape_checked(self, qq_xy) -> None:
        with pytest.raises(ShapeError, match="block from 1"):
            DiffModule.from_blocks(
                qq_xy,
                2,
                {0: GradedFreeModule((0,)), 1: GradedFreeModule((0, 0))},
                {1: RingMatrix.identity(qq_xy, 1)},
            )

    def test_keys_normalized(self) -> None:
        assert normalize_key(-1, 2) == 1
        assert normalize_key(-1, 0) == -1


@pytest.mark.unit
class TestFold:
    """Folding complexes and unfolding by ℤ/2."""

    def test_folded_pair(self) -> None:
        """Non-isomorphic complexes become isomorphic after folding."""
        pair = folded_pair()
        assert homology(pair.first.to_dm()).support == [2]
        assert homology(pair.second.to_dm()).support == [0]
        assert pair.iso.problems() == []

    def test_fold_layout(self, koszul_xy) -> None:
        assert koszul_xy.modulus == 2
        assert [koszul_xy.component(k).rank for k in koszul_xy.keys] == [2, 2]
        assert dm_check(koszul_xy, graded=True).passed

    def test_fold_needs_divisor(self, koszul_x) -> None:
        with pytest.raises(ShapeError, match="does not divide"):
            fold(koszul_x, 3)
        with pytest.raises(ShapeError):
            fold(koszul_x, 0)

    def test_unfold(self, koszul_x) -> None:
        unfolded = unfold_z2(fold(koszul_x, 1))
        assert unfolded.total_fold().rank == 4
        assert dm_check(unfolded.module).passed
        cyclic = unfolded.to_cyclic()
        assert cyclic.modulus == 2
        assert dm_check(cyclic).passed

    def test_even_modulus_not_cyclic(self, koszul_x) -> None:
        with pytest.raises(ShapeError, match="odd d"):
            unfold_z2(koszul_x).to_cyclic()


@pytest.mark.unit
class TestMonoidal:
    """Tensor and Hom."""

    def test_tensor_square(self, koszul_x) -> None:
        T = dm_tensor(koszul_x, koszul_x)
        assert T.rank == 4
        assert dm_check(T).passed

    def test_hom(self, koszul_xy) -> None:
        H = dm_hom(koszul_xy, koszul_xy)
        assert H.rank == 16
        assert dm_check(H).passed

    def test_odd_modulus_needs_characteristic_two(self, koszul_x) -> None:
        ungraded = fold(koszul_x, 1)
        with pytest.raises(CharacteristicError):
            dm_tensor(ungraded, ungraded)
        with pytest.raises(CharacteristicError):
            dm_hom(ungraded, ungraded)

    def test_characteristic_two_allows_odd_modulus(self) -> None:
        ring = make_ring(Field.prime(2), ["x"])
        ungraded = fold(koszul_complex(ring), 1)
        assert dm_check(dm_tensor(ungraded, ungraded)).passed

    def test_moduli_must_agree(self, koszul_x) -> None:
        with pytest.raises(ShapeError, match="moduli differ"):
            dm_tensor(koszul_x, fold(koszul_x, 1))


@pytest.mark.unit
class TestMorphisms:
    """Morphisms, homotopies, cones."""

    def test_non_commuting_map(self, koszul_x, qq_x) -> None:
        (x,) = qq_x.gens
        f = DmMorphism(koszul_x, koszul_x, RingMatrix.build(qq_x, 2, 2, {(0, 0): x}))
        assert "does not commute with the differentials" in f.problems()
        with pytest.raises(InvariantError):
            f.verified()

    def test_map_between_components(self, koszul_x, qq_x) -> None:
        f = DmMorphism(koszul_x, koszul_x, RingMatrix.build(qq_x, 2, 2, {(0, 1): qq_x.one}))
        assert "entries between different components" in f.problems()

    def test_contracting_homotopy(self, qq_x) -> None:
        C = contractible(qq_x)
        h = RingMatrix.build(qq_x, 2, 2, {(1, 0): qq_x.one})
        assert is_homotopy(RingMatrix.identity(qq_x, 2), RingMatrix.zeros(qq_x, 2, 2), h, C, C)

    def test_cone_of_identity(self, koszul_xy) -> None:
        cone = dm_cone(DmMorphism.identity(koszul_xy))
        assert dm_check(cone).passed
        assert homology(cone).total == 0

    def test_cone_functor_of_identity_square(self, koszul_x) -> None:
        square = HomotopySquare.identity(DmMorphism.identity(koszul_x))
        induced = cone_functor(square).verified()
        assert induced.matrix == RingMatrix.identity(koszul_x.ring, 4)

    def test_square_pasting(self, koszul_x) -> None:
        square = HomotopySquare.identity(DmMorphism.identity(koszul_x))
        assert square.then(square).problems() == []


@pytest.mark.unit
class TestHomology:
    """Unit cancellation and homology lengths."""

    def test_reduction_is_retract(self, be) -> None:
        D = be.F.module
        red = gaussian_reduction(D)
        n = D.rank
        assert len(red.kept) == n - 2
        lhs = red.iota @ red.p - RingMatrix.identity(D.ring, n)
        assert lhs == D.differential @ red.h + red.h @ D.differential
        assert red.p @ D.differential @ red.iota == red.differential

    def test_contractible_vanishes(self, qq_x) -> None:
        assert gaussian_reduction(contractible(qq_x)).kept == ()
        assert homology(contractible(qq_x)).total == 0

    def test_koszul_homology(self, koszul_xy) -> None:
        H = homology(koszul_xy)
        assert H.lengths == {0: 1, 1: 0}
        assert H.support == [0]

    def test_unreduced_agrees(self, koszul_xy) -> None:
        assert homology(koszul_xy, reduce=False).lengths == homology(koszul_xy).lengths

    def test_threads_agree(self, koszul_xy, monkeypatch) -> None:
        monkeypatch.setattr(config, "THREADS", 2)
        assert homology(direct_sum(koszul_xy, koszul_xy)).lengths == {0: 2, 1: 0}
