"""Tests for CE resolutions, their degeneration and lifting of morphisms.

Run with: pytest tests/test_resolve.py -v
"""

from __future__ import annotations

import pytest

from dmflags.dm_core import DiffModule, DmMorphism, is_homotopy
from dmflags.errors import InvariantError
from dmflags.flags import FreeFlag, anchor, is_anchored_resolution
from dmflags.matrix import GradedFreeModule, RingMatrix
from dmflags.resolve import (
    AnchoredResolution,
    anchored_as_retract,
    ce_equivalence,
    ce_lift,
    ce_resolution,
    degenerate_to_homology,
    flag_isomorphism,
    flag_preserve_up_to_homotopy,
    functorial_degeneration,
    homotopy_between_lifts,
    lift_along_quasi_iso,
    minimal_summand,
    quasiminimal,
)
from dmflags.samples import koszul_complex, random_finite_flag, random_perturbed_flag


def given_resolution(be) -> AnchoredResolution:
    """The worked flag resolution ``η: F -> D``."""
    return AnchoredResolution(be.F, {0: anchor(be.F)}, None, be.eta).verified()


@pytest.mark.unit
class TestCeResolution:
    """Construction and block form of CE resolutions."""

    def test_example(self, be) -> None:
        ce = ce_resolution(be.D)
        assert ce.problems() == []
        assert ce.block_form_problems() == []
        assert list(ce.summary()) == ["0"]

    def test_folded_koszul(self, koszul_xy) -> None:
        ce = ce_resolution(koszul_xy, minimize=True)
        assert ce.problems() == []
        assert ce.summary()["0"]["homology"] == [1, 2, 1]

    def test_integer_grading(self, qq_xy) -> None:
        ce = ce_resolution(koszul_complex(qq_xy).to_dm())
        assert ce.problems() == []

    def test_rejects_non_modules(self, qq_xy) -> None:
        x, _ = qq_xy.gens
        D = DiffModule.from_blocks(
            qq_xy, 1, {0: GradedFreeModule((0, 0))}, {0: RingMatrix.from_rows(qq_xy, [[x, 1], [0, x]])}
        )
        with pytest.raises(InvariantError, match="not a differential module"):
            ce_resolution(D)

    def test_identity_lift(self, be) -> None:
        G = ce_resolution(be.D)
        lift = ce_lift(DmMorphism.identity(be.D), G, G)
        assert G.augmentation.matrix @ lift.matrix == G.augmentation.matrix

    def test_lift_needs_matching_targets(self, be, koszul_xy) -> None:
        G = ce_resolution(be.D)
        with pytest.raises(InvariantError, match="connection mismatch"):
            ce_lift(DmMorphism.identity(koszul_xy), G, G)

    def test_equivalence(self, be) -> None:
        G = ce_resolution(be.D)
        G_min = ce_resolution(be.D, minimize=True)
        eq = ce_equivalence(G, G_min)
        one = RingMatrix.identity(be.D.ring, G.rank)
        assert is_homotopy((eq.backward @ eq.forward).matrix, one, eq.h_source, G.module, G.module)


@pytest.mark.unit
class TestDegeneration:
    """Anchored resolutions from CE resolutions."""

    def test_degenerate(self, be) -> None:
        A = degenerate_to_homology(be.D)
        assert A.problems() == []
        assert is_anchored_resolution(A.flag)
        assert A.sdr_from_ce is not None and A.sdr_from_ce.is_strong

    def test_quasiminimal_shape(self, be) -> None:
        Q = quasiminimal(be.D)
        assert Q.flag.rank == 4
        assert sorted(Q.flag.flag) == [0, 1, 1, 2]
        assert Q.flag.delta0.unit_positions() == []

    def test_quasiminimal_integer_grading(self, qq_xy) -> None:
        Q = quasiminimal(koszul_complex(qq_xy).to_dm())
        assert Q.flag.rank == 4

    def test_minimal_summand(self, be) -> None:
        A, retract = minimal_summand(degenerate_to_homology(be.D))
        assert A.flag.rank == 4
        assert retract.is_retract

    def test_functorial_degeneration(self, be) -> None:
        x, _ = be.D.ring.gens
        phi = DmMorphism(be.D, be.D, RingMatrix.identity(be.D.ring, 2).scale(x)).verified()
        source, target, psi, square = functorial_degeneration(phi)
        assert square.problems() == []
        assert psi.source is source.flag and psi.target is target.flag


@pytest.mark.golden
class TestWorkedExample:
    """The quasiminimal resolution agrees with the worked flag resolution."""

    def test_given_resolution_is_anchored(self, be) -> None:
        assert given_resolution(be).problems() == []

    def test_flag_isomorphism(self, be) -> None:
        psi, inverse = flag_isomorphism(quasiminimal(be.D), given_resolution(be))
        psi.verified()
        assert (inverse @ psi).matrix == RingMatrix.identity(be.D.ring, 4)

    def test_lift_along_quasi_iso(self, be) -> None:
        Q = quasiminimal(be.D)
        given = given_resolution(be)
        phi, s = lift_along_quasi_iso(Q.flag, Q.augmentation, given.augmentation)
        assert is_homotopy(be.eta.matrix @ phi.matrix, Q.augmentation.matrix, s, Q.flag.module, be.D)

    def test_homotopy_between_equal_lifts(self, be) -> None:
        one = DmMorphism.identity(be.F.module)
        S, _ = homotopy_between_lifts(be.F, one, one, be.eta)
        assert is_homotopy(one.matrix, one.matrix, S, be.F.module, be.F.module)

    def test_lifts_must_agree_downstairs(self, be) -> None:
        with pytest.raises(InvariantError, match="differs"):
            homotopy_between_lifts(be.F, DmMorphism.identity(be.F.module), DmMorphism.zero(be.F.module, be.F.module), be.eta)

    def test_flag_preserve_up_to_homotopy(self, be) -> None:
        """A null-homotopic change of the identity that raises flag degree."""
        M, ring = be.F.module, be.F.ring
        raise_flag = RingMatrix.build(ring, 4, 4, {(3, 0): ring.one})
        one = RingMatrix.identity(ring, 4)
        phi = DmMorphism(M, M, one + M.differential @ raise_flag + raise_flag @ M.differential).verified()
        psi, h = flag_preserve_up_to_homotopy(phi, be.F, be.F)
        assert is_homotopy(phi.matrix, psi.matrix, h, M, M)

        same, zero = flag_preserve_up_to_homotopy(DmMorphism.identity(M), be.F, be.F)
        assert same.matrix == one
        assert zero.is_zero()

    def test_retract_onto_worked_flag(self, be) -> None:
        _, sdr, witness = anchored_as_retract(be.F)
        assert witness == RingMatrix.identity(be.D.ring, 4)
        assert sdr.problems() == []


@pytest.mark.unit
class TestRetracts:
    """Anchored flags are retracts of CE resolutions."""

    def test_kdelta(self, kdelta) -> None:
        ce, _, witness = anchored_as_retract(kdelta)
        assert ce.block_form_problems() == []
        assert witness == RingMatrix.identity(kdelta.ring, kdelta.rank)

    def test_not_anchored(self, qq_x) -> None:
        F = FreeFlag.from_generators(qq_x, 1, [(0, 0, 0), (1, 0, 0)], RingMatrix.zeros(qq_x, 2, 2))
        with pytest.raises(InvariantError, match="not anchored"):
            anchored_as_retract(F)


@pytest.mark.property
@pytest.mark.slow
class TestRandomRetracts:
    """Seeded random flags on finite-length resolutions."""

    def test_random_flags_are_retracts(self, rng, property_cases) -> None:
        for case in range(max(2, property_cases // 20)):
            F = random_perturbed_flag(rng) if case % 2 else random_finite_flag(rng)
            _, sdr, witness = anchored_as_retract(F)
            assert witness == RingMatrix.identity(F.ring, F.rank)
            assert sdr.problems() == []
