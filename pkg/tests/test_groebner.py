"""Tests for module Gröbner bases, lifts and syzygies.

Run with: pytest tests/test_groebner.py -v
"""

from __future__ import annotations

import math

import pytest

from dmflags.coeff_ring import Field, make_ring
from dmflags.errors import NotInImageError, RingMismatchError, ShapeError
from dmflags.groebner import (
    Subquotient,
    krull_dimension,
    lift_matrix,
    lift_through,
    module_gb,
    quotient_length,
    syzygies,
    verify_groebner,
)
from dmflags.matrix import RingMatrix
from dmflags.samples import random_poly


@pytest.mark.unit
class TestIdeals:
    """Rank-one modules, i.e. ideals."""

    def test_membership(self, qq_xy) -> None:
        x, y = qq_xy.gens
        gb = module_gb([{0: x**2}, {0: x * y + y**2}], 1, ring=qq_xy)
        assert verify_groebner(gb)
        assert gb.contains({0: x**3 + x**2 * y + x * y**2})
        assert not gb.contains({0: x})

    def test_normal_form_quotients(self, qq_xy) -> None:
        x, y = qq_xy.gens
        gb = module_gb([{0: x**2}, {0: y**2}], 1, ring=qq_xy)
        target = x**3 + x * y**2 + y
        remainder, quotients = gb.normal_form({0: target})
        assert remainder == {0: y}
        combined = sum((q * v[0] for q, v in zip(quotients, gb.vectors, strict=True)), qq_xy.zero)
        assert combined + y == target

    def test_transformation_log(self, qq_xy) -> None:
        """Each basis element is the logged combination of the generators."""
        x, y = qq_xy.gens
        gb = module_gb([{0: x**2}, {0: x * y + y**2}], 1, ring=qq_xy)
        for vec, cof in zip(gb.vectors, gb.transformation, strict=True):
            combined = sum((c * gb.generators[k].get(0, qq_xy.zero) for k, c in cof.items()), qq_xy.zero)
            assert combined == vec.get(0, qq_xy.zero)
        assert all(cof is None for cof in module_gb([{0: x}], 1, ring=qq_xy, track=False).transformation)

    def test_lift_recovers_combination(self, qq_xy) -> None:
        x, y = qq_xy.gens
        M = RingMatrix.from_rows(qq_xy, [[x, y]])
        u = lift_through({0: x**2 + y**3}, M)
        assert M.apply(u) == {0: x**2 + y**3}

    def test_lift_outside_image(self, qq_xy) -> None:
        x, y = qq_xy.gens
        with pytest.raises(NotInImageError):
            lift_through({0: qq_xy.one}, RingMatrix.from_rows(qq_xy, [[x, y]]))

    def test_zero_target_lifts_to_zero(self, qq_xy) -> None:
        x, _ = qq_xy.gens
        assert lift_through({}, RingMatrix.from_rows(qq_xy, [[x]])) == {}

    def test_mixed_rings_rejected(self, qq_xy) -> None:
        other = make_ring(Field.prime(5), ["x", "y"])
        with pytest.raises(RingMismatchError):
            module_gb([{0: qq_xy.gens[0]}, {0: other.gens[0]}], 1)

    def test_coordinate_outside_rank(self, qq_xy) -> None:
        with pytest.raises(ShapeError, match="outside rank"):
            module_gb([{2: qq_xy.gens[0]}], 1, ring=qq_xy)


@pytest.mark.unit
class TestModules:
    """Higher-rank submodules, syzygies and lengths."""

    def test_koszul_syzygy(self, qq_xy) -> None:
        """The syzygies of (x, y) are generated by (-y, x)."""
        x, y = qq_xy.gens
        M = RingMatrix.from_rows(qq_xy, [[x, y]])
        syz = syzygies(M)
        assert (M @ syz).is_zero()
        gb = module_gb(syz)
        assert gb.contains({0: -y, 1: x})

    def test_lift_matrix(self, qq_xy) -> None:
        x, y = qq_xy.gens
        through = RingMatrix.from_rows(qq_xy, [[x, y, 0], [0, x, y]])
        X = RingMatrix.from_rows(qq_xy, [[y, 1], [x, 0], [x + y, x]])
        target = through @ X
        assert through @ lift_matrix(target, through) == target

    def test_lift_matrix_shape_mismatch(self, qq_xy) -> None:
        with pytest.raises(ShapeError):
            lift_matrix(RingMatrix.zeros(qq_xy, 2, 1), RingMatrix.zeros(qq_xy, 3, 1))

    def test_quotient_length(self, qq_xy) -> None:
        x, y = qq_xy.gens
        assert quotient_length(RingMatrix.from_rows(qq_xy, [[x**2, y**3]])) == 6
        assert quotient_length(RingMatrix.from_rows(qq_xy, [[x**2, x * y, y**2]])) == 3
        assert quotient_length(RingMatrix.from_rows(qq_xy, [[x]])) == math.inf

    def test_krull_dimension(self, qq_xy) -> None:
        x, y = qq_xy.gens
        assert krull_dimension([x * y]) == 1
        assert krull_dimension([x, y]) == 0
        assert krull_dimension([qq_xy.one]) == -1
        assert krull_dimension([], qq_xy) == 2

    def test_subquotient_length(self, qq_xy) -> None:
        """(x) / (x^2, xy) is one-dimensional."""
        x, y = qq_xy.gens
        sq = Subquotient(RingMatrix.from_rows(qq_xy, [[x]]), RingMatrix.from_rows(qq_xy, [[x**2, x * y]]))
        assert sq.length() == 1


@pytest.mark.property
class TestRandomLifts:
    """Images of random matrices lift back exactly."""

    def test_random_lifts(self, gf101_xy, rng) -> None:
        """through @ lift(through @ X) == through @ X for random X."""
        for _ in range(20):
            through = RingMatrix.build(
                gf101_xy,
                2,
                3,
                {(r, c): random_poly(rng, gf101_xy, 2) for r in range(2) for c in range(3)},
            )
            X = RingMatrix.build(gf101_xy, 3, 2, {(r, c): random_poly(rng, gf101_xy, 1) for r in range(3) for c in range(2)})
            target = through @ X
            assert through @ lift_matrix(target, through) == target
