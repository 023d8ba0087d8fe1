"""Tests for coefficient fields and polynomial parsing.

Run with: pytest tests/test_coeff_ring.py -v
"""

from __future__ import annotations

import math

import pytest

from dmflags.coeff_ring import (
    Field,
    field_of,
    format_poly,
    frobenius_power,
    is_unit,
    make_ring,
    parse_poly,
    poly_arith,
    poly_degree,
)
from dmflags.errors import CharacteristicError, ExponentOverflowError, ParseError, RingMismatchError


@pytest.mark.unit
class TestFields:
    """Field parsing and ring construction."""

    def test_parse_fields(self) -> None:
        """QQ and GF(p) parse; anything else is rejected."""
        assert Field.parse("QQ").characteristic == 0
        assert Field.parse(" GF( 101 ) ").characteristic == 101
        with pytest.raises(ParseError, match="unknown field"):
            Field.parse("ZZ")

    def test_composite_characteristic_rejected(self) -> None:
        with pytest.raises(ValueError, match="not prime"):
            Field.prime(6)

    def test_rings_are_cached(self) -> None:
        """Equal arguments give the identical ring object."""
        assert make_ring(Field.prime(7), ["a", "b"]) is make_ring(Field.prime(7), ["a", "b"])
        assert field_of(make_ring(Field.prime(7), 2)) == Field.prime(7)

    def test_ring_arguments_validated(self) -> None:
        with pytest.raises(ValueError, match="duplicate"):
            make_ring(Field.rationals(), ["x", "x"])
        with pytest.raises(ValueError, match="unsupported monomial order"):
            make_ring(Field.rationals(), 2, "revlex")


@pytest.mark.unit
class TestPolynomials:
    """Parsing, printing and elementary arithmetic."""

    def test_parse_and_format(self, qq_xy) -> None:
        """Printing uses the same syntax the parser reads."""
        a = parse_poly(qq_xy, "3*x^2*y - 1/2*y")
        assert parse_poly(qq_xy, format_poly(a)) == a
        assert format_poly(qq_xy.zero) == "0"

    def test_parse_reduces_mod_p(self) -> None:
        R = make_ring(Field.prime(7), ["x"])
        assert parse_poly(R, "8*x") == R.gens[0]
        assert parse_poly(R, "6*x") == -R.gens[0]

    def test_parse_errors(self, qq_xy) -> None:
        with pytest.raises(ParseError):
            parse_poly(qq_xy, "x +* y")
        with pytest.raises(ParseError, match="unknown variables"):
            parse_poly(qq_xy, "x*z")
        with pytest.raises(ParseError, match="undefined"):
            parse_poly(make_ring(Field.prime(7), ["x"]), "1/7*x")

    def test_arith_rejects_mixed_rings(self, qq_xy) -> None:
        other = make_ring(Field.rationals(), ["u"])
        with pytest.raises(RingMismatchError):
            poly_arith(qq_xy.gens[0], other.gens[0], "add")

    def test_degree_and_units(self, qq_xy) -> None:
        x, y = qq_xy.gens
        assert poly_degree(x**2 * y + x) == (3, False)
        assert poly_degree(qq_xy.zero) == (-math.inf, True)
        assert is_unit(qq_xy(5))
        assert not is_unit(x) and not is_unit(qq_xy.zero)


@pytest.mark.unit
class TestFrobenius:
    """Entry-wise p^e powers."""

    def test_frobenius_is_additive(self) -> None:
        R = make_ring(Field.prime(3), ["x", "y"])
        x, y = R.gens
        assert frobenius_power(x + 2 * y, 1) == (x + 2 * y) ** 3
        assert frobenius_power(x * y, 2) == x**9 * y**9

    def test_frobenius_needs_positive_characteristic(self, qq_xy) -> None:
        with pytest.raises(CharacteristicError):
            frobenius_power(qq_xy.gens[0], 1)

    def test_exponent_overflow(self) -> None:
        R = make_ring(Field.prime(2), ["x"])
        with pytest.raises(ExponentOverflowError):
            frobenius_power(R.gens[0] ** (2**62), 2)
