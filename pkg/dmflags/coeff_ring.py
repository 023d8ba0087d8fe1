"""Exact coefficient fields and sparse multivariate polynomials.

Polynomials are :class:`sympy.polys.rings.PolyElement` values living in a
:class:`sympy.polys.rings.PolyRing` over ``QQ`` or ``GF(p)``. Rings are
cached by sympy, so two calls to :func:`make_ring` with the same arguments
return the same object and ring equality is identity.
"""

from __future__ import annotations

import math
import re
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

import sympy
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)
from sympy.polys.domains import GF, QQ
from sympy.polys.domains.domain import Domain
from sympy.polys.rings import PolyElement, PolyRing

from dmflags.errors import (
    CharacteristicError,
    ExponentOverflowError,
    InvalidArgumentError,
    ParseError,
    RingMismatchError,
)


MAX_EXPONENT = 2**63 - 1

MonomialOrder = Literal["grevlex", "lex"]

_FIELD_RE = re.compile(r"^\s*(?:QQ|GF\(\s*(\d+)\s*\))\s*$")
_POLY_CHARS_RE = re.compile(r"^[\sA-Za-z0-9_+\-*/^()]*$")
_TRANSFORMATIONS = standard_transformations + (convert_xor,)


@dataclass(frozen=True)
class Field:
    """Coefficient field: the rationals (characteristic 0) or F_p."""

    characteristic: int = 0

    def __post_init__(self) -> None:
        if self.characteristic < 0:
            raise InvalidArgumentError("characteristic must be nonnegative")
        if self.characteristic and not sympy.isprime(self.characteristic):
            raise InvalidArgumentError(f"characteristic {self.characteristic} is not prime")

    @classmethod
    def rationals(cls) -> Field:
        return cls(0)

    @classmethod
    def prime(cls, p: int) -> Field:
        return cls(p)

    @classmethod
    def parse(cls, text: str) -> Field:
        """Parse ``QQ`` or ``GF(p)``."""
        match = _FIELD_RE.match(text)
        if match is None:
            raise ParseError(f"unknown field {text!r}; expected QQ or GF(p)")
        return cls(int(match.group(1))) if match.group(1) else cls(0)

    @property
    def kind(self) -> str:
        return "QQ" if self.characteristic == 0 else f"GF({self.characteristic})"

    @property
    def domain(self) -> Domain:
        return QQ if self.characteristic == 0 else GF(self.characteristic)

    def __str__(self) -> str:
        return self.kind


def make_ring(
    field: Field,
    variables: int | Sequence[str],
    order: MonomialOrder = "grevlex",
) -> PolyRing:
    """Return the polynomial ring over ``field``.

    ``variables`` is either a count (names ``x0 .. x{n-1}``) or explicit names.
    """
    if order not in ("grevlex", "lex"):
        raise ValueError(f"unsupported monomial order {order!r}")
    names = (
        [f"x{i}" for i in range(variables)]
        if isinstance(variables, int)
        else list(variables)
    )
    if not names:
        raise ValueError("a polynomial ring needs at least one variable")
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate variable names in {names}")
    return PolyRing(names, field.domain, order)


def field_of(ring: PolyRing) -> Field:
    return Field(int(ring.domain.characteristic()))


def order_name(ring: PolyRing) -> str:
    return str(ring.order)


def scalar(domain: Domain, value: int | Fraction) -> object:
    """Convert an integer or fraction into a domain element."""
    value = Fraction(value)
    num = domain.convert(value.numerator)
    if value.denominator == 1:
        return num
    return domain.quo(num, domain.convert(value.denominator))


def check_same_ring(*polys: PolyElement) -> PolyRing:
    rings = {id(p.ring): p.ring for p in polys}
    if len(rings) > 1:
        raise RingMismatchError("polynomials belong to different rings")
    return polys[0].ring


def poly_arith(a: PolyElement, b: PolyElement, op: Literal["add", "sub", "mul"]) -> PolyElement:
    """Exact ``a op b`` in canonical form."""
    check_same_ring(a, b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown operation {op!r}")


def poly_degree(a: PolyElement) -> tuple[float | int, bool]:
    """Total degree and homogeneity flag; the zero polynomial has degree -inf."""
    if not a:
        return -math.inf, True
    degrees = {sum(monom) for monom in a.itermonoms()}
    return max(degrees), len(degrees) == 1


def is_unit(a: PolyElement) -> bool:
    """True for nonzero constants."""
    return bool(a) and a.is_ground


def _checked(ring: PolyRing, terms: dict[tuple[int, ...], object]) -> PolyElement:
    for monom in terms:
        if any(exponent > MAX_EXPONENT for exponent in monom):
            raise ExponentOverflowError(f"exponent in {monom} exceeds {MAX_EXPONENT}")
    return ring.from_dict(terms)


def frobenius_power(a: PolyElement, e: int) -> PolyElement:
    """Raise ``a`` to the ``p**e``-th power in characteristic ``p``.

    Over F_p the power is additive, so every monomial exponent is multiplied
    by ``p**e`` and every coefficient is fixed (``c**p == c``).
    """
    p = int(a.ring.domain.characteristic())
    if p == 0:
        raise CharacteristicError("Frobenius needs a ring of positive characteristic")
    if e < 0:
        raise InvalidArgumentError("Frobenius exponent must be nonnegative")
    if e == 0:
        return a
    q = p**e
    return _checked(a.ring, {tuple(k * q for k in monom): c for monom, c in a.terms()})


def parse_poly(ring: PolyRing, text: str) -> PolyElement:
    """Parse ``3*x0^2*x1 - 1/2*x2`` style text into ``ring``."""
    if not isinstance(text, str):
        text = str(text)
    if not _POLY_CHARS_RE.match(text) or not text.strip():
        raise ParseError(f"invalid polynomial text {text!r}")
    symbols = {str(s): s for s in ring.symbols}
    try:
        expr = parse_expr(text, local_dict=dict(symbols), transformations=_TRANSFORMATIONS)
    except (SyntaxError, TypeError, ValueError, sympy.SympifyError) as exc:
        raise ParseError(f"cannot parse {text!r}: {exc}") from exc
    unknown = {str(s) for s in expr.free_symbols} - set(symbols)
    if unknown:
        raise ParseError(f"unknown variables {sorted(unknown)} in {text!r}")
    try:
        poly = sympy.Poly(expr, *ring.symbols, domain=QQ)
    except sympy.PolynomialError as exc:
        raise ParseError(f"{text!r} is not a polynomial: {exc}") from exc
    terms: dict[tuple[int, ...], object] = {}
    for monom, coeff in poly.terms():
        value = Fraction(int(coeff.p), int(coeff.q))
        if ring.domain.characteristic() and value.denominator % ring.domain.characteristic() == 0:
            raise ParseError(f"coefficient {value} is undefined in {ring.domain}")
        c = scalar(ring.domain, value)
        if c:
            terms[tuple(monom)] = c
    return _checked(ring, terms)


def _format_monomial(ring: PolyRing, monom: tuple[int, ...]) -> str:
    factors = []
    for name, exponent in zip(ring.symbols, monom):
        if exponent == 1:
            factors.append(str(name))
        elif exponent > 1:
            factors.append(f"{name}^{exponent}")
    return "*".join(factors)


def format_poly(a: PolyElement) -> str:
    """Print in the syntax :func:`parse_poly` reads, terms in ring order."""
    if not a:
        return "0"
    pieces: list[str] = []
    for index, (monom, coeff) in enumerate(a.terms()):
        number = a.ring.domain.to_sympy(coeff)
        negative = number < 0
        magnitude = -number if negative else number
        monomial = _format_monomial(a.ring, monom)
        if not monomial:
            body = str(magnitude)
        elif magnitude == 1:
            body = monomial
        else:
            body = f"{magnitude}*{monomial}"
        if index == 0:
            pieces.append(f"-{body}" if negative else body)
        else:
            pieces.append(f" - {body}" if negative else f" + {body}")
    return "".join(pieces)
