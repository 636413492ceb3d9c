"""Unit vocabulary and algebra shared by all modules.

Units are products of rational powers of four base tags:

    energy_per_mass   Hartree/(g/mol)
    area              Angstrom^2
    mass              g/mol
    dimensionless     (empty product)

Two units are summable only if equal; the ratio of equal units is
dimensionless. Roots and integer powers act on the exponents, so derived
units such as area^2 or mass^(1/2) arise naturally during feature
functionalization.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

from hypal.errors import UnitError

BASE_TAGS = ("energy_per_mass", "area", "mass")

_DISPLAY = {
    "energy_per_mass": "Hartree/(g/mol)",
    "area": "A^2",
    "mass": "g/mol",
}


class Unit:
    """Immutable product of rational powers of base unit tags."""

    __slots__ = ("_powers",)

    def __init__(self, powers: Mapping[str, Fraction] | None = None):
        cleaned: dict[str, Fraction] = {}
        for tag, p in (powers or {}).items():
            if tag not in BASE_TAGS:
                raise UnitError(f"unknown unit tag {tag!r}")
            frac = Fraction(p)
            if frac != 0:
                cleaned[tag] = frac
        self._powers = dict(sorted(cleaned.items()))

    @property
    def powers(self) -> dict[str, Fraction]:
        return dict(self._powers)

    def is_dimensionless(self) -> bool:
        return not self._powers

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Unit) and self._powers == other._powers

    def __hash__(self) -> int:
        return hash(tuple(self._powers.items()))

    def __mul__(self, other: "Unit") -> "Unit":
        merged = dict(self._powers)
        for tag, p in other._powers.items():
            merged[tag] = merged.get(tag, Fraction(0)) + p
        return Unit(merged)

    def __truediv__(self, other: "Unit") -> "Unit":
        merged = dict(self._powers)
        for tag, p in other._powers.items():
            merged[tag] = merged.get(tag, Fraction(0)) - p
        return Unit(merged)

    def __pow__(self, exponent) -> "Unit":
        e = Fraction(exponent).limit_denominator(1_000_000)
        return Unit({tag: p * e for tag, p in self._powers.items()})

    def sqrt(self) -> "Unit":
        return self ** Fraction(1, 2)

    def tag(self) -> str:
        """Canonical text form, e.g. "area", "area^2*mass^-1", "dimensionless"."""
        if not self._powers:
            return "dimensionless"
        parts = []
        for t, p in self._powers.items():
            if p == 1:
                parts.append(t)
            elif p.denominator == 1:
                parts.append(f"{t}^{p.numerator}")
            else:
                parts.append(f"{t}^{p.numerator}/{p.denominator}")
        return "*".join(parts)

    def display(self) -> str:
        """Human-facing form using physical symbols, e.g. "Hartree/(g/mol)"."""
        if not self._powers:
            return ""
        parts = []
        for t, p in self._powers.items():
            base = _DISPLAY[t]
            parts.append(base if p == 1 else f"({base})^{p}")
        return "*".join(parts)

    def __repr__(self) -> str:
        return f"Unit({self.tag()})"


DIMENSIONLESS = Unit()
ENERGY_PER_MASS = Unit({"energy_per_mass": Fraction(1)})
AREA = Unit({"area": Fraction(1)})
MASS = Unit({"mass": Fraction(1)})

_NAMED = {
    "dimensionless": DIMENSIONLESS,
    "energy_per_mass": ENERGY_PER_MASS,
    "area": AREA,
    "mass": MASS,
}


def parse_unit(text: str) -> Unit:
    """Parse the canonical tag form produced by :meth:`Unit.tag`."""
    text = text.strip()
    if text in _NAMED:
        return _NAMED[text]
    powers: dict[str, Fraction] = {}
    for part in text.split("*"):
        part = part.strip()
        if "^" in part:
            tag, _, exp = part.partition("^")
            frac = Fraction(exp)
        else:
            tag, frac = part, Fraction(1)
        if tag not in BASE_TAGS:
            raise UnitError(f"cannot parse unit {text!r}: unknown tag {tag!r}")
        powers[tag] = powers.get(tag, Fraction(0)) + frac
    return Unit(powers)


def require_summable(a: Unit, b: Unit, context: str = "") -> Unit:
    """Return the common unit of two summands, or raise UnitError."""
    if a != b:
        where = f" in {context}" if context else ""
        raise UnitError(f"cannot add {a.tag()} to {b.tag()}{where}")
    return a
