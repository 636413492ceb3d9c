from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypal.errors import UnitError
from hypal.units import (
    AREA,
    DIMENSIONLESS,
    ENERGY_PER_MASS,
    MASS,
    Unit,
    parse_unit,
    require_summable,
)

UNITS = [DIMENSIONLESS, ENERGY_PER_MASS, AREA, MASS]


def test_ratio_of_equal_units_is_dimensionless():
    for u in UNITS:
        assert (u / u).is_dimensionless()


def test_unequal_units_not_summable():
    with pytest.raises(UnitError):
        require_summable(AREA, MASS)
    assert require_summable(AREA, AREA) == AREA


def test_power_and_sqrt_roundtrip():
    assert (AREA**2).sqrt() == AREA
    assert AREA ** Fraction(1, 2) == AREA.sqrt()
    assert (AREA * MASS) / MASS == AREA
    assert AREA**0 == DIMENSIONLESS


def test_tag_roundtrip_simple_and_compound():
    for u in UNITS + [AREA**2, AREA / MASS, MASS.sqrt(), ENERGY_PER_MASS / AREA]:
        assert parse_unit(u.tag()) == u


def test_unknown_tag_rejected():
    with pytest.raises(UnitError):
        parse_unit("furlongs")
    with pytest.raises(UnitError):
        Unit({"bogus": Fraction(1)})


@given(
    st.lists(st.sampled_from(UNITS[1:]), min_size=1, max_size=4),
    st.integers(min_value=-3, max_value=3).filter(lambda k: k != 0),
)
def test_product_power_algebra(factors, exponent):
    product = DIMENSIONLESS
    for f in factors:
        product = product * f
    powered = product**exponent
    # exponent distributes over the product of base powers
    for tag, p in product.powers.items():
        assert powered.powers.get(tag, Fraction(0)) == p * exponent
    assert (powered / powered).is_dimensionless()
