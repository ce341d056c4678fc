from __future__ import annotations

from decimal import Decimal
from fractions import Fraction

import pytest

from csskit.errors import TypeMismatchError, UnitMismatchError, UnknownUnitError
from csskit.values import (
    canonicalize_unit,
    convert_between_units,
    format_timestamp,
    fraction_to_number,
    literal_matches,
    parse_timestamp,
    to_fraction,
)


def test_canonicalize_unit_table_entries():
    assert canonicalize_unit(15, "mm") == (Decimal("0.015"), "m")
    assert canonicalize_unit(2, "min") == (120, "s")
    assert canonicalize_unit(3, "h") == (10800, "s")
    assert canonicalize_unit(Decimal("2.5"), "cm") == (Decimal("0.025"), "m")
    assert canonicalize_unit(500, "g") == (Decimal("0.5"), "kg")
    assert canonicalize_unit(7, "m") == (7, "m")


def test_canonicalize_unit_unknown():
    with pytest.raises(UnknownUnitError):
        canonicalize_unit(1, "furlong")


def test_canonicalize_unit_is_exact_decimal():
    value, base = canonicalize_unit(Decimal("0.1"), "mm")
    assert base == "m"
    assert value == Decimal("0.0001")
    assert str(value) == "0.0001"


def test_convert_between_units():
    assert convert_between_units(Fraction(12), "mm", "m") == Fraction(3, 250)
    assert convert_between_units(Fraction(90), "s", "min") == Fraction(3, 2)
    assert convert_between_units(Fraction(4), None, "mm") == Fraction(4)
    with pytest.raises(UnitMismatchError):
        convert_between_units(Fraction(1), "mm", "s")


def test_fraction_rendering():
    assert fraction_to_number(Fraction(5)) == 5
    assert isinstance(fraction_to_number(Fraction(5)), int)
    assert fraction_to_number(Fraction(3, 250)) == Decimal("0.012")
    assert fraction_to_number(Fraction(25, 2)) == Decimal("12.5")


def test_to_fraction_rejects_booleans():
    with pytest.raises(TypeMismatchError):
        to_fraction(True)


def test_literal_matches():
    assert literal_matches("integer", 5)
    assert not literal_matches("integer", True)
    assert not literal_matches("integer", Decimal("5.5"))
    assert literal_matches("real", Decimal("2.5"))
    assert literal_matches("real", 3)
    assert literal_matches("enum", "steel")
    assert literal_matches("boolean", False)
    assert not literal_matches("boolean", 0)


def test_timestamp_round_trip():
    stamp = parse_timestamp("2026-08-08T12:30:00Z")
    assert format_timestamp(stamp) == "2026-08-08T12:30:00Z"
    offset = parse_timestamp("2026-08-08T14:30:00+02:00")
    assert offset == stamp


def test_timestamp_requires_offset():
    with pytest.raises(TypeMismatchError):
        parse_timestamp("2026-08-08T12:30:00")
