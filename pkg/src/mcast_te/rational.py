"""Exact rational parsing/formatting used across the instance formats.

All costs, capacities and rates are kept exact; floats in input files are
interpreted through their decimal literal so "0.5" means one half.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm


def parse_rational(value) -> Fraction:
    """Accept int, Fraction, "p/q" / decimal strings, or float literals."""
    if isinstance(value, bool):
        raise ValueError(f"not a rational: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational: {value!r}") from exc
    raise ValueError(f"not a rational: {value!r}")


def format_rational(value: Fraction) -> str:
    """Canonical string form: integer when exact, else "p/q"."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def rational_json(value: Fraction):
    """JSON-friendly form: int when exact, else the "p/q" string."""
    value = Fraction(value)
    if value.denominator == 1:
        return value.numerator
    return format_rational(value)


def common_denominator(values) -> int:
    """LCM of denominators, used to rescale an instance to integers."""
    denom = 1
    for v in values:
        denom = lcm(denom, Fraction(v).denominator)
    return denom
