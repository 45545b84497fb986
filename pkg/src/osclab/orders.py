"""Vanishing orders that may be infinite (flat functions).

``FLAT`` stands for an order of vanishing equal to infinity.  Arithmetic that
needs ``1/order`` goes through :func:`reciprocal`, which maps ``FLAT`` to an
exact zero instead of a floating-point infinity.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union


class _Flat:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "FLAT"

    def __str__(self):
        return "FLAT"

    def __reduce__(self):
        return (_Flat, ())

    # FLAT compares above every integer
    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True


FLAT = _Flat()

Order = Union[int, _Flat]


def is_flat(order) -> bool:
    return order is FLAT


def reciprocal(order: Order) -> Fraction:
    """Exact ``1/order`` with ``1/FLAT == 0``."""
    if order is FLAT:
        return Fraction(0)
    return Fraction(1, int(order))


def parse_order(value) -> Order:
    """Read an order from an int, a numeric string, or one of ``FLAT``/``inf``."""
    if value is FLAT:
        return FLAT
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("flat", "inf", "infinity", "oo", "∞"):
            return FLAT
        value = int(v)
    if isinstance(value, float) and value == float("inf"):
        return FLAT
    out = int(value)
    if out != value or out < 1:
        raise ValueError(f"invalid vanishing order: {value!r}")
    return out


def format_order(order: Order) -> str:
    return "FLAT" if order is FLAT else str(int(order))
