"""Half-up decimal rounding used by every printed table."""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal, localcontext


def round_half_up(value: float, places: int) -> float:
    """Round the decimal representation of ``value`` half away from zero."""
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def percent(numerator: int, denominator: int, places: int = 2) -> float:
    """``100 * numerator / denominator`` rounded half-up from the exact ratio.

    A zero denominator gives 0.0.
    """
    if denominator == 0:
        return 0.0
    quantum = Decimal(1).scaleb(-places)
    with localcontext() as ctx:
        ctx.prec = 50
        exact = Decimal(100 * numerator) / Decimal(denominator)
        return float(exact.quantize(quantum, rounding=ROUND_HALF_UP))


def fixed(value: float, places: int) -> str:
    """Format with exactly ``places`` decimals after half-up rounding."""
    return f"{round_half_up(value, places):.{places}f}"
