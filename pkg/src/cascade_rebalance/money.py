"""Fixed-point USD arithmetic.

Every notional handled by the cascade is a ``Decimal`` quantized to one
micro-dollar. Sums and differences of quantized values are exact, which is
what makes the conservation checks exact instead of tolerance based.
"""

from __future__ import annotations

from decimal import ROUND_HALF_EVEN, Context, Decimal, localcontext

QUANTUM = Decimal("0.000001")
ZERO = Decimal(0)

# Products of weights (float -> exact binary expansion) and totals need more
# than the default 28 digits before quantizing.
_WIDE = Context(prec=60, rounding=ROUND_HALF_EVEN)


def usd(value) -> Decimal:
    """Convert ``value`` to a quantized USD amount (half-even at 1e-6)."""
    if isinstance(value, Decimal):
        d = value
    elif isinstance(value, float):
        d = Decimal(repr(value))
    else:
        d = Decimal(value)
    return d.quantize(QUANTUM, rounding=ROUND_HALF_EVEN, context=_WIDE)


def scale(amount: Decimal, fraction: float | Decimal) -> Decimal:
    """``amount * fraction`` rounded to the USD quantum."""
    f = fraction if isinstance(fraction, Decimal) else Decimal(fraction)
    return _WIDE.multiply(amount, f).quantize(QUANTUM, context=_WIDE)


def divide(a: Decimal, b: Decimal | int) -> Decimal:
    """Quantized quotient ``a / b``."""
    return _WIDE.divide(a, Decimal(b)).quantize(QUANTUM, rounding=ROUND_HALF_EVEN, context=_WIDE)


def wide_divide(a: Decimal, b: Decimal) -> Decimal:
    """Unquantized 60-digit quotient, used for quantities in asset units."""
    return _WIDE.divide(a, b)


def wide_multiply(a: Decimal, b: Decimal) -> Decimal:
    return _WIDE.multiply(a, b)


def split_evenly(total: Decimal, parts: int) -> list[Decimal]:
    """Split ``total`` into ``parts`` quantized amounts summing to it exactly.

    Pieces differ by at most one quantum, so none exceeds ``ceil(total/parts)``
    in magnitude.
    """
    if parts <= 0:
        return []
    units = int(total.scaleb(6, context=_WIDE))
    sign = -1 if units < 0 else 1
    base, extra = divmod(abs(units), parts)
    big = Decimal(sign * (base + 1)).scaleb(-6)
    small = Decimal(sign * base).scaleb(-6)
    return [big] * extra + [small] * (parts - extra)


def fmt(value: Decimal) -> str:
    """Render a quantized amount with all six decimals."""
    with localcontext(_WIDE):
        return f"{value.quantize(QUANTUM):f}"
