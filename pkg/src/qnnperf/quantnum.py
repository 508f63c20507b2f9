"""Quantization arithmetic: uniform affine mapping, dyadic-scale
approximation, and comparator-threshold requantization.

These routines are the numeric ground truth against which the implementation
choices of the cost model are checked for equivalence: a threshold set derived
from a uniform quantizer must reproduce it bin-exactly, and so must the
multiply-and-shift dyadic path when the scale is exactly representable.

All bin boundary computations run on ``fractions.Fraction`` so float scales
never introduce rounding surprises.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import DegenerateRange, DyadicUnderflow

Real = Union[int, float, Fraction]

ROUNDING_MODES = ("half_away", "half_up", "floor", "ceil")


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


def _ceil(x: Fraction) -> int:
    return -((-x).numerator // (-x).denominator)


def _round(x: Fraction, mode: str) -> int:
    if mode == "floor":
        return _floor(x)
    if mode == "ceil":
        return _ceil(x)
    if mode == "half_up":
        # floor(x + 1/2); ties go toward +inf, matching add-then-shift hardware.
        return _floor(x + Fraction(1, 2))
    if mode == "half_away":
        return _floor(x + Fraction(1, 2)) if x >= 0 else _ceil(x - Fraction(1, 2))
    raise ValueError(f"unknown rounding mode {mode!r}")


def clip_range(bit_width: int, signed: bool) -> tuple[int, int]:
    if signed:
        return -(1 << (bit_width - 1)), (1 << (bit_width - 1)) - 1
    return 0, (1 << bit_width) - 1


@dataclass(frozen=True)
class UniformQuantizer:
    """Affine quantizer ``q(r) = clip(round(r / scale) - zero_point)``."""

    scale: Real
    zero_point: int = 0
    bit_width: int = 8
    signed: bool = True
    rounding: str = "half_away"

    def __post_init__(self):
        if self.scale <= 0:
            raise DegenerateRange(f"scale must be positive, got {self.scale}")
        if self.rounding not in ROUNDING_MODES:
            raise ValueError(f"unknown rounding mode {self.rounding!r}")

    @property
    def qmin(self) -> int:
        return clip_range(self.bit_width, self.signed)[0]

    @property
    def qmax(self) -> int:
        return clip_range(self.bit_width, self.signed)[1]

    @classmethod
    def from_range(cls, alpha: Real, beta: Real, bit_width: int,
                   zero_point: int = 0, signed: bool = True,
                   rounding: str = "half_away") -> "UniformQuantizer":
        return cls(compute_scale(alpha, beta, bit_width), zero_point,
                   bit_width, signed, rounding)


def compute_scale(alpha: Real, beta: Real, bit_width: int) -> float:
    """Uniform scale over the range [alpha, beta] at the given precision."""
    if beta <= alpha:
        raise DegenerateRange(f"need beta > alpha, got [{alpha}, {beta}]")
    if bit_width < 2:
        raise DegenerateRange(f"bit_width must be >= 2, got {bit_width}")
    return (beta - alpha) / ((1 << bit_width) - 1)


def uniform_quantize(r: Real, q: UniformQuantizer) -> int:
    """Quantize a real value; saturates into the quantizer's clip range."""
    v = _round(Fraction(r) / Fraction(q.scale), q.rounding) - q.zero_point
    return max(q.qmin, min(q.qmax, v))


# ---------------------------------------------------------------------------
# Dyadic scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicScale:
    """Approximation of a real multiplier by ``M / 2**n``."""

    M: int
    n: int

    def __post_init__(self):
        if self.M < 1 or self.n < 1:
            raise ValueError(f"need positive M and n, got M={self.M} n={self.n}")

    @property
    def value(self) -> Fraction:
        return Fraction(self.M, 1 << self.n)


def fit_dyadic(scale: Real, n_max: int, joint: bool = False
               ) -> tuple[DyadicScale, float]:
    """Best dyadic approximation of ``scale`` and its absolute error.

    By default the shift is pinned to ``n_max`` (the accumulator width minus
    one on the target platform) and the mantissa is the nearest positive
    integer to ``scale * 2**n_max``, so the error is at most ``2**-(n_max+1)``
    whenever ``scale * 2**n_max >= 1``. With ``joint=True`` all shifts in
    ``1..n_max`` are searched and the smallest-error (then smallest-shift)
    pair wins.
    """
    if scale <= 0:
        raise DegenerateRange(f"scale must be positive, got {scale}")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    s = Fraction(scale)
    if s * (1 << n_max) < Fraction(1, 2):
        raise DyadicUnderflow(
            f"scale {scale} too small for any positive mantissa at shift {n_max}"
        )

    def best_at(n: int) -> DyadicScale:
        m = max(1, _round(s * (1 << n), "half_away"))
        return DyadicScale(m, n)

    if not joint:
        d = best_at(n_max)
        return d, float(abs(s - d.value))

    candidates = []
    for n in range(1, n_max + 1):
        if s * (1 << n) < Fraction(1, 2):
            continue
        d = best_at(n)
        candidates.append((abs(s - d.value), n, d))
    err, _, d = min(candidates, key=lambda t: (t[0], t[1]))
    return d, float(err)


def dyadic_requantize(v: int, d: DyadicScale, zero_point: int,
                      qmin: int, qmax: int) -> int:
    """Integer requantization via multiply and arithmetic right shift.

    Round-to-nearest is realized by adding ``2**(n-1)`` before the shift
    (ties toward +inf); negatives shift arithmetically.
    """
    out = ((v * d.M + (1 << (d.n - 1))) >> d.n) - zero_point
    return max(qmin, min(qmax, out))


# ---------------------------------------------------------------------------
# Threshold sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdSet:
    """Comparator-based requantization: value v maps to ``levels[i]`` for the
    bin ``thresholds[i-1] <= v < thresholds[i]`` (half-open bins; below the
    first threshold -> levels[0], at or above the last -> levels[-1])."""

    thresholds: tuple[int, ...]
    levels: tuple[int, ...]

    def __post_init__(self):
        if len(self.levels) != len(self.thresholds) + 1:
            raise ValueError("need exactly one more level than thresholds")
        if any(a >= b for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be strictly increasing")


def apply_thresholds(v: int, t: ThresholdSet) -> int:
    """Map an accumulator value to its output level (binary search)."""
    return t.levels[bisect.bisect_right(t.thresholds, v)]


def thresholds_from_uniform(acc_bits: int, acc_signed: bool,
                            q_out: UniformQuantizer) -> ThresholdSet:
    """Derive the threshold set that reproduces ``q_out`` on every integer
    accumulator value of the given width.

    ``thresholds[i]`` is the smallest accumulator value mapping to level
    ``levels[i+1]``; a level never reached within the accumulator range gets
    a sentinel threshold past the range end. Requires a downscaling quantizer
    (scale >= 1), so consecutive accumulator values never skip a level, and
    an output width of at least 2 bits.
    """
    if q_out.bit_width < 2:
        raise ValueError("output bit-width must be >= 2")
    if Fraction(q_out.scale) < 1:
        raise ValueError("requantization requires scale >= 1")
    lo, hi = clip_range(acc_bits, acc_signed)
    levels = tuple(range(q_out.qmin, q_out.qmax + 1))
    q_lo = uniform_quantize(lo, q_out)
    q_hi = uniform_quantize(hi, q_out)
    thresholds: list[int] = []
    for target in levels[1:]:
        if target > q_hi:
            # Level above anything reachable: sentinel past the range end.
            thresholds.append(max(hi, thresholds[-1] if thresholds else hi) + 1)
        elif target <= q_lo:
            # Even the range minimum maps at or above this level; placeholder,
            # rewritten below to a strictly increasing run ending at lo.
            thresholds.append(lo)
        else:
            # Smallest v in [lo, hi] with q_out(v) >= target; monotone in v.
            a, b = lo, hi
            while a < b:
                mid = (a + b) // 2
                if uniform_quantize(mid, q_out) >= target:
                    b = mid
                else:
                    a = mid + 1
            thresholds.append(a)
    n_low = sum(1 for t in levels[1:] if t <= q_lo)
    for i in range(n_low):
        thresholds[i] = lo - (n_low - 1 - i)
    return ThresholdSet(tuple(thresholds), levels)
