"""Iterative logarithmic multiplication of unsigned fixed-point mantissas.

Each stage takes the exact decomposition

    a * b = 2**(ka + kb) + 2**ka * rb + 2**kb * ra + ra * rb

(``ka``, ``kb`` the leading-one positions, ``ra``, ``rb`` the residuals below
them), keeps the first three terms and recurses on ``ra * rb``.  After the
last stage the remaining residual product is dropped, so the result never
exceeds the true product.  Optional operand truncation is applied once, to the
original operands, before the first stage.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class MultiplierConfig:
    """Stage count ``stages`` and optional truncation width ``truncation``.

    ``truncation`` counts the retained bits starting at the leading one.
    ``exact=True`` bypasses the approximation entirely (reference multiplier).
    """

    stages: int = 3
    truncation: int | None = None
    exact: bool = False

    def __post_init__(self):
        if self.stages < 1:
            raise ValueError(f"stages must be >= 1, got {self.stages}")
        if self.truncation is not None and self.truncation < 1:
            raise ValueError(f"truncation must be >= 1, got {self.truncation}")

    def check_width(self, width: int) -> None:
        if self.truncation is not None and self.truncation > width:
            raise ValueError(
                f"truncation width {self.truncation} exceeds operand width {width}"
            )

    @property
    def label(self) -> str:
        if self.exact:
            return "exact"
        s = f"LP-{self.stages}"
        if self.truncation is not None:
            s += f"_T{self.truncation}"
        return s


EXACT = MultiplierConfig(exact=True)

# (stages, truncation) choices per operand word size
CANONICAL_CONFIGS = {
    8: [MultiplierConfig(2), MultiplierConfig(3), MultiplierConfig(3, 4), MultiplierConfig(3, 5)],
    16: [MultiplierConfig(4), MultiplierConfig(6), MultiplierConfig(6, 8), MultiplierConfig(6, 10)],
    32: [MultiplierConfig(8), MultiplierConfig(12), MultiplierConfig(12, 16), MultiplierConfig(12, 20)],
}

DEFAULT_CONFIGS = {
    8: MultiplierConfig(3, 4),
    16: MultiplierConfig(6, 8),
    32: MultiplierConfig(12, 16),
}


def parse_config(text: str) -> MultiplierConfig:
    """Parse labels such as ``LP-3``, ``LP-6_T8``, ``3``, ``3:4`` or ``exact``."""
    t = text.strip().upper()
    if t == "EXACT":
        return EXACT
    if t.startswith("LP-"):
        t = t[3:]
    t = t.replace("_T", ":")
    stages, _, trunc = t.partition(":")
    try:
        return MultiplierConfig(int(stages), int(trunc) if trunc else None)
    except ValueError as exc:
        raise ValueError(f"bad multiplier config {text!r}: {exc}") from None


def leading_one(x: int) -> int | None:
    """Bit index of the most significant set bit, ``None`` for zero."""
    if x == 0:
        return None
    return x.bit_length() - 1


def truncate_operand(x: int, m: int) -> int:
    """Keep the leading one and the ``m - 1`` bits below it."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if x == 0:
        return 0
    drop = x.bit_length() - m
    if drop <= 0:
        return x
    return (x >> drop) << drop


def mitchell_mul(a: int, b: int) -> int:
    """Classic single-stage Mitchell product, evaluated exactly.

    With ``a = 2**ka * (1 + xa)`` and ``b = 2**kb * (1 + xb)`` the antilog of
    ``ka + kb + xa + xb`` is approximated piecewise linearly.
    """
    if a == 0 or b == 0:
        return 0
    ka, kb = a.bit_length() - 1, b.bit_length() - 1
    ra, rb = a - (1 << ka), b - (1 << kb)
    # xa + xb scaled by 2**(ka + kb)
    xsum = (ra << kb) + (rb << ka)
    one = 1 << (ka + kb)
    if xsum < one:
        return one + xsum
    return xsum << 1


def ilm_terms(a: int, b: int, cfg: MultiplierConfig) -> list[int]:
    """Per-stage contributions of the iterative product (after truncation).

    The sum of the returned list is :func:`ilm_mul`.  Stages stop early when a
    residual reaches zero, in which case the sum is exact.
    """
    if cfg.truncation is not None:
        a = truncate_operand(a, cfg.truncation)
        b = truncate_operand(b, cfg.truncation)
    if cfg.exact:
        return [a * b]
    terms = []
    for _ in range(cfg.stages):
        if a == 0 or b == 0:
            break
        ka, kb = a.bit_length() - 1, b.bit_length() - 1
        ra, rb = a - (1 << ka), b - (1 << kb)
        terms.append((1 << (ka + kb)) + (ra << kb) + (rb << ka))
        a, b = ra, rb
    return terms


def ilm_mul(a: int, b: int, cfg: MultiplierConfig) -> int:
    if a == 0 or b == 0:
        return 0
    return sum(ilm_terms(a, b, cfg))


def relative_error(a: int, b: int, cfg: MultiplierConfig) -> Fraction:
    """``(a*b - approx) / (a*b)`` as an exact rational."""
    exact = a * b
    if exact == 0:
        raise ValueError("relative error undefined for a zero product")
    re = Fraction(exact - ilm_mul(a, b, cfg), exact)
    assert re >= 0, "iterative log multiplier overestimated"
    return re


def _bit_length_array(x: np.ndarray) -> np.ndarray:
    # frexp is exact for integers below 2**53
    _, e = np.frexp(x.astype(np.float64))
    return e.astype(np.int64)


def ilm_mul_array(a, b, cfg: MultiplierConfig) -> np.ndarray:
    """Vectorised :func:`ilm_mul` over uint64 operand arrays.

    Intended for sweeps; operands must stay below 2**26 so products and
    intermediate shifts fit 64 bits.
    """
    a = np.asarray(a, dtype=np.uint64).copy()
    b = np.asarray(b, dtype=np.uint64).copy()
    if a.size and max(int(a.max()), int(b.max())) >= 1 << 26:
        raise ValueError("ilm_mul_array operands must be < 2**26")
    if cfg.truncation is not None:
        for x in (a, b):
            bl = _bit_length_array(x)
            drop = np.maximum(bl - cfg.truncation, 0).astype(np.uint64)
            x[...] = (x >> drop) << drop
    if cfg.exact:
        return a * b
    acc = np.zeros_like(a)
    one = np.uint64(1)
    for _ in range(cfg.stages):
        live = (a != 0) & (b != 0)
        if not live.any():
            break
        ka = np.where(live, _bit_length_array(a) - 1, 0).astype(np.uint64)
        kb = np.where(live, _bit_length_array(b) - 1, 0).astype(np.uint64)
        ra = np.where(live, a - (one << ka), 0).astype(np.uint64)
        rb = np.where(live, b - (one << kb), 0).astype(np.uint64)
        term = (one << (ka + kb)) + (ra << kb) + (rb << ka)
        acc += np.where(live, term, np.uint64(0))
        a, b = ra, rb
    return acc
