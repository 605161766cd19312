"""Functional model of the SIMD posit MAC pipeline.

decode -> log mantissa multiply -> scale combine -> quire accumulate ->
normalise/round -> encode.  The quire is 128 bits wide with the binary point
at bit 64 in every SIMD mode.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .formats import BP8, BP16, BP32, NAR, PositFormat, decode, encode, regime_bits
from .logmul import DEFAULT_CONFIGS, MultiplierConfig, ilm_mul

QUIRE_BITS = 128
BINARY_POINT = 64
QUIRE_MAX = (1 << (QUIRE_BITS - 1)) - 1
QUIRE_MIN = -(1 << (QUIRE_BITS - 1))


@dataclass(frozen=True, slots=True)
class ScaledProduct:
    """``(-1)**sign * 2**scale * mantissa_product * 2**-frac_bits``."""

    sign: int = 0
    scale: int = 0
    mantissa_product: int = 0
    frac_bits: int = 0
    special: str | None = None  # "zero" | "nar"

    def value(self):
        if self.special == "nar":
            return NAR
        if self.special == "zero":
            return Fraction(0)
        v = Fraction(self.mantissa_product) * Fraction(2) ** (self.scale - self.frac_bits)
        return -v if self.sign else v


_ZERO_PRODUCT = ScaledProduct(special="zero")
_NAR_PRODUCT = ScaledProduct(special="nar")


def mantissa(fmt: PositFormat, d) -> int:
    """Hidden-one mantissa ``1.f`` left-aligned to ``fmt.frac_max`` fraction bits."""
    fm = fmt.frac_max
    return (1 << fm) | (d.f << (fm - d.frac_width))


def multiply_stage(fmt: PositFormat, cfg: MultiplierConfig, a: int, b: int) -> ScaledProduct:
    da, db = decode(fmt, a), decode(fmt, b)
    if da.is_nar or db.is_nar:
        return _NAR_PRODUCT
    if da.is_zero or db.is_zero:
        return _ZERO_PRODUCT
    es = fmt.es
    scale = ((da.k + db.k) << es) + da.e + db.e
    mp = ilm_mul(mantissa(fmt, da), mantissa(fmt, db), cfg)
    return ScaledProduct(da.sign ^ db.sign, scale, mp, 2 * fmt.frac_max)


@dataclass(slots=True)
class Quire:
    acc: int = 0
    saturated: bool = False
    nar: bool = False
    binary_point: int = BINARY_POINT

    def value(self):
        if self.nar:
            return NAR
        return Fraction(self.acc, 1 << self.binary_point)


def aligned_addend(p: ScaledProduct, binary_point: int = BINARY_POINT) -> int:
    """Signed quire addend for ``p``; bits below quire bit 0 are truncated toward zero."""
    if p.special is not None:
        return 0
    sh = p.scale - p.frac_bits + binary_point
    mag = p.mantissa_product << sh if sh >= 0 else p.mantissa_product >> -sh
    return -mag if p.sign else mag


def _add(q: Quire, addend: int) -> None:
    if q.saturated:
        return
    acc = q.acc + addend
    if acc > QUIRE_MAX:
        q.acc, q.saturated = QUIRE_MAX, True
    elif acc < QUIRE_MIN:
        q.acc, q.saturated = QUIRE_MIN, True
    else:
        q.acc = acc


def accumulate(q: Quire, p: ScaledProduct) -> Quire:
    """Return a new quire holding ``q + p``; NaR products set the sticky NaR flag."""
    out = replace(q)
    if p.special == "nar":
        out.nar = True
    elif p.special is None:
        _add(out, aligned_addend(p, q.binary_point))
    return out


@dataclass
class RoundTrace:
    scale: int = 0
    k: int = 0
    e: int = 0
    guard: int = 0
    round: int = 0
    sticky: int = 0
    rounded_up: bool = False
    clamped: str | None = None


def _ge_dyadic(m: int, exp: int, x: Fraction) -> int:
    """Compare ``m * 2**exp`` with ``x``; returns -1, 0 or 1."""
    lhs = (m << exp if exp >= 0 else m) * x.denominator
    rhs = x.numerator << -exp if exp < 0 else x.numerator
    return (lhs > rhs) - (lhs < rhs)


def round_dyadic(fmt: PositFormat, negative: bool, m: int, exp: int, trace: RoundTrace | None = None) -> int:
    """Round ``(-1)**negative * m * 2**exp`` (``m > 0``) to a posit pattern.

    Normalisation uses the leading-one position of ``m``; rounding is
    round-to-nearest-even on the packed bit string using guard, round and
    sticky bits.  Out-of-range magnitudes saturate to maxpos/minpos.
    """
    if m <= 0:
        raise ValueError("round_dyadic needs a positive magnitude")
    t = trace if trace is not None else RoundTrace()
    if _ge_dyadic(m, exp, fmt.maxpos) >= 0:
        out, t.clamped = fmt.maxpos_bits, "maxpos"
    elif _ge_dyadic(m, exp, fmt.minpos) <= 0:
        out, t.clamped = fmt.minpos_bits, "minpos"
    else:
        lead = m.bit_length() - 1
        scale = lead + exp
        k = scale >> fmt.es
        e = scale - (k << fmt.es)
        rv, rlen = regime_bits(fmt, k)
        frac = m - (1 << lead)
        full = (((rv << fmt.es) | e) << lead) | frac
        full_len = rlen + fmt.es + lead
        body = fmt.n_bits - 1
        t.scale, t.k, t.e = scale, k, e
        if full_len <= body:
            out = full << (body - full_len)
        else:
            drop = full_len - body
            out = full >> drop
            t.guard = (full >> (drop - 1)) & 1
            t.round = (full >> (drop - 2)) & 1 if drop >= 2 else 0
            t.sticky = int(drop >= 3 and bool(full & ((1 << (drop - 2)) - 1)))
            if t.guard and (t.round or t.sticky or out & 1):
                out += 1
                t.rounded_up = True
    return (-out) & fmt.mask if negative else out


def finalize(q: Quire, fmt: PositFormat, trace: RoundTrace | None = None) -> int:
    if q.nar:
        return fmt.nar_bits
    if q.saturated:
        if trace is not None:
            trace.clamped = "saturated"
        return fmt.maxpos_bits if q.acc > 0 else (-fmt.maxpos_bits) & fmt.mask
    if q.acc == 0:
        return 0
    return round_dyadic(fmt, q.acc < 0, abs(q.acc), -q.binary_point, trace)


def finalize_product(p: ScaledProduct, fmt: PositFormat, trace: RoundTrace | None = None) -> int:
    """Round a single product directly, without the quire window."""
    if p.special == "nar":
        return fmt.nar_bits
    if p.special == "zero" or p.mantissa_product == 0:
        return 0
    return round_dyadic(fmt, bool(p.sign), p.mantissa_product, p.scale - p.frac_bits, trace)


def multiply(fmt: PositFormat, cfg: MultiplierConfig, a: int, b: int) -> int:
    """Single posit product through the approximate pipeline."""
    return finalize_product(multiply_stage(fmt, cfg, a, b), fmt)


def mac(fmt: PositFormat, cfg: MultiplierConfig, q: Quire, a: int, b: int) -> Quire:
    return accumulate(q, multiply_stage(fmt, cfg, a, b))


def dot_product(fmt: PositFormat, cfg: MultiplierConfig, a: Sequence[int], b: Sequence[int]) -> int:
    """Fused dot product: accumulate every product exactly, round once."""
    if len(a) != len(b):
        raise ValueError(f"operand length mismatch: {len(a)} vs {len(b)}")
    q = Quire()
    for x, y in zip(a, b):
        p = multiply_stage(fmt, cfg, x, y)
        if p.special == "nar":
            q.nar = True
        elif p.special is None:
            _add(q, aligned_addend(p, q.binary_point))
    return finalize(q, fmt)


class SimdMode(enum.Enum):
    P8x4 = (8, 4)
    P16x2 = (16, 2)
    P32x1 = (32, 1)

    @property
    def lane_bits(self) -> int:
        return self.value[0]

    @property
    def lanes(self) -> int:
        return self.value[1]

    @property
    def default_format(self) -> PositFormat:
        return {8: BP8, 16: BP16, 32: BP32}[self.lane_bits]

    @property
    def default_config(self) -> MultiplierConfig:
        return DEFAULT_CONFIGS[self.lane_bits]

    @classmethod
    def parse(cls, text: str) -> SimdMode:
        for mode in cls:
            if mode.name.lower() == text.strip().lower():
                return mode
        raise ValueError(f"unknown SIMD mode {text!r} (want P8x4, P16x2 or P32x1)")


def pack_lanes(mode: SimdMode, lanes: Sequence[int]) -> int:
    if len(lanes) != mode.lanes:
        raise ValueError(f"{mode.name} takes {mode.lanes} lanes, got {len(lanes)}")
    w = mode.lane_bits
    word = 0
    for i, x in enumerate(lanes):
        if x >> w:
            raise ValueError(f"lane {i} value {x:#x} wider than {w} bits")
        word |= x << (i * w)
    return word


def unpack_lanes(mode: SimdMode, word: int) -> list[int]:
    if not 0 <= word < 1 << 32:
        raise ValueError(f"packed word {word:#x} is not a 32-bit value")
    w = mode.lane_bits
    mask = (1 << w) - 1
    return [(word >> (i * w)) & mask for i in range(mode.lanes)]


def simd_mac(
    mode: SimdMode,
    vec_a: int,
    vec_b: int,
    quires: Sequence[Quire],
    fmt: PositFormat | None = None,
    cfg: MultiplierConfig | None = None,
) -> list[Quire]:
    """One packed MAC step; each lane updates only its own quire."""
    if len(quires) != mode.lanes:
        raise ValueError(f"{mode.name} needs {mode.lanes} quires, got {len(quires)}")
    fmt = fmt or mode.default_format
    cfg = cfg or mode.default_config
    if fmt.n_bits != mode.lane_bits:
        raise ValueError(f"format {fmt.name} does not match {mode.lane_bits}-bit lanes")
    la, lb = unpack_lanes(mode, vec_a), unpack_lanes(mode, vec_b)
    return [mac(fmt, cfg, q, x, y) for q, x, y in zip(quires, la, lb)]


@dataclass
class MulTrace:
    """Stage-by-stage record of one traced multiply."""

    format: str
    config: str
    a: dict = field(default_factory=dict)
    b: dict = field(default_factory=dict)
    mantissa_a: int = 0
    mantissa_b: int = 0
    truncated_a: int = 0
    truncated_b: int = 0
    stage_terms: list[int] = field(default_factory=list)
    sign: int = 0
    scale: int = 0
    mantissa_product: int = 0
    quire: str = ""
    rounding: dict = field(default_factory=dict)
    result_bits: int = 0
    result_value: str = ""
    exact_bits: int = 0
    exact_value: str = ""
    ed: str = "0"
    re: str | None = None
    special: str | None = None


def trace_multiply(fmt: PositFormat, cfg: MultiplierConfig, a: int, b: int) -> MulTrace:
    """Run one product through every stage and record the intermediates."""
    from .formats import describe, to_exact
    from .logmul import ilm_terms, truncate_operand

    t = MulTrace(fmt.name, cfg.label, describe(fmt, a), describe(fmt, b))
    va, vb = to_exact(fmt, a), to_exact(fmt, b)
    exact_bits = encode(fmt, NAR if NAR in (va, vb) else va * vb)
    t.exact_bits, t.exact_value = exact_bits, str(to_exact(fmt, exact_bits))
    p = multiply_stage(fmt, cfg, a, b)
    if p.special is not None:
        t.special = p.special
        t.result_bits = finalize_product(p, fmt)
        t.result_value = str(to_exact(fmt, t.result_bits))
        return t
    da, db = decode(fmt, a), decode(fmt, b)
    t.mantissa_a, t.mantissa_b = mantissa(fmt, da), mantissa(fmt, db)
    if cfg.truncation is not None:
        t.truncated_a = truncate_operand(t.mantissa_a, cfg.truncation)
        t.truncated_b = truncate_operand(t.mantissa_b, cfg.truncation)
    else:
        t.truncated_a, t.truncated_b = t.mantissa_a, t.mantissa_b
    t.stage_terms = ilm_terms(t.mantissa_a, t.mantissa_b, cfg)
    t.sign, t.scale, t.mantissa_product = p.sign, p.scale, p.mantissa_product
    q = accumulate(Quire(), p)
    t.quire = f"{q.acc & ((1 << QUIRE_BITS) - 1):#034x}"
    rt = RoundTrace()
    t.result_bits = finalize_product(p, fmt, rt)
    t.rounding = {
        "guard": rt.guard,
        "round": rt.round,
        "sticky": rt.sticky,
        "rounded_up": rt.rounded_up,
        "clamped": rt.clamped,
    }
    approx = to_exact(fmt, t.result_bits)
    exact = to_exact(fmt, exact_bits)
    t.result_value = str(approx)
    ed = abs(exact - approx)
    t.ed = str(ed)
    t.re = str(ed / abs(exact)) if exact != 0 else None
    return t
