"""Posit and bounded-regime posit formats: bit-exact decode, encode and exact values.

Bit patterns are plain Python ints holding exactly ``n_bits`` significant bits.
Negative posits are stored in two's complement.  Exact values are
:class:`fractions.Fraction` instances; the exceptional value is the :data:`NAR`
singleton.

A bounded format caps the regime field at ``regime_bound`` bits.  Runs shorter
than the bound keep their terminator bit, while a run that fills the bound has
no terminator and encodes the extreme regimes ``k = R - 1`` (ones) or
``k = -R`` (zeros).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from numbers import Rational

SUPPORTED = {8: 0, 16: 1, 32: 2}
CANONICAL_BOUND = {8: 2, 16: 3, 32: 5}


class FormatError(ValueError):
    """Invalid format configuration or bit pattern."""


class RegimeRangeError(FormatError):
    """Regime value outside the range a format can express."""


class _NaR:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NaR"

    def __reduce__(self):
        return (_NaR, ())


NAR = _NaR()


@dataclass(frozen=True)
class PositFormat:
    n_bits: int
    es: int
    regime_bound: int | None = None

    def __post_init__(self):
        if self.n_bits not in SUPPORTED:
            raise FormatError(f"n_bits must be one of {sorted(SUPPORTED)}, got {self.n_bits}")
        if SUPPORTED[self.n_bits] != self.es:
            raise FormatError(
                f"unsupported pairing (n_bits={self.n_bits}, es={self.es}); "
                f"expected es={SUPPORTED[self.n_bits]}"
            )
        if self.regime_bound is not None and not 1 <= self.regime_bound <= self.n_bits - 2:
            raise FormatError(
                f"regime_bound must be in [1, {self.n_bits - 2}], got {self.regime_bound}"
            )

    @property
    def bounded(self) -> bool:
        return self.regime_bound is not None

    @property
    def name(self) -> str:
        if self.bounded:
            return f"bp{self.n_bits}r{self.regime_bound}"
        return f"p{self.n_bits}"

    def __str__(self):
        return self.name

    @property
    def mask(self) -> int:
        return (1 << self.n_bits) - 1

    @property
    def nar_bits(self) -> int:
        return 1 << (self.n_bits - 1)

    @property
    def maxpos_bits(self) -> int:
        return (1 << (self.n_bits - 1)) - 1

    @property
    def minpos_bits(self) -> int:
        return 1

    @property
    def max_run(self) -> int:
        """Longest regime run the format can hold."""
        return self.regime_bound if self.bounded else self.n_bits - 1

    @property
    def k_min(self) -> int:
        # a standard word of all-zero regime bits is the zero pattern
        return -self.regime_bound if self.bounded else -(self.n_bits - 2)

    @property
    def k_max(self) -> int:
        return self.max_run - 1

    @property
    def useed_log2(self) -> int:
        return 1 << self.es

    @property
    def frac_max(self) -> int:
        """Widest fraction field any pattern of this format carries."""
        shortest_regime = min(2, self.max_run)
        return self.n_bits - 1 - shortest_regime - self.es

    @property
    def mant_width(self) -> int:
        """Width of the hidden-one-extended mantissa ``1.f`` used by the multiplier."""
        return self.frac_max + 1

    @cached_property
    def maxpos(self) -> Fraction:
        return to_exact(self, self.maxpos_bits)

    @cached_property
    def minpos(self) -> Fraction:
        return to_exact(self, self.minpos_bits)

    def with_bound(self, regime_bound: int | None) -> PositFormat:
        return PositFormat(self.n_bits, self.es, regime_bound)

    def standard(self) -> PositFormat:
        return PositFormat(self.n_bits, self.es)


P8 = PositFormat(8, 0)
P16 = PositFormat(16, 1)
P32 = PositFormat(32, 2)
BP8 = PositFormat(8, 0, 2)
BP16 = PositFormat(16, 1, 3)
BP32 = PositFormat(32, 2, 5)

_SELECTOR = re.compile(r"^(b?)p(8|16|32)(?:r(\d+))?$")


def parse_format(text: str, regime_bound: int | None = None) -> PositFormat:
    """Parse ``p8|p16|p32`` or ``bp{N}r{R}``; ``bp{N}`` alone takes the canonical bound.

    ``regime_bound`` overrides whatever the selector says.
    """
    m = _SELECTOR.match(text.strip().lower())
    if not m:
        raise FormatError(f"unrecognised format selector {text!r} (want p8, p16, p32 or bp<N>r<R>)")
    is_bounded, n, r = m.group(1), int(m.group(2)), m.group(3)
    if r is not None and not is_bounded:
        raise FormatError(f"regime bound given for a standard format: {text!r}")
    bound = None
    if is_bounded:
        bound = int(r) if r is not None else CANONICAL_BOUND[n]
    if regime_bound is not None:
        bound = regime_bound
    return PositFormat(n, SUPPORTED[n], bound)


def check_bits(fmt: PositFormat, bits: int) -> int:
    if not isinstance(bits, int) or bits < 0:
        raise FormatError(f"bit pattern must be a non-negative int, got {bits!r}")
    if bits >> fmt.n_bits:
        raise FormatError(f"pattern {bits:#x} has bits set above bit {fmt.n_bits - 1}")
    return bits


@dataclass(frozen=True, slots=True)
class DecodedPosit:
    sign: int = 0
    k: int = 0
    e: int = 0
    f: int = 0
    frac_width: int = 0
    is_zero: bool = False
    is_nar: bool = False
    regime_len: int = 0

    @property
    def special(self) -> bool:
        return self.is_zero or self.is_nar

    def scale(self, es: int) -> int:
        return (self.k << es) + self.e

    def value(self, es: int) -> Fraction | _NaR:
        if self.is_nar:
            return NAR
        if self.is_zero:
            return Fraction(0)
        mag = Fraction((1 << self.frac_width) + self.f, 1 << self.frac_width)
        s = self.scale(es)
        mag = mag * (1 << s) if s >= 0 else mag / (1 << -s)
        return -mag if self.sign else mag


_ZERO = DecodedPosit(is_zero=True)
_NAR_DECODED = DecodedPosit(is_nar=True)


def regime_field_layout(fmt: PositFormat, k: int) -> tuple[int, bool]:
    """Return ``(run_length, has_terminator)`` for regime value ``k``."""
    if not fmt.k_min <= k <= fmt.k_max:
        which = f"bounded (R={fmt.regime_bound})" if fmt.bounded else "standard"
        raise RegimeRangeError(
            f"regime k={k} outside [{fmt.k_min}, {fmt.k_max}] for {which} {fmt.name}"
        )
    run = k + 1 if k >= 0 else -k
    # a run reaching max_run either fills the bound or runs off the end of the word
    return run, run < fmt.max_run


@lru_cache(maxsize=1 << 17)
def decode(fmt: PositFormat, bits: int) -> DecodedPosit:
    check_bits(fmt, bits)
    n = fmt.n_bits
    if bits == 0:
        return _ZERO
    if bits == fmt.nar_bits:
        return _NAR_DECODED
    sign = bits >> (n - 1)
    mag = (-bits) & fmt.mask if sign else bits
    body = n - 1
    lead = (mag >> (body - 1)) & 1
    # leading run length: count identical bits starting just under the sign
    t = (~mag if lead else mag) & ((1 << body) - 1)
    run = min(body - t.bit_length(), fmt.max_run)
    used = run + (1 if run < fmt.max_run else 0)
    k = run - 1 if lead else -run
    rem = body - used
    eb = min(fmt.es, rem)
    rem -= eb
    e = ((mag >> rem) & ((1 << eb) - 1)) << (fmt.es - eb)
    f = mag & ((1 << rem) - 1)
    return DecodedPosit(sign=sign, k=k, e=e, f=f, frac_width=rem, regime_len=used)


@lru_cache(maxsize=1 << 17)
def to_exact(fmt: PositFormat, bits: int) -> Fraction | _NaR:
    """Exact rational value of ``bits`` (``NAR`` for the exceptional pattern)."""
    return decode(fmt, bits).value(fmt.es)


def to_float(fmt: PositFormat, bits: int) -> float:
    v = to_exact(fmt, bits)
    return math.nan if v is NAR else float(v)


def regime_bits(fmt: PositFormat, k: int) -> tuple[int, int]:
    """Regime field as ``(value, width)``, terminator included when present."""
    run, term = regime_field_layout(fmt, k)
    ones = (1 << run) - 1
    if k >= 0:
        return (ones << 1 if term else ones), run + term
    return (1 if term else 0), run + term


def pack_magnitude(fmt: PositFormat, k: int, e: int, frac: int, frac_len: int, sticky: bool) -> int:
    """Round the unbounded-precision string ``regime|e|frac[|sticky]`` to ``n_bits - 1`` bits.

    Rounding is round-to-nearest-even on the bit string.  The caller has
    already clamped to ``[minpos, maxpos]``, so the result is a valid positive
    pattern.
    """
    body = fmt.n_bits - 1
    rv, rlen = regime_bits(fmt, k)
    prefix_len = rlen + fmt.es
    full = (((rv << fmt.es) | e) << frac_len) | frac
    full_len = prefix_len + frac_len
    if full_len <= body:
        if sticky:
            raise AssertionError("sticky bits with spare room cannot occur")
        return full << (body - full_len)
    shift = full_len - body
    kept = full >> shift
    guard = (full >> (shift - 1)) & 1
    rest = sticky or bool(full & ((1 << (shift - 1)) - 1))
    if guard and (rest or kept & 1):
        kept += 1
    return kept


def _as_fraction(value) -> Fraction | _NaR:
    if value is NAR:
        return NAR
    if isinstance(value, float):
        if not math.isfinite(value):
            return NAR
        return Fraction(value)
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot encode value of type {type(value).__name__}")


def encode(fmt: PositFormat, value) -> int:
    """Nearest pattern to ``value`` with round-to-nearest-even and saturation.

    Accepts ints, Fractions, floats (converted exactly) or :data:`NAR`.
    Non-finite floats map to NaR.
    """
    x = _as_fraction(value)
    if x is NAR:
        return fmt.nar_bits
    if x == 0:
        return 0
    negative = x < 0
    mag = -x if negative else x
    if mag >= fmt.maxpos:
        out = fmt.maxpos_bits
    elif mag <= fmt.minpos:
        out = fmt.minpos_bits
    else:
        num, den = mag.numerator, mag.denominator
        s = num.bit_length() - den.bit_length()
        if (num << -s if s < 0 else num) < (den << s if s > 0 else den):
            s -= 1
        k = s >> fmt.es
        e = s - (k << fmt.es)
        # significand in [1, 2) as num / den
        sig_num, sig_den = (num, den << s) if s >= 0 else (num << -s, den)
        # at least one bit past the widest fraction field, for the guard
        frac_len = fmt.n_bits - fmt.es
        scaled = (sig_num - sig_den) << frac_len
        frac, remainder = divmod(scaled, sig_den)
        out = pack_magnitude(fmt, k, e, frac, frac_len, remainder != 0)
    return (-out) & fmt.mask if negative else out


def is_representable(fmt: PositFormat, value: Fraction) -> bool:
    bits = encode(fmt, value)
    return to_exact(fmt, bits) == value


def describe(fmt: PositFormat, bits: int) -> dict:
    """Field breakdown used by the CLI and traces."""
    d = decode(fmt, bits)
    out = {
        "format": fmt.name,
        "bits": f"{bits:#0{fmt.n_bits // 4 + 2}x}",
        "binary": format(bits, f"0{fmt.n_bits}b"),
    }
    if d.is_zero or d.is_nar:
        out["special"] = "zero" if d.is_zero else "NaR"
        out["value"] = "0" if d.is_zero else "NaR"
        return out
    run, term = regime_field_layout(fmt, d.k)
    exp_bits = min(fmt.es, fmt.n_bits - 1 - d.regime_len)
    out.update(
        sign=d.sign,
        k=d.k,
        e=d.e if fmt.es else None,
        f=d.f,
        frac_width=d.frac_width,
        regime_run=run,
        regime_terminator=term,
        exponent_bits=exp_bits,
        value=str(d.value(fmt.es)),
    )
    return out
