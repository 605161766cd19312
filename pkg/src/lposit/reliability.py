"""Single-bit-flip fault injection and Expected Catastrophic Error (ECE).

ECE is the mean of ``|log2|x_o| - log2|x_f||`` over injected faults, where
``x_o`` is the stored value and ``x_f`` the value after one bit flip.  Two
fault models are offered:

``sign_magnitude`` (default)
    The word is viewed as a sign bit plus the magnitude pattern of ``|x|``.
    Flipping the sign bit negates the value; any other position flips that
    bit of the magnitude pattern.
``word``
    The raw two's-complement word is corrupted in place.

Faults that start from or land on zero/NaR have no logarithm.  The default
policy excludes them and counts them; ``clamp`` substitutes minpos for zero
and maxpos for NaR instead.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .formats import NAR, FormatError, PositFormat, decode, parse_format, to_exact
from .sampling import Sampling, chunks, default_workers, operand_patterns

FIELDS = ("sign", "regime", "exponent", "fraction")
MODELS = ("sign_magnitude", "word")
POLICIES = ("exclude", "clamp")


def inject(fmt: PositFormat, bits: int, position: int) -> int:
    """Flip bit ``position`` of ``bits``."""
    if not 0 <= position < fmt.n_bits:
        raise ValueError(f"bit position {position} outside [0, {fmt.n_bits - 1}]")
    if bits >> fmt.n_bits or bits < 0:
        raise FormatError(f"pattern {bits:#x} wider than {fmt.n_bits} bits")
    return bits ^ (1 << position)


def inject_sign_magnitude(fmt: PositFormat, bits: int, position: int) -> int:
    """Flip ``position`` in the sign/magnitude image of ``bits`` and re-encode."""
    n = fmt.n_bits
    if bits == fmt.nar_bits:
        return inject(fmt, bits, position)
    sign = bits >> (n - 1)
    mag = (-bits) & fmt.mask if sign else bits
    if position == n - 1:
        sign ^= 1
    else:
        mag = inject(fmt, mag, position)
    if mag == 0:
        return 0
    return (-mag) & fmt.mask if sign else mag


def field_positions(fmt: PositFormat, bits: int) -> dict[str, list[int]]:
    """Bit positions occupied by each field of ``bits`` (MSB-first within a field)."""
    n = fmt.n_bits
    out = {"sign": [n - 1], "regime": [], "exponent": [], "fraction": []}
    d = decode(fmt, bits)
    if d.is_zero or d.is_nar:
        # no terminator is found in an all-zero magnitude; the whole body is regime
        out["regime"] = list(range(n - 2, -1, -1))
        return out
    pos = n - 2
    for _ in range(d.regime_len):
        out["regime"].append(pos)
        pos -= 1
    for _ in range(min(fmt.es, pos + 1)):
        out["exponent"].append(pos)
        pos -= 1
    out["fraction"] = list(range(pos, -1, -1))
    return out


@dataclass(frozen=True)
class FaultSpec:
    format: PositFormat
    sampling: Sampling = field(default_factory=Sampling)
    fields: tuple[str, ...] | None = None
    model: str = "sign_magnitude"
    policy: str = "exclude"

    def __post_init__(self):
        if self.fields is not None:
            bad = [f for f in self.fields if f not in FIELDS]
            if bad:
                raise ValueError(f"unknown field(s) {bad}; choose from {FIELDS}")
            if "exponent" in self.fields and self.format.es == 0:
                raise ValueError(f"{self.format.name} has no exponent field")
        if self.model not in MODELS:
            raise ValueError(f"fault model must be one of {MODELS}, got {self.model!r}")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")

    def to_dict(self) -> dict:
        return {
            "format": self.format.name,
            "sampling": self.sampling.to_dict(),
            "fields": list(self.fields) if self.fields is not None else None,
            "model": self.model,
            "policy": self.policy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> FaultSpec:
        return cls(
            parse_format(d["format"]),
            Sampling.from_dict(d["sampling"]),
            tuple(d["fields"]) if d["fields"] is not None else None,
            d["model"],
            d["policy"],
        )


@dataclass
class FaultReport:
    eta: float
    regime_term: float
    exponent_term: float
    fraction_term: float
    samples: int
    excluded: int
    spec: FaultSpec
    gamma: float | None = None

    @property
    def decomposition_gap(self) -> float:
        """``eta - (regime + exponent + fraction)``; never positive (up to rounding) by the triangle inequality."""
        return self.eta - (self.regime_term + self.exponent_term + self.fraction_term)

    def metrics(self) -> dict[str, float | None]:
        return {
            "eta": self.eta,
            "regime_term": self.regime_term,
            "exponent_term": self.exponent_term,
            "fraction_term": self.fraction_term,
            "decomposition_gap": self.decomposition_gap,
            "gamma": self.gamma,
        }

    def to_dict(self) -> dict:
        d = self.metrics()
        del d["decomposition_gap"]
        d.update(samples=self.samples, excluded=self.excluded, spec=self.spec.to_dict())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> FaultReport:
        return cls(
            eta=float(d["eta"]),
            regime_term=float(d["regime_term"]),
            exponent_term=float(d["exponent_term"]),
            fraction_term=float(d["fraction_term"]),
            samples=int(d["samples"]),
            excluded=int(d["excluded"]),
            spec=FaultSpec.from_dict(d["spec"]),
            gamma=None if d.get("gamma") is None else float(d["gamma"]),
        )


def _log2_abs(v) -> float:
    return math.log2(abs(v.numerator)) - math.log2(v.denominator)


def _log2_frac(d) -> float:
    return math.log2((1 << d.frac_width) + d.f) - d.frac_width


def _positions(spec: FaultSpec, bits: int) -> list[int]:
    if spec.fields is None:
        return list(range(spec.format.n_bits))
    fp = field_positions(spec.format, bits)
    return [p for f in spec.fields for p in fp[f]]


def _partial(spec: FaultSpec, patterns: list[int]):
    fmt = spec.format
    flip = inject_sign_magnitude if spec.model == "sign_magnitude" else inject
    dist, reg, exp, frac = [], [], [], []
    excluded = 0
    for xo in patterns:
        do = decode(fmt, xo)
        for pos in _positions(spec, xo):
            xf = flip(fmt, xo, pos)
            a, b = do, decode(fmt, xf)
            if a.special or b.special:
                if spec.policy == "exclude":
                    excluded += 1
                    continue
                a, b = decode(fmt, _clamp(fmt, xo)), decode(fmt, _clamp(fmt, xf))
            dist.append(abs(_log2_abs(a.value(fmt.es)) - _log2_abs(b.value(fmt.es))))
            reg.append(float((1 << fmt.es) * abs(a.k - b.k)))
            exp.append(float(abs(a.e - b.e)))
            frac.append(abs(_log2_frac(a) - _log2_frac(b)))
    return dist, reg, exp, frac, excluded


def _clamp(fmt: PositFormat, bits: int) -> int:
    if bits == 0:
        return fmt.minpos_bits
    if bits == fmt.nar_bits:
        return fmt.maxpos_bits
    return bits


def ece_empirical(spec: FaultSpec, workers: int | None = None) -> FaultReport:
    workers = workers or default_workers()
    patterns = operand_patterns(spec.format, spec.sampling)
    if workers > 1 and len(patterns) > 1024:
        with ProcessPoolExecutor(workers) as pool:
            futs = [pool.submit(_partial, spec, c) for c in chunks(patterns, workers * 4)]
            parts = [f.result() for f in futs]
    else:
        parts = [_partial(spec, patterns)]
    cols = [[x for p in parts for x in p[i]] for i in range(4)]
    excluded = sum(p[4] for p in parts)
    n = len(cols[0])
    means = [math.fsum(c) / n if n else 0.0 for c in cols]
    return FaultReport(*means, samples=n, excluded=excluded, spec=spec)


class DegenerateInputError(ValueError):
    pass


def improvement_factor(standard: FaultReport, bounded: FaultReport) -> float:
    """Ratio of standard ECE to bounded ECE; above 1 means the bounded format is more resilient."""
    fs, fb = standard.spec, bounded.spec
    if (fs.format.n_bits, fs.format.es) != (fb.format.n_bits, fb.format.es):
        raise ValueError(f"reports cover different word formats ({fs.format.name} vs {fb.format.name})")
    if (fs.sampling, fs.fields, fs.model, fs.policy) != (fb.sampling, fb.fields, fb.model, fb.policy):
        raise ValueError("reports use different sampling, positions, fault model or policy")
    if bounded.eta == 0:
        raise DegenerateInputError("bounded ECE is zero; improvement factor undefined")
    return standard.eta / bounded.eta


def paired_ece(fmt: PositFormat, **kwargs) -> tuple[FaultReport, FaultReport]:
    """ECE of the standard format and of ``fmt`` (bounded) under the same settings."""
    if not fmt.bounded:
        raise ValueError(f"{fmt.name} is not a bounded format")
    workers = kwargs.pop("workers", None)
    std = ece_empirical(FaultSpec(fmt.standard(), **kwargs), workers)
    bnd = ece_empirical(FaultSpec(fmt, **kwargs), workers)
    bnd.gamma = improvement_factor(std, bnd)
    return std, bnd
