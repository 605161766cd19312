"""Arithmetic error of the approximate posit multiplier against the exact one.

The reference is the correctly rounded posit product of the decoded
operands.  Error distances are taken between decoded real values after the
final encode.  Aggregation uses :func:`math.fsum` so a sweep gives the same
report whatever order (or worker count) produced the per-pair values.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .formats import NAR, PositFormat, encode, parse_format, to_exact
from .logmul import MultiplierConfig, parse_config
from .mac import finalize_product, multiply_stage
from .sampling import Sampling, chunks, default_workers, operand_pairs


@dataclass(frozen=True)
class SweepSpec:
    format: PositFormat
    cfg: MultiplierConfig
    sampling: Sampling = field(default_factory=Sampling)

    def __post_init__(self):
        if self.sampling.kind == "exhaustive" and self.format.n_bits != 8:
            raise ValueError(f"exhaustive sweeps are only permitted for 8-bit formats, not {self.format.name}")
        self.cfg.check_width(self.format.mant_width)

    def to_dict(self) -> dict:
        return {
            "format": self.format.name,
            "config": self.cfg.label,
            "sampling": self.sampling.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> SweepSpec:
        return cls(parse_format(d["format"]), parse_config(d["config"]), Sampling.from_dict(d["sampling"]))


@dataclass(frozen=True)
class PairError:
    exact_bits: int
    approx_bits: int
    exact_real: Fraction | None
    approx_real: Fraction | None
    ed: Fraction | None
    re: Fraction | None

    @property
    def excluded(self) -> bool:
        return self.re is None


def evaluate_pair(fmt: PositFormat, cfg: MultiplierConfig, a: int, b: int) -> PairError:
    va, vb = to_exact(fmt, a), to_exact(fmt, b)
    if va is NAR or vb is NAR:
        nar = fmt.nar_bits
        return PairError(nar, nar, None, None, None, None)
    exact_bits = encode(fmt, va * vb)
    approx_bits = finalize_product(multiply_stage(fmt, cfg, a, b), fmt)
    exact_real = to_exact(fmt, exact_bits)
    approx_real = to_exact(fmt, approx_bits)
    ed = abs(exact_real - approx_real)
    re = ed / abs(exact_real) if exact_real != 0 else None
    return PairError(exact_bits, approx_bits, exact_real, approx_real, ed, re)


@dataclass
class ErrorReport:
    mse: float
    mae: float
    nmed: float
    mred: float
    max_re: float
    pairs_evaluated: int
    pairs_excluded: int
    spec: SweepSpec

    UNITS = {"mse": "value^2", "mae": "value", "nmed": "ratio", "mred": "ratio", "max_re": "ratio"}

    def metrics(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.UNITS}

    def to_dict(self) -> dict:
        return {
            **self.metrics(),
            "pairs_evaluated": self.pairs_evaluated,
            "pairs_excluded": self.pairs_excluded,
            "spec": self.spec.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ErrorReport:
        return cls(
            **{k: float(d[k]) for k in cls.UNITS},
            pairs_evaluated=int(d["pairs_evaluated"]),
            pairs_excluded=int(d["pairs_excluded"]),
            spec=SweepSpec.from_dict(d["spec"]),
        )


def _partial(fmt: PositFormat, cfg: MultiplierConfig, pairs: list[tuple[int, int]]):
    ed, ed2, re = [], [], []
    max_exact = Fraction(0)
    excluded = 0
    for a, b in pairs:
        r = evaluate_pair(fmt, cfg, a, b)
        if r.excluded:
            excluded += 1
            continue
        ed.append(float(r.ed))
        ed2.append(float(r.ed * r.ed))
        re.append(float(r.re))
        max_exact = max(max_exact, abs(r.exact_real))
    return ed, ed2, re, max_exact, excluded


def run_sweep(spec: SweepSpec, workers: int | None = None) -> ErrorReport:
    workers = workers or default_workers()
    pairs = operand_pairs(spec.format, spec.sampling)
    if workers > 1 and len(pairs) > 4096:
        with ProcessPoolExecutor(workers) as pool:
            futs = [pool.submit(_partial, spec.format, spec.cfg, c) for c in chunks(pairs, workers * 4)]
            parts = [f.result() for f in futs]
    else:
        parts = [_partial(spec.format, spec.cfg, pairs)]
    ed = [x for p in parts for x in p[0]]
    ed2 = [x for p in parts for x in p[1]]
    re = [x for p in parts for x in p[2]]
    max_exact = max((p[3] for p in parts), default=Fraction(0))
    excluded = sum(p[4] for p in parts)
    n = len(ed)
    if n == 0:
        return ErrorReport(0.0, 0.0, 0.0, 0.0, 0.0, 0, excluded, spec)
    mae = math.fsum(ed) / n
    return ErrorReport(
        mse=math.fsum(ed2) / n,
        mae=mae,
        nmed=mae / float(max_exact) if max_exact else 0.0,
        mred=math.fsum(re) / n,
        max_re=max(re),
        pairs_evaluated=n,
        pairs_excluded=excluded,
        spec=spec,
    )
