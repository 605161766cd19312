"""Operand sampling shared by the error and fault harnesses."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass
from typing import Iterator

import numpy as np

from .formats import PositFormat, encode

THREADS_ENV = "LPOSIT_THREADS"


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class Sampling:
    """``exhaustive`` enumerates every pattern; ``random`` draws ``count`` with ``seed``.

    ``distribution`` is ``uniform`` (over bit patterns) or ``gaussian``
    (standard normal reals rounded to the format).
    """

    kind: str = "exhaustive"
    count: int = 0
    seed: int = 0
    distribution: str = "uniform"

    def __post_init__(self):
        if self.kind not in ("exhaustive", "random"):
            raise ValueError(f"sampling kind must be exhaustive or random, got {self.kind!r}")
        if self.distribution not in ("uniform", "gaussian"):
            raise ValueError(f"distribution must be uniform or gaussian, got {self.distribution!r}")
        if self.kind == "random" and self.count <= 0:
            raise ValueError("random sampling needs a positive count")
        if self.kind == "exhaustive" and self.distribution != "uniform":
            raise ValueError("exhaustive sampling is uniform by construction")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> Sampling:
        return cls(**d)


def _draw(fmt: PositFormat, rng: np.random.Generator, count: int, distribution: str) -> list[int]:
    if distribution == "uniform":
        return [int(x) for x in rng.integers(0, 1 << fmt.n_bits, size=count, dtype=np.uint64)]
    return [encode(fmt, float(x)) for x in rng.standard_normal(count)]


def operand_patterns(fmt: PositFormat, sampling: Sampling) -> list[int]:
    if sampling.kind == "exhaustive":
        if fmt.n_bits > 16:
            raise ValueError(f"exhaustive operand sampling is not available for {fmt.n_bits}-bit formats")
        return list(range(1 << fmt.n_bits))
    rng = np.random.default_rng(sampling.seed)
    return _draw(fmt, rng, sampling.count, sampling.distribution)


def operand_pairs(fmt: PositFormat, sampling: Sampling) -> list[tuple[int, int]]:
    if sampling.kind == "exhaustive":
        if fmt.n_bits > 8:
            raise ValueError(f"exhaustive pair sweeps are only permitted for 8-bit formats, not {fmt.name}")
        pats = range(1 << fmt.n_bits)
        return [(a, b) for a in pats for b in pats]
    rng = np.random.default_rng(sampling.seed)
    a = _draw(fmt, rng, sampling.count, sampling.distribution)
    b = _draw(fmt, rng, sampling.count, sampling.distribution)
    return list(zip(a, b))


def chunks(items: list, n: int) -> Iterator[list]:
    size = max(1, -(-len(items) // n))
    for i in range(0, len(items), size):
        yield items[i : i + size]
