from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lposit.logmul import (
    CANONICAL_CONFIGS,
    EXACT,
    MultiplierConfig,
    ilm_mul,
    ilm_mul_array,
    ilm_terms,
    leading_one,
    mitchell_mul,
    parse_config,
    relative_error,
    truncate_operand,
)

u16 = st.integers(min_value=0, max_value=2**16 - 1)
stages = st.integers(min_value=1, max_value=8)


def test_leading_one():
    assert leading_one(1) == 0
    assert leading_one(0b1010_0000) == 7
    assert leading_one(0) is None


class TestTruncate:
    def test_examples(self):
        assert truncate_operand(0b1111_1111, 4) == 0b1111_0000
        assert truncate_operand(0b1000_0000, 4) == 0b1000_0000
        assert truncate_operand(0b0001_0110, 2) == 0b0001_0000
        assert truncate_operand(0, 3) == 0

    def test_short_operand_untouched(self):
        assert truncate_operand(0b101, 5) == 0b101

    def test_bad_width(self):
        with pytest.raises(ValueError):
            truncate_operand(5, 0)


class TestMitchell:
    def test_examples(self):
        assert mitchell_mul(3, 3) == 8
        assert mitchell_mul(4, 8) == 32
        assert mitchell_mul(0, 255) == 0

    def test_carry_branch(self):
        # 3 = 2(1 + 1/2), 7 = 4(1 + 3/4): fractions sum to 5/4 -> 2**4 * 5/4
        assert mitchell_mul(3, 7) == 20

    def test_never_overestimates_8bit(self):
        for a in range(1, 256):
            for b in range(1, 256):
                assert mitchell_mul(a, b) <= a * b


class TestIterative:
    def test_examples(self):
        assert ilm_mul(3, 3, MultiplierConfig(1)) == 8
        assert ilm_mul(3, 3, MultiplierConfig(2)) == 9
        assert ilm_terms(3, 3, MultiplierConfig(2)) == [8, 1]

    def test_single_stage_differs_from_mitchell_past_the_carry(self):
        # the residual scheme keeps 2**(ka+kb) * (1 + xa + xb) even when xa + xb >= 1
        assert ilm_mul(3, 7, MultiplierConfig(1)) == 18
        assert mitchell_mul(3, 7) == 20

    def test_power_of_two_exact(self):
        for k in range(8):
            for b in range(1, 300):
                for n in (1, 2, 5):
                    assert ilm_mul(1 << k, b, MultiplierConfig(n)) == b << k

    def test_exact_config(self):
        assert ilm_mul(255, 253, EXACT) == 255 * 253

    def test_relative_error_examples(self):
        assert relative_error(3, 3, MultiplierConfig(1)) == Fraction(1, 9)
        for cfg in CANONICAL_CONFIGS[8][:2]:
            assert relative_error(4, 4, cfg) == 0
        assert relative_error(255, 255, MultiplierConfig(2)) <= Fraction(1, 16)
        with pytest.raises(ValueError):
            relative_error(0, 5, MultiplierConfig(2))

    def test_bound_exhaustive_8bit(self):
        for n in (1, 2, 3):
            cfg = MultiplierConfig(n)
            worst = max(relative_error(a, b, cfg) for a in range(1, 256) for b in range(a, 256))
            assert worst <= Fraction(1, 4**n)

    def test_worst_case_near_all_ones(self):
        # the error approaches the bound when both residual chains stay all-ones
        for n in (1, 2, 3):
            re = relative_error(255, 255, MultiplierConfig(n))
            assert Fraction(1, 4**n) / 2 < re <= Fraction(1, 4**n)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MultiplierConfig(0)
        with pytest.raises(ValueError):
            MultiplierConfig(3, 0)
        with pytest.raises(ValueError):
            MultiplierConfig(3, 9).check_width(8)

    def test_labels(self):
        assert parse_config("LP-3_T4") == MultiplierConfig(3, 4)
        assert parse_config("lp-12") == MultiplierConfig(12)
        assert parse_config("6:10") == MultiplierConfig(6, 10)
        assert parse_config("exact") is EXACT
        assert MultiplierConfig(6, 8).label == "LP-6_T8"
        with pytest.raises(ValueError):
            parse_config("LP-x")


@settings(max_examples=500, deadline=None)
@given(u16, u16, stages, st.one_of(st.none(), st.integers(1, 16)))
def test_properties(a, b, n, m):
    cfg = MultiplierConfig(n, m)
    p = ilm_mul(a, b, cfg)
    ta = truncate_operand(a, m) if m else a
    tb = truncate_operand(b, m) if m else b
    assert p <= ta * tb <= a * b
    assert p == ilm_mul(b, a, cfg)
    assert ilm_mul(a, b, MultiplierConfig(n + 1, m)) >= p
    if a and b and m is None:
        assert (a * b - p) * 4**n <= a * b
    # zero residual on either truncated side collapses to the exact product
    if ta & (ta - 1) == 0 or tb & (tb - 1) == 0:
        assert p == ta * tb


@pytest.mark.parametrize("cfg", [MultiplierConfig(1), MultiplierConfig(3), MultiplierConfig(6, 8), MultiplierConfig(12, 20), EXACT])
def test_vectorised_matches_scalar(cfg):
    rng = np.random.default_rng(3)
    a = rng.integers(0, 1 << 26, 4000, dtype=np.uint64)
    b = rng.integers(0, 1 << 26, 4000, dtype=np.uint64)
    a[:50] = 0
    b[50:100] = 1 << 20
    got = ilm_mul_array(a, b, cfg)
    assert [int(x) for x in got] == [ilm_mul(int(x), int(y), cfg) for x, y in zip(a, b)]


def test_vectorised_rejects_wide_operands():
    with pytest.raises(ValueError):
        ilm_mul_array(np.array([1 << 27]), np.array([3]), MultiplierConfig(2))


def test_truncated_bound_that_does_hold():
    """Each m-bit truncation loses under 2**-(m-1); combined with the stage error this is tight."""
    for n in (1, 2, 3):
        for m in (4, 5):
            cfg = MultiplierConfig(n, m)
            bound = 1 - (1 - Fraction(1, 2 ** (m - 1))) ** 2 * (1 - Fraction(1, 4**n))
            worst = max(relative_error(a, b, cfg) for a in range(1, 256) for b in range(a, 256))
            assert worst <= bound
