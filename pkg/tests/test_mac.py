import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lposit.formats import BP8, BP16, BP32, NAR, P8, P16, P32, encode, to_exact
from lposit.logmul import EXACT, MultiplierConfig
from lposit.mac import (
    BINARY_POINT,
    QUIRE_MAX,
    Quire,
    RoundTrace,
    ScaledProduct,
    SimdMode,
    accumulate,
    aligned_addend,
    dot_product,
    finalize,
    multiply,
    multiply_stage,
    pack_lanes,
    round_dyadic,
    simd_mac,
    trace_multiply,
    unpack_lanes,
)
from oracle import exact_dot

ONE = {8: 0x40, 16: 0x4000, 32: 0x4000_0000}


class TestMultiplyStage:
    def test_one_times_one(self):
        p = multiply_stage(P8, MultiplierConfig(3), 0x40, 0x40)
        assert (p.sign, p.scale, p.special) == (0, 0, None)
        assert p.value() == 1

    def test_specials(self):
        cfg = MultiplierConfig(2)
        assert multiply_stage(P8, cfg, 0, 0x40).special == "zero"
        assert multiply_stage(P8, cfg, 0x80, 0).special == "nar"
        assert multiply_stage(P8, cfg, 0x80, 0).value() is NAR

    def test_sign_and_scale(self):
        p = multiply_stage(P16, EXACT, encode(P16, -3), encode(P16, Fraction(1, 8)))
        assert p.sign == 1
        assert p.value() == Fraction(-3, 8)

    def test_p16_three_squared_one_stage(self):
        p = multiply_stage(P16, MultiplierConfig(1), encode(P16, 3), encode(P16, 3))
        assert p.value() == 8


class TestAccumulate:
    def test_thousand_ones(self):
        q = Quire()
        one = multiply_stage(P16, EXACT, ONE[16], ONE[16])
        for _ in range(1000):
            q = accumulate(q, one)
        assert q.value() == 1000
        assert finalize(q, P16) == encode(P16, 1000)

    def test_returns_new_quire(self):
        q = Quire()
        q2 = accumulate(q, multiply_stage(P8, EXACT, 0x40, 0x40))
        assert q.acc == 0 and q2.acc == 1 << BINARY_POINT

    def test_nar_absorbs(self):
        q = accumulate(Quire(), multiply_stage(P8, EXACT, 0x80, 0x40))
        q = accumulate(q, multiply_stage(P8, EXACT, 0x40, 0x40))
        assert q.nar and finalize(q, P8) == 0x80

    def test_sub_lsb_truncated_toward_zero(self):
        tiny = ScaledProduct(0, -70, 3, 0)
        assert aligned_addend(tiny) == 0
        assert aligned_addend(ScaledProduct(1, -63, 3, 0)) == -6

    def test_saturation_is_sticky(self):
        big = ScaledProduct(0, 62, 1, 0)
        q = Quire()
        for _ in range(3):
            q = accumulate(q, big)
        assert q.saturated and q.acc == QUIRE_MAX
        q = accumulate(q, ScaledProduct(1, 62, 1, 0))
        assert q.saturated
        assert finalize(q, P8) == P8.maxpos_bits
        t = RoundTrace()
        finalize(q, P32, t)
        assert t.clamped == "saturated"


class TestFinalize:
    def test_one(self):
        assert finalize(Quire(1 << BINARY_POINT), P8) == 0x40

    def test_zero_and_negative(self):
        assert finalize(Quire(), P32) == 0
        assert finalize(Quire(-(1 << BINARY_POINT)), P8) == 0xC0

    def test_clamps(self):
        t = RoundTrace()
        assert finalize(Quire(1 << 100), BP8, t) == BP8.maxpos_bits
        assert t.clamped == "maxpos"
        assert finalize(Quire(1), BP32) == 1
        assert finalize(Quire(1), P32) == encode(P32, Fraction(1, 2**64))

    def test_trace_bits(self):
        # 9 in p8 is a tie: guard set, nothing below, lsb even
        t = RoundTrace()
        assert round_dyadic(P8, False, 9, 0, t) == 0x78
        assert (t.guard, t.round, t.sticky, t.rounded_up) == (1, 0, 0, False)

    @pytest.mark.parametrize("fmt", [P8, BP8, P16, BP16, P32, BP32])
    def test_matches_encode_on_random_dyadics(self, fmt):
        rng = random.Random(fmt.n_bits * 7 + (fmt.regime_bound or 0))
        for _ in range(3000):
            m = rng.randrange(1, 1 << rng.randrange(1, 70))
            exp = rng.randrange(-130, 60)
            neg = rng.random() < 0.5
            x = Fraction(m) * Fraction(2) ** exp
            assert round_dyadic(fmt, neg, m, exp) == encode(fmt, -x if neg else x)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            round_dyadic(P8, False, 0, 0)


class TestDot:
    def test_sixteen_ones(self):
        assert dot_product(P16, EXACT, [ONE[16]] * 16, [ONE[16]] * 16) == encode(P16, 16)

    def test_empty(self):
        assert dot_product(P8, EXACT, [], []) == 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            dot_product(P8, EXACT, [1, 2], [1])

    def test_single_rounding(self):
        # 1 + 2**-10 - 1 cancels exactly in the quire, unlike a rounded chain
        a = [ONE[16], encode(P16, Fraction(1, 1024)), encode(P16, -1)]
        b = [ONE[16]] * 3
        assert dot_product(P16, EXACT, a, b) == encode(P16, Fraction(1, 1024))

    def test_nar_anywhere(self):
        assert dot_product(P8, EXACT, [0x40, 0x80, 0x40], [0x40, 0x40, 0]) == 0x80

    def test_matches_rational_oracle(self):
        rng = random.Random(11)
        cfg = MultiplierConfig(6, 8)
        for _ in range(40):
            n = rng.randrange(1, 60)
            # moderate magnitudes keep every product inside the quire window
            a = [encode(P16, Fraction(rng.randrange(-999, 1000), 64)) for _ in range(n)]
            b = [encode(P16, Fraction(rng.randrange(-999, 1000), 64)) for _ in range(n)]
            assert dot_product(P16, cfg, a, b) == encode(P16, exact_dot(P16, cfg, a, b))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 255), st.integers(0, 255)), max_size=40), st.randoms())
    def test_permutation_invariant(self, pairs, rnd):
        a, b = [x for x, _ in pairs], [y for _, y in pairs]
        want = dot_product(BP8, MultiplierConfig(3, 4), a, b)
        rnd.shuffle(pairs)
        assert dot_product(BP8, MultiplierConfig(3, 4), [x for x, _ in pairs], [y for _, y in pairs]) == want


class TestSimd:
    def test_pack_roundtrip(self):
        for mode in SimdMode:
            lanes = [(0x40 << (mode.lane_bits - 8)) + i for i in range(mode.lanes)]
            assert unpack_lanes(mode, pack_lanes(mode, lanes)) == lanes
        assert pack_lanes(SimdMode.P8x4, [1, 2, 3, 4]) == 0x04030201
        with pytest.raises(ValueError):
            pack_lanes(SimdMode.P16x2, [1])
        with pytest.raises(ValueError):
            pack_lanes(SimdMode.P8x4, [256, 0, 0, 0])
        with pytest.raises(ValueError):
            unpack_lanes(SimdMode.P8x4, 1 << 32)

    def test_parse(self):
        assert SimdMode.parse("p16x2") is SimdMode.P16x2
        with pytest.raises(ValueError):
            SimdMode.parse("P4x8")

    def test_lanes_are_isolated(self):
        mode = SimdMode.P8x4
        rng = random.Random(5)
        for _ in range(300):
            la = [rng.randrange(256) for _ in range(4)]
            lb = [rng.randrange(256) for _ in range(4)]
            qs = simd_mac(mode, pack_lanes(mode, la), pack_lanes(mode, lb), [Quire() for _ in range(4)])
            for i in range(4):
                solo = accumulate(Quire(), multiply_stage(BP8, mode.default_config, la[i], lb[i]))
                assert qs[i] == solo

    def test_nar_lane_does_not_leak(self):
        mode = SimdMode.P16x2
        qs = simd_mac(mode, pack_lanes(mode, [0x8000, 0x4000]), pack_lanes(mode, [0x4000, 0x4000]), [Quire(), Quire()])
        assert qs[0].nar and not qs[1].nar
        assert finalize(qs[1], BP16) == 0x4000

    def test_format_lane_mismatch(self):
        with pytest.raises(ValueError):
            simd_mac(SimdMode.P32x1, 0, 0, [Quire()], fmt=P8)
        with pytest.raises(ValueError):
            simd_mac(SimdMode.P32x1, 0, 0, [Quire(), Quire()])


class TestTrace:
    def test_three_squared(self):
        t = trace_multiply(P16, MultiplierConfig(1), encode(P16, 3), encode(P16, 3))
        assert Fraction(t.result_value) == 8
        assert Fraction(t.exact_value) == 9
        assert Fraction(t.re) == Fraction(1, 9)
        assert len(t.stage_terms) == 1

    def test_truncation_recorded(self):
        t = trace_multiply(P8, MultiplierConfig(3, 4), 0x7F, 0x5F)
        assert t.truncated_a <= t.mantissa_a
        assert t.truncated_a.bit_length() == t.mantissa_a.bit_length()
        assert t.result_bits == multiply(P8, MultiplierConfig(3, 4), 0x7F, 0x5F)

    def test_special(self):
        t = trace_multiply(P8, EXACT, 0x80, 0x40)
        assert t.special == "nar" and t.result_bits == 0x80
