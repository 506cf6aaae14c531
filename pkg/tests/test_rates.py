import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from mlcrelay.errors import QuadratureDivergence, ZeroCoefficient
from mlcrelay.f2algebra import (
    GF4_ONE,
    GF4_ZERO,
    BinMatrix,
    PartitionSpec,
    enumerate_partitions,
    iter_decode_functions,
    rotated_xor_function,
    xor_function,
)
from mlcrelay.modulation import ChannelPair, NoiseModel, likelihood, relay_constellation
from mlcrelay.rates import (
    RateEngine,
    bound_term,
    bound_term_auxiliary,
    conditional_mi_xor,
    df_report,
    gain_set,
    gf4_pairs,
    gf4_rate,
    mixture_entropy,
    mixture_entropy_mc,
    rate_f,
    threshold_snr_db,
    universal_rate,
)

FUNCS = list(iter_decode_functions(2))
SNR7 = NoiseModel.from_snr_db(7.0)


def entropy_by_dblquad(points, sigma2):
    pts = list(points)
    spread = 8 * math.sqrt(sigma2)
    xs = [p.real for p in pts]
    ys = [p.imag for p in pts]

    def integrand(b, a):
        p = likelihood(a + 1j * b, pts, NoiseModel(sigma2))
        return -p * math.log2(p) if p > 0 else 0.0

    val, _ = integrate.dblquad(integrand, min(xs) - spread, max(xs) + spread,
                               min(ys) - spread, max(ys) + spread, epsabs=1e-11, epsrel=1e-11)
    return val


class TestMixtureEntropy:
    def test_single_point(self):
        noise = NoiseModel(0.3)
        assert mixture_entropy([0.5 - 1j], noise) == pytest.approx(math.log2(2 * math.pi * math.e * 0.3), abs=1e-14)

    def test_separated_pair_adds_one_bit(self):
        noise = NoiseModel(0.01)
        single = mixture_entropy([0], noise)
        assert mixture_entropy([0, 5], noise) == pytest.approx(single + 1, abs=1e-3)

    def test_matches_adaptive_cubature(self):
        sigma2 = 0.25
        pts = [1, 1j, -0.4 - 0.2j]
        assert mixture_entropy(pts, NoiseModel(sigma2)) == pytest.approx(entropy_by_dblquad(pts, sigma2), abs=1e-6)

    def test_multiplicity_matters(self):
        # weights follow multiplicity, as needed for cells with coincident points
        noise = NoiseModel(0.2)
        assert mixture_entropy([0, 0, 0, 1], noise) != pytest.approx(mixture_entropy([0, 1], noise), abs=1e-3)
        assert mixture_entropy([0, 1, 0, 1], noise) == mixture_entropy([0, 1], noise)

    @pytest.mark.parametrize("theta,sigma2", [(0.0, SNR7.sigma2), (math.pi / 5, SNR7.sigma2), (1.0, 0.5)])
    def test_monte_carlo_agrees(self, qpsk, theta, sigma2):
        rc = relay_constellation(qpsk, ChannelPair.from_theta(theta))
        noise = NoiseModel(sigma2)
        assert mixture_entropy_mc(rc.points, noise, 1_000_000, seed=0) == pytest.approx(
            mixture_entropy(rc.points, noise), abs=2e-3)

    def test_divergence_reported(self, qpsk):
        rc = relay_constellation(qpsk, ChannelPair.from_theta(0.3))
        with pytest.raises(QuadratureDivergence):
            mixture_entropy(rc.points, NoiseModel(0.05), orders=(2, 3, 4), tol=1e-6)

    def test_deterministic(self, qpsk):
        rc = relay_constellation(qpsk, ChannelPair.from_theta(0.77))
        assert mixture_entropy(rc.points, SNR7) == mixture_entropy(rc.points, SNR7)

    @given(st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
                    min_size=1, max_size=6),
           st.floats(0.05, 1.0))
    @settings(max_examples=25, deadline=None)
    def test_bounds(self, pts, sigma2):
        # between the single-Gaussian entropy and that plus log2 of the component count
        noise = NoiseModel(sigma2)
        h = mixture_entropy(pts, noise)
        base = math.log2(2 * math.pi * math.e * sigma2)
        assert base - 1e-9 <= h <= base + math.log2(len(set(pts))) + 1e-6


class TestBoundTerms:
    def test_high_snr_joint_term(self, qpsk):
        s = PartitionSpec(2, ((1,), (2,)))
        assert bound_term(qpsk, ChannelPair(1, 1), xor_function(), s, NoiseModel.from_snr_db(40)) == \
            pytest.approx(2.0, abs=0.02)

    def test_low_snr(self, qpsk):
        noise = NoiseModel.from_snr_db(-30)
        for s in enumerate_partitions(2):
            assert bound_term(qpsk, ChannelPair.from_theta(0.4), xor_function(), s, noise) <= 0.01

    @pytest.mark.parametrize("theta", [0.0, 0.3, math.pi / 2, 2.0])
    def test_fourth_term_is_parity_conditioned(self, qpsk, theta):
        h = ChannelPair.from_theta(theta)
        s = PartitionSpec(2, ((1, 2),))
        for f in (xor_function(), rotated_xor_function(), FUNCS[7]):
            direct = conditional_mi_xor(qpsk, h, f, SNR7)
            assert bound_term(qpsk, h, f, s, SNR7) == pytest.approx(direct, abs=1e-9)
            assert bound_term_auxiliary(qpsk, h, f.matrix, s, SNR7) == pytest.approx(direct, abs=1e-9)

    def test_auxiliary_route_all_specs(self, qpsk):
        h = ChannelPair.from_theta(1.3)
        for f in FUNCS[::5]:
            for s in enumerate_partitions(2):
                assert bound_term_auxiliary(qpsk, h, f.matrix, s, SNR7) == pytest.approx(
                    bound_term(qpsk, h, f, s, SNR7), abs=1e-9)

    def test_range_and_monotone(self, qpsk):
        h = ChannelPair.from_theta(0.9)
        ladder = [NoiseModel.from_snr_db(d) for d in (0.0, 5.0, 10.0)]
        for f in FUNCS[::7]:
            for s in enumerate_partitions(2):
                vals = [bound_term(qpsk, h, f, s, n) for n in ladder]
                assert all(0 <= v <= len(s.support) + 1e-9 for v in vals)
                assert vals[0] <= vals[1] + 1e-9 <= vals[2] + 2e-9

    def test_chain_rule(self, qpsk):
        eng = RateEngine(qpsk, ChannelPair.from_theta(0.6), SNR7)
        lm = xor_function().matrix
        x1, x2 = lm.select_rows([0]), lm.select_rows([1])
        h_y = eng.conditional_entropy(BinMatrix.zeros(0, 4))
        h_all = eng.conditional_entropy(lm)
        joint = h_y - h_all
        given2 = eng.conditional_entropy(x2) - h_all
        only2 = h_y - eng.conditional_entropy(x2)
        assert joint == pytest.approx(given2 + only2, abs=1e-6)
        assert eng.conditional_entropy(x1) >= h_all


class TestRateF:
    def test_four_terms(self, qpsk):
        rep = rate_f(qpsk, ChannelPair.from_theta(0.2), xor_function(), SNR7)
        assert [s.label for s in rep.terms] == ["{1}{2}", "{1}", "{2}", "{1,2}"]
        assert rep.rate == min(rep.terms[s] / s.p for s in rep.terms)
        assert 0 <= rep.sum_rate <= 2
        assert rep.sum_rate == 2 * rep.rate

    def test_rotation_invariance(self, qpsk):
        h = ChannelPair.from_theta(1.1, 0.2)
        for f in FUNCS[::4]:
            assert rate_f(qpsk, h.rotated(0.7), f, SNR7).rate == pytest.approx(rate_f(qpsk, h, f, SNR7).rate, abs=1e-6)

    def test_swap_symmetry(self, qpsk):
        h = ChannelPair(np.exp(0.5j), 0.9 * np.exp(-0.3j))
        for f in FUNCS:
            assert rate_f(qpsk, h.swapped(), f.swapped(), SNR7).rate == pytest.approx(
                rate_f(qpsk, h, f, SNR7).rate, abs=1e-9)

    def test_limiting_term(self, qpsk):
        rep = rate_f(qpsk, ChannelPair.from_theta(math.pi / 2), xor_function(), SNR7)
        assert rep.limiting_term().label == "{1,2}"


class TestUniversal:
    def test_singleton(self, qpsk):
        h = ChannelPair.from_theta(0.5)
        rate, table = universal_rate(qpsk, [h], FUNCS, SNR7)
        assert rate == max(rate_f(qpsk, h, f, SNR7).rate for f in FUNCS)
        assert table[0].best_rate == rate

    def test_monotone_in_gains(self, qpsk):
        gains = gain_set(8)
        rates = [universal_rate(qpsk, gains[:k], FUNCS, SNR7)[0] for k in (1, 3, 8)]
        assert rates[0] >= rates[1] >= rates[2]

    def test_argmax_families(self, qpsk):
        _, table = universal_rate(qpsk, [ChannelPair.from_theta(0), ChannelPair.from_theta(math.pi / 2)], FUNCS, SNR7)
        assert "xor" in table[0].best and "rxor" not in table[0].best
        assert "rxor" in table[1].best and "xor" not in table[1].best

    def test_grid_2d_matches_difference_grid(self, qpsk):
        one = universal_rate(qpsk, gain_set(4), FUNCS, SNR7)[0]
        two = universal_rate(qpsk, gain_set(4, grid_2d=True), FUNCS, SNR7)[0]
        assert two == pytest.approx(one, abs=1e-6)

    def test_jobs_identical(self, qpsk):
        gains = gain_set(4)
        assert universal_rate(qpsk, gains, FUNCS, SNR7, jobs=1)[0] == universal_rate(qpsk, gains, FUNCS, SNR7, jobs=2)[0]


class TestGf4AndDf:
    def test_nine_pairs(self):
        assert len(gf4_pairs()) == 9

    def test_zero_coefficient(self, qpsk):
        with pytest.raises(ZeroCoefficient):
            gf4_rate(qpsk, ChannelPair(1, 1), GF4_ZERO, GF4_ONE, SNR7)

    def test_gf4_beats_xor_near_quadrature(self, qpsk):
        h = ChannelPair.from_theta(math.pi / 2)
        assert gf4_rate(qpsk, h, GF4_ONE, GF4_ONE, SNR7) > rate_f(qpsk, h, xor_function(), SNR7).sum_rate

    def test_gf4_range(self, qpsk):
        for a, b in gf4_pairs():
            assert 0 <= gf4_rate(qpsk, ChannelPair.from_theta(0.3), a, b, SNR7) <= 2

    def test_df_term_count(self, qpsk):
        assert len(df_report(qpsk, ChannelPair(1, 1), SNR7).terms) == 51

    def test_df_noiseless_cap(self, qpsk):
        rep = df_report(qpsk, ChannelPair(1, 1), NoiseModel.from_snr_db(40))
        assert rep.sum_rate <= math.log2(9) + 1e-9
        assert rep.f_id == "df"


def test_threshold_meets_target(qpsk):
    h = ChannelPair.from_theta(0.4)
    thr = threshold_snr_db(qpsk, h, xor_function())
    below = RateEngine(qpsk, h, NoiseModel.from_snr_db(thr - 0.05))
    above = RateEngine(qpsk, h, NoiseModel.from_snr_db(thr + 0.05))
    lm, specs = xor_function().matrix, enumerate_partitions(2)
    assert min(v / s.p for s, v in below.terms(lm, specs).items()) < 0.5
    assert min(v / s.p for s, v in above.terms(lm, specs).items()) > 0.5
