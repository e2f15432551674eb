import json
import warnings

import numpy as np
import pytest
from scipy import stats

from lphfda.errors import DivergenceError, DomainError, IncompatibleSlopeError
from lphfda.lph import (
    LinearPhaseType,
    ProcessPointLaw,
    lph_from_ph,
    lph_scale,
    lph_shift,
    lph_sum,
    process_point_law,
)
from lphfda.linalg import mat_exp
from lphfda.phasetype import PhaseType, erlang, exponential, hypoexponential

PH3 = PhaseType([0.5, 0.3, 0.2], [[-3.0, 1.0, 0.5], [0.2, -2.0, 1.0], [0.0, 0.4, -1.2]])


class TestRepresentation:
    def test_from_ph(self):
        d = lph_from_ph(exponential(1.0), 1.0, 1000.0)
        np.testing.assert_allclose(d.beta, [np.exp(-1)], rtol=1e-14)
        np.testing.assert_allclose(d.S, [[-1000.0]])
        assert d.boundary == pytest.approx(-1e-3)

    def test_four_tuple_round_trip(self):
        d = LinearPhaseType(PH3, 0.7, -3.0)
        back = LinearPhaseType.from_representation(d.a, d.b, d.beta, d.S)
        np.testing.assert_allclose(back.ph.alpha, PH3.alpha, atol=1e-14)
        np.testing.assert_allclose(back.ph.T, PH3.T, atol=1e-14)

    def test_zero_slope(self):
        with pytest.raises(DomainError):
            LinearPhaseType(exponential(1.0), 0.0, 0.0)

    def test_json_round_trip_both_forms(self):
        d = LinearPhaseType(PH3, 0.7, -3.0)
        full = json.loads(json.dumps(d.to_dict()))
        assert set(full) >= {"a", "b", "beta", "S"}
        x = np.linspace(-1, 1, 9)
        np.testing.assert_allclose(LinearPhaseType.from_dict(full).cdf(x), d.cdf(x), atol=1e-15)
        del full["ph"]
        np.testing.assert_allclose(LinearPhaseType.from_dict(full).cdf(x), d.cdf(x), atol=1e-12)


class TestDistribution:
    def test_positive_slope(self):
        d = LinearPhaseType(exponential(1.0), 1.0, 1.0)
        assert d.reliability(0.0) == pytest.approx(np.exp(-1), abs=1e-14)
        assert d.reliability(-5.0) == 1.0

    def test_negative_slope(self):
        d = LinearPhaseType(exponential(1.0), 1.0, -1.0)
        assert d.reliability(0.0) == pytest.approx(1 - np.exp(-1), abs=1e-14)
        assert d.reliability(1.0) == 0.0
        assert d.reliability(2.0) == 0.0

    def test_density(self):
        d = LinearPhaseType(exponential(1.0), 1.0, 2.0)
        assert d.density(0.0) == pytest.approx(2 * np.exp(-1), abs=1e-14)
        assert d.density(-1.0) == 0.0

    def test_change_of_variables(self):
        rng = np.random.default_rng(0)
        for b in (2.5, -0.4):
            d = LinearPhaseType(PH3, -0.3, b)
            x = rng.uniform(-4, 4, 100)
            y = d.a + b * x
            inside = y > 0
            Fy = PH3.cdf(np.where(inside, y, 0.0))
            expected = np.where(inside, Fy, 0.0) if b > 0 else np.where(inside, 1 - Fy, 1.0)
            np.testing.assert_allclose(d.cdf(x), expected, atol=1e-12)
            fy = PH3.density(np.where(inside, y, 1.0))
            np.testing.assert_allclose(d.density(x), np.where(inside, abs(b) * fy, 0.0), atol=1e-12)

    def test_cdf_matches_sampling(self):
        d = LinearPhaseType(PH3, 0.5, -2.0)
        x = d.sample(100_000, seed=1)
        assert stats.ks_1samp(x, d.cdf).statistic < 0.01


class TestMoments:
    def test_erlang_mean_and_variance(self):
        d = LinearPhaseType(erlang(2, 1.0), 1.0, 2.0)
        assert d.mean() == pytest.approx(0.5, abs=1e-12)
        assert d.var() == pytest.approx(0.5, abs=1e-12)
        assert d.moment(2) - d.mean() ** 2 == pytest.approx(d.var(), abs=1e-12)

    @pytest.mark.parametrize("a,b", [(1.0, 1000.0), (0.3, -2.0), (-1.0, 0.5)])
    def test_affine_moments(self, a, b):
        d = LinearPhaseType(PH3, a, b)
        m1, v = PH3.mean(), PH3.var()
        assert d.mean() == pytest.approx((m1 - a) / b, rel=1e-10, abs=1e-12)
        assert d.var() == pytest.approx(v / b ** 2, rel=1e-10)

    def test_mgf_closed_form(self):
        # X = (Y - 1) / 2 with Y ~ Exp(1): M(t) = e^{-t/2} / (1 - t/2)
        d = LinearPhaseType(exponential(1.0), 1.0, 2.0)
        assert d.mgf(0.5) == pytest.approx(np.exp(-0.25) / 0.75, rel=1e-12)
        assert round(d.mgf(0.5), 4) == 1.0384

    def test_mgf_excludes_atom(self):
        d = LinearPhaseType(PhaseType([0.4], [[-1.0]]), 0.0, 1.0)
        assert d.mgf(0.0) == pytest.approx(0.4)

    @pytest.mark.parametrize("b", [2.0, -1.5])
    def test_mgf_derivatives_match_moments(self, b):
        d = LinearPhaseType(PH3, 0.4, b)
        h = 1e-4
        m0, mp, mm = d.mgf(0.0), d.mgf(h), d.mgf(-h)
        first = (mp - mm) / (2 * h)
        second = (mp - 2 * m0 + mm) / h ** 2
        assert first == pytest.approx(d.moment(1), rel=1e-5)
        assert second == pytest.approx(d.moment(2), rel=1e-5)

    def test_mgf_divergence(self):
        with pytest.raises(DivergenceError):
            LinearPhaseType(exponential(1.0), 0.0, 1.0).mgf(1.5)


class TestClosure:
    def test_sum_against_monte_carlo(self):
        d1 = LinearPhaseType(erlang(2, 1.5), 0.5, 2.0)
        d2 = LinearPhaseType(PH3, -0.2, 2.0)
        s = lph_sum([d1, d2])
        rng = np.random.default_rng(2)
        x = d1.sample(100_000, rng) + d2.sample(100_000, rng)
        assert stats.ks_1samp(x, s.cdf).statistic < 0.01
        assert s.mean() == pytest.approx(d1.mean() + d2.mean(), rel=1e-12)

    def test_sum_slope_mismatch(self):
        with pytest.raises(IncompatibleSlopeError):
            lph_sum([LinearPhaseType(PH3, 0, 1.0), LinearPhaseType(PH3, 0, 2.0)])

    def test_sum_four_tuple_formula(self):
        # (a1 + a2, b, rho e^{L (a1 + a2)}, b L)
        d1 = LinearPhaseType(erlang(2, 1.5), 0.5, 2.0)
        d2 = LinearPhaseType(exponential(3.0), 0.25, 2.0)
        s = lph_sum([d1, d2])
        L = s.ph.T
        np.testing.assert_allclose(L[:2, 2:], np.outer(erlang(2, 1.5).exit_vector, [1.0]))
        np.testing.assert_allclose(s.beta, s.ph.alpha @ mat_exp(L, 0.75), rtol=1e-13)
        assert s.a == 0.75 and s.b == 2.0

    @pytest.mark.parametrize("gamma", [-1.0, 2.0, -0.3])
    def test_scale_against_monte_carlo(self, gamma):
        d = LinearPhaseType(PH3, 0.4, 1.5)
        g = lph_scale(d, gamma)
        x = gamma * d.sample(100_000, seed=3)
        assert stats.ks_1samp(x, g.cdf).statistic < 0.01

    def test_reflection_is_exact(self):
        d = LinearPhaseType(PH3, 0.4, 1.5)
        r = lph_scale(d, -1.0)
        x = np.linspace(-3, 3, 61)
        # P(-X <= x) = P(X >= -x)
        np.testing.assert_allclose(r.cdf(x), d.reliability(-x), atol=1e-12)

    def test_scale_zero(self):
        with pytest.raises(DomainError):
            lph_scale(LinearPhaseType(PH3, 0.0, 1.0), 0.0)

    def test_shift_round_trip(self):
        d = LinearPhaseType(PH3, 0.4, -1.5)
        back = lph_shift(lph_shift(d, 2.7), -2.7)
        assert back.a == pytest.approx(d.a, abs=1e-14)
        x = np.linspace(-2, 5, 30)
        np.testing.assert_allclose(lph_shift(d, 2.7).cdf(x + 2.7), d.cdf(x), atol=1e-12)


def sine_eigenfunction(j, t):
    return np.sqrt(2.0) * np.sin(j * np.pi * t)


class TestProcessPointLaw:
    def test_single_component_identity(self):
        score = LinearPhaseType(PH3, 1.0, 1000.0)
        f, mu = 1.3, 2e-3
        law = process_point_law([score], [f], mu, 0.4)
        x = np.linspace(mu - 0.01, mu + 0.01, 41)
        np.testing.assert_allclose(law.cdf(x), score.cdf((x - mu) / f), atol=1e-12)

    @pytest.mark.parametrize("f", [0.8, -1.2])
    def test_matches_four_tuple_for_q1(self, f):
        # (|f| - 1000 m sgn f, 1000 sgn f, alpha e^{T(1 - 1000 m / f)}, (1000 / f) T)
        ph, m = hypoexponential([6.0, 3.0, 2.0]), 4e-4
        law = process_point_law([LinearPhaseType(ph, 1.0, 1000.0)], [f], m, 0.5).rep
        assert law.a == pytest.approx(abs(f) - 1000 * m * np.sign(f), rel=1e-13)
        assert law.b == pytest.approx(1000 * np.sign(f))
        np.testing.assert_allclose(law.beta, ph.alpha @ mat_exp(ph.T, 1 - 1000 * m / f), rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(law.S, 1000 / f * ph.T, rtol=1e-13)

    @pytest.mark.parametrize("t", [0.25, 0.5, 0.75])
    def test_two_components_against_monte_carlo(self, t):
        b, mu = 4.0, 0.3
        f = [sine_eigenfunction(1, t), sine_eigenfunction(3, t)]
        scores = [
            LinearPhaseType(erlang(2, 2.0), 1.0, b * np.sign(f[0])),
            LinearPhaseType(PH3, 0.5, b * np.sign(f[1])),
        ]
        law = process_point_law(scores, f, mu, t)
        rng = np.random.default_rng(int(t * 100))
        x = mu + f[0] * scores[0].sample(100_000, rng) + f[1] * scores[1].sample(100_000, rng)
        assert stats.ks_1samp(x, law.cdf).statistic < 0.01

    def test_mixed_orientation_rejected(self):
        f = [1.0, -1.0]
        scores = [LinearPhaseType(PH3, 0.5, 2.0), LinearPhaseType(PH3, 0.5, 2.0)]
        with pytest.raises(IncompatibleSlopeError):
            process_point_law(scores, f, 0.0, 0.5)

    def test_slope_magnitudes_must_agree(self):
        scores = [LinearPhaseType(PH3, 0.5, 2.0), LinearPhaseType(PH3, 0.5, 3.0)]
        with pytest.raises(IncompatibleSlopeError):
            process_point_law(scores, [1.0, 1.0], 0.0, 0.5)

    def test_vanishing_weight_dropped(self):
        scores = [LinearPhaseType(PH3, 0.5, 2.0), LinearPhaseType(erlang(2, 1.0), 0.5, 2.0)]
        with pytest.warns(UserWarning, match="dropped"):
            law = process_point_law(scores, [0.7, 0.0], 0.1, 1.0)
        assert law.dropped == (2,)
        ref = process_point_law(scores[:1], [0.7], 0.1, 1.0)
        x = np.linspace(-1, 1, 21)
        np.testing.assert_allclose(law.cdf(x), ref.cdf(x), atol=1e-14)

    def test_all_weights_vanish(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            law = process_point_law([LinearPhaseType(PH3, 0.5, 2.0)], [0.0], 0.25, 0.0)
        assert law.degenerate
        np.testing.assert_array_equal(law.cdf([0.2, 0.25, 0.3]), [0.0, 1.0, 1.0])
        back = ProcessPointLaw.from_dict(json.loads(json.dumps(law.to_dict())))
        assert back.degenerate and back.mean_shift == 0.25

    def test_json_round_trip(self):
        law = process_point_law([LinearPhaseType(PH3, 0.5, 2.0)], [0.7], 0.1, 0.3)
        back = ProcessPointLaw.from_dict(json.loads(json.dumps(law.to_dict())))
        x = np.linspace(-1, 1, 21)
        np.testing.assert_allclose(back.cdf(x), law.cdf(x), atol=1e-15)

    def test_t_outside_domain(self):
        with pytest.raises(DomainError):
            process_point_law([LinearPhaseType(PH3, 0.5, 2.0)], [1.0], 0.0, 1.5)


def test_denseness_surrogate_shifted_gamma():
    # shifted Gamma on (c, inf) is approached by EM-fitted LPH laws with offset -c
    from lphfda.emfit import EmConfig, em_fit

    c = 2.0
    x = c + stats.gamma(6, scale=0.5).rvs(size=400, random_state=np.random.default_rng(0))
    ks = []
    for m in (2, 4, 8):
        ph, _ = em_fit(x - c, EmConfig(phases=m, restarts=2, max_iter=300, seed=0))
        ks.append(stats.ks_1samp(x, LinearPhaseType(ph, -c, 1.0).cdf).statistic)
    assert ks[1] <= ks[0] + 0.005 and ks[2] <= ks[1] + 0.005
