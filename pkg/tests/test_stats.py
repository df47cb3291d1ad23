import math

import numpy as np
import pytest

from fairbell.angles import PI
from fairbell.engine import CoincidenceCounts, ExperimentConfig
from fairbell.errors import NoDataError, ProtocolError
from fairbell.models import DetectionModel, SourceModel
from fairbell.protocol import SweepPoint, SweepResult, uniform_theta_grid
from fairbell.stats import (
    CHSH_A,
    CHSH_A_PRIME,
    CHSH_B,
    CHSH_B_PRIME,
    binomial_stderr,
    chsh,
    conditional_detected_rate,
    correlation,
    detected_rate,
    harmonic_analysis,
)

import oracles


def coincidences(n_pp=0, n_pm=0, n_mp=0, n_mm=0, **extra):
    fields = dict(n_pp=n_pp, n_pm=n_pm, n_mp=n_mp, n_mm=n_mm, **extra)
    return CoincidenceCounts(**fields, n_emitted=sum(fields.values()))


def synthetic_sweep(rates, n_per_point=1_000_000, thetas=None):
    """Build a sweep whose per-point detected rates approximate ``rates``.

    Counts are integers, so each requested rate is realized to within 1/n.
    """
    if thetas is None:
        thetas = uniform_theta_grid(len(rates))
    points = []
    for theta, r in zip(thetas, rates):
        detected = round(r * n_per_point)
        counts = CoincidenceCounts(n_pp=detected, n_none=n_per_point - detected, n_emitted=n_per_point)
        points.append(
            SweepPoint(
                theta=theta,
                counts=counts,
                r_d=detected / n_per_point,
                std_error=binomial_stderr(detected, n_per_point),
            )
        )
    return SweepResult(plan=None, per_point=tuple(points))


class TestCorrelation:
    def test_perfect_anticorrelation(self):
        est = correlation(coincidences(n_pm=500_000, n_mp=500_000))
        assert est.value == -1.0
        assert est.std_error == 0.0
        assert est.n_detected == 1_000_000

    def test_equal_quarters_vanish(self):
        est = correlation(coincidences(250_000, 250_000, 250_000, 250_000))
        assert est.value == 0.0
        assert est.std_error == pytest.approx(1e-3, rel=1e-9)

    def test_no_data(self):
        with pytest.raises(NoDataError):
            correlation(coincidences(n_none=10))

    def test_value_bounded(self):
        est = correlation(coincidences(3, 5, 7, 11))
        assert -1.0 <= est.value <= 1.0

    def test_sawtooth_against_quadrature(self):
        phi1, phi2 = 0.0, PI / 8
        closed = oracles.sawtooth_correlation(phi1, phi2)
        grid = oracles.sign_product_correlation_grid(phi1, phi2)
        assert closed == pytest.approx(-0.5, abs=1e-12)
        assert grid == pytest.approx(closed, abs=1e-4)
        n = 1_000_000
        cfg = ExperimentConfig(
            SourceModel.singlet(), DetectionModel.independent_errors(1.0, 0.0), phi1, phi2, n, seed=21
        )
        from fairbell.engine import run_batch

        est = correlation(run_batch(cfg))
        assert abs(est.value - closed) < 4 * est.std_error

    def test_malus_product_model_against_quadrature(self):
        phi1, phi2 = 0.3, 0.3 + PI / 8
        oracle = oracles.malus_correlation(phi1, phi2)
        assert oracle == pytest.approx(-math.cos(2 * (phi1 - phi2)) / 2, abs=1e-10)
        n = 1_000_000
        cfg = ExperimentConfig(
            SourceModel.singlet(), DetectionModel.fair_constant(1.0), phi1, phi2, n, seed=22
        )
        from fairbell.engine import run_batch

        est = correlation(run_batch(cfg))
        assert abs(est.value - oracle) < 4 * est.std_error


class TestDetectedRate:
    def test_full_efficiency(self):
        c = coincidences(10, 20, 30, 40)
        assert detected_rate(c) == 1.0

    def test_no_data(self):
        with pytest.raises(NoDataError):
            detected_rate(CoincidenceCounts.zero())
        with pytest.raises(NoDataError):
            conditional_detected_rate(
                CoincidenceCounts(n_source_rejected=5, n_emitted=5)
            )

    def test_power_model_trig_identity(self):
        # both photons at theta: rate |cos 2d|^2 = (1 + cos 4d)/2
        delta = PI / 8
        expected = oracles.power_prepared_rate(1.0, delta, 0.0)
        assert expected == pytest.approx((1 + math.cos(4 * delta)) / 2, abs=1e-12)
        n = 1_000_000
        cfg = ExperimentConfig(
            SourceModel.ideal_prepared(delta), DetectionModel.unfair_power(1.0), 0.0, 0.0, n, seed=23
        )
        from fairbell.engine import run_batch

        counts = run_batch(cfg)
        sigma = math.sqrt(expected * (1 - expected) / n)
        assert abs(detected_rate(counts) - expected) < 4 * sigma

    def test_conditional_rate_excludes_source_rejections(self):
        c = CoincidenceCounts(n_pp=64, n_none=36, n_source_rejected=900, n_emitted=1000)
        assert detected_rate(c) == pytest.approx(0.064)
        assert conditional_detected_rate(c) == pytest.approx(0.64)


class TestChsh:
    def base(self, model, n=1_000_000, seed=31):
        return ExperimentConfig(SourceModel.singlet(), model, 0.0, 0.0, n, seed=seed)

    def test_malus_fair_model_reaches_sqrt2(self):
        expected = sum(
            abs(x)
            for x in (
                oracles.malus_correlation(CHSH_A, CHSH_B) - oracles.malus_correlation(CHSH_A, CHSH_B_PRIME),
                oracles.malus_correlation(CHSH_A_PRIME, CHSH_B) + oracles.malus_correlation(CHSH_A_PRIME, CHSH_B_PRIME),
            )
        )
        assert expected == pytest.approx(math.sqrt(2), abs=1e-9)
        result = chsh(self.base(DetectionModel.fair_constant(1.0)))
        assert abs(result.s_value - expected) < 4 * result.std_error

    def test_sign_fair_model_saturates_two(self):
        es = [oracles.sawtooth_correlation(p1, p2) for p1, p2 in (
            (CHSH_A, CHSH_B), (CHSH_A, CHSH_B_PRIME), (CHSH_A_PRIME, CHSH_B), (CHSH_A_PRIME, CHSH_B_PRIME))]
        expected = abs(es[0] - es[1]) + abs(es[2] + es[3])
        assert expected == pytest.approx(2.0, abs=1e-12)
        result = chsh(self.base(DetectionModel.independent_errors(1.0, 0.0), seed=32))
        assert abs(result.s_value - 2.0) < 4 * result.std_error

    def test_threshold_model_violates_maximally(self):
        tau = 1 / math.sqrt(2)
        s_oracle, es = oracles.threshold_chsh(tau, CHSH_A, CHSH_A_PRIME, CHSH_B, CHSH_B_PRIME)
        assert s_oracle == pytest.approx(4.0, abs=1e-9)
        result = chsh(self.base(DetectionModel.unfair_threshold(tau), seed=33))
        # every detected product has the same sign per setting: exact estimates
        assert result.std_error == 0.0
        assert result.s_value == pytest.approx(4.0, abs=1e-12)
        for est, e_expected in zip(result.per_setting, es):
            assert est.value == pytest.approx(e_expected, abs=1e-12)

    def test_error_is_quadrature_sum(self):
        result = chsh(self.base(DetectionModel.fair_constant(0.9), n=50_000, seed=34))
        expected = math.sqrt(sum(est.std_error**2 for est in result.per_setting))
        assert result.std_error == pytest.approx(expected, rel=1e-12)
        assert len(result.per_setting) == 4
        assert result.angles == (
            (CHSH_A, CHSH_B),
            (CHSH_A, CHSH_B_PRIME),
            (CHSH_A_PRIME, CHSH_B),
            (CHSH_A_PRIME, CHSH_B_PRIME),
        )

    @pytest.mark.parametrize(
        "model",
        [
            DetectionModel.fair_constant(1.0),
            DetectionModel.fair_constant(0.75),
            DetectionModel.independent_errors(0.9, 0.05),
        ],
        ids=lambda m: f"{m.kind.value}-{m.eta}",
    )
    def test_fair_models_respect_chsh(self, model):
        result = chsh(self.base(model, n=200_000, seed=35))
        assert result.s_value <= 2.0 + 5 * result.std_error


class TestHarmonicAnalysis:
    def test_flat_sweep_zero_noise(self):
        sweep = synthetic_sweep([0.64] * 16)
        spec = harmonic_analysis(sweep)
        assert spec.mean_level == pytest.approx(0.64, abs=1e-15)
        assert spec.chi2_flat == 0.0
        assert spec.p_flat == 1.0
        assert spec.dof == 15
        for comp in spec.amplitudes.values():
            assert comp.amplitude == pytest.approx(0.0, abs=1e-12)

    def test_pure_k4_recovered_exactly(self):
        thetas = uniform_theta_grid(16)
        phase = 0.3
        rates = [0.5 + 0.25 * math.cos(4 * (t - phase)) for t in thetas]
        spec = harmonic_analysis(synthetic_sweep(rates, n_per_point=10**9))
        assert spec.amplitudes[4].amplitude == pytest.approx(0.25, abs=1e-6)
        assert spec.amplitudes[4].phase == pytest.approx(phase, abs=1e-5)
        assert spec.amplitudes[2].amplitude == pytest.approx(0.0, abs=1e-6)
        assert spec.mean_level == pytest.approx(0.5, abs=1e-6)

    def test_k2_and_k4_no_leakage_on_eight_points(self):
        thetas = uniform_theta_grid(8)
        a2, p2, a4, p4 = 0.11, 0.4, 0.07, 0.2
        rates = [
            0.5 + a2 * math.cos(2 * (t - p2)) + a4 * math.cos(4 * (t - p4)) for t in thetas
        ]
        spec = harmonic_analysis(synthetic_sweep(rates, n_per_point=10**9))
        assert spec.amplitudes[2].amplitude == pytest.approx(a2, abs=1e-6)
        assert spec.amplitudes[2].phase == pytest.approx(p2, abs=1e-4)
        assert spec.amplitudes[4].amplitude == pytest.approx(a4, abs=1e-6)
        assert spec.amplitudes[4].phase == pytest.approx(p4, abs=1e-4)

    def test_chi2_matches_direct_computation(self):
        rng = np.random.default_rng(50)
        rates = 0.5 + 0.002 * rng.standard_normal(16)
        sweep = synthetic_sweep(list(rates))
        spec = harmonic_analysis(sweep)
        r = np.array([p.r_d for p in sweep.per_point])
        s = np.array([p.std_error for p in sweep.per_point])
        expected = float(np.sum(((r - r.mean()) / s) ** 2))
        assert spec.chi2_flat == pytest.approx(expected, rel=1e-12)
        assert 0.0 <= spec.p_flat <= 1.0

    def test_zero_sigma_nonflat_gives_zero_p(self):
        # deterministic 0/1 rates have zero binomial error
        rates = [1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]
        spec = harmonic_analysis(synthetic_sweep(rates, n_per_point=1000))
        assert math.isinf(spec.chi2_flat)
        assert spec.p_flat == 0.0
        assert spec.amplitudes[4].std_error == 0.0

    def test_grid_validation(self):
        with pytest.raises(ProtocolError):
            harmonic_analysis(synthetic_sweep([0.5] * 7, thetas=[j * PI / 7 for j in range(7)]))
        with pytest.raises(ProtocolError):
            bad = [j * PI / 16 for j in range(15)] + [0.99 * PI]
            harmonic_analysis(synthetic_sweep([0.5] * 16, thetas=bad))
        with pytest.raises(ProtocolError):
            half = [j * PI / 32 for j in range(16)]  # covers only half a period
            harmonic_analysis(synthetic_sweep([0.5] * 16, thetas=half))


class TestEstimatorConsistency:
    def test_std_error_scales_inverse_sqrt_n(self):
        from fairbell.engine import run_batch

        for seed in range(5):
            small = ExperimentConfig(
                SourceModel.singlet(), DetectionModel.fair_constant(1.0), 0.0, PI / 8, 100_000, seed=seed
            )
            big = ExperimentConfig(
                SourceModel.singlet(), DetectionModel.fair_constant(1.0), 0.0, PI / 8, 200_000, seed=seed
            )
            ratio = correlation(run_batch(small)).std_error / correlation(run_batch(big)).std_error
            assert abs(ratio - math.sqrt(2)) < 0.1 * math.sqrt(2)
