from math import sqrt

import numpy as np
import pytest
from scipy import special

from flattrace.errors import TooFewSamples
from flattrace.harness import (
    CF_TOLERANCE, J0_FIRST_ZERO, Experiment, bessel_product_prediction, build_report, cf_deviation, empirical_cf,
    log_bessel_product, normality_tests, orbit_covariance_check, run_trials,
)
from flattrace.types import DEFAULT_GRID, ExperimentConfig, TraceSample


def gaussian_samples(count: int, seed: int) -> list[TraceSample]:
    rng = np.random.default_rng(seed)
    z = rng.normal(0.0, sqrt(0.5), (count, 2))
    return [TraceSample(n=1, xi=0.0, raw=complex(a, b), scaled=complex(a, b)) for a, b in z]


def test_empirical_cf_symmetries():
    samples = gaussian_samples(2000, 1)
    grid = [(0.0, 0.0), (1.0, -0.5), (-1.0, 0.5), (2.0, 2.0), (-2.0, -2.0)]
    cf = empirical_cf(samples, grid)
    assert cf[(0.0, 0.0)] == 1.0
    assert cf[(-1.0, 0.5)] == pytest.approx(cf[(1.0, -0.5)].conjugate(), abs=1e-15)
    assert cf[(-2.0, -2.0)] == pytest.approx(cf[(2.0, 2.0)].conjugate(), abs=1e-15)
    assert all(abs(value) <= 1.0 for value in cf.values())
    assert cf_deviation(cf) < CF_TOLERANCE


def test_too_few_samples():
    with pytest.raises(TooFewSamples):
        normality_tests(gaussian_samples(50, 0))
    with pytest.raises(TooFewSamples):
        empirical_cf(gaussian_samples(99, 0), DEFAULT_GRID)
    config = ExperimentConfig(n=2, trials=10)
    with pytest.raises(TooFewSamples):
        run_trials(config)


def test_normality_calibration():
    passes = 0
    for seed in range(20):
        report = normality_tests(gaussian_samples(10_000, seed))
        passes += report.verdicts["ks_re"] and report.verdicts["ks_im"]
        assert 0.0 <= report.ks_re[1] <= 1.0
        assert report.covariance[0][1] == report.covariance[1][0]
    assert passes >= 17


def test_identical_samples_are_rejected():
    samples = [TraceSample(n=1, xi=0.0, raw=0.3 + 0.1j, scaled=0.3 + 0.1j)] * 200
    report = normality_tests(samples)
    assert report.ks_re[1] < 1e-6 and report.ks_im[1] < 1e-6
    assert not report.passed


def test_bessel_product(tables):
    assert bessel_product_prediction(tables(6), 0.0, 0.0) == 1.0
    assert bessel_product_prediction(tables(1), 1.0, 1.0) == pytest.approx(float(special.j0(sqrt(2.0))), rel=1e-14)
    assert abs(log_bessel_product(tables(10), 1.0, 1.0) + 0.5) <= 0.05


def test_bessel_arguments_below_first_zero(tables):
    for n in range(4, 11):
        table = tables(n)
        largest = np.max(table.periods * table.amplitude / table.weights.astype(float))
        assert largest * sqrt(2.0) < J0_FIRST_ZERO


def test_bessel_product_decreases_with_radius(tables):
    table = tables(8)
    values = [bessel_product_prediction(table, r, 0.0) for r in (0.0, 0.5, 1.0, 1.5, 2.0)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_deterministic_roof_gives_constant_samples():
    config = ExperimentConfig(n=4, trials=100, field=dict(epsilon=0.0, tau0=[]))
    experiment = Experiment(config)
    samples = run_trials(config, experiment=experiment)
    assert len(samples) == 100
    for sample in samples:
        assert sample.scaled == pytest.approx(experiment.amplitude, abs=1e-12)
    report = build_report(config, samples, experiment.table)
    assert not report.verdicts["ks_re"]
    assert report.asdict()["verdicts"]["ks_re"] == "FAIL"


def test_trials_are_reproducible():
    config = ExperimentConfig(n=5, trials=100, seed=42)
    experiment = Experiment(config)
    first = run_trials(config, 1, experiment=experiment)
    second = run_trials(config, 4, experiment=experiment)
    assert [s.raw for s in first] == [s.raw for s in second]
    assert [s.seed for s in first] == list(range(100))


def test_orbit_covariance_separated_scale():
    config = ExperimentConfig(n=6, trials=100, draws=2000, field=dict(lambda_ratio=3.0, basis_size=1))
    estimate = orbit_covariance_check(config)
    assert len(estimate.variances) == 58
    assert all(0.1 <= r <= 10 * 6 for r in estimate.ratios)
    assert all(0.1 <= r <= 10 * 6 for r in estimate.exact_ratios)
    assert estimate.exact_offdiagonal_ratio <= 0.05
    assert estimate.max_offdiagonal <= estimate.exact_max_offdiagonal + estimate.noise_floor
    assert np.allclose(estimate.variances, estimate.exact_variances, rtol=0.25)


def test_orbit_covariance_single_orbit():
    estimate = orbit_covariance_check(ExperimentConfig(n=1, trials=100, draws=100))
    assert estimate.max_offdiagonal == 0.0
    assert estimate.exact_offdiagonal_ratio == 0.0


@pytest.mark.slow
def test_clt_at_regime_frequency():
    config = ExperimentConfig()
    experiment = Experiment(config)
    assert 3.1e6 < experiment.xi < 3.3e6
    samples = run_trials(config, 4, experiment=experiment)
    report = build_report(config, samples, experiment.table)
    assert report.verdicts["ks_re"] and report.verdicts["ks_im"]
    assert report.verdicts["mean"]
    assert report.cf_deviation <= CF_TOLERANCE
    assert report.bessel_deviation <= 0.05
