import pytest

from flattrace.types import (
    CoefficientSchedule, CovarianceEstimate, ExperimentConfig, FieldParams, PressureCurve, RunManifest, StatReport,
    TraceSample, TrigTerm,
)


def make_report(**overrides) -> StatReport:
    values = dict(
        trials=100,
        ks_re=(0.05, 0.4),
        ks_im=(0.06, 0.3),
        mean=(0.01, -0.02),
        covariance=((0.5, 0.01), (0.01, 0.49)),
        cov_stderr=0.02,
        verdicts=dict(ks_re=True, ks_im=True),
    )
    return StatReport(**(values | overrides))


def make_estimate(**overrides) -> CovarianceEstimate:
    values = dict(
        n=2, samples=100, scale=2.0, variances=(1.0, 4.0), exact_variances=(1.2, 3.8),
        max_offdiagonal=0.1, exact_max_offdiagonal=0.06, noise_floor=0.2,
    )
    return CovarianceEstimate(**(values | overrides))


def test_stat_report():
    report = make_report()
    assert report.passed
    doc = report.asdict()
    assert doc["ks_re"] == dict(statistic=0.05, pvalue=0.4)
    assert doc["verdicts"] == dict(ks_re="PASS", ks_im="PASS")
    assert doc["orbits"] is None
    assert not make_report(verdicts=dict(ks_re=False)).passed


def test_stat_report_validation():
    with pytest.raises(ValueError):
        make_report(ks_re=(0.05, 1.5))
    with pytest.raises(ValueError):
        make_report(ks_im=(0.05, -0.1))
    with pytest.raises(ValueError):
        make_report(covariance=((0.5, 0.01), (0.02, 0.49)))


def test_covariance_estimate():
    estimate = make_estimate()
    assert estimate.ratios == (0.5, 2.0)
    assert estimate.exact_ratios == pytest.approx((0.6, 1.9))
    assert estimate.offdiagonal_ratio == pytest.approx(0.1)
    assert estimate.exact_offdiagonal_ratio == pytest.approx(0.05)
    assert make_report(orbits=estimate).asdict()["orbits"]["noise_floor"] == 0.2
    with pytest.raises(ValueError):
        make_estimate(variances=(1.0, -0.5))


def test_trace_sample():
    sample = TraceSample.of(n=3, xi=2.0, raw=0.5 - 0.25j, amplitude=2.0, seed=7)
    assert sample.scaled == 1.0 - 0.5j
    assert sample.seed == 7


def test_field_params():
    params = FieldParams.convert(dict(alpha=1.5, tau0=[dict(k=[0, 1], sin=2)]))
    assert params.tau0 == (TrigTerm(k=(0, 1), sin=2.0),)
    assert params.schedule == CoefficientSchedule(alpha=1.5)
    assert params.schedule(0) == 1.0
    assert FieldParams.convert(None) == FieldParams()
    assert "lambda_tilde" not in FieldParams().asdict()
    for bad in (dict(gamma=0), dict(lambda_ratio=1.0), dict(j_max=0), dict(basis_size=0)):
        with pytest.raises(ValueError):
            FieldParams(**bad)
    with pytest.raises(ValueError):
        CoefficientSchedule(alpha=1.5, C0=0)


def test_experiment_config():
    config = ExperimentConfig(periods=dict(start=4, stop=6), field=dict(j_max=3))
    assert config.periods == (4, 5, 6)
    assert config.j_max == 3
    assert ExperimentConfig(n=5).j_max == 9
    assert ExperimentConfig(trials=10).trials == 10
    assert ExperimentConfig(**ExperimentConfig(n=3, xi=1.5).asdict()) == ExperimentConfig(n=3, xi=1.5)
    for bad in (dict(n=0), dict(c=1.0), dict(trials=0), dict(seed=-1), dict(grid=[]), dict(betas=[0.0])):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)


def test_pressure_curve():
    curve = PressureCurve(betas=(2.0, 1.0), values={4: (0.1, 0.5), 8: (0.2, 0.3)}, ju_min=0.1, h_top=0.5)
    assert curve.periods == (4, 8)
    assert curve.latest == (0.2, 0.3)
    assert curve.is_decreasing()
    assert not PressureCurve(betas=(1.0, 2.0), values={4: (0.1, 0.5)}, ju_min=0.1, h_top=0.5).is_decreasing()


def test_run_manifest():
    manifest = RunManifest(command="orbits", config={}, seed=0, version="0.1.0", outputs=["a.csv"])
    manifest.duration = 1.5
    assert manifest.asdict()["duration"] == 1.5
