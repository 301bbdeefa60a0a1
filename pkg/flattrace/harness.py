"""Monte Carlo checks of the rescaled flat-trace CLT.

A trial draws a fresh roof from the streams keyed by ``(seed, trial, band)``, so the samples do
not depend on how trials are split across workers.
"""
from concurrent.futures import ThreadPoolExecutor
import logging
from math import sqrt
from typing import Iterable, Sequence

import numpy as np
from scipy import special, stats

from .errors import TooFewSamples
from .fields import FieldSpec, assemble_coefficients
from .torus import OrbitTable, enumerate_periodic_points, make_automorphism
from .trace import orbit_design_matrix, trace_from_sums, xi_for_regime
from .types import CovarianceEstimate, ExperimentConfig, StatReport, TraceSample
from .util import blocks, default_workers, stream

__all__ = (
    "Experiment", "require_samples", "run_trials", "empirical_cf", "cf_target", "cf_deviation",
    "bessel_product_prediction", "log_bessel_product", "normality_tests",
    "orbit_covariance_check", "build_report",
    "MIN_SAMPLES", "SIGNIFICANCE", "CF_TOLERANCE", "BESSEL_TOLERANCE", "J0_FIRST_ZERO",
)

log = logging.getLogger(__name__)

MIN_SAMPLES = 100
SIGNIFICANCE = 0.01
CF_TOLERANCE = 0.15
BESSEL_TOLERANCE = 0.05
OFFDIAGONAL_TOLERANCE = 0.05
STDERR_MULTIPLE = 3.0
J0_FIRST_ZERO = 2.404825557695773

_TRIAL_BLOCK = 16
_DRAW_VALUES = 1 << 22


class Experiment:
    """Resolved objects of one configuration: map, orbit table, field spec and frequency."""

    def __init__(self, config: ExperimentConfig, *, n: int | None = None, j_max: int | None = None):
        self.config = config
        self.n = n or config.n
        self.automorphism = make_automorphism(config.matrix)
        self.table = enumerate_periodic_points(self.automorphism, self.n, budget=config.budget)
        self.spec = FieldSpec.build(config.field, self.automorphism, self.n, j_max=j_max or config.j_max)
        self.xi = config.xi if config.xi is not None else xi_for_regime(
            self.automorphism, self.n, config.field.alpha, config.c,
        )

    def __str__(self):
        return f"{self.automorphism} n={self.n}"

    @property
    def amplitude(self) -> float:
        return self.table.amplitude


def require_samples(count: int):
    if count < MIN_SAMPLES:
        raise TooFewSamples(f"At least {MIN_SAMPLES} samples are required, got {count}")


def run_trials(
        config: ExperimentConfig, workers: int | None = None, *, experiment: Experiment | None = None,
) -> list[TraceSample]:
    """Draw ``config.trials`` independent rescaled traces.

    Raises:
        PeriodTooLarge: when ``n`` is over the enumeration budget.
        BandBudgetExceeded: when a band retains too many modes.
        TooFewSamples: when fewer than 100 trials are requested.
    """
    require_samples(config.trials)
    experiment = experiment or Experiment(config)
    table, spec = experiment.table, experiment.spec
    workers = workers or config.workers or default_workers()
    design = orbit_design_matrix(table, spec.basis)

    def run_block(trials: slice) -> list[TraceSample]:
        coefficients = np.stack(
            [assemble_coefficients(spec, config.seed, t) for t in range(trials.start, trials.stop)], axis=1,
        )
        sums = design @ coefficients
        return [
            TraceSample.of(
                n=table.n, xi=experiment.xi, raw=trace_from_sums(table, sums[:, i], experiment.xi),
                amplitude=table.amplitude, seed=t,
            )
            for i, t in enumerate(range(trials.start, trials.stop))
        ]

    log.info(f"{experiment} [trials] ++ trials={config.trials} xi={experiment.xi:.6g} workers={workers}")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = pool.map(run_block, blocks(config.trials, _TRIAL_BLOCK))
        return [sample for block in results for sample in block]


def _parts(samples: Sequence[TraceSample]) -> tuple[np.ndarray, np.ndarray]:
    scaled = np.array([s.scaled for s in samples], dtype=complex)
    return scaled.real, scaled.imag


def empirical_cf(
        samples: Sequence[TraceSample], grid: Iterable[tuple[float, float]],
) -> dict[tuple[float, float], complex]:
    """``E(μ, ν) = mean exp(i(μ Re + ν Im))`` at each grid point."""
    require_samples(len(samples))
    re, im = _parts(samples)
    result = {}
    for mu, nu in grid:
        phase = mu * re + nu * im
        result[(mu, nu)] = complex(np.mean(np.cos(phase)), np.mean(np.sin(phase)))
    return result


def cf_target(mu: float, nu: float) -> float:
    """Characteristic function ``e^{-(μ²+ν²)/4}`` of the standard complex Gaussian."""
    return float(np.exp(-(mu * mu + nu * nu) / 4))


def cf_deviation(cf: dict[tuple[float, float], complex]) -> float:
    return max(abs(value - cf_target(mu, nu)) for (mu, nu), value in cf.items())


def _bessel_arguments(table: OrbitTable, mu: float, nu: float) -> np.ndarray:
    factor = table.periods.astype(float) * table.amplitude / table.weights.astype(float)
    return factor * sqrt(mu * mu + nu * nu)


def bessel_product_prediction(table: OrbitTable, mu: float, nu: float) -> float:
    """``Π_O J₀(m A_n √(μ²+ν²) / weight(O))``."""
    return float(np.prod(special.j0(_bessel_arguments(table, mu, nu))))


def log_bessel_product(table: OrbitTable, mu: float, nu: float) -> float:
    """Logarithm of the Bessel product; every argument must lie below the first zero of ``J₀``."""
    args = _bessel_arguments(table, mu, nu)
    if len(args) and args.max() >= J0_FIRST_ZERO:
        raise ValueError(f"Bessel argument {args.max():.6g} is past the first zero of J0")
    return float(np.sum(np.log(special.j0(args))))


def normality_tests(samples: Sequence[TraceSample], *, significance: float = SIGNIFICANCE) -> StatReport:
    """KS tests of ``Re`` and ``Im`` against ``N(0, 1/2)`` and the Re-Im covariance.

    Raises:
        TooFewSamples: below 100 samples.
    """
    require_samples(len(samples))
    re, im = _parts(samples)
    scale = sqrt(0.5)
    ks_re = stats.kstest(re, "norm", args=(0.0, scale))
    ks_im = stats.kstest(im, "norm", args=(0.0, scale))

    count = len(samples)
    cov = np.cov(np.vstack((re, im)))
    off = float(cov[0, 1])
    stderr = sqrt(max(float(cov[0, 0] * cov[1, 1]), 0.0) / (count - 1))
    mean = (float(np.mean(re)), float(np.mean(im)))
    mean_limit = STDERR_MULTIPLE / sqrt(count)

    return StatReport(
        trials=count,
        ks_re=(float(ks_re.statistic), float(ks_re.pvalue)),
        ks_im=(float(ks_im.statistic), float(ks_im.pvalue)),
        mean=mean,
        covariance=((float(cov[0, 0]), off), (off, float(cov[1, 1]))),
        cov_stderr=stderr,
        thresholds=dict(significance=significance, mean=mean_limit, covariance=STDERR_MULTIPLE * stderr),
        verdicts=dict(
            ks_re=bool(ks_re.pvalue > significance),
            ks_im=bool(ks_im.pvalue > significance),
            mean=bool(abs(mean[0]) <= mean_limit and abs(mean[1]) <= mean_limit),
            covariance=bool(abs(off) <= STDERR_MULTIPLE * stderr),
        ),
    )


def _max_offdiagonal(matrix: np.ndarray) -> float:
    if len(matrix) < 2:
        return 0.0
    return float(np.max(np.abs(matrix[~np.eye(len(matrix), dtype=bool)])))


def orbit_covariance_check(
        config: ExperimentConfig, *, n: int | None = None, draws: int | None = None,
        experiment: Experiment | None = None,
) -> CovarianceEstimate:
    """Covariance of the orbit sums ``X_O = (δτ_n)^n_O`` of band ``n`` alone.

    The exact covariance comes from the truncated kernel; the empirical one from ``draws``
    independent band draws on the stream ``(seed, n)``. ``noise_floor`` bounds the sampling error
    of every off-diagonal entry at family-wise level 0.001.
    """
    n = n or (experiment.n if experiment else config.n)
    draws = draws or config.draws
    experiment = experiment or Experiment(config, n=n, j_max=n)
    table, spec = experiment.table, experiment.spec
    band = spec.band(n)

    loading = orbit_design_matrix(table, spec.basis, band.indices) * band.amplitudes
    exact = loading @ loading.T

    second = np.zeros_like(exact)
    rng = stream(config.seed, n)
    for chunk in blocks(draws, _DRAW_VALUES // max(len(band), 1)):
        z = rng.standard_normal((chunk.stop - chunk.start, len(band)))
        x = z @ loading.T
        second += x.T @ x
    empirical = second / draws

    variances = np.clip(np.diag(empirical), 0.0, None)
    exact_variances = np.diag(exact)
    pairs = len(exact) * (len(exact) - 1) // 2
    if pairs:
        z_crit = float(stats.norm.isf(0.001 / (2 * pairs)))
        spread = np.sqrt((np.outer(exact_variances, exact_variances) + exact ** 2) / draws)
        noise_floor = z_crit * _max_offdiagonal(spread)
    else:
        noise_floor = 0.0

    estimate = CovarianceEstimate(
        n=n,
        samples=draws,
        scale=n * spec.h(n) ** spec.diagonal_exponent,
        variances=tuple(float(v) for v in variances),
        exact_variances=tuple(float(v) for v in exact_variances),
        max_offdiagonal=_max_offdiagonal(empirical),
        exact_max_offdiagonal=_max_offdiagonal(exact),
        noise_floor=noise_floor,
    )
    log.info(
        f"{experiment} [covariance] ++ orbits={len(table)} draws={draws} "
        f"offdiag={estimate.exact_offdiagonal_ratio:.3g}"
    )
    return estimate


def build_report(
        config: ExperimentConfig, samples: Sequence[TraceSample], table: OrbitTable,
        *, covariance: CovarianceEstimate | None = None,
) -> StatReport:
    """Normality tests plus characteristic-function and Bessel-product deviations on the grid."""
    report = normality_tests(samples)
    cf = empirical_cf(samples, config.grid)
    deviation = cf_deviation(cf)
    bessel = max(
        abs(bessel_product_prediction(table, mu, nu) - cf_target(mu, nu)) for mu, nu in config.grid
    )

    thresholds = dict(report.thresholds, cf=CF_TOLERANCE, bessel=BESSEL_TOLERANCE)
    verdicts = dict(report.verdicts, cf=deviation <= CF_TOLERANCE, bessel=bessel <= BESSEL_TOLERANCE)
    if covariance is not None:
        thresholds.update(offdiagonal=OFFDIAGONAL_TOLERANCE, ratio_low=0.1, ratio_high=10.0 * covariance.n)
        verdicts.update(
            offdiagonal=covariance.exact_offdiagonal_ratio <= OFFDIAGONAL_TOLERANCE,
            offdiagonal_noise=covariance.max_offdiagonal <= covariance.exact_max_offdiagonal + covariance.noise_floor,
            ratios=all(0.1 <= r <= 10.0 * covariance.n for r in covariance.ratios),
        )

    for name, passed in verdicts.items():
        if not passed:
            log.warning(f"{table} [{name}] !! failed")

    return StatReport(
        trials=report.trials,
        ks_re=report.ks_re,
        ks_im=report.ks_im,
        mean=report.mean,
        covariance=report.covariance,
        cov_stderr=report.cov_stderr,
        cf_deviation=deviation,
        bessel_deviation=bessel,
        orbits=covariance,
        thresholds=thresholds,
        verdicts=verdicts,
    )
