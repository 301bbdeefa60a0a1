from math import cos, pi, sqrt

import numpy as np
import pytest
from scipy import integrate

from flattrace.errors import BandBudgetExceeded, ScheduleTooFlat
from flattrace.fields import (
    COSINE, SINE, FieldSample, FieldSpec, SpectralBasis,
    assemble_coefficients, assemble_roof, chi, covariance_kernel, diagonal_constant, kernel_decay, kernel_matrix,
    chi_cutoff, sample_band, sample_field, sobolev_partial_norm, sobolev_threshold, continuity_threshold, weyl_slope,
)
from flattrace.types import FieldParams


@pytest.fixture(scope="module")
def spec(cat):
    return FieldSpec.build(FieldParams(), cat, j_max=6)


@pytest.fixture(scope="module")
def fine_spec(cat):
    return FieldSpec.build(FieldParams(basis_size=1), cat, j_max=10)


def test_chi():
    assert chi(0.0) == 0.0
    assert np.all(chi(np.linspace(0.01, 10, 50)) > 0)
    for d in (1, 2, 3):
        value, _ = integrate.quad(lambda t: chi(t, d) ** 2, -np.inf, np.inf)
        assert value == pytest.approx((2 * pi) ** d, abs=1e-6)


def test_basis_order():
    basis = SpectralBasis.build(2, 21)
    assert len(basis) == 21
    assert basis.kinds[0] == 0 and not basis.wavevectors[0].any()
    assert np.all(np.diff(basis.eigenvalues) >= 0)
    assert basis.wavevectors[1:5].tolist() == [[0, 1], [0, 1], [1, 0], [1, 0]]
    assert basis.kinds[1:5].tolist() == [COSINE, SINE, COSINE, SINE]
    assert basis.wavevectors[5].tolist() == [1, -1]
    assert len(SpectralBasis.build(2, 20)) == 21


def test_basis_orthonormal():
    basis = SpectralBasis.build(2, 20)
    grid = (np.indices((64, 64)).reshape(2, -1).T + 0.5) / 64
    phi = basis.values(grid)
    gram = phi.T @ phi / len(grid)
    assert np.allclose(gram, np.eye(len(basis)), atol=1e-8)


def test_rational_values_match_float_values(tables):
    basis = SpectralBasis.build(2, 200)
    table = tables(6)
    exact = basis.rational_values(table.numerators, table.denominator)
    assert np.allclose(exact, basis.values(table.coordinates), atol=1e-9)


def test_weyl_slope():
    assert weyl_slope(2) == pytest.approx(1.0, abs=0.05)


def test_spec_invariants(spec, cat):
    assert spec.lambda_tilde == pytest.approx(1.05 * cat.Lambda)
    assert spec.j_max == 6
    assert len(spec.basis) >= 16384
    assert 0 < spec.kappa <= 1
    assert np.allclose(spec.mode_variances, spec.coefficients ** 2, atol=1e-10, rtol=0)
    assert np.all(spec.residual >= 0)


def test_spec_rejects_small_lambda_tilde(cat):
    with pytest.raises(ValueError):
        FieldSpec.build(FieldParams(lambda_tilde=2.0), cat, j_max=2)


def test_band_budget(cat):
    with pytest.raises(BandBudgetExceeded):
        FieldSpec.build(FieldParams(band_cap=100), cat, j_max=8)


def test_schedule_too_flat(cat):
    flat = FieldSpec.build(FieldParams(alpha=1.0), cat, j_max=2)
    with pytest.raises(ScheduleTooFlat):
        assemble_roof(flat, 0)


def test_band_variance_matches_kernel(spec):
    x = np.array([0.3, 0.7])
    values = np.array([sample_band(spec, 4, seed)(x)[0] for seed in range(2000)])
    expected = covariance_kernel(spec, 4, x, x)
    stderr = expected * sqrt(2 / len(values))
    assert abs(np.mean(values ** 2) - expected) <= 3 * stderr


def test_band_is_reproducible(spec):
    a, b = sample_band(spec, 3, 7), sample_band(spec, 3, 7)
    assert np.array_equal(a.coefficients, b.coefficients)
    x = np.array([[0.1, 0.2], [0.5, 0.9]])
    assert np.array_equal(a(x), b(x))


def test_kernel_translation_invariant(spec):
    rng = np.random.default_rng(11)
    diagonal = [covariance_kernel(spec, 5, x, x) for x in rng.random((10, 2))]
    assert (max(diagonal) - min(diagonal)) / max(diagonal) < 1e-10


def test_kernel_positive_semidefinite(spec):
    points = np.random.default_rng(5).random((5, 2))
    matrix = kernel_matrix(spec, 5, points)
    assert np.allclose(matrix, matrix.T)
    assert np.min(np.linalg.eigvalsh(matrix)) >= -1e-10
    assert np.all(np.diag(matrix) >= 0)
    assert matrix[0, 1] ** 2 <= matrix[0, 0] * matrix[1, 1]


def test_kernel_covariance_monte_carlo(spec):
    x, y = np.array([0.2, 0.3]), np.array([0.25, 0.32])
    draws = np.array([sample_band(spec, 3, seed)([x, y]) for seed in range(5000)])
    product = draws[:, 0] * draws[:, 1]
    stderr = np.std(product) / sqrt(len(product))
    assert abs(np.mean(product) - covariance_kernel(spec, 3, x, y)) <= 3 * stderr


def test_diagonal_scaling(fine_spec):
    origin = np.zeros(2)
    ratio = {
        j: covariance_kernel(fine_spec, j, origin, origin) / fine_spec.h(j) ** fine_spec.diagonal_exponent
        for j in (8, 10)
    }
    assert ratio[10] / ratio[8] == pytest.approx(1.0, abs=0.15)
    assert ratio[10] == pytest.approx(diagonal_constant(fine_spec), rel=0.05)
    assert diagonal_constant(fine_spec) == pytest.approx(0.457, abs=0.01)


def test_kernel_decay_at_periodic_points(cat, tables):
    spec = FieldSpec.build(FieldParams(lambda_ratio=3.0, basis_size=1), cat, j_max=6)
    assert kernel_decay(spec, 6, tables(6)) <= 1e-3


def test_band_independence(spec):
    x = np.array([0.4, 0.1])
    a = np.array([sample_band(spec, 2, seed)(x)[0] for seed in range(5000)])
    b = np.array([sample_band(spec, 3, seed)(x)[0] for seed in range(5000)])
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) <= 3 / sqrt(len(a))


def test_epsilon_zero_gives_tau0(cat):
    spec = FieldSpec.build(FieldParams(epsilon=0.0), cat, j_max=2)
    roof = assemble_roof(spec, 123)
    points = np.random.default_rng(2).random((7, 2))
    assert np.allclose(roof(points), [cos(2 * pi * x) for x, _ in points], atol=1e-12)


def test_tau0_terms(cat):
    spec = FieldSpec.build(
        FieldParams(epsilon=0.0, tau0=[dict(k=[-1, 2], sin=0.5), dict(k=[0, 0], cos=0.25)]), cat, j_max=2,
    )
    roof = assemble_roof(spec, 0)
    x = np.array([0.13, 0.61])
    assert roof(x)[0] == pytest.approx(0.5 * np.sin(2 * pi * (-x[0] + 2 * x[1])) + 0.25, abs=1e-12)


def test_roof_depends_on_seed(spec):
    x = np.array([0.37, 0.51])
    assert assemble_roof(spec, 0)(x)[0] != assemble_roof(spec, 1)(x)[0]
    assert np.array_equal(assemble_coefficients(spec, 4, 2), assemble_coefficients(spec, 4, 2))


def test_evaluation_is_linear(spec):
    f, g = assemble_roof(spec, 1), sample_band(spec, 5, 2)
    points = np.random.default_rng(8).random((6, 2))
    combined = (2.5 * f + (-0.75) * g)(points)
    assert np.allclose(combined, 2.5 * f(points) - 0.75 * g(points), atol=1e-12)


def test_sobolev_partial_norms(cat):
    spec = FieldSpec.build(FieldParams(alpha=1.5, basis_size=20001), cat, j_max=1)
    field = sample_field(spec, 9)
    J = 10_000
    assert sobolev_threshold(2, 1.5) == 2.0
    assert continuity_threshold(2, 1.5) == 1.0
    ratio = lambda s: sobolev_partial_norm(field, s, 2 * J) / sobolev_partial_norm(field, s, J)  # noqa: E731
    assert ratio(1.5) < 1.05
    assert ratio(2.5) > 1.3
    assert ratio(3.0) > 1.5


def test_sobolev_trivial_case():
    basis = SpectralBasis.build(2, 5)
    sample = FieldSample(basis=basis, coefficients=np.array([1.7, 0, 0, 0, 0]))
    assert sobolev_partial_norm(sample, 0.0, 5) == pytest.approx(1.7 ** 2)


def test_field_rows(spec):
    rows = list(sample_band(spec, 2, 0).rows())
    assert rows and all(kind in ("cos", "sin") for _, _, kind, _ in rows)


def test_default_spec_covers_every_band(cat):
    spec = FieldSpec.build(FieldParams(), cat, 8)
    assert spec.j_max == 12
    assert len(spec.bands) == 12
    assert spec.basis.lam_missing * spec.h(12) ** 2 >= chi_cutoff(2)
    assert all(len(band) for band in spec.bands)
    assert len(spec.bands[-1]) > len(spec.bands[0])


def test_covering_basis_is_complete_below_lam_missing():
    for lam_max, minimum in ((500.0, 1), (0.0, 40), (2000.0, 7)):
        basis = SpectralBasis.covering(2, lam_max, minimum=minimum)
        assert basis.lam_missing > lam_max
        present = {tuple(k) for k in basis.wavevectors.tolist()}
        r = 12
        for a in range(-r, r + 1):
            for b in range(-r, r + 1):
                if 4 * pi * pi * (a * a + b * b) < basis.lam_missing:
                    assert (a, b) in present or (-a, -b) in present


def test_truncated_basis_is_rejected(cat):
    spec = FieldSpec(params=FieldParams(), basis=SpectralBasis.build(2, 21), lambda_tilde=3.0, j_max=4)
    with pytest.raises(BandBudgetExceeded):
        spec.bands
