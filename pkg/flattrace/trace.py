"""Flat traces of the twisted transfer operator ``u -> e^{iξτ} u∘T`` over periodic orbits."""
import logging
from math import exp, floor, log

import numpy as np

from .fields import FieldSample, SpectralBasis
from .torus import OrbitTable, ToralAutomorphism, birkhoff_sums
from .types import TraceSample
from .util import blocks

__all__ = (
    "flat_trace", "flat_trace_pointwise", "trace_from_sums", "orbit_sums", "orbit_design_matrix",
    "reduce_phase", "regime_rate", "xi_for_regime", "max_period", "trace_bound",
    "PHASE_REDUCTION_THRESHOLD",
)

log_ = logging.getLogger(__name__)

PHASE_REDUCTION_THRESHOLD = 1e8

TWO_PI = np.longdouble("6.283185307179586476925286766559")

_CHUNK = 1 << 22


def reduce_phase(xi: float, tau: np.ndarray) -> np.ndarray:
    """``ξ·τ`` as a float phase, reduced mod 2π in extended precision once ``|ξτ|`` exceeds 1e8."""
    tau = np.asarray(tau, dtype=float)
    phase = xi * tau
    if not len(phase) or np.max(np.abs(phase)) <= PHASE_REDUCTION_THRESHOLD:
        return phase
    return np.fmod(np.longdouble(xi) * tau.astype(np.longdouble), TWO_PI).astype(float)


def _orbit_reduce(table: OrbitTable, values: np.ndarray) -> np.ndarray:
    """``(n/m) Σ_{x∈O}`` of point values, along the first axis."""
    sums = np.add.reduceat(values, table.starts[:-1], axis=0)
    repeats = (table.n // table.periods).astype(float)
    return sums * (repeats if sums.ndim == 1 else repeats[:, None])


def orbit_sums(table: OrbitTable, roof: FieldSample) -> np.ndarray:
    """Birkhoff sums ``τ^n_O`` of the roof, one per orbit."""
    return _orbit_reduce(table, roof.evaluate_table(table))


def orbit_design_matrix(table: OrbitTable, basis: SpectralBasis, modes=None) -> np.ndarray:
    """``G[O, k] = (n/m) Σ_{x∈O} φ_k(x)``, so that ``τ^n_O = G @ coefficients``."""
    modes = np.arange(len(basis)) if modes is None else np.asarray(modes)
    result = np.empty((len(table), len(modes)))
    for chunk in blocks(len(modes), _CHUNK // max(table.total_points, 1)):
        values = basis.rational_values(table.numerators, table.denominator, modes[chunk])
        result[:, chunk] = _orbit_reduce(table, values)
    log_.debug(f"{table} [design] ++ modes={len(modes)}")
    return result


def trace_from_sums(table: OrbitTable, sums: np.ndarray, xi: float) -> complex:
    """``Σ_O m e^{iξ τ^n_O} / weight(O)`` in fixed orbit order."""
    phase = reduce_phase(xi, sums)
    factor = table.periods.astype(float) / table.weights.astype(float)
    return complex(np.sum(factor * np.cos(phase)), np.sum(factor * np.sin(phase)))


def flat_trace(table: OrbitTable, roof: FieldSample, xi: float, *, seed: int | None = None) -> TraceSample:
    """Orbit-grouped flat trace and its rescaled value ``A_n Tr♭``."""
    raw = trace_from_sums(table, orbit_sums(table, roof), xi)
    return TraceSample.of(n=table.n, xi=xi, raw=raw, amplitude=table.amplitude, seed=seed if seed is not None else roof.seed)


def flat_trace_pointwise(table: OrbitTable, roof: FieldSample, xi: float) -> complex:
    """``Σ_x e^{iξ τ^n_x} / weight(x)`` with Birkhoff sums taken point by point along ``T``."""
    phase = reduce_phase(xi, birkhoff_sums(table, roof.evaluate_table(table)))
    weights = table.point_weights.astype(float)
    return complex(np.sum(np.cos(phase) / weights), np.sum(np.sin(phase) / weights))


def trace_bound(table: OrbitTable) -> float:
    """``Σ_x 1/weight(x)``, the largest possible ``|Tr♭|``."""
    return float(np.sum(table.periods.astype(float) / table.weights.astype(float)))


def regime_rate(automorphism: ToralAutomorphism, alpha: float, *, sharp: bool = True) -> float:
    """``h_top + (d/2)(α - 1/2) log Λ``; the earlier bound uses ``α`` in place of ``α - 1/2``."""
    shift = alpha - 0.5 if sharp else alpha
    return automorphism.h_top + automorphism.dimension / 2 * shift * log(automorphism.Lambda)


def xi_for_regime(
        automorphism: ToralAutomorphism, n: int, alpha: float, c: float, *, sharp: bool = True,
) -> float:
    """Smallest ``ξ`` with ``n <= c log ξ / rate``."""
    if not 0.0 < c < 1.0:
        raise ValueError(f"Regime constant c must lie in (0, 1), got {c!r}")
    return exp(n * regime_rate(automorphism, alpha, sharp=sharp) / c)


def max_period(automorphism: ToralAutomorphism, xi: float, alpha: float, c: float, *, sharp: bool = True) -> int:
    """Largest ``n`` allowed at frequency ``ξ``."""
    if xi <= 1:
        return 0
    return floor(c * log(xi) / regime_rate(automorphism, alpha, sharp=sharp) + 1e-12)
