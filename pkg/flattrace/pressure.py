"""Topological pressure of ``-β J_u`` from periodic orbits, and the decay that fixes ``A_n``."""
import logging
from math import log
from typing import Sequence

import numpy as np
from scipy import special

from .torus import OrbitTable, ToralAutomorphism, enumerate_periodic_points, periodic_point_count
from .types import DEFAULT_BUDGET, PressureCurve

__all__ = (
    "orbit_jacobians", "pressure_estimate", "pressure_function", "pressure_from_counts",
    "ju_min_estimate", "pression_decay_check", "pressure_curve", "richardson",
)

log_ = logging.getLogger(__name__)


def _table(automorphism: ToralAutomorphism, n: int, table: OrbitTable | None, budget: int) -> OrbitTable:
    if table is not None:
        if table.n != n:
            raise ValueError(f"Table period {table.n} does not match n={n}")
        return table
    return enumerate_periodic_points(automorphism, n, budget=budget)


def orbit_jacobians(table: OrbitTable) -> np.ndarray:
    """``(J_u)^n_x`` per orbit; ``n J_u`` everywhere for a linear map."""
    return np.full(len(table), table.n * table.automorphism.unstable_log_jacobian)


def pressure_estimate(
        automorphism: ToralAutomorphism, beta: float, n: int, *,
        table: OrbitTable | None = None, budget: int = DEFAULT_BUDGET,
) -> float:
    """``Pr_n(-β J_u) = (1/n) log Σ_{T^n x = x} e^{-β (J_u)^n_x}``, summed orbit by orbit."""
    table = _table(automorphism, n, table, budget)
    total = special.logsumexp(-beta * orbit_jacobians(table), b=table.periods.astype(float))
    return float(total) / n


def pressure_function(
        automorphism: ToralAutomorphism, beta: float, n: int, *,
        table: OrbitTable | None = None, budget: int = DEFAULT_BUDGET,
) -> float:
    """``F_n(β) = Pr_n(-β J_u) / β``."""
    if beta <= 0:
        raise ValueError(f"β must be positive, got {beta!r}")
    return pressure_estimate(automorphism, beta, n, table=table, budget=budget) / beta


def pressure_from_counts(automorphism: ToralAutomorphism, beta: float, n: int) -> float:
    """``F_n(β)`` from ``#Per(n)`` alone; exact for linear maps at any ``n``."""
    if beta <= 0:
        raise ValueError(f"β must be positive, got {beta!r}")
    return log(periodic_point_count(automorphism, n)) / (n * beta) - automorphism.unstable_log_jacobian


def ju_min_estimate(
        automorphism: ToralAutomorphism, n: int, *,
        table: OrbitTable | None = None, budget: int = DEFAULT_BUDGET,
) -> float:
    """``min_x (1/n)(J_u)^n_x`` over period-``n`` points."""
    table = _table(automorphism, n, table, budget)
    return float(np.min(orbit_jacobians(table))) / n


def pression_decay_check(
        automorphism: ToralAutomorphism, periods: Sequence[int], *, budget: int = DEFAULT_BUDGET,
) -> list[float]:
    """``v_n = n A_n max_O 1/weight(O)`` for each period.

    Raises:
        PeriodTooLarge: when any period is over the budget; nothing is returned in that case.
    """
    values = []
    for n in periods:
        table = enumerate_periodic_points(automorphism, n, budget=budget)
        values.append(n * table.amplitude * float(np.max(1.0 / table.weights.astype(float))))
        log_.debug(f"{automorphism} [decay] ++ n={n} v={values[-1]:.6g}")
    return values


def richardson(values: dict[int, tuple[float, ...]]) -> tuple[float, ...] | None:
    """``2 F_{2n'} - F_{n'}`` for the largest ``n'`` with both sizes available."""
    candidates = [n for n in values if 2 * n in values]
    if not candidates:
        return None
    n = max(candidates)
    return tuple(2 * a - b for a, b in zip(values[2 * n], values[n]))


def pressure_curve(
        automorphism: ToralAutomorphism, betas: Sequence[float], periods: Sequence[int], *,
        budget: int = DEFAULT_BUDGET,
) -> PressureCurve:
    """``F_n(β)`` on the β grid for every period, with ``J_u^min`` and the Richardson estimate."""
    values = {}
    ju_min = None
    for n in periods:
        table = enumerate_periodic_points(automorphism, n, budget=budget)
        values[n] = tuple(pressure_function(automorphism, beta, n, table=table) for beta in betas)
        estimate = ju_min_estimate(automorphism, n, table=table)
        ju_min = estimate if ju_min is None else min(ju_min, estimate)

    curve = PressureCurve(
        betas=tuple(float(b) for b in betas),
        values=values,
        ju_min=ju_min,
        h_top=automorphism.h_top,
        extrapolated=richardson(values),
    )
    log_.info(f"{automorphism} [pressure] ++ periods={len(values)} betas={len(curve.betas)}")
    return curve
