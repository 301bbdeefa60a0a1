from fractions import Fraction
from math import gcd
from typing import Any, Self, Sequence

from attrs import AttrsInstance, define, field, asdict
from attrs.converters import optional
import yaml

from .lattice import IntMatrix, as_matrix

__all__ = (
    "RationalPoint", "CoefficientSchedule", "TrigTerm", "FieldParams",
    "TraceSample", "CovarianceEstimate", "StatReport", "PressureCurve",
    "ExperimentConfig", "RunManifest",
    "CAT_MAP", "DEFAULT_BUDGET", "DEFAULT_GRID",
)

CAT_MAP: IntMatrix = ((2, 1), (1, 1))

DEFAULT_BUDGET = 5_000_000

DEFAULT_GRID: tuple[tuple[float, float], ...] = tuple(
    (mu / 2, nu / 2) for mu in range(-4, 5) for nu in range(-4, 5)
)


@define(frozen=True)
class RationalPoint(AttrsInstance):
    """Exact torus point ``numerators / denominator`` in canonical form.

    Canonical means ``0 <= p_i < q`` and ``gcd(p_1, ..., p_d, q) == 1``, so two instances are
    equal exactly when they denote the same point of the torus.
    """
    numerators: tuple[int, ...] = field(converter=lambda x: tuple(int(v) for v in x))
    denominator: int = field(converter=int)

    @denominator.validator  # noqa
    def __denominator_validator(self, _: str, value: int):
        if value < 1:
            raise ValueError(f"Denominator must be positive, got {value!r}")
        if any(not 0 <= p < value for p in self.numerators):
            raise ValueError(f"Numerators {self.numerators!r} are not reduced modulo {value}")
        if gcd(value, *self.numerators) != 1:
            raise ValueError(f"Point {self.numerators!r}/{value} is not in lowest terms")

    @classmethod
    def of(cls, numerators: Sequence[int], denominator: int) -> Self:
        q = int(denominator)
        if q < 1:
            raise ValueError(f"Denominator must be positive, got {denominator!r}")
        p = [int(v) % q for v in numerators]
        g = gcd(q, *p)
        return cls(tuple(v // g for v in p), q // g)

    @classmethod
    def from_fractions(cls, values: Sequence[Fraction | int | str]) -> Self:
        fractions = [Fraction(v) for v in values]
        q = 1
        for f in fractions:
            q = q * f.denominator // gcd(q, f.denominator)
        return cls.of([f.numerator * (q // f.denominator) for f in fractions], q)

    @property
    def dimension(self) -> int:
        return len(self.numerators)

    @property
    def fractions(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(p, self.denominator) for p in self.numerators)

    @property
    def sort_key(self) -> tuple[Fraction, ...]:
        return self.fractions

    def apply(self, matrix: IntMatrix) -> Self:
        return self.of(
            [sum(a * p for a, p in zip(row, self.numerators)) for row in matrix],
            self.denominator,
        )

    def as_strings(self) -> tuple[str, ...]:
        return tuple(f"{p}/{self.denominator}" for p in self.numerators)

    def __str__(self):
        return f"({', '.join(self.as_strings())})"


@define(kw_only=True, frozen=True)
class CoefficientSchedule(AttrsInstance):
    """Power-law coefficients ``c_j = C0 * (j + 1) ** -alpha``."""
    alpha: float = field(converter=float)
    C0: float = field(default=1.0, converter=float)

    @C0.validator  # noqa
    def __c0_validator(self, _: str, value: float):
        if value <= 0:
            raise ValueError(f"C0 must be positive, got {value!r}")

    def __call__(self, j):
        return self.C0 * (j + 1.0) ** -self.alpha


@define(kw_only=True, frozen=True)
class TrigTerm(AttrsInstance):
    """One term ``cos * cos(2π k·x) + sin * sin(2π k·x)`` of a deterministic roof."""
    k: tuple[int, ...] = field(converter=lambda x: tuple(int(v) for v in x))
    cos: float = field(default=0.0, converter=float)
    sin: float = field(default=0.0, converter=float)

    @classmethod
    def convert(cls, value: dict | Self) -> Self:
        if isinstance(value, cls):
            return value
        if isinstance(value, dict):
            return cls(**value)
        raise TypeError(f"Cannot convert {value!r} to {cls.__name__}")

    @classmethod
    def convert_all(cls, value: Sequence | None) -> tuple[Self, ...]:
        return tuple(cls.convert(term) for term in value or ())


@define(kw_only=True, frozen=True)
class FieldParams(AttrsInstance):
    """Parameters of the random roof ``tau = tau0 + epsilon * delta_tau``.

    ``lambda_tilde`` fixes the band base directly; when unset it is ``lambda_ratio`` times the
    expansion constant of the automorphism.
    """
    alpha: float = field(default=1.25, converter=float)
    C0: float = field(default=1.0, converter=float)
    epsilon: float = field(default=1.0, converter=float)
    gamma: float = field(default=0.1, converter=float)
    lambda_tilde: float | None = field(default=None, converter=optional(float))
    lambda_ratio: float = field(default=1.05, converter=float)
    j_max: int | None = field(default=None, converter=optional(int))
    basis_size: int = field(default=16384, converter=int)
    band_cap: int = field(default=500_000, converter=int)
    tau0: tuple[TrigTerm, ...] = field(
        factory=lambda: (TrigTerm(k=(1, 0), cos=1.0),), converter=TrigTerm.convert_all,
    )

    @gamma.validator  # noqa
    def __gamma_validator(self, _: str, value: float):
        if value <= 0:
            raise ValueError(f"gamma must be positive, got {value!r}")

    @lambda_ratio.validator  # noqa
    def __ratio_validator(self, _: str, value: float):
        if value <= 1:
            raise ValueError(f"lambda_ratio must exceed 1, got {value!r}")

    @j_max.validator  # noqa
    def __j_max_validator(self, _: str, value: int | None):
        if value is not None and value < 1:
            raise ValueError(f"j_max must be at least 1, got {value!r}")

    @basis_size.validator  # noqa
    def __basis_validator(self, _: str, value: int):
        if value < 1:
            raise ValueError(f"basis_size must be positive, got {value!r}")

    @property
    def schedule(self) -> CoefficientSchedule:
        return CoefficientSchedule(alpha=self.alpha, C0=self.C0)

    @classmethod
    def convert(cls, value: dict | Self | None) -> Self:
        if value is None:
            return cls()
        if isinstance(value, cls):
            return value
        if isinstance(value, dict):
            return cls(**value)
        raise TypeError(f"Cannot convert {value!r} to {cls.__name__}")

    def asdict(self) -> dict:
        return asdict(self, filter=lambda a, v: v is not None)


@define(kw_only=True, frozen=True)
class TraceSample(AttrsInstance):
    """One realisation of the flat trace and of its rescaled value ``A_n * raw``."""
    n: int
    xi: float
    raw: complex
    scaled: complex
    seed: int | None = None

    @classmethod
    def of(cls, *, n: int, xi: float, raw: complex, amplitude: float, seed: int | None = None) -> Self:
        return cls(n=n, xi=xi, raw=complex(raw), scaled=complex(amplitude * raw), seed=seed)


@define(kw_only=True, frozen=True)
class CovarianceEstimate(AttrsInstance):
    """Covariance diagnostics of the orbit sums ``X_O`` of a single band.

    ``variances``/``max_offdiagonal`` are Monte Carlo estimates; the ``exact_*`` fields come
    from the truncated kernel. ``scale`` is ``n * h_n ** (d(2α-1)+2γ)``.
    """
    n: int
    samples: int
    scale: float
    variances: tuple[float, ...] = field()
    exact_variances: tuple[float, ...]
    max_offdiagonal: float
    exact_max_offdiagonal: float
    noise_floor: float

    @variances.validator  # noqa
    def __variances_validator(self, _: str, value: tuple[float, ...]):
        if any(v < 0 for v in value):
            raise ValueError("Variances must be nonnegative")

    @property
    def ratios(self) -> tuple[float, ...]:
        return tuple(v / self.scale for v in self.variances)

    @property
    def exact_ratios(self) -> tuple[float, ...]:
        return tuple(v / self.scale for v in self.exact_variances)

    @property
    def offdiagonal_ratio(self) -> float:
        return self.max_offdiagonal / min(self.variances) if self.max_offdiagonal else 0.0

    @property
    def exact_offdiagonal_ratio(self) -> float:
        return self.exact_max_offdiagonal / min(self.exact_variances) if self.exact_max_offdiagonal else 0.0

    def asdict(self) -> dict:
        return dict(
            n=self.n,
            samples=self.samples,
            scale=self.scale,
            ratios=list(self.ratios),
            exact_ratios=list(self.exact_ratios),
            max_offdiagonal=self.max_offdiagonal,
            exact_max_offdiagonal=self.exact_max_offdiagonal,
            offdiagonal_ratio=self.offdiagonal_ratio,
            exact_offdiagonal_ratio=self.exact_offdiagonal_ratio,
            noise_floor=self.noise_floor,
        )


@define(kw_only=True, frozen=True)
class StatReport(AttrsInstance):
    """Statistical verdicts on a batch of rescaled flat traces."""
    trials: int
    ks_re: tuple[float, float] = field()
    ks_im: tuple[float, float]
    mean: tuple[float, float]
    covariance: tuple[tuple[float, float], tuple[float, float]] = field()
    cov_stderr: float
    cf_deviation: float | None = None
    bessel_deviation: float | None = None
    orbits: CovarianceEstimate | None = None
    thresholds: dict[str, float] = field(factory=dict)
    verdicts: dict[str, bool] = field(factory=dict)

    @ks_re.validator  # noqa
    def __ks_validator(self, _: str, value: tuple[float, float]):
        for name, (_, p) in (("re", value), ("im", self.ks_im)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"KS p-value for {name} out of range: {p!r}")

    @covariance.validator  # noqa
    def __covariance_validator(self, _: str, value):
        if value[0][1] != value[1][0]:
            raise ValueError("Covariance matrix must be symmetric")

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def asdict(self) -> dict:
        return dict(
            trials=self.trials,
            ks_re=dict(statistic=self.ks_re[0], pvalue=self.ks_re[1]),
            ks_im=dict(statistic=self.ks_im[0], pvalue=self.ks_im[1]),
            mean=list(self.mean),
            covariance=[list(row) for row in self.covariance],
            cov_stderr=self.cov_stderr,
            cf_deviation=self.cf_deviation,
            bessel_deviation=self.bessel_deviation,
            orbits=self.orbits.asdict() if self.orbits is not None else None,
            thresholds=dict(self.thresholds),
            verdicts={key: "PASS" if value else "FAIL" for key, value in self.verdicts.items()},
        )


@define(kw_only=True, frozen=True)
class PressureCurve(AttrsInstance):
    """``F_n(beta)`` on a grid of ``beta`` for several periods ``n``."""
    betas: tuple[float, ...]
    values: dict[int, tuple[float, ...]]
    ju_min: float
    h_top: float
    extrapolated: tuple[float, ...] | None = None

    @property
    def periods(self) -> tuple[int, ...]:
        return tuple(sorted(self.values))

    @property
    def latest(self) -> tuple[float, ...]:
        return self.values[max(self.values)]

    def is_decreasing(self, n: int | None = None) -> bool:
        row = self.values[n if n is not None else max(self.values)]
        order = sorted(range(len(self.betas)), key=lambda i: self.betas[i])
        return all(row[i] > row[j] for i, j in zip(order, order[1:]))

    def sandwich_holds(self, n: int | None = None, tol: float = 1e-9) -> bool:
        n = n if n is not None else max(self.values)
        return all(
            -self.ju_min - tol <= f <= self.h_top / beta - self.ju_min + 2.0 / n
            for beta, f in zip(self.betas, self.values[n])
        )


def _pairs(value) -> tuple[tuple[float, float], ...]:
    pairs = tuple((float(mu), float(nu)) for mu, nu in value)
    if not pairs:
        raise ValueError("CF grid cannot be empty")
    return pairs


def _floats(value) -> tuple[float, ...]:
    return tuple(float(v) for v in value)


def _ints(value) -> tuple[int, ...]:
    if isinstance(value, dict):
        return tuple(range(int(value["start"]), int(value["stop"]) + 1))
    return tuple(int(v) for v in value)


@define(kw_only=True, frozen=True)
class ExperimentConfig(AttrsInstance):
    """Resolved run configuration, built from one YAML document."""
    matrix: IntMatrix = field(default=CAT_MAP, converter=as_matrix)
    n: int = field(default=8, converter=int)
    c: float = field(default=0.9, converter=float)
    trials: int = field(default=512, converter=int)
    seed: int = field(default=0, converter=int)
    workers: int | None = field(default=None, converter=optional(int))
    budget: int = field(default=DEFAULT_BUDGET, converter=int)
    xi: float | None = field(default=None, converter=optional(float))
    draws: int = field(default=2000, converter=int)
    grid: tuple[tuple[float, float], ...] = field(default=DEFAULT_GRID, converter=_pairs)
    betas: tuple[float, ...] = field(default=(0.5, 1.0, 2.0, 4.0), converter=_floats)
    periods: tuple[int, ...] = field(default=tuple(range(4, 13)), converter=_ints)
    field: FieldParams = field(factory=FieldParams, converter=FieldParams.convert)

    @n.validator  # noqa
    def __n_validator(self, _: str, value: int):
        if value < 1:
            raise ValueError(f"Period n must be at least 1, got {value!r}")

    @c.validator  # noqa
    def __c_validator(self, _: str, value: float):
        if not 0.0 < value < 1.0:
            raise ValueError(f"Regime constant c must lie in (0, 1), got {value!r}")

    @trials.validator  # noqa
    def __trials_validator(self, _: str, value: int):
        if value < 1:
            raise ValueError(f"At least one trial is required, got {value!r}")

    @seed.validator  # noqa
    def __seed_validator(self, _: str, value: int):
        if value < 0:
            raise ValueError(f"Seed must be nonnegative, got {value!r}")

    @budget.validator  # noqa
    def __budget_validator(self, _: str, value: int):
        if value < 1:
            raise ValueError(f"Enumeration budget must be positive, got {value!r}")

    @draws.validator  # noqa
    def __draws_validator(self, _: str, value: int):
        if value < 2:
            raise ValueError(f"At least two band draws are required, got {value!r}")

    @betas.validator  # noqa
    def __betas_validator(self, _: str, value: tuple[float, ...]):
        if not value:
            raise ValueError("Beta grid cannot be empty")
        if any(beta <= 0 for beta in value):
            raise ValueError(f"Beta values must be positive, got {value!r}")

    @periods.validator  # noqa
    def __periods_validator(self, _: str, value: tuple[int, ...]):
        if not value:
            raise ValueError("Period range cannot be empty")
        if any(n < 1 for n in value):
            raise ValueError(f"Periods must be positive, got {value!r}")

    @property
    def j_max(self) -> int:
        return self.field.j_max if self.field.j_max is not None else self.n + 4

    def asdict(self) -> dict:
        return dict(
            matrix=[list(row) for row in self.matrix],
            n=self.n,
            c=self.c,
            trials=self.trials,
            seed=self.seed,
            budget=self.budget,
            **(dict(xi=self.xi) if self.xi is not None else {}),
            draws=self.draws,
            grid=[list(pair) for pair in self.grid],
            betas=list(self.betas),
            periods=list(self.periods),
            field=dict(
                self.field.asdict(),
                tau0=[asdict(term) | dict(k=list(term.k)) for term in self.field.tau0],
            ),
        )

    def asyaml(self) -> str:
        return yaml.dump(self.asdict(), sort_keys=False, allow_unicode=True)


@define(kw_only=True)
class RunManifest(AttrsInstance):
    """Record of one CLI run; every written file is listed in ``outputs``."""
    command: str
    config: dict[str, Any]
    seed: int
    version: str
    outputs: list[str] = field(factory=list)
    duration: float = 0.0

    def asdict(self) -> dict:
        return asdict(self)
