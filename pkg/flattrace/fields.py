"""Gaussian random fields on the flat torus, built on the real Fourier eigenbasis of the Laplacian.

Modes are indexed by ``(λ, k, kind)`` ascending: the constant first, then for every wavevector
``k`` in the canonical half-space (first nonzero coordinate positive) ``√2 cos(2π k·x)`` followed
by ``√2 sin(2π k·x)``. Band ``j`` is the multiplier ``h_j^{dα+γ} √χ(h_j² Δ)`` applied to white
noise, with ``h_j = Λ̃^{-j/2}``.
"""
from functools import cache, cached_property
import logging
from math import floor, gamma as gamma_fn, pi, sqrt
from typing import Iterable, Self, Sequence

from attrs import define, field
import numpy as np
from scipy import integrate, optimize

from .errors import BandBudgetExceeded, ScheduleTooFlat
from .types import CoefficientSchedule, FieldParams, RationalPoint, TrigTerm
from .util import blocks, stream

__all__ = (
    "SpectralBasis", "Band", "FieldSpec", "FieldSample",
    "chi", "chi_constant", "chi_cutoff", "CHI_FLOOR",
    "sample_band", "sample_field", "assemble_roof", "assemble_coefficients",
    "covariance_kernel", "kernel_matrix", "kernel_decay",
    "sobolev_partial_norm", "sobolev_threshold", "continuity_threshold", "diagonal_constant",
    "weyl_counts", "weyl_slope",
)

log = logging.getLogger(__name__)

CHI_FLOOR = 1e-16

CONSTANT, COSINE, SINE = 0, 1, 2

# Values per evaluation chunk (points x modes).
_CHUNK = 1 << 22


@cache
def chi_constant(d: int = 2) -> float:
    """``a`` with ``∫_R (a t² e^{-t²})² dt = (2π)^d``, from ``∫ t⁴ e^{-2t²} dt = (3/16)√(π/2)``."""
    return sqrt((2 * pi) ** d / (3 / 16 * sqrt(pi / 2)))


def chi(t, d: int = 2):
    """The band multiplier ``χ(t) = a t² e^{-t²}``; vectorised over ``t``."""
    t = np.asarray(t, dtype=float)
    value = chi_constant(d) * t * t * np.exp(-t * t)
    return float(value) if value.ndim == 0 else value


@cache
def chi_cutoff(d: int = 2, floor: float = CHI_FLOOR) -> float:
    """Largest ``t`` with ``χ(t) > floor``."""
    return optimize.brentq(lambda t: chi(t, d) - floor, 1.0, 50.0)


def _canonical(k: np.ndarray) -> np.ndarray:
    nonzero = k != 0
    first = np.argmax(nonzero, axis=1)
    return nonzero.any(axis=1) & (k[np.arange(len(k)), first] > 0)


@define(frozen=True, slots=False, eq=False)
class SpectralBasis:
    """Truncated real Fourier basis, ``L²``-orthonormal for the probability Lebesgue measure.

    Every mode with eigenvalue below ``lam_missing`` is present.
    """
    dimension: int
    wavevectors: np.ndarray = field(repr=False)
    kinds: np.ndarray = field(repr=False)
    lam_missing: float = float("inf")

    def __len__(self):
        return len(self.kinds)

    def __str__(self):
        return f"SpectralBasis(d={self.dimension}, J={len(self)}, λ_max={self.lam_max:.6g})"

    @cached_property
    def norms2(self) -> np.ndarray:
        return (self.wavevectors ** 2).sum(axis=1)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return 4 * pi * pi * self.norms2.astype(float)

    @property
    def lam_max(self) -> float:
        return float(self.eigenvalues[-1])

    @classmethod
    def covering(cls, d: int, lam_max: float, *, minimum: int = 1) -> Self:
        """Every mode with ``λ <= lam_max``, extended to at least ``minimum`` modes.

        Truncation keeps cosine/sine pairs together, so the size may exceed ``minimum`` by one.
        """
        if d < 1:
            raise ValueError(f"Dimension must be positive, got {d!r}")
        radius = max(sqrt(max(lam_max, 0.0)) / (2 * pi), 1.0)
        while True:
            r = int(radius) + 1
            k = (np.indices((2 * r + 1,) * d, dtype=np.int64).reshape(d, -1).T - r)
            norms2 = (k ** 2).sum(axis=1)
            k = k[(norms2 <= radius * radius) & _canonical(k)]
            if 1 + 2 * len(k) >= minimum:
                break
            radius *= 1.25

        norms2 = (k ** 2).sum(axis=1)
        k = k[np.lexsort(tuple(k[:, i] for i in reversed(range(d))) + (norms2,))]
        norms2 = (k ** 2).sum(axis=1)
        covered = int(np.searchsorted(norms2, lam_max / (4 * pi * pi), side="right"))
        pairs = max(covered, minimum // 2)
        lam_missing = 4 * pi * pi * (int(norms2[pairs]) if pairs < len(k) else floor(radius * radius) + 1)
        k = k[:pairs]

        wavevectors = np.concatenate((np.zeros((1, d), dtype=np.int64), np.repeat(k, 2, axis=0)))
        kinds = np.concatenate(([CONSTANT], np.tile([COSINE, SINE], len(k)))).astype(np.int8)
        return cls(dimension=d, wavevectors=wavevectors, kinds=kinds, lam_missing=lam_missing)

    @classmethod
    def build(cls, d: int, size: int) -> Self:
        """The first ``size`` modes (rounded up to complete a cosine/sine pair)."""
        return cls.covering(d, 0.0, minimum=size)

    def index(self, k: Sequence[int], kind: int) -> int:
        """Position of the mode ``(k, kind)``; raises ``KeyError`` outside the truncation."""
        k = np.asarray(k, dtype=np.int64)
        hits = np.flatnonzero((self.wavevectors == k).all(axis=1) & (self.kinds == kind))
        if not len(hits):
            raise KeyError(f"Mode k={tuple(k.tolist())} kind={kind} is outside {self}")
        return int(hits[0])

    def _select(self, modes) -> tuple[np.ndarray, np.ndarray]:
        if modes is None:
            return self.wavevectors, self.kinds
        return self.wavevectors[modes], self.kinds[modes]

    @staticmethod
    def _from_phases(theta: np.ndarray, kinds: np.ndarray) -> np.ndarray:
        root2 = sqrt(2.0)
        return np.where(
            kinds == COSINE, root2 * np.cos(theta),
            np.where(kinds == SINE, root2 * np.sin(theta), 1.0),
        )

    def values(self, points, modes=None) -> np.ndarray:
        """``φ_k(x)`` for float points ``(M, d)``, as an ``(M, len(modes))`` array."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k, kinds = self._select(modes)
        return self._from_phases(2 * pi * (points @ k.T.astype(float)), kinds)

    def rational_values(self, numerators: np.ndarray, denominator: int, modes=None) -> np.ndarray:
        """``φ_k(p/q)`` with the phase ``k·p mod q`` reduced exactly in integers."""
        if numerators.dtype == object or denominator * int(np.abs(self.wavevectors).max(initial=1)) * self.dimension >= 2 ** 62:
            return self.values(np.asarray(numerators, dtype=float) / denominator, modes)
        k, kinds = self._select(modes)
        residues = (np.asarray(numerators, dtype=np.int64) @ k.T) % denominator
        return self._from_phases(2 * pi * residues / denominator, kinds)

    def synthesize(self, coefficients: np.ndarray, points=None, *, table=None, modes=None) -> np.ndarray:
        """``Σ_k coefficient_k φ_k`` at float ``points`` or at every point of an orbit ``table``."""
        coefficients = np.asarray(coefficients, dtype=float)
        if modes is None:
            modes = np.flatnonzero(coefficients)
            coefficients = coefficients[modes]
        if table is not None:
            count = table.total_points
            evaluate = lambda sel: self.rational_values(table.numerators, table.denominator, sel)  # noqa: E731
        else:
            points = np.atleast_2d(np.asarray(points, dtype=float))
            count = len(points)
            evaluate = lambda sel: self.values(points, sel)  # noqa: E731

        total = np.zeros(count)
        for chunk in blocks(len(modes), _CHUNK // max(count, 1)):
            total += evaluate(modes[chunk]) @ coefficients[chunk]
        return total


@define(frozen=True, slots=False, eq=False)
class Band:
    """Retained modes and amplitudes ``h^{dα+γ} √χ(h² λ_k)`` of band ``j``."""
    j: int
    h: float
    indices: np.ndarray = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.indices)


@define(frozen=True, slots=False, eq=False)
class FieldSpec:
    """Everything needed to draw the random roof: basis, schedule, band scales and rescaling."""
    params: FieldParams
    basis: SpectralBasis
    lambda_tilde: float
    j_max: int

    def __str__(self):
        return f"FieldSpec(α={self.params.alpha}, Λ̃={self.lambda_tilde:.6g}, j_max={self.j_max}, J={len(self.basis)})"

    @classmethod
    def build(cls, params: FieldParams, automorphism, n: int | None = None, *, j_max: int | None = None) -> Self:
        """Resolve ``Λ̃`` and ``j_max`` against an automorphism and size the basis to cover every band.

        Args:
            params (FieldParams): Field parameters.
            automorphism (ToralAutomorphism): The map, for ``d`` and ``Λ``.
            n (int, optional): Trace period; ``j_max`` defaults to ``n + 4``.
            j_max (int, optional): Explicit band cap, overriding both ``params`` and ``n``.

        Raises:
            ValueError: when ``Λ̃ <= Λ``.
            BandBudgetExceeded: when the finest band would retain more than ``band_cap`` modes.
        """
        d = automorphism.dimension
        lam = automorphism.Lambda
        lambda_tilde = params.lambda_tilde if params.lambda_tilde is not None else params.lambda_ratio * lam
        if lambda_tilde <= lam:
            raise ValueError(f"Λ̃ = {lambda_tilde!r} must exceed Λ = {lam!r}")

        j_max = j_max or params.j_max or ((n or 0) + 4)
        h = lambda_tilde ** (-j_max / 2)
        lam_max = chi_cutoff(d) / (h * h)
        radius = sqrt(lam_max) / (2 * pi)
        estimate = pi ** (d / 2) / gamma_fn(d / 2 + 1) * radius ** d
        if estimate > params.band_cap:
            raise BandBudgetExceeded(
                f"Band {j_max} would retain about {int(estimate)} modes, over the cap of {params.band_cap}"
            )

        spec = cls(
            params=params,
            basis=SpectralBasis.covering(d, lam_max, minimum=params.basis_size),
            lambda_tilde=lambda_tilde,
            j_max=j_max,
        )
        log.info(f"{automorphism} [field] ++ J={len(spec.basis)} bands={j_max} Λ̃={lambda_tilde:.6g}")
        return spec

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    @property
    def schedule(self) -> CoefficientSchedule:
        return self.params.schedule

    @property
    def band_exponent(self) -> float:
        """``dα + γ``."""
        return self.dimension * self.params.alpha + self.params.gamma

    @property
    def diagonal_exponent(self) -> float:
        """``d(2α - 1) + 2γ``, the scaling of ``K_j(x, x)`` in ``h_j``."""
        return self.dimension * (2 * self.params.alpha - 1) + 2 * self.params.gamma

    def h(self, j: int) -> float:
        return self.lambda_tilde ** (-j / 2)

    def band(self, j: int) -> Band:
        if not 1 <= j <= self.j_max:
            raise ValueError(f"Band {j} outside 1..{self.j_max}")
        return self.bands[j - 1]

    @cached_property
    def bands(self) -> tuple[Band, ...]:
        result = []
        for j in range(1, self.j_max + 1):
            h = self.h(j)
            weights = chi(h * h * self.basis.eigenvalues, self.dimension)
            indices = np.flatnonzero(weights > CHI_FLOOR)
            if len(indices) > self.params.band_cap:
                raise BandBudgetExceeded(f"Band {j} retains {len(indices)} modes, over the cap of {self.params.band_cap}")
            if self.basis.lam_missing * h * h < chi_cutoff(self.dimension):
                raise BandBudgetExceeded(f"Band {j} is truncated by {self.basis}")
            result.append(Band(
                j=j, h=h, indices=indices,
                amplitudes=h ** self.band_exponent * np.sqrt(weights[indices]),
            ))
            log.debug(f"{self} [band {j}] ++ h={h:.6g} modes={len(indices)}")
        return tuple(result)

    @cached_property
    def coefficients(self) -> np.ndarray:
        """Target per-mode standard deviations ``c_k`` of ``δτ``."""
        return self.schedule(np.arange(len(self.basis), dtype=float))

    @cached_property
    def band_variances(self) -> np.ndarray:
        """``c'_k² = Σ_j h_j^{2(dα+γ)} χ(h_j² λ_k)``."""
        total = np.zeros(len(self.basis))
        for band in self.bands:
            total[band.indices] += band.amplitudes ** 2
        return total

    @cached_property
    def kappa(self) -> float:
        """Global band rescaling ``min(1, min_k c_k / c'_k)``."""
        spread = np.sqrt(self.band_variances)
        active = spread > 0
        if not active.any():
            return 1.0
        return float(min(1.0, np.min(self.coefficients[active] / spread[active])))

    @cached_property
    def residual(self) -> np.ndarray:
        """Coefficients ``√(c_k² - κ² c'_k²)`` of the independent remainder ``δτ_0``."""
        return np.sqrt(np.maximum(self.coefficients ** 2 - self.kappa ** 2 * self.band_variances, 0.0))

    @property
    def mode_variances(self) -> np.ndarray:
        return self.kappa ** 2 * self.band_variances + self.residual ** 2

    @cached_property
    def tau0(self) -> np.ndarray:
        """Basis coefficients of the deterministic roof."""
        return tau0_coefficients(self.basis, self.params.tau0)

    def info(self) -> dict:
        return dict(
            modes=len(self.basis),
            lambda_tilde=self.lambda_tilde,
            j_max=self.j_max,
            kappa=self.kappa,
            band_modes=[len(band) for band in self.bands],
            sobolev_threshold=sobolev_threshold(self.dimension, self.params.alpha),
            continuity_threshold=continuity_threshold(self.dimension, self.params.alpha),
            diagonal_constant=diagonal_constant(self),
        )


def tau0_coefficients(basis: SpectralBasis, terms: Iterable[TrigTerm]) -> np.ndarray:
    """Convert ``a cos(2π k·x) + b sin(2π k·x)`` terms to basis coefficients."""
    result = np.zeros(len(basis))
    for term in terms:
        k = np.asarray(term.k, dtype=np.int64)
        if len(k) != basis.dimension:
            raise ValueError(f"Wavevector {term.k} does not match dimension {basis.dimension}")
        if not k.any():
            result[0] += term.cos
            continue
        sign = 1.0
        if not _canonical(k[None, :])[0]:
            k, sign = -k, -1.0
        result[basis.index(k, COSINE)] += term.cos / sqrt(2.0)
        result[basis.index(k, SINE)] += sign * term.sin / sqrt(2.0)
    return result


@define(frozen=True, slots=False, eq=False)
class FieldSample:
    """A realised field, stored as its coefficients in a spectral basis."""
    basis: SpectralBasis
    coefficients: np.ndarray = field(repr=False)
    seed: int | None = None

    def __call__(self, points) -> np.ndarray:
        return self.evaluate(points)

    def evaluate(self, points) -> np.ndarray:
        if isinstance(points, RationalPoint):
            points = [float(f) for f in points.fractions]
        return self.basis.synthesize(self.coefficients, points)

    def evaluate_table(self, table) -> np.ndarray:
        """Values at every point of an orbit table, in table order."""
        return self.basis.synthesize(self.coefficients, table=table)

    def _check(self, other: "FieldSample"):
        if other.basis is not self.basis:
            raise ValueError("Field samples live in different bases")

    def __add__(self, other: "FieldSample") -> "FieldSample":
        self._check(other)
        return FieldSample(basis=self.basis, coefficients=self.coefficients + other.coefficients)

    def __sub__(self, other: "FieldSample") -> "FieldSample":
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "FieldSample":
        return FieldSample(basis=self.basis, coefficients=float(scalar) * self.coefficients, seed=self.seed)

    __rmul__ = __mul__

    def rows(self) -> Iterable[tuple[int, tuple[int, ...], str, float]]:
        names = {CONSTANT: "const", COSINE: "cos", SINE: "sin"}
        for i in np.flatnonzero(self.coefficients):
            yield int(i), tuple(self.basis.wavevectors[i].tolist()), names[int(self.basis.kinds[i])], float(self.coefficients[i])


def sample_band(spec: FieldSpec, j: int, seed: int, *key: int) -> FieldSample:
    """One draw of ``δτ_j`` from the stream ``(seed, *key, j)``."""
    band = spec.band(j)
    coefficients = np.zeros(len(spec.basis))
    coefficients[band.indices] = band.amplitudes * stream(seed, *key, j).standard_normal(len(band))
    return FieldSample(basis=spec.basis, coefficients=coefficients, seed=seed)


def assemble_coefficients(spec: FieldSpec, seed: int, *key: int) -> np.ndarray:
    """Basis coefficients of ``τ = τ_0 + ε (δτ_0 + κ Σ_j δτ_j)``.

    Band ``j`` draws from the stream ``(seed, *key, j)`` and the remainder from ``(seed, *key, 0)``.

    Raises:
        ScheduleTooFlat: when ``α <= 1``.
    """
    if spec.params.alpha <= 1:
        raise ScheduleTooFlat(f"The band construction needs α > 1, got {spec.params.alpha}")
    coefficients = spec.tau0.copy()
    if spec.params.epsilon == 0:
        return coefficients

    delta = spec.residual * stream(seed, *key, 0).standard_normal(len(spec.basis))
    for band in spec.bands:
        delta[band.indices] += spec.kappa * band.amplitudes * stream(seed, *key, band.j).standard_normal(len(band))
    return coefficients + spec.params.epsilon * delta


def assemble_roof(spec: FieldSpec, seed: int, *key: int) -> FieldSample:
    return FieldSample(basis=spec.basis, coefficients=assemble_coefficients(spec, seed, *key), seed=seed)


def sample_field(spec: FieldSpec, seed: int, *key: int) -> FieldSample:
    """The plain centred field ``Σ_k c_k ζ_k φ_k``; white noise for ``α = 0, C0 = 1``."""
    draws = stream(seed, *key).standard_normal(len(spec.basis))
    return FieldSample(basis=spec.basis, coefficients=spec.coefficients * draws, seed=seed)


def _as_points(points) -> np.ndarray:
    if isinstance(points, RationalPoint):
        return np.array([float(f) for f in points.fractions])
    return np.asarray(points, dtype=float)


def kernel_matrix(spec: FieldSpec, j: int, points) -> np.ndarray:
    """``K_j(x_a, x_b)`` for every pair of the given points."""
    band = spec.band(j)
    pts = np.atleast_2d(np.stack([_as_points(p) for p in points]))
    result = np.zeros((len(pts), len(pts)))
    weights = band.amplitudes ** 2
    for chunk in blocks(len(band), _CHUNK // max(len(pts), 1)):
        phi = spec.basis.values(pts, band.indices[chunk])
        result += (phi * weights[chunk]) @ phi.T
    return result


def covariance_kernel(spec: FieldSpec, j: int, x, y) -> float:
    """Truncated Schwartz kernel ``h_j^{2(dα+γ)} Σ_k χ(h_j² λ_k) φ_k(x) φ_k(y)``."""
    return float(kernel_matrix(spec, j, [x, y])[0, 1])


def kernel_decay(spec: FieldSpec, j: int, table) -> float:
    """``max |K_j(x, y)| / K_j(x, x)`` over distinct period points ``x, y`` of a linear map.

    The kernel is translation invariant and ``Per(n)`` is a group, so the pairs reduce to
    ``K_j(z, 0)`` over its nonzero elements.
    """
    band = spec.band(j)
    origin = spec.basis.values(np.zeros((1, spec.dimension)), band.indices)[0]
    weights = band.amplitudes ** 2 * origin
    values = spec.basis.synthesize(weights, table=table, modes=band.indices)
    nonzero = np.asarray(table.numerators != 0).any(axis=1)
    if not nonzero.any():
        return 0.0
    return float(np.max(np.abs(values[nonzero])) / float(weights @ origin))


def sobolev_partial_norm(sample: FieldSample, s: float, J: int) -> float:
    """``Σ_{j<J} |coefficient_j|² (1 + λ_j)^s``."""
    if J > len(sample.basis):
        raise ValueError(f"Truncation {J} exceeds the basis size {len(sample.basis)}")
    c = sample.coefficients[:J]
    return float(np.sum(c * c * (1.0 + sample.basis.eigenvalues[:J]) ** s))


def sobolev_threshold(d: int, alpha: float) -> float:
    """Fields lie in ``H^s`` almost surely exactly for ``s < d(α - 1/2)``."""
    return d * (alpha - 0.5)


def continuity_threshold(d: int, alpha: float) -> float:
    """``C^k`` regularity holds for ``k < d(α - 1)`` (Sobolev embedding)."""
    return d * (alpha - 1)


def diagonal_constant(spec: FieldSpec) -> float:
    """Limit of ``K_j(x, x) / h_j^{d(2α-1)+2γ}``: ``(2π)^{-d} ∫_{R^d} χ(|u|²) du``."""
    d = spec.dimension
    sphere = 2 * pi ** (d / 2) / gamma_fn(d / 2)
    radial, _ = integrate.quad(lambda r: chi(r * r, d) * r ** (d - 1), 0.0, np.inf)
    return sphere * radial / (2 * pi) ** d


def weyl_counts(basis: SpectralBasis, lams: Sequence[float]) -> np.ndarray:
    """``#{j : λ_j <= L}`` for each ``L``; the basis must cover the largest ``L``."""
    return np.searchsorted(basis.eigenvalues, np.asarray(lams, dtype=float), side="right")


def weyl_slope(d: int, lo: float = 1e3, hi: float = 1e5, points: int = 32) -> float:
    """Least-squares slope of ``log N(λ)`` against ``log λ`` on ``[lo, hi]``; tends to ``d/2``."""
    basis = SpectralBasis.covering(d, hi)
    lams = np.geomspace(lo, hi, points)
    slope, _ = np.polyfit(np.log(lams), np.log(weyl_counts(basis, lams)), 1)
    return float(slope)
