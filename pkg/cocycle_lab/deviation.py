"""
Cocycle Lab - Deviation Module
Numerical checks of the Birkhoff-sum and large deviation estimates:
kernel Birkhoff sums F_{n,zeta}, nearest-point-excluded rational
sums, deviation-set measures of u_n, and exponential moments.

Lebesgue measure on T is replaced by the counting measure of an equispaced
grid. Grid points whose orbit comes within ``log_singularity_tol`` of a
logarithmic singularity are dropped and counted.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .analytic import log_potential_I
from .arithmetic import CFExpansion, QuadraticIrrational, beta_hat, orbit_set_distance, torus_distance
from .cocycle import JacobiModel, grid_log_norms
from .config import get_config
from .errors import SingularStepError, TerminatingExpansionError, ValidationError
from .reduction import grid_map, pairwise_mean, pairwise_sum

logger = logging.getLogger(__name__)

Step = Union[float, Fraction, QuadraticIrrational, CFExpansion]

MIN_DEVIATION_GRID = 512


def _as_step(omega: Step) -> Union[float, Fraction]:
    if isinstance(omega, CFExpansion):
        return omega.exact if omega.exact is not None else omega.omega
    if isinstance(omega, QuadraticIrrational):
        return omega.value
    if isinstance(omega, Fraction):
        return omega
    return float(omega)


def _offsets(step: Union[float, Fraction], n: int) -> np.ndarray:
    """k * step for k = 0..n-1; exact residues for rational steps."""
    k = np.arange(n, dtype=np.int64)
    if isinstance(step, Fraction):
        return ((k * step.numerator) % step.denominator) / step.denominator
    return k * float(step)


def _log_distances(points: np.ndarray, zeta: complex) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(points - zeta))


def _orbit_sum(points: np.ndarray, zeta: complex, strict: bool) -> float:
    dist = np.abs(points - zeta)
    hits = np.flatnonzero(dist < get_config().singular_tol)
    if hits.size:
        k = int(hits[0])
        if strict:
            raise SingularStepError("orbit point coincides with zeta", k=k, z=complex(points[k]))
        logger.debug(f"log singularity at k={k}")
        return float("-inf")
    return pairwise_sum(_log_distances(points, zeta))


def birkhoff_sum(zeta: complex, x: float, n: int, omega: Step, strict: bool = False) -> float:
    """
    F_{n,zeta}(x) = sum_{0<=k<n} log|{x + k omega} - zeta|.

    A hit on zeta returns -inf, or raises SingularStepError carrying k when
    ``strict``.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    points = (x + _offsets(_as_step(omega), n)) % 1.0
    return _orbit_sum(points, complex(zeta), strict)


def rational_kernel_sum(zeta: complex, x: float, q: int, p: int = 1, strict: bool = False) -> float:
    """f_{q,zeta}(x) by direct enumeration of the points {x + k p/q}."""
    if q < 1:
        raise ValidationError("q must be >= 1")
    points = np.array([(x + (k * p % q) / q) % 1.0 for k in range(q)])
    return _orbit_sum(points, complex(zeta), strict)


@dataclass
class ExcludedSum:
    """Sum over {x + k/q} with the nearest point to zeta removed."""

    sum_excluding_nearest: float
    residual: float
    k0: int
    q: int

    @property
    def normalized(self) -> float:
        """residual / log q."""
        return self.residual / math.log(self.q)


def excluded_rational_sum(x: float, zeta: complex, q: int) -> ExcludedSum:
    """
    |sum_{k != k0} log|{x + k/q} - zeta| - q I(zeta)| with k0 the nearest point.

    Distances are unwrapped (|theta - zeta| with theta in [0, 1)). Points are
    built from (x q) mod 1 and summed in increasing theta, so shifting x by 1/q
    gives the same point set up to the rounding of (x q) mod 1; results agree
    to a few ulps of q, not bit for bit.
    """
    if q < 2:
        raise ValidationError("q must be >= 2")
    zeta = complex(zeta)
    t = (x * q) % 1.0
    j = np.arange(q)
    theta = (t + j) / q  # sorted, the set {x + k/q} mod 1
    dist = np.abs(theta - zeta)
    j0 = int(np.argmin(dist))
    # k with {x + k/q} = theta[j0]
    k0 = int(round((theta[j0] - x % 1.0) * q)) % q
    terms = _log_distances(np.delete(theta, j0), zeta)
    total = pairwise_sum(terms)
    residual = abs(total - q * log_potential_I(zeta))
    return ExcludedSum(sum_excluding_nearest=total, residual=residual, k0=k0, q=q)


def _birkhoff_grid_kernel(xs: np.ndarray, zeta: complex, offsets: np.ndarray) -> np.ndarray:
    """Columns (F_n(x), min_k |{x + k omega} - zeta|) for a chunk of x."""
    acc = np.zeros(len(xs))
    closest = np.full(len(xs), np.inf)
    with np.errstate(divide="ignore"):
        for off in offsets:
            dist = np.abs((xs + off) % 1.0 - zeta)
            acc += np.log(dist)
            np.minimum(closest, dist, out=closest)
    return np.stack([acc, closest], axis=1)


def _birkhoff_grid(zeta: complex, omega: Step, n: int, grid_size: int, workers: Optional[int]):
    offsets = _offsets(_as_step(omega), n)
    xs = np.arange(grid_size) / grid_size
    table = grid_map(lambda chunk: _birkhoff_grid_kernel(chunk, complex(zeta), offsets), xs, workers)
    return xs, table[:, 0], table[:, 1]


@dataclass
class BirkhoffSumSample:
    """F_{n,zeta} on an equispaced x-grid against n I(zeta)."""

    zeta: complex
    n: int
    x: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)  # NaN where excluded
    I_value: float = 0.0
    mean_gap: float = 0.0
    max_gap: float = 0.0
    excluded: int = 0

    def to_dict(self) -> dict:
        return {
            "zeta": [self.zeta.real, self.zeta.imag],
            "n": self.n,
            "grid": len(self.x),
            "I": self.I_value,
            "mean_gap": self.mean_gap,
            "max_gap": self.max_gap,
            "excluded": self.excluded,
        }

    def csv_rows(self) -> List[list]:
        return [[float(x), float(v)] for x, v in zip(self.x, self.values)]


def birkhoff_sample(
    zeta: complex, omega: Step, n: int, grid_size: int, workers: Optional[int] = None
) -> BirkhoffSumSample:
    zeta = complex(zeta)
    xs, F, closest = _birkhoff_grid(zeta, omega, n, grid_size, workers)
    keep = closest >= get_config().log_singularity_tol
    if not keep.any():
        raise ValidationError("every grid point is within the singular neighbourhood of zeta")
    I_value = log_potential_I(zeta)
    values = np.where(keep, F, np.nan)
    sample = BirkhoffSumSample(
        zeta=zeta,
        n=n,
        x=xs,
        values=values,
        I_value=I_value,
        mean_gap=abs(pairwise_mean(F[keep] / n) - I_value),
        max_gap=float(np.max(np.abs(F[keep] - n * I_value))),
        excluded=int((~keep).sum()),
    )
    logger.info(f"F_{n} at zeta={zeta}: mean gap {sample.mean_gap:.3g}, {sample.excluded} excluded")
    return sample


@dataclass
class BlockBound:
    """|F_{l q_s}(x) - l q_s I| against C l log q_s + |log D| + 2 beta_hat n."""

    n: int
    q_s: int
    l: int
    deviation: float
    set_distance: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.deviation <= self.bound


def birkhoff_block_bound(
    zeta: complex, x: float, cf: CFExpansion, s: int, l: int, C_budget: float = 20.0
) -> BlockBound:
    """
    The block estimate for n = l q_s < q_{s+1}.

    D is min_{0 <= m < l q_s} ||x - xi + m omega||, the distance from x - xi
    to the finite set {-m omega}.
    """
    q_s, q_next = cf.q(s), cf.q(s + 1)
    n = l * q_s
    if l < 1 or n >= q_next:
        raise ValidationError(f"need 1 <= l and l q_s = {n} < q_(s+1) = {q_next}")
    zeta = complex(zeta)
    try:
        beta = beta_hat(cf)
    except TerminatingExpansionError:
        beta = max(cf.gap_exponents, default=0.0)
    deviation = abs(birkhoff_sum(zeta, x, n, cf) - n * log_potential_I(zeta))
    D = orbit_set_distance(x - zeta.real, cf.omega, n)
    bound = C_budget * l * math.log(max(q_s, 2)) + abs(math.log(D)) + 2 * beta * n
    return BlockBound(n=n, q_s=q_s, l=l, deviation=deviation, set_distance=D, bound=bound)


@dataclass
class DeviationProfile:
    """u_n on the grid (dropped orbits removed) and its mean L_n."""

    E: float
    n: int
    grid_size: int
    gauge: str
    u: np.ndarray = field(repr=False)
    L_n: float = 0.0
    dropped: int = 0

    def measure(self, delta: float) -> float:
        """Fraction of kept grid points with |u_n - L_n| > delta."""
        return float(np.count_nonzero(np.abs(self.u - self.L_n) > delta)) / len(self.u)


def deviation_profile(
    model: JacobiModel,
    E: float,
    n: int,
    grid_size: int,
    gauge: str = "unimodular",
    workers: Optional[int] = None,
) -> DeviationProfile:
    if grid_size < MIN_DEVIATION_GRID:
        raise ValidationError(f"deviation grids need at least {MIN_DEVIATION_GRID} points")
    table = grid_log_norms(model, E, n, grid_size, gauges=(gauge,), workers=workers)
    keep = ~table.dropped
    if not keep.any():
        raise SingularStepError("every orbit hit a singular step", k=-1)
    dropped = int(table.dropped.sum())
    if dropped > get_config().dropped_warning_fraction * grid_size:
        logger.warning(f"n={n}: {dropped} of {grid_size} orbits dropped (> 1%)")
    u = table.log_norms[gauge][keep] / n
    return DeviationProfile(E=float(E), n=n, grid_size=grid_size, gauge=gauge, u=u, L_n=pairwise_mean(u), dropped=dropped)


def deviation_measure(
    model: JacobiModel,
    E: float,
    n: int,
    delta: float,
    grid_size: int,
    gauge: str = "unimodular",
    workers: Optional[int] = None,
) -> float:
    """mes{x : |u_n(x) - L_n| > delta} as a grid fraction."""
    if not delta > 0:
        raise ValidationError("delta must be positive")
    return deviation_profile(model, E, n, grid_size, gauge, workers).measure(delta)


@dataclass
class DeviationReport:
    E: float
    n_values: List[int]
    delta: float
    grid_size: int
    measures: List[float]
    dropped: List[int]
    L_n: List[float]
    fitted_rate: Optional[float]
    floor: float
    bound_rate: float
    constants: Dict[str, float]
    L_hat: Optional[float] = None
    sharp_reference_rate: Optional[float] = None
    dropped_warning: bool = False

    @property
    def rate_negative(self) -> bool:
        return self.fitted_rate is not None and self.fitted_rate < 0

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.measures, self.measures[1:]))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["rate_negative"] = self.rate_negative
        data["decreasing"] = self.decreasing
        return data


def _fit_rate(n_values: Sequence[int], measures: Sequence[float]) -> Optional[float]:
    usable = [(n, m) for n, m in zip(n_values, measures) if m > 0]
    if len(usable) < 2:
        return None
    ns, ms = zip(*usable)
    return float(stats.linregress(ns, np.log(ms)).slope)


def ldt_experiment(
    model: JacobiModel,
    E: float,
    n_list: Sequence[int],
    delta: float,
    grid_size: int,
    c_abs: Optional[float] = None,
    mu_guess: Optional[float] = None,
    L_hat: Optional[float] = None,
    sharp_rate_coefficient: Optional[float] = None,
    workers: Optional[int] = None,
) -> DeviationReport:
    """Deviation measures over increasing n with a fitted exponential rate."""
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValidationError("n_list must be strictly increasing with at least 3 entries")
    if not delta > 0:
        raise ValidationError("delta must be positive")
    config = get_config()
    c_abs = config.constant("c_abs") if c_abs is None else c_abs
    mu_guess = config.constant("mu_guess") if mu_guess is None else mu_guess

    measures, dropped, means = [], [], []
    for n in n_list:
        profile = deviation_profile(model, E, n, grid_size, workers=workers)
        measures.append(profile.measure(delta))
        dropped.append(profile.dropped)
        means.append(profile.L_n)

    rate = _fit_rate(n_list, measures)
    if rate is None:
        logger.info("fewer than two nonzero measures; rate reported at the grid floor")
    report = DeviationReport(
        E=float(E),
        n_values=n_list,
        delta=delta,
        grid_size=grid_size,
        measures=measures,
        dropped=dropped,
        L_n=means,
        fitted_rate=rate,
        floor=1.0 / grid_size,
        bound_rate=-c_abs * delta / mu_guess,
        constants={"c_abs": c_abs, "mu_guess": mu_guess},
        L_hat=L_hat,
        dropped_warning=any(d > config.dropped_warning_fraction * grid_size for d in dropped),
    )
    if L_hat is not None and sharp_rate_coefficient is not None:
        report.sharp_reference_rate = -sharp_rate_coefficient * L_hat
    return report


@dataclass
class ExpMomentEstimate:
    """Grid value of the integral of exp(sigma |F_n - n I|) over T."""

    sigma: float
    zeta: complex
    n: int
    grid_size: int
    value: float
    log_value: float
    excluded: int
    beta_hat: Optional[float] = None

    @property
    def log_ratio(self) -> float:
        """log(value) / (sigma n), to be compared with 5 beta_hat."""
        return self.log_value / (self.sigma * self.n)

    @property
    def printed_exponent(self) -> Optional[float]:
        return None if self.beta_hat is None else 5 * self.beta_hat

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "zeta": [self.zeta.real, self.zeta.imag],
            "n": self.n,
            "grid": self.grid_size,
            "value": self.value,
            "log_ratio": self.log_ratio,
            "five_beta_hat": self.printed_exponent,
            "excluded": self.excluded,
        }


def exp_moment(
    sigma: float, zeta: complex, omega: Step, n: int, grid_size: int, workers: Optional[int] = None
) -> ExpMomentEstimate:
    """
    Grid mean of exp(sigma |F_{n,zeta}(x) - n I(zeta)|).

    x whose orbit passes within 1/(2 n grid) of zeta are excluded.
    """
    if not 0 < sigma < 1:
        raise ValidationError("sigma must lie in (0, 1)")
    zeta = complex(zeta)
    _, F, closest = _birkhoff_grid(zeta, omega, n, grid_size, workers)
    keep = closest >= 1.0 / (2 * n * grid_size)
    exponent = sigma * np.abs(F[keep] - n * log_potential_I(zeta))
    log_value = float(logsumexp(exponent) - math.log(exponent.size))
    beta = None
    if isinstance(omega, CFExpansion) and not omega.terminating and len(omega.convergents) >= 2:
        beta = beta_hat(omega)
    with np.errstate(over="ignore"):
        value = float(np.exp(log_value))
    return ExpMomentEstimate(
        sigma=sigma,
        zeta=zeta,
        n=n,
        grid_size=grid_size,
        value=value,
        log_value=log_value,
        excluded=int((~keep).sum()),
        beta_hat=beta,
    )


@dataclass
class FiniteSetMoment:
    value: float
    bound: float
    size: int

    @property
    def holds(self) -> bool:
        return self.value <= self.bound


def finite_set_log_moment(points: Sequence[float], sigma: float, grid_size: int) -> FiniteSetMoment:
    """Midpoint-grid integral of exp(sigma |log dist(x, points)|) against 2^s (#points)^s / (1 - s)."""
    if not 0 < sigma < 1:
        raise ValidationError("sigma must lie in (0, 1)")
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise ValidationError("the point set must be non-empty")
    x = (np.arange(grid_size) + 0.5) / grid_size
    dist = np.full(grid_size, np.inf)
    for p in pts:
        dist = np.minimum(dist, torus_distance(x, p))
    with np.errstate(divide="ignore"):
        integrand = np.exp(sigma * np.abs(np.log(dist)))
    value = pairwise_mean(integrand)
    bound = 2**sigma / (1 - sigma) * pts.size**sigma
    return FiniteSetMoment(value=value, bound=bound, size=int(pts.size))
