"""
Cocycle Lab - Lyapunov Module
Finite-scale Lyapunov exponents over x-grids, extrapolation from scales n and
2n, the closed-form coupling thresholds and radii, and Holder-exponent fits.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .analytic import max_abs_derivative_real, sup_norm_strip
from .cocycle import JacobiModel, grid_log_norms
from .config import get_config
from .errors import DegenerateModelError, InsufficientDataError, ValidationError
from .reduction import pairwise_mean

logger = logging.getLogger(__name__)

TAU_DENOMINATOR = 8e5
SHARP_LDT_DIVISOR = 12000.0
MIN_DELTA_L = 1e-12

CSV_COLUMNS = ["E", "n", "grid", "L_n", "L_n_a", "D_hat", "dropped"]


@dataclass
class LyapunovEstimate:
    """Grid averages of u_n^u and u_n^a at one energy."""

    E: float
    n: int
    grid_size: int
    L_n: float
    L_n_a: float
    D_hat: float
    dropped_orbits: int
    gauge_residual: float

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> list:
        return [self.E, self.n, self.grid_size, self.L_n, self.L_n_a, self.D_hat, self.dropped_orbits]


def finite_le(
    model: JacobiModel,
    E: float,
    n: int,
    grid_size: int,
    workers: Optional[int] = None,
) -> LyapunovEstimate:
    """L_n(E) = grid mean of (1/n) log ||M_n^u(x_j)||, with L_n^a and D_hat from the same orbits."""
    min_grid = 2 * max(model.a.degree, model.v.degree) + 1
    if grid_size < min_grid:
        raise ValidationError(f"grid_size={grid_size} must be >= {min_grid} (2K+1)")
    if n < 1:
        raise ValidationError("n must be >= 1")

    started = time.perf_counter()
    table = grid_log_norms(model, E, n, grid_size, gauges=("unimodular", "analytic"), workers=workers)
    keep = ~table.dropped
    if not keep.any():
        raise DegenerateModelError(f"every orbit at E={E}, n={n} hit a singular step")

    L_n = pairwise_mean(table.log_norms["unimodular"][keep]) / n
    L_n_a = pairwise_mean(table.log_norms["analytic"][keep]) / n
    D_hat = pairwise_mean(table.sum_d[keep]) / (2 * n)
    estimate = LyapunovEstimate(
        E=float(E),
        n=n,
        grid_size=grid_size,
        L_n=L_n,
        L_n_a=L_n_a,
        D_hat=D_hat,
        dropped_orbits=int(table.dropped.sum()),
        gauge_residual=abs(L_n - (L_n_a - D_hat)),
    )
    logger.info(f"L_{n}({E}) = {L_n:.10g} on {grid_size} points in {time.perf_counter() - started:.2f}s")
    return estimate


def ap_extrapolate(L_n: float, L_2n: float) -> float:
    """2 L_2n - L_n, the extrapolant whose error decays exponentially in n."""
    return 2.0 * L_2n - L_n


def extrapolated_le(model: JacobiModel, E: float, n: int, grid_size: int, workers: Optional[int] = None) -> float:
    """ap_extrapolate(L_n, L_2n) at one energy."""
    return ap_extrapolate(
        finite_le(model, E, n, grid_size, workers).L_n,
        finite_le(model, E, 2 * n, grid_size, workers).L_n,
    )


def energy_scan(
    model: JacobiModel,
    E_min: float,
    E_max: float,
    num_E: int,
    n: int,
    grid_size: int,
    workers: Optional[int] = None,
) -> List[LyapunovEstimate]:
    if num_E < 1:
        raise ValidationError("scan needs at least one energy")
    energies = np.linspace(E_min, E_max, num_E) if num_E > 1 else np.array([E_min])
    return [finite_le(model, float(E), n, grid_size, workers) for E in energies]


@dataclass
class PositivityRow:
    E: float
    L_n: float
    bound: float
    ok: bool


def positivity_scan(
    model: JacobiModel,
    gamma: float,
    n: int,
    grid_size: int,
    num_E: int = 21,
    slack: float = 0.0,
    workers: Optional[int] = None,
) -> List[PositivityRow]:
    """Check L_n(E) > (1 - gamma) log lambda_v - slack over an equispaced grid of the energy window."""
    if not 0 < gamma < 1:
        raise ValidationError("gamma must lie in (0, 1)")
    bound = (1 - gamma) * math.log(model.lambda_v)
    lo, hi = model.energy_window
    rows = []
    for estimate in energy_scan(model, lo, hi, num_E, n, grid_size, workers):
        rows.append(PositivityRow(estimate.E, estimate.L_n, bound, estimate.L_n > bound - slack))
    failures = [row.E for row in rows if not row.ok]
    if failures:
        logger.warning(f"positivity bound {bound:.4f} fails at E={failures}")
    return rows


@dataclass
class Thresholds:
    """Closed-form coupling thresholds, LDT constants and radii for one model."""

    gamma: float
    epsilon0: float
    M0: float
    D: float
    energy_window: Tuple[float, float]
    constants: Dict[str, float]

    # sup norms over the real axis, Omega and Omega_1
    a_sup: float
    v_sup: float
    a_Omega: float
    v_Omega: float
    a_Omega1: float
    strip_relative_change: float
    max_abs_v_prime: float

    lambda_0: float
    lambda_p: float
    C_va: float
    c_va: float
    c_bar_va: float
    C_v: float
    tau: float
    sharp_rate_coefficient: float
    D_a: float
    upper_coupling: float

    # Schrodinger family
    lambda_0_s: float
    lambda_p_s: float
    M0_s: float
    c_s: float
    c_bar_s: float
    tau_s: float

    beta: Optional[float] = None
    lambda_omega: Optional[float] = None
    large_coupling_holder: Optional[float] = None
    L0: Optional[float] = None
    check_n: Optional[int] = None
    evaluated: Dict[str, float] = field(default_factory=dict)

    def r_E(self, check_n: int, L0: float) -> float:
        """L0 / (200 n) exp((1 - n) M0 - 2 n |D|), strictly decreasing in n."""
        if check_n < 1:
            raise ValidationError("check_n must be >= 1")
        return L0 / (200.0 * check_n) * math.exp((1 - check_n) * self.M0 - 2 * check_n * abs(self.D))

    def r_E_s(self, check_n: int, L0: float) -> float:
        return L0 / (200.0 * check_n) * math.exp(-5 * self.M0_s * check_n)

    def r_omega_s(self, check_n: int, L0: float) -> float:
        if self.max_abs_v_prime == 0:
            return math.inf
        return L0 / (400.0 * self.max_abs_v_prime * check_n**2) * math.exp(-5 * self.M0_s * check_n)

    def sharp_rate(self, L: float) -> float:
        """Exponent c_bar L / 12000 of the sharp deviation bound."""
        return self.sharp_rate_coefficient * L

    def to_dict(self) -> dict:
        data = asdict(self)
        data["energy_window"] = list(self.energy_window)
        return data


def _pow(base: float, exponent: float) -> float:
    """base**exponent saturating to inf instead of raising OverflowError."""
    with np.errstate(over="ignore"):
        return float(np.power(np.float64(base), exponent))


def thresholds(
    model: JacobiModel,
    gamma: float,
    epsilon0: float,
    C_abs: Optional[float] = None,
    c_abs: Optional[float] = None,
    C_omega: float = 1.0,
    beta: Optional[float] = None,
    L0: Optional[float] = None,
    check_n: Optional[int] = None,
    strip_grid: Optional[Tuple[int, int]] = None,
) -> Thresholds:
    """
    Evaluate every closed-form constant for the model.

    ``C_abs``/``c_abs`` stand for the unnamed absolute constants of the
    Birkhoff estimate and ``C_omega`` for the Omega/Omega_1 harmonic-measure
    constant; all three are assumptions and echoed in the result.
    """
    config = get_config()
    C_abs = config.constant("C_abs") if C_abs is None else C_abs
    c_abs = config.constant("c_abs") if c_abs is None else c_abs
    if not 0 < gamma < 1:
        raise ValidationError(f"gamma={gamma} must lie in (0, 1)")
    if not epsilon0 > 0:
        raise DegenerateModelError(f"epsilon0={epsilon0}: thresholds are undefined")

    rho = model.rho
    a_norm = sup_norm_strip(model.a, 1.0, rho, strip_grid)
    v_norm = sup_norm_strip(model.v, 1.0, rho, strip_grid)
    a1_norm = sup_norm_strip(model.a, 2.0 / 3.0, rho / 2.0, strip_grid)
    change = max(a_norm.relative_change, v_norm.relative_change, a1_norm.relative_change)
    if change > 0.05:
        logger.warning(f"strip sup-norms moved {change:.1%} under grid refinement")
    a_Om, v_Om, a_Om1 = a_norm.value, v_norm.value, a1_norm.value
    if v_Om == 0:
        raise DegenerateModelError("v vanishes on the strip; thresholds are undefined")

    la, lv = model.lambda_a, model.lambda_v
    lambda_0 = max(la * a_Om / v_Om, 2 * la * a_Om / epsilon0)
    lambda_p = max(
        5 * _pow(model.v_sup, 1 / gamma),
        2 * la * model.a_sup,
        _pow(la * a_Om, 2 / gamma) / v_Om,
    ) * _pow(2 / epsilon0, 2 / gamma)

    C_v_raw = math.log(10 * v_Om / epsilon0)
    C_va = max(C_v_raw, math.log(a_Om / a_Om1))
    c_va = 1 / (2 * C_abs * C_omega * C_va)
    c_bar_va = c_abs / (C_omega * C_va)
    C_v = C_omega * C_v_raw

    # D = log la + mean log|a|, so D_a = exp(-mean log|a|) = la exp(-D)
    D_a = la * math.exp(-model.D)
    upper_coupling = _pow(la, -2 / gamma) / D_a

    M0_s = math.log(3 + 2 * lv * model.v_sup)
    c_s = 1 / (2 * C_abs * C_v)
    c_bar_s = c_abs / (8 * M0_s * C_v)
    v_prime = max_abs_derivative_real(model.v)

    result = Thresholds(
        gamma=gamma,
        epsilon0=epsilon0,
        M0=model.M0,
        D=model.D,
        energy_window=model.energy_window,
        constants={"C_abs": C_abs, "c_abs": c_abs, "C_omega": C_omega},
        a_sup=model.a_sup,
        v_sup=model.v_sup,
        a_Omega=a_Om,
        v_Omega=v_Om,
        a_Omega1=a_Om1,
        strip_relative_change=change,
        max_abs_v_prime=v_prime,
        lambda_0=lambda_0,
        lambda_p=lambda_p,
        C_va=C_va,
        c_va=c_va,
        c_bar_va=c_bar_va,
        C_v=C_v,
        tau=c_bar_va / (2 * c_bar_va + TAU_DENOMINATOR),
        sharp_rate_coefficient=c_bar_va / SHARP_LDT_DIVISOR,
        D_a=D_a,
        upper_coupling=upper_coupling,
        lambda_0_s=2 / epsilon0,
        lambda_p_s=_pow(20 * v_Om / epsilon0**2, 1 / gamma),
        M0_s=M0_s,
        c_s=c_s,
        c_bar_s=c_bar_s,
        tau_s=c_bar_s / (2 * c_bar_s + TAU_DENOMINATOR),
        beta=beta,
        L0=L0,
        check_n=check_n,
    )
    if beta is not None:
        result.lambda_omega = _pow(math.e, 15 * beta / (c_va * (1 - gamma)))
        result.large_coupling_holder = max(
            _pow(20 * v_Om / epsilon0**2, 50), _pow(math.e, 16 * beta / c_s), 5 * v_prime
        )
    if L0 is not None and check_n is not None:
        result.evaluated = {
            "r_E": result.r_E(check_n, L0),
            "r_E_s": result.r_E_s(check_n, L0),
            "r_omega_s": result.r_omega_s(check_n, L0),
            "sharp_rate": result.sharp_rate(L0),
        }
    logger.debug(f"thresholds: lambda_0={lambda_0:.4g} lambda_p={lambda_p:.4g} tau={result.tau:.3g}")
    return result


@dataclass
class HolderReport:
    """log-log regression of |L(p1) - L(p2)| against |p1 - p2| for p = E or omega."""

    variable: str
    center: float
    radius: float
    n: int
    grid_size: int
    seed: Optional[int]
    E_pairs: List[Tuple[float, float, float]]
    used_pairs: int
    excluded_pairs: int
    fitted_tau: float
    tau_stderr: float
    residual_se: float
    intercept: float
    tau_formula: float
    c_bar: float
    min_delta: float = 0.0

    def to_dict(self) -> dict:
        data = asdict(self)
        data["E_pairs"] = [list(p) for p in self.E_pairs]
        return data


def _regress(
    pairs: Sequence[Tuple[float, float, float]], min_delta: float = 0.0
) -> Tuple[float, float, float, float, int]:
    cutoff = max(MIN_DELTA_L, min_delta)
    usable = [(abs(p2 - p1), dL) for p1, p2, dL in pairs if p1 != p2 and dL >= cutoff]
    if len(usable) < 3:
        raise InsufficientDataError(
            f"only {len(usable)} pairs with |dL| >= {cutoff:.3g}; the Holder fit needs 3"
        )
    log_dp = np.log([u[0] for u in usable])
    log_dL = np.log([u[1] for u in usable])
    fit = stats.linregress(log_dp, log_dL)
    resid = log_dL - (fit.intercept + fit.slope * log_dp)
    dof = max(len(usable) - 2, 1)
    residual_se = float(np.sqrt(np.sum(resid**2) / dof))
    return float(fit.slope), float(fit.stderr), residual_se, float(fit.intercept), len(usable)


def holder_fit_pairs(
    proxy: Callable[[float], float],
    pairs: Sequence[Tuple[float, float]],
    min_delta: float = 0.0,
) -> Tuple[List[Tuple[float, float, float]], Tuple[float, float, float, float, int]]:
    """
    Evaluate ``proxy`` once per distinct parameter and regress; returns (triples, fit).

    Pairs with |dL| below ``min_delta`` (never below MIN_DELTA_L) are left out
    of the regression.
    """
    cache: Dict[float, float] = {}
    triples = []
    for p1, p2 in pairs:
        for p in (p1, p2):
            if p not in cache:
                cache[p] = proxy(p)
        triples.append((float(p1), float(p2), abs(cache[p1] - cache[p2])))
    return triples, _regress(triples, min_delta)


def _sample_pairs(center: float, radius: float, num_pairs: int, rng: np.random.Generator):
    log_lo, log_hi = math.log(radius * 1e-4), math.log(radius)
    pairs = []
    for _ in range(num_pairs):
        dp = math.exp(rng.uniform(log_lo, log_hi))
        offset = rng.uniform(-0.5, 0.5) * (radius - dp)
        p1 = center + offset - dp / 2
        pairs.append((p1, p1 + dp))
    return pairs


def _holder_report(variable, center, radius, n, grid_size, seed, triples, fit, c_bar, min_delta) -> HolderReport:
    slope, stderr, residual_se, intercept, used = fit
    report = HolderReport(
        variable=variable,
        center=center,
        radius=radius,
        n=n,
        grid_size=grid_size,
        seed=seed,
        E_pairs=triples,
        used_pairs=used,
        excluded_pairs=len(triples) - used,
        fitted_tau=slope,
        tau_stderr=stderr,
        residual_se=residual_se,
        intercept=intercept,
        tau_formula=c_bar / (2 * c_bar + TAU_DENOMINATOR),
        c_bar=c_bar,
        min_delta=min_delta,
    )
    logger.info(f"Holder fit in {variable}: tau ~ {slope:.4f} +- {stderr:.4f} from {used} pairs")
    return report


def holder_fit(
    model: JacobiModel,
    E_center: float,
    radius: float,
    num_pairs: int,
    n: int,
    grid_size: int,
    seed: Optional[int] = None,
    c_bar: Optional[float] = None,
    workers: Optional[int] = None,
    min_delta: Optional[float] = None,
) -> HolderReport:
    """
    Holder exponent of E -> L(E) from 2 L_2n - L_n at log-uniformly spaced pairs.

    Differences below ``min_delta`` (default ``holder_min_delta`` from the
    config) are finite-scale noise of the proxy and are excluded; a model whose
    proxy is flat on the window raises InsufficientDataError.
    """
    if not radius > 0:
        raise ValidationError("radius must be positive")
    seed = get_config().seed if seed is None else seed
    c_bar = get_config().constant("c_abs") if c_bar is None else c_bar
    min_delta = get_config().holder_min_delta if min_delta is None else min_delta
    rng = np.random.default_rng(seed)
    pairs = _sample_pairs(E_center, radius, num_pairs, rng)
    triples, fit = holder_fit_pairs(
        lambda E: extrapolated_le(model, E, n, grid_size, workers), pairs, min_delta=min_delta
    )
    return _holder_report("E", E_center, radius, n, grid_size, seed, triples, fit, c_bar, min_delta)


def frequency_holder_fit(
    model: JacobiModel,
    omega_center: float,
    radius: float,
    num_pairs: int,
    n: int,
    grid_size: int,
    E: float = 0.0,
    seed: Optional[int] = None,
    c_bar: Optional[float] = None,
    workers: Optional[int] = None,
    min_delta: Optional[float] = None,
) -> HolderReport:
    """Holder exponent of omega -> L(E, omega) at fixed E."""
    if not radius > 0:
        raise ValidationError("radius must be positive")
    if not (0 < omega_center - radius and omega_center + radius < 1):
        raise ValidationError("frequency window must stay inside (0, 1)")
    seed = get_config().seed if seed is None else seed
    c_bar = get_config().constant("c_abs") if c_bar is None else c_bar
    min_delta = get_config().holder_min_delta if min_delta is None else min_delta
    rng = np.random.default_rng(seed)
    pairs = _sample_pairs(omega_center, radius, num_pairs, rng)

    def proxy(omega: float) -> float:
        return extrapolated_le(model.with_omega(float(omega)), E, n, grid_size, workers)

    triples, fit = holder_fit_pairs(proxy, pairs, min_delta=min_delta)
    return _holder_report("omega", omega_center, radius, n, grid_size, seed, triples, fit, c_bar, min_delta)
