"""
Cocycle Lab - Cocycle Module
Jacobi/Schrodinger transfer matrices and renormalised n-step products in
three gauges:

    analytic    A(z) = [[lv v(z) - E, -la a~(z)], [la a(z+w), 0]]
    raw         A(z) / (la a(z+w))
    unimodular  A(z) / |det A(z)|^(1/2)

The n-step product takes factors at z + k w for k = 1..n with k = 1 innermost.
Every step is renormalised by its spectral norm, so the product is held as a
unit-norm matrix together with an accumulated log-scale and never overflows.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .analytic import TrigPolynomial, reflect_conjugate, sup_norm_real
from .arithmetic import CFExpansion, FrequencyInput, cf_expand
from .config import get_config
from .errors import SingularStepError, ValidationError
from .reduction import grid_map, pairwise_mean

logger = logging.getLogger(__name__)

GAUGES = ("raw", "analytic", "unimodular")


def _check_gauge(gauge: str) -> str:
    if gauge not in GAUGES:
        raise ValidationError(f"unknown gauge {gauge!r}; expected one of {GAUGES}")
    return gauge


@dataclass(frozen=True, eq=False)
class JacobiModel:
    """(lambda_a, a, lambda_v, v, omega) plus the derived window, M0 and drift D."""

    lambda_a: float
    a: TrigPolynomial
    lambda_v: float
    v: TrigPolynomial
    omega: CFExpansion
    a_tilde: TrigPolynomial = field(init=False, repr=False)
    a_sup: float = field(init=False)
    v_sup: float = field(init=False)
    energy_window: Tuple[float, float] = field(init=False)
    M0: float = field(init=False)
    D: float = field(init=False)
    D_refinement: float = field(init=False, repr=False)
    D_dropped: int = field(init=False, repr=False)

    def __post_init__(self):
        if not self.lambda_a > 0 or not self.lambda_v > 0:
            raise ValidationError("coupling numbers lambda_a and lambda_v must be positive")
        if self.a.is_zero:
            raise ValidationError("a must not vanish identically")
        if not self.v.is_real:
            raise ValidationError("v must be real on the real axis (c_-k = conj(c_k))")

        a_sup = sup_norm_real(self.a)
        v_sup = sup_norm_real(self.v)
        radius = 2 * self.lambda_a * a_sup + self.lambda_v * v_sup
        object.__setattr__(self, "a_tilde", reflect_conjugate(self.a))
        object.__setattr__(self, "a_sup", a_sup)
        object.__setattr__(self, "v_sup", v_sup)
        object.__setattr__(self, "energy_window", (-radius, radius))
        object.__setattr__(
            self, "M0", float(np.log(3 * self.lambda_a * a_sup + 2 * self.lambda_v * v_sup))
        )

        n_points = max(get_config().drift_grid, 4 * self.a.degree + 1)
        D, dropped = self._drift(n_points)
        D_fine, _ = self._drift(2 * n_points)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "D_refinement", abs(D_fine - D))
        object.__setattr__(self, "D_dropped", dropped)
        if dropped:
            logger.warning(f"a vanishes at {dropped} drift-grid points; D estimated without them")

    def _drift(self, n_points: int) -> Tuple[float, int]:
        x = np.arange(n_points) / n_points
        modulus = np.abs(self.lambda_a * self.a(x))
        keep = modulus > get_config().singular_tol
        return pairwise_mean(np.log(modulus[keep])), int(n_points - keep.sum())

    @classmethod
    def schrodinger(
        cls, v: TrigPolynomial, lambda_s: float, omega: Union[CFExpansion, FrequencyInput]
    ) -> "JacobiModel":
        """The special case a = 1, lambda_a = 1, lambda_v = lambda_s."""
        if not isinstance(omega, CFExpansion):
            omega = cf_expand(omega)
        return cls(1.0, TrigPolynomial.constant(1.0, v.rho), lambda_s, v, omega)

    @property
    def is_schrodinger(self) -> bool:
        return self.lambda_a == 1.0 and self.a.degree == 0 and self.a.mean_coefficient() == 1

    @property
    def frequency(self) -> float:
        return self.omega.omega

    @property
    def rho(self) -> float:
        return min(self.a.rho, self.v.rho)

    def with_omega(self, omega: Union[CFExpansion, FrequencyInput]) -> "JacobiModel":
        if not isinstance(omega, CFExpansion):
            omega = cf_expand(omega)
        return replace(self, omega=omega)

    def entries(self, z, E: float):
        """Analytic-gauge entries (m11, m12, m21) at z; m22 = 0."""
        z = np.asarray(z, dtype=np.complex128)
        m11 = self.lambda_v * self.v(z) - E
        m12 = -self.lambda_a * self.a_tilde(z)
        m21 = self.lambda_a * self.a(z + self.frequency)
        return m11, m12, m21


@dataclass
class ScaledProduct:
    """True product = exp(log_scale) * unit_matrix."""

    unit_matrix: np.ndarray
    log_scale: float
    n: int
    sum_d: float
    gauge: str
    x: complex = 0.0
    E: float = 0.0

    @property
    def u(self) -> float:
        """(1/n) log ||M_n|| in this gauge."""
        return self.log_scale / self.n

    @property
    def log_norm(self) -> float:
        return self.log_scale

    def matrix(self) -> np.ndarray:
        """The unscaled product; only meaningful while exp(log_scale) fits in a float."""
        return np.exp(self.log_scale) * self.unit_matrix

    def log_abs_det(self) -> float:
        return float(np.log(abs(np.linalg.det(self.unit_matrix))) + 2 * self.log_scale)

    def compose(self, later: "ScaledProduct") -> "ScaledProduct":
        """later * self, i.e. run ``self`` first."""
        if later.gauge != self.gauge:
            raise ValidationError("cannot compose products in different gauges")
        product = later.unit_matrix @ self.unit_matrix
        norm = spectral_norm(product)
        return ScaledProduct(
            unit_matrix=product / norm,
            log_scale=self.log_scale + later.log_scale + float(np.log(norm)),
            n=self.n + later.n,
            sum_d=self.sum_d + later.sum_d,
            gauge=self.gauge,
            x=self.x,
            E=self.E,
        )


def spectral_norm(m) -> float:
    """Largest singular value of a 2x2 matrix, closed form."""
    m = np.asarray(m, dtype=np.complex128)
    return float(_spectral_norm(m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]))


def _spectral_norm(m11, m12, m21, m22):
    s = np.abs(m11) ** 2 + np.abs(m12) ** 2 + np.abs(m21) ** 2 + np.abs(m22) ** 2
    det = np.abs(m11 * m22 - m12 * m21)
    disc = np.sqrt(np.maximum(s * s - 4 * det * det, 0.0))
    return np.sqrt((s + disc) / 2)


class OrbitBatch(NamedTuple):
    """Per-orbit results of the batched product kernel for one gauge."""

    units: np.ndarray  # (N, 2, 2)
    log_scale: np.ndarray  # (N,)
    sum_d: np.ndarray  # (N,)
    singular_k: np.ndarray  # (N,) first singular step, -1 if none


def orbit_products(
    model: JacobiModel,
    z0,
    E: float,
    n: int,
    gauges: Sequence[str] = ("unimodular",),
) -> Dict[str, OrbitBatch]:
    """
    n-step products for a batch of base points, all requested gauges in one pass.

    Orbit points whose raw or unimodular factor is singular are marked in
    ``singular_k`` and their factor is replaced by the analytic one so the
    rest of the batch proceeds; callers drop them.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    for gauge in gauges:
        _check_gauge(gauge)
    z0 = np.atleast_1d(np.asarray(z0, dtype=np.complex128))
    size = z0.shape[0]
    tol = get_config().singular_tol
    omega = model.frequency

    state = {
        g: {
            "p": [np.ones(size, complex), np.zeros(size, complex), np.zeros(size, complex), np.ones(size, complex)],
            "log": np.zeros(size),
            "singular": np.full(size, -1, dtype=np.int64),
        }
        for g in gauges
    }
    sum_d = np.zeros(size)

    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(1, n + 1):
            z = z0 + k * omega
            m11, m12, m21 = model.entries(z, E)
            det_mod = np.abs(m12) * np.abs(m21)
            d = np.log(det_mod)
            sum_d += d
            for gauge, st in state.items():
                if gauge == "raw":
                    bad = np.abs(m21) < tol
                    scale = np.where(bad, 1.0, 1.0 / np.where(bad, 1.0, m21))
                elif gauge == "unimodular":
                    bad = det_mod < tol
                    scale = np.where(bad, 1.0, np.exp(-0.5 * np.where(bad, 0.0, d)))
                else:
                    bad = None
                    scale = 1.0
                if bad is not None and bad.any():
                    fresh = bad & (st["singular"] < 0)
                    st["singular"][fresh] = k
                p11, p12, p21, p22 = st["p"]
                a11, a12, a21 = m11 * scale, m12 * scale, m21 * scale
                n11 = a11 * p11 + a12 * p21
                n12 = a11 * p12 + a12 * p22
                n21 = a21 * p11
                n22 = a21 * p12
                norm = _spectral_norm(n11, n12, n21, n22)
                zero = norm == 0
                safe = np.where(zero, 1.0, norm)
                st["p"] = [n11 / safe, n12 / safe, n21 / safe, n22 / safe]
                st["log"] += np.where(zero, -np.inf, np.log(safe))

    out = {}
    for gauge, st in state.items():
        p11, p12, p21, p22 = st["p"]
        units = np.stack([np.stack([p11, p12], -1), np.stack([p21, p22], -1)], -2)
        out[gauge] = OrbitBatch(units, st["log"], sum_d.copy(), st["singular"])
    return out


def one_step(model: JacobiModel, z: complex, E: float) -> Tuple[np.ndarray, np.ndarray]:
    """(M, M_a) at z: M_a is the analytic factor, M = M_a / (la a(z+w))."""
    m11, m12, m21 = (complex(v) for v in model.entries(z, E))
    M_a = np.array([[m11, m12], [m21, 0.0]], dtype=np.complex128)
    if abs(m21) < get_config().singular_tol:
        raise SingularStepError("a(z + omega) vanishes; raw factor undefined", k=0, z=complex(z))
    return M_a / m21, M_a


def d_log(model: JacobiModel, z):
    """d(z) = log|la^2 a(z+w) a~(z)|; -inf where a factor vanishes."""
    _, m12, m21 = model.entries(z, 0.0)
    with np.errstate(divide="ignore"):
        d = np.log(np.abs(m12) * np.abs(m21))
    return float(d) if np.ndim(d) == 0 else d


def scaled_product(model: JacobiModel, x: complex, E: float, n: int, gauge: str = "unimodular") -> ScaledProduct:
    """M_n(x) = prod_{k=n}^{1} factor(x + k w) in the requested gauge."""
    _check_gauge(gauge)
    batch = orbit_products(model, [x], E, n, gauges=(gauge,))[gauge]
    k = int(batch.singular_k[0])
    if k >= 0:
        raise SingularStepError(f"singular {gauge} factor on the orbit", k=k, z=complex(x) + k * model.frequency)
    return ScaledProduct(
        unit_matrix=batch.units[0],
        log_scale=float(batch.log_scale[0]),
        n=n,
        sum_d=float(batch.sum_d[0]),
        gauge=gauge,
        x=x,
        E=E,
    )


def orbit_zero_scan(model: JacobiModel, x: float, n: int, tol: float) -> List[int]:
    """
    k in [0, n+1] with |a(x + k w)| < tol.

    The range is wider than the factor indices k = 1..n on purpose. Factor k
    reads a~(x + k w) and a(x + (k+1) w), so the product reaches k = n+1, and
    k = 0 reports a zero at the base point itself.
    """
    k = np.arange(0, n + 2)
    values = np.abs(model.a(x + k * model.frequency))
    return [int(i) for i in k[values < tol]]


def lower_bound_row_growth(model: JacobiModel, y0: float, E: float, n: int, x: float = 0.0) -> float:
    """
    (1/n) log|g_n| where (g_n, h_n) = M^a_n(x + i y0) (1, 0)^T.

    A lower bound for u^a_n(x + i y0); at large coupling it grows at least
    like log(lv eps0 / 2).
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    z = complex(x, y0)
    vec = np.array([1.0 + 0j, 0.0 + 0j])
    log_acc = 0.0
    for k in range(1, n + 1):
        m11, m12, m21 = (complex(c) for c in model.entries(z + k * model.frequency, E))
        vec = np.array([m11 * vec[0] + m12 * vec[1], m21 * vec[0]])
        size = float(np.max(np.abs(vec)))
        if size == 0:
            return float("-inf")
        vec /= size
        log_acc += np.log(size)
    return float((log_acc + np.log(abs(vec[0]))) / n)


class GridLogNorms(NamedTuple):
    """log ||M_n(x_j)|| on the grid x_j = j/N, per gauge, with the d-sums."""

    x: np.ndarray
    log_norms: Dict[str, np.ndarray]
    sum_d: np.ndarray
    dropped: np.ndarray  # boolean mask of orbits that hit a singular step


def grid_log_norms(
    model: JacobiModel,
    E: float,
    n: int,
    grid_size: int,
    gauges: Sequence[str] = ("unimodular",),
    workers: Optional[int] = None,
) -> GridLogNorms:
    """Batched products over the equispaced grid, chunked and parallel."""
    xs = np.arange(grid_size) / grid_size
    gauges = tuple(gauges)

    def kernel(chunk: np.ndarray) -> np.ndarray:
        batches = orbit_products(model, chunk, E, n, gauges)
        cols = [batches[g].log_scale for g in gauges]
        cols.append(batches[gauges[0]].sum_d)
        singular = np.zeros(len(chunk), dtype=bool)
        for g in gauges:
            singular |= batches[g].singular_k >= 0
        cols.append(singular.astype(np.float64))
        return np.stack(cols, axis=1)

    table = grid_map(kernel, xs, workers)
    log_norms = {g: table[:, i] for i, g in enumerate(gauges)}
    dropped = table[:, len(gauges) + 1] > 0
    if dropped.any():
        logger.warning(f"E={E}, n={n}: {int(dropped.sum())} of {grid_size} orbits dropped (singular steps)")
    return GridLogNorms(xs, log_norms, table[:, len(gauges)], dropped)
