"""
Cocycle Lab - Analytic Module
1-periodic analytic functions as finite Fourier series on the strip
|Im z| < rho, the conjugate reflection a -> a~, the logarithmic potential
mean I(zeta) and the grid estimate of eps0.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np
from scipy import integrate

from .config import get_config
from .errors import ValidationError
from .reduction import pairwise_mean

logger = logging.getLogger(__name__)

TWO_PI_I = 2j * np.pi


@dataclass(frozen=True, eq=False)
class TrigPolynomial:
    """f(z) = sum_k c_k exp(2 pi i k z), declared analytic on |Im z| < rho."""

    coefficients: Mapping[int, complex]
    rho: float
    _freqs: np.ndarray = field(init=False, repr=False)
    _coeffs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.rho > 0:
            raise ValidationError(f"strip half-width rho must be positive, got {self.rho}")
        cleaned = {int(k): complex(c) for k, c in self.coefficients.items() if complex(c) != 0}
        object.__setattr__(self, "coefficients", dict(sorted(cleaned.items())))
        object.__setattr__(self, "_freqs", np.array(list(self.coefficients), dtype=np.float64))
        object.__setattr__(
            self, "_coeffs", np.array(list(self.coefficients.values()), dtype=np.complex128)
        )

    @classmethod
    def constant(cls, value: complex, rho: float) -> "TrigPolynomial":
        return cls({0: value}, rho)

    @classmethod
    def cosine(cls, amplitude: float = 2.0, rho: float = 0.5) -> "TrigPolynomial":
        """amplitude * cos(2 pi x): the almost Mathieu potential for amplitude 2."""
        return cls({1: amplitude / 2, -1: amplitude / 2}, rho)

    @classmethod
    def from_triples(cls, triples: Iterable[Tuple[int, float, float]], rho: float) -> "TrigPolynomial":
        coeffs: Dict[int, complex] = {}
        for k, re, im in triples:
            coeffs[int(k)] = coeffs.get(int(k), 0j) + complex(re, im)
        return cls(coeffs, rho)

    def to_triples(self) -> list:
        return [[k, c.real, c.imag] for k, c in self.coefficients.items()]

    @property
    def degree(self) -> int:
        return int(max((abs(k) for k in self.coefficients), default=0))

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    @property
    def is_real(self) -> bool:
        """True iff c_{-k} = conj(c_k) for every k (real-valued on the real axis)."""
        scale = max((abs(c) for c in self.coefficients.values()), default=0.0)
        tol = 1e-12 * max(scale, 1.0)
        return all(
            abs(self.coefficients.get(-k, 0j) - c.conjugate()) <= tol
            for k, c in self.coefficients.items()
        )

    def mean_coefficient(self) -> complex:
        return self.coefficients.get(0, 0j)

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        if self.is_zero:
            return np.zeros_like(z) if z.ndim else 0j
        if self.degree == 0:
            c0 = self.coefficients[0]
            return np.full(z.shape, c0, dtype=np.complex128) if z.ndim else c0
        phases = np.exp(TWO_PI_I * np.multiply.outer(z, self._freqs))
        values = phases @ self._coeffs
        return values if z.ndim else complex(values)

    def in_strip(self, z) -> bool:
        return bool(np.all(np.abs(np.imag(np.asarray(z))) <= self.rho))


def evaluate(f: TrigPolynomial, z):
    """f(z), logging when z leaves the declared strip (evaluation still happens)."""
    if not f.in_strip(z):
        logger.debug(f"evaluating outside |Im z| <= {f.rho}")
    return f(z)


def reflect_conjugate(f: TrigPolynomial) -> TrigPolynomial:
    """
    The analytic continuation of x -> conj(f(x)).

    Coefficient at frequency k becomes conj(c_{-k}). On the real axis this is
    conj(f(x)); off it, conj(f(conj z)).
    """
    return TrigPolynomial({-k: c.conjugate() for k, c in f.coefficients.items()}, f.rho)


def derivative(f: TrigPolynomial) -> TrigPolynomial:
    return TrigPolynomial({k: TWO_PI_I * k * c for k, c in f.coefficients.items()}, f.rho)


def max_abs_derivative_real(f: TrigPolynomial, n_points: Optional[int] = None) -> float:
    """max over T of |f'(x)|."""
    return sup_norm_real(derivative(f), n_points)


def grid_mean(f: TrigPolynomial, n_points: int) -> complex:
    """Equispaced mean over T; equals c_0 exactly when n_points > 2K."""
    x = np.arange(n_points) / n_points
    values = f(x)
    return complex(pairwise_mean(values.real), pairwise_mean(values.imag))


def sup_norm_real(f: TrigPolynomial, n_points: Optional[int] = None) -> float:
    """max over an equispaced grid of T of |f(x)|."""
    n_points = n_points or max(get_config().sup_grid, 64 * f.degree + 1)
    x = np.arange(n_points) / n_points
    return float(np.max(np.abs(f(x)))) if not f.is_zero else 0.0


@dataclass
class StripNorm:
    """Grid sup of |f| over {|Re z| <= width, |Im z| <= height} with its refinement."""

    value: float
    refined: float
    grid: Tuple[int, int]

    @property
    def relative_change(self) -> float:
        return abs(self.refined - self.value) / max(abs(self.refined), 1e-300)


def _strip_max(f: TrigPolynomial, width: float, height: float, nx: int, ny: int) -> float:
    x = np.linspace(-width, width, nx)
    y = np.linspace(-height, height, ny)
    z = x[None, :] + 1j * y[:, None]
    return float(np.max(np.abs(f(z))))


def sup_norm_strip(
    f: TrigPolynomial,
    width: float,
    height: float,
    grid: Optional[Tuple[int, int]] = None,
) -> StripNorm:
    """||f|| over a closed rectangle of the strip, estimated on a grid and on its doubling."""
    nx, ny = grid or get_config().strip_grid
    if f.is_zero:
        return StripNorm(0.0, 0.0, (nx, ny))
    value = _strip_max(f, width, height, nx, ny)
    refined = _strip_max(f, width, height, 2 * nx - 1, 2 * ny - 1)
    norm = StripNorm(value=value, refined=refined, grid=(nx, ny))
    logger.debug(f"strip sup {value:.6g} (refined {refined:.6g})")
    return norm


@dataclass(frozen=True)
class LogPotentialKernel:
    """zeta together with I(zeta) = int_0^1 log|y - zeta| dy."""

    zeta: complex
    I_value: float


def _w_log_w(w):
    """Re(w log w) with the continuous value 0 at w = 0."""
    w = np.asarray(w, dtype=np.complex128)
    out = np.zeros(w.shape)
    nz = w != 0
    out[nz] = np.real(w[nz] * np.log(w[nz]))
    return out


def log_potential_I(zeta):
    """
    Closed form of I(zeta) = Re[(y - zeta) log(y - zeta) - y] from 0 to 1.

    Only real parts enter, so the branch of log never matters: on the
    segment the imaginary part of y - zeta is constant.
    """
    zeta = np.asarray(zeta, dtype=np.complex128)
    value = _w_log_w(1.0 - zeta) - _w_log_w(-zeta) - 1.0
    return float(value) if value.ndim == 0 else value


def log_potential_kernel(zeta: complex) -> LogPotentialKernel:
    return LogPotentialKernel(zeta=complex(zeta), I_value=log_potential_I(zeta))


def log_potential_I_quad(zeta: complex) -> float:
    """Adaptive quadrature of I(zeta); the independent oracle for the closed form."""
    zeta = complex(zeta)
    xi, eta = zeta.real, zeta.imag

    def integrand(y: float) -> float:
        return float(np.log(abs(y - zeta)))

    breaks = [0.0, 1.0]
    if 0.0 < xi < 1.0:
        breaks.insert(1, xi)
    total = 0.0
    for lo, hi in zip(breaks, breaks[1:]):
        value, _ = integrate.quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-13, limit=200)
        total += value
    logger.debug(f"quadrature I({xi}+{eta}i) = {total}")
    return total


@dataclass
class Epsilon0Estimate:
    """Grid value of inf_E sup_{delta/2<y<delta} inf_x |v(x+iy) - E| (not a certified bound)."""

    value: float
    refined: float
    argmin_E: float
    delta: float
    grid: Tuple[int, int, int]
    degenerate: bool

    @property
    def relative_change(self) -> float:
        return abs(self.refined - self.value) / max(abs(self.value), 1e-300)

    def to_dict(self) -> dict:
        return {
            "epsilon0": self.value,
            "refined": self.refined,
            "relative_change": self.relative_change,
            "argmin_E": self.argmin_E,
            "delta": self.delta,
            "grid": list(self.grid),
            "degenerate": self.degenerate,
            "certified": False,
        }


def _inf_sup_inf(v: TrigPolynomial, delta: float, energies: np.ndarray, nx: int, ny: int):
    x = np.arange(nx) / nx
    # interior points of (delta/2, delta)
    y = delta / 2 + (np.arange(ny) + 0.5) * (delta / 2) / ny
    values = v(x[None, :] + 1j * y[:, None])  # (ny, nx)
    best = np.empty(len(energies))
    for i, E in enumerate(energies):
        best[i] = np.max(np.min(np.abs(values - E), axis=1))
    i_min = int(np.argmin(best))
    return float(best[i_min]), float(energies[i_min])


def epsilon0_estimate(
    v: TrigPolynomial,
    delta: float,
    E1_grid,
    x_grid_size: int,
    y_grid_size: int,
) -> Epsilon0Estimate:
    """Grid inf-sup-inf with a doubled-grid diagnostic."""
    if not 0 < delta < v.rho:
        raise ValidationError(f"delta={delta} must lie in (0, rho={v.rho})")
    energies = np.asarray(E1_grid, dtype=np.float64).ravel()
    if energies.size == 0 or x_grid_size < 1 or y_grid_size < 1:
        raise ValidationError("epsilon0 grids must be non-empty")
    value, argmin_E = _inf_sup_inf(v, delta, energies, x_grid_size, y_grid_size)
    refined, _ = _inf_sup_inf(v, delta, energies, 2 * x_grid_size, 2 * y_grid_size)
    scale = max(sup_norm_real(v), 1.0)
    degenerate = value <= 1e-10 * scale
    if degenerate:
        logger.warning(f"epsilon0 grid estimate is ~0 (at E={argmin_E}); potential degenerates")
    return Epsilon0Estimate(
        value=value,
        refined=refined,
        argmin_E=argmin_E,
        delta=delta,
        grid=(x_grid_size, y_grid_size, int(energies.size)),
        degenerate=degenerate,
    )
