"""
Cocycle Lab - Avalanche Module
Executable Avalanche Principle: hypothesis flags and the conclusion residual

    | log||A_n...A_1|| + sum_{j=2}^{n-1} log||A_j|| - sum_{j=1}^{n-1} log||A_{j+1} A_j|| |

for a chain of 2x2 blocks, plus block extraction from a cocycle orbit.
Blocks are carried as (unit matrix, log scale), so the residual is
evaluated after the block scales have cancelled.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .cocycle import JacobiModel, ScaledProduct, _check_gauge, orbit_products, spectral_norm
from .config import get_config
from .errors import DegenerateModelError, SingularStepError, ValidationError

logger = logging.getLogger(__name__)

DET_TOLERANCE = 1e-12
ROUNDING_FLOOR_PER_BLOCK = 1e-12


@dataclass(frozen=True)
class APBlock:
    """A_j = exp(log_scale) * unit, with log|det A_j| when it is known exactly."""

    unit: np.ndarray
    log_scale: float
    log_abs_det: Optional[float] = None

    @classmethod
    def from_matrix(cls, matrix) -> "APBlock":
        m = np.asarray(matrix, dtype=np.complex128)
        norm = spectral_norm(m)
        if norm == 0:
            raise ValidationError("zero block")
        with np.errstate(divide="ignore"):
            log_det = float(np.log(abs(np.linalg.det(m))))
        return cls(unit=m / norm, log_scale=float(np.log(norm)), log_abs_det=log_det)

    @classmethod
    def from_product(cls, product: ScaledProduct) -> "APBlock":
        known = {"unimodular": 0.0, "analytic": product.sum_d}.get(product.gauge)
        return cls(unit=product.unit_matrix, log_scale=product.log_scale, log_abs_det=known)

    @property
    def det_abs(self) -> float:
        if self.log_abs_det is not None:
            return math.exp(self.log_abs_det) if self.log_abs_det < 700 else math.inf
        with np.errstate(over="ignore"):
            return float(abs(np.linalg.det(self.unit)) * np.exp(2 * self.log_scale))


BlockInput = Union[np.ndarray, Tuple[np.ndarray, float], ScaledProduct, APBlock]


def _as_block(item: BlockInput) -> APBlock:
    if isinstance(item, APBlock):
        return item
    if isinstance(item, ScaledProduct):
        return APBlock.from_product(item)
    if isinstance(item, tuple) and len(item) == 2:
        unit, log_scale = item
        unit = np.asarray(unit, dtype=np.complex128)
        norm = spectral_norm(unit)
        return APBlock(unit=unit / norm, log_scale=float(log_scale) + float(np.log(norm)))
    return APBlock.from_matrix(item)


@dataclass
class APReport:
    n_blocks: int
    gamma_bound: float
    log_gamma: float
    det_ok: bool
    gap_ok: bool
    size_ok: bool
    max_gap_term: float
    lhs_residual: float
    bound_value: float
    rounding_floor: float
    C_test: float
    empirical_constant: float

    @property
    def hypotheses_ok(self) -> bool:
        return self.det_ok and self.gap_ok and self.size_ok

    @property
    def conclusion_ok(self) -> bool:
        """residual <= C_test n / gamma, up to floating-point rounding of the logs."""
        return self.lhs_residual <= self.bound_value + self.rounding_floor

    def to_dict(self) -> dict:
        return {
            "n_blocks": self.n_blocks,
            "gamma_bound": self.gamma_bound,
            "log_gamma": self.log_gamma,
            "det_ok": self.det_ok,
            "gap_ok": self.gap_ok,
            "size_ok": self.size_ok,
            "max_gap_term": self.max_gap_term,
            "lhs_residual": self.lhs_residual,
            "bound_value": self.bound_value,
            "rounding_floor": self.rounding_floor,
            "C_test": self.C_test,
            "empirical_constant": self.empirical_constant,
            "hypotheses_ok": self.hypotheses_ok,
            "conclusion_ok": self.conclusion_ok,
        }


def _pair_log_norms(blocks: Sequence[APBlock]) -> np.ndarray:
    """log||U_{j+1} U_j|| for j = 1..n-1."""
    return np.array(
        [math.log(spectral_norm(b.unit @ a.unit)) for a, b in zip(blocks, blocks[1:])]
    )


def ap_check(matrices: Iterable[BlockInput], C_test: Optional[float] = None) -> APReport:
    """Evaluate the hypotheses and the conclusion residual; violations are flags."""
    C_test = get_config().constant("C_test") if C_test is None else C_test
    blocks = [_as_block(m) for m in matrices]
    n = len(blocks)
    if n < 3:
        raise ValidationError("the Avalanche Principle needs at least 3 blocks")

    log_norms = np.array([b.log_scale for b in blocks])
    log_gamma = float(log_norms.min())
    pair_terms = _pair_log_norms(blocks)

    # running product of the units; its renormalisers carry all non-cancelling mass
    running = blocks[0].unit
    renorm = []
    for block in blocks[1:]:
        running = block.unit @ running
        norm = spectral_norm(running)
        running = running / norm
        renorm.append(math.log(norm))
    residual = abs(math.fsum(renorm) - math.fsum(pair_terms))

    max_gap = float(np.max(-pair_terms))
    with np.errstate(over="ignore"):
        gamma = float(np.exp(log_gamma))
        bound = float(C_test * n * np.exp(-log_gamma))
        empirical = float(np.exp(math.log(residual) + log_gamma - math.log(n))) if residual > 0 else 0.0

    report = APReport(
        n_blocks=n,
        gamma_bound=gamma,
        log_gamma=log_gamma,
        det_ok=max(b.det_abs for b in blocks) <= 1 + DET_TOLERANCE,
        gap_ok=max_gap < 0.5 * log_gamma,
        size_ok=log_gamma > math.log(n),
        max_gap_term=max_gap,
        lhs_residual=residual,
        bound_value=bound,
        rounding_floor=ROUNDING_FLOOR_PER_BLOCK * n,
        C_test=C_test,
        empirical_constant=empirical,
    )
    logger.debug(f"AP: n={n} log(gamma)={log_gamma:.4g} residual={residual:.3g} residual*gamma/n={empirical:.3g}")
    return report


def ap_blocks(
    model: JacobiModel,
    x: float,
    E: float,
    block_len: int,
    num_blocks: int,
    gauge: str = "unimodular",
) -> List[ScaledProduct]:
    """A_j = M_n(x + (j-1) n omega, E) for j = 1..m, all from one batched pass."""
    _check_gauge(gauge)
    if num_blocks < 3:
        raise ValidationError("need at least 3 blocks")
    if block_len < 1:
        raise ValidationError("block length must be >= 1")
    starts = x + np.arange(num_blocks) * block_len * model.frequency
    batch = orbit_products(model, starts, E, block_len, gauges=(gauge,))[gauge]
    bad = np.flatnonzero(batch.singular_k >= 0)
    if bad.size:
        j = int(bad[0])
        k = j * block_len + int(batch.singular_k[j])
        raise SingularStepError(f"block {j + 1} has a singular {gauge} step", k=k, z=complex(x + k * model.frequency))
    return [
        ScaledProduct(
            unit_matrix=batch.units[j],
            log_scale=float(batch.log_scale[j]),
            n=block_len,
            sum_d=float(batch.sum_d[j]),
            gauge=gauge,
            x=float(starts[j]),
            E=E,
        )
        for j in range(num_blocks)
    ]


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def random_ap_suite(
    rng: np.random.Generator,
    n: int,
    gamma_range: Optional[Tuple[float, float]] = None,
    max_tries: int = 1000,
) -> List[APBlock]:
    """
    Blocks R_j diag(g_j, 1/g_j) S_j with log-uniform g_j and random rotations.

    S_{j+1} is resampled until the pair hypothesis holds for (A_j, A_{j+1})
    against gamma = min g_j; every returned suite satisfies all three
    hypotheses.
    """
    if n < 3:
        raise ValidationError("suites need at least 3 blocks")
    lo, hi = gamma_range or (n + 1.0, 1e6)
    if not n < lo <= hi:
        raise ValidationError("gamma_range must lie above n")
    gammas = np.exp(rng.uniform(math.log(lo), math.log(hi), size=n))
    half_log_gamma = 0.5 * math.log(gammas.min())

    blocks: List[APBlock] = []
    for j, g in enumerate(gammas):
        R = _rotation(rng.uniform(0, 2 * math.pi))
        D = np.diag([g, 1.0 / g]).astype(np.complex128)
        for _ in range(max_tries):
            S = _rotation(rng.uniform(0, 2 * math.pi))
            A = R @ D @ S
            norm = spectral_norm(A)
            candidate = APBlock(unit=A / norm, log_scale=math.log(norm), log_abs_det=0.0)
            if not blocks:
                break
            gap = -math.log(spectral_norm(candidate.unit @ blocks[-1].unit))
            if gap < half_log_gamma:
                break
        else:
            raise DegenerateModelError(f"no admissible alignment for block {j + 1} in {max_tries} draws")
        blocks.append(candidate)
    return blocks
