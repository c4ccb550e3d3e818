"""
Cocycle Lab - Arithmetic Module
Continued-fraction machinery for the frequency: convergents, the Liouville
exponent beta_hat, Diophantine scans, torus distances and nearest orbit points.

Exact inputs (Fractions and quadratic irrationals) are expanded in integer
arithmetic. Float inputs are expanded through their exact dyadic value and
truncated once a convergent reproduces the float to within ``cf_ulps`` ulps.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import get_config
from .errors import TerminatingExpansionError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadraticIrrational:
    """
    omega = (P + sqrt(d)) / Q with d > 0 not a perfect square.

    Stored normalised so that Q divides d - P^2, which keeps the complete
    quotient recursion in integers.
    """

    P: int
    d: int
    Q: int
    name: str = ""

    def __post_init__(self):
        if self.Q == 0:
            raise ValidationError("quadratic irrational with Q = 0")
        if self.d <= 0 or math.isqrt(self.d) ** 2 == self.d:
            raise ValidationError(f"d={self.d} must be a positive non-square")
        if (self.d - self.P * self.P) % self.Q:
            # (P|Q| + sqrt(d Q^2)) / (Q|Q|) is the same number and satisfies the divisibility
            P, d, Q = self.P * abs(self.Q), self.d * self.Q * self.Q, self.Q * abs(self.Q)
            object.__setattr__(self, "P", P)
            object.__setattr__(self, "d", d)
            object.__setattr__(self, "Q", Q)

    @property
    def value(self) -> float:
        return (self.P + math.sqrt(self.d)) / self.Q

    def compare(self, r: Fraction) -> int:
        """Sign of omega - r, decided exactly."""
        t = self.Q * Fraction(r) - self.P
        if self.Q > 0:
            # omega > r  <=>  sqrt(d) > t
            return 1 if (t < 0 or t * t < self.d) else -1
        return 1 if (t > 0 and t * t > self.d) else -1

    def partial_quotients(self, count: int) -> List[int]:
        """a_0, a_1, ..., a_{count-1} of the (infinite) expansion."""
        s = math.isqrt(self.d)
        P, Q = self.P, self.Q
        quotients = []
        for _ in range(count):
            a = (P + s) // Q if Q > 0 else (P + s + 1) // Q
            quotients.append(a)
            P = a * Q - P
            Q = (self.d - P * P) // Q
        return quotients


GOLDEN = QuadraticIrrational(P=-1, d=5, Q=2, name="golden")
SQRT2_MINUS_1 = QuadraticIrrational(P=-1, d=2, Q=1, name="sqrt2m1")
BUILTIN_FREQUENCIES = {"golden": GOLDEN, "sqrt2m1": SQRT2_MINUS_1}

FrequencyInput = Union[float, Fraction, QuadraticIrrational]


@dataclass(frozen=True)
class CFExpansion:
    """A frequency with its convergents p_s/q_s, s = 1..S, and gap exponents."""

    omega: float
    label: str
    partial_quotients: Tuple[int, ...]
    convergents: Tuple[Tuple[int, int], ...]
    gap_exponents: Tuple[float, ...]
    beta_hat: Optional[float]
    terminating: bool = False
    resolution_limited: bool = False
    exact: Optional[Fraction] = None
    quadratic: Optional[QuadraticIrrational] = None

    @property
    def depth(self) -> int:
        return len(self.partial_quotients)

    @property
    def denominators(self) -> List[int]:
        return [q for _, q in self.convergents]

    def q(self, s: int) -> int:
        """q_s with the 1-based indexing of the expansion."""
        if not 1 <= s <= len(self.convergents):
            raise ValidationError(f"q_{s} not available (depth {self.depth})")
        return self.convergents[s - 1][1]

    def compare(self, r: Fraction) -> int:
        """Sign of omega - r; exact when the frequency is exact."""
        if self.quadratic is not None:
            return self.quadratic.compare(r)
        value = self.exact if self.exact is not None else Fraction(self.omega)
        return (value > r) - (value < r)

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "label": self.label,
            "quotients": list(self.partial_quotients),
            "convergents": [list(c) for c in self.convergents],
            "gap_exponents": list(self.gap_exponents),
            "beta_hat": self.beta_hat,
            "terminating": self.terminating,
            "resolution_limited": self.resolution_limited,
        }


@dataclass
class DiophantineCheck:
    """Scan of ||n omega|| >= c_omega / (n (log n)^alpha) for n = 2..n_max."""

    c_omega: float
    alpha: float
    n_max: int
    violations: List[int] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "c_omega": self.c_omega,
            "alpha": self.alpha,
            "n_max": self.n_max,
            "violations": list(self.violations),
            "holds": self.holds,
        }


def _convergents(quotients: Sequence[int]) -> List[Tuple[int, int]]:
    """p_s/q_s for s = 1..len(quotients), with a_0 = 0."""
    p_prev, q_prev = 1, 0  # p_{-1}, q_{-1}
    p, q = 0, 1  # p_0, q_0
    out = []
    for a in quotients:
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        out.append((p, q))
    return out


def _gap_exponents(convergents: Sequence[Tuple[int, int]]) -> List[float]:
    return [
        math.log(convergents[s + 1][1]) / convergents[s][1] for s in range(len(convergents) - 1)
    ]


def _build(
    omega: float,
    label: str,
    quotients: List[int],
    terminating: bool,
    resolution_limited: bool = False,
    exact: Optional[Fraction] = None,
    quadratic: Optional[QuadraticIrrational] = None,
) -> CFExpansion:
    convergents = _convergents(quotients)
    gaps = _gap_exponents(convergents)
    return CFExpansion(
        omega=omega,
        label=label,
        partial_quotients=tuple(quotients),
        convergents=tuple(convergents),
        gap_exponents=tuple(gaps),
        beta_hat=max(gaps) if gaps else None,
        terminating=terminating,
        resolution_limited=resolution_limited,
        exact=exact,
        quadratic=quadratic,
    )


def _rational_quotients(r: Fraction, depth: int) -> Tuple[List[int], bool]:
    """a_1.. of r in (0,1); second value tells whether the expansion ended."""
    quotients = []
    num, den = r.numerator, r.denominator
    # r = num/den; complete quotient after a_0 = 0 is den/num
    num, den = den, num
    while den and len(quotients) < depth:
        a, rem = divmod(num, den)
        quotients.append(a)
        num, den = den, rem
    return quotients, den == 0


def cf_expand(omega: FrequencyInput, depth: Optional[int] = None, label: str = "") -> CFExpansion:
    """
    Continued-fraction expansion of omega in (0, 1) to ``depth`` quotients.

    Fractions terminate exactly. Floats stop at float resolution. Quadratic
    irrationals are expanded symbolically.
    """
    depth = depth or get_config().default_depth
    if depth < 1:
        raise ValidationError("depth must be >= 1")

    if isinstance(omega, QuadraticIrrational):
        value = omega.value
        if not 0 < value < 1:
            raise ValidationError(f"omega={value} outside (0, 1)")
        quotients = omega.partial_quotients(depth + 1)[1:]
        return _build(value, label or omega.name, quotients, False, quadratic=omega)

    if isinstance(omega, Fraction):
        if not 0 < omega < 1:
            raise ValidationError(f"omega={omega} outside (0, 1)")
        quotients, ended = _rational_quotients(omega, depth)
        return _build(float(omega), label or str(omega), quotients, ended, exact=omega)

    value = float(omega)
    if not 0 < value < 1:
        raise ValidationError(f"omega={value} outside (0, 1)")
    exact = Fraction(value)
    tolerance = get_config().cf_ulps * math.ulp(value)
    all_quotients, ended = _rational_quotients(exact, depth)
    quotients = []
    limited = False
    for a in all_quotients:
        quotients.append(a)
        p, q = _convergents(quotients)[-1]
        if abs(Fraction(p, q) - exact) <= tolerance:
            limited = Fraction(p, q) != exact
            ended = not limited
            break
    if limited:
        logger.debug(f"float expansion of {value!r} stopped at float resolution, depth {len(quotients)}")
    return _build(value, label or repr(value), quotients, ended, resolution_limited=limited)


def liouville_surrogate(prefix: Sequence[int], label: str = "") -> QuadraticIrrational:
    """
    The exact quadratic irrational [0; prefix..., 1, 1, 1, ...].

    A large entry in ``prefix`` gives a finite-Liouville stand-in whose
    huge gap is known exactly.
    """
    if not prefix or any(a < 1 for a in prefix):
        raise ValidationError("prefix must be a non-empty list of positive integers")
    (p_k, q_k), (p_km1, q_km1) = _convergents(prefix)[-1], ([(0, 1)] + _convergents(prefix))[-2]
    # tail t = (1 + sqrt5)/2, omega = (p_k t + p_{k-1}) / (q_k t + q_{k-1})
    alpha = p_k + 2 * p_km1
    beta = q_k + 2 * q_km1
    X = alpha * beta - 5 * p_k * q_k
    Y = 2 * (p_k * q_km1 - p_km1 * q_k)  # +-2
    Z = beta * beta - 5 * q_k * q_k
    sign = 1 if Y > 0 else -1
    # (X + Y sqrt5)/Z = (sign X + sqrt(20)) / (sign Z)
    name = label or "cf:" + ",".join(str(a) for a in prefix)
    return QuadraticIrrational(P=sign * X, d=20, Q=sign * Z, name=name)


def resolve_omega(text: str) -> FrequencyInput:
    """Parse ``golden``, ``sqrt2m1``, ``p/q``, ``cf:a1,a2,...`` or a decimal."""
    text = str(text).strip()
    if text in BUILTIN_FREQUENCIES:
        return BUILTIN_FREQUENCIES[text]
    if text.startswith("cf:"):
        try:
            prefix = [int(a) for a in text[3:].split(",") if a.strip()]
        except ValueError as e:
            raise ValidationError(f"bad quotient list in omega={text!r}") from e
        return liouville_surrogate(prefix, label=text)
    if re.fullmatch(r"\s*\d+\s*/\s*\d+\s*", text):
        num, den = (int(t) for t in text.split("/"))
        if den == 0:
            raise ValidationError(f"zero denominator in omega={text!r}")
        return Fraction(num, den)
    try:
        return float(text)
    except ValueError as e:
        raise ValidationError(f"cannot resolve omega={text!r}") from e


def beta_hat(cf: CFExpansion) -> float:
    """max_s log(q_{s+1})/q_s over the recorded truncation."""
    if cf.terminating:
        raise TerminatingExpansionError(f"omega={cf.label} is rational; beta is undefined")
    if len(cf.convergents) < 2:
        raise ValidationError("beta_hat needs at least two convergents")
    return max(cf.gap_exponents)


def tail_beta(cf: CFExpansion, window: int = 3) -> float:
    """Largest of the last ``window`` gap exponents: the limsup proxy."""
    beta_hat(cf)  # same preconditions
    return max(cf.gap_exponents[-window:])


@dataclass(frozen=True)
class BetaEstimate:
    """beta_hat over the truncation together with the tail proxy for the limsup."""

    beta_hat: float
    tail: float
    depth: int
    window: int

    def to_dict(self) -> dict:
        return {"beta_hat": self.beta_hat, "tail": self.tail, "depth": self.depth, "window": self.window}


def beta_estimate(cf: CFExpansion, window: int = 3) -> BetaEstimate:
    return BetaEstimate(beta_hat(cf), tail_beta(cf, window), cf.depth, window)


def torus_distance(x, y):
    """||x - y|| = min_n |x - y + n|; works on scalars and arrays."""
    d = np.abs(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)) % 1.0
    d = np.minimum(d, 1.0 - d)
    return float(d) if d.ndim == 0 else d


def orbit_points(x, step: Union[float, Fraction], count: int, start: int = 0) -> np.ndarray:
    """{x + k step} for k = start..start+count-1, reduced exactly for rational steps."""
    k = np.arange(start, start + count, dtype=np.int64)
    if isinstance(step, Fraction):
        residues = (k * step.numerator) % step.denominator
        return np.asarray((x + residues / step.denominator) % 1.0, dtype=np.float64)
    return np.asarray((x + k * float(step)) % 1.0, dtype=np.float64)


def nearest_orbit_index(
    x: float, xi: float, count: int, step: Union[float, Fraction]
) -> Tuple[int, float]:
    """Index k0 in [0, count) minimising ||x + k step - xi||; ties go to the smallest k."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    dists = torus_distance(orbit_points(x, step, count), xi)
    dists = np.atleast_1d(dists)
    k0 = int(np.argmin(dists))
    return k0, float(dists[k0])


def orbit_set_distance(x, step: Union[float, Fraction], count: int):
    """
    min_{0 <= m < count} ||x + m step||, vectorised over x.

    With step = omega and count = l q_s this is the distance from x to the
    finite set {-m omega : 0 <= m < l q_s}.
    """
    x = np.asarray(x, dtype=np.float64)
    best = np.full(x.shape, np.inf)
    for point in orbit_points(0.0, step, count):
        best = np.minimum(best, torus_distance(x, -point))
    return float(best) if best.ndim == 0 else best


def diophantine_check(cf: CFExpansion, c_omega: float, alpha: float, n_max: int) -> DiophantineCheck:
    """Exhaustive scan of the strong Diophantine condition for n = 2..n_max."""
    if c_omega <= 0 or alpha <= 0:
        raise ValidationError("c_omega and alpha must be positive")
    check = DiophantineCheck(c_omega=c_omega, alpha=alpha, n_max=n_max)
    if n_max < 2:
        return check
    n = np.arange(2, n_max + 1, dtype=np.int64)
    norms = torus_distance(n * cf.omega, 0.0)
    bounds = c_omega / (n * np.log(n) ** alpha)
    check.violations = [int(v) for v in n[norms < bounds]]
    if check.violations:
        logger.info(f"omega={cf.label}: {len(check.violations)} Diophantine violations up to {n_max}")
    return check


def block_decomposition(n: int, cf: CFExpansion) -> List[Tuple[int, int]]:
    """
    Greedy n = l_s q_s + l_{s-1} q_{s-1} + ... over the recorded denominators.

    Returns (l, q) pairs from the largest q down; q = 1 closes any remainder.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    denominators = sorted(set(cf.denominators) | {1}, reverse=True)
    blocks = []
    remainder = n
    for q in denominators:
        if q <= remainder:
            l, remainder = divmod(remainder, q)
            blocks.append((l, q))
        if remainder == 0:
            break
    return blocks


def convergent_bounds_hold(cf: CFExpansion, s: int) -> Tuple[bool, bool]:
    """
    Exact check of 1/(q_s(q_{s+1}+q_s)) < |omega - p_s/q_s| < 1/(q_s q_{s+1}).

    Returns (lower_ok, upper_ok) for 1 <= s < len(convergents).
    """
    (p, q), (_, q_next) = cf.convergents[s - 1], cf.convergents[s]
    r = Fraction(p, q)
    side = cf.compare(r)
    lower = Fraction(1, q * (q_next + q))
    upper = Fraction(1, q * q_next)
    # |omega - r| > lower  <=>  omega beyond r + side*lower, likewise for upper
    lower_ok = cf.compare(r + side * lower) == side
    upper_ok = cf.compare(r + side * upper) == -side
    return lower_ok, upper_ok
