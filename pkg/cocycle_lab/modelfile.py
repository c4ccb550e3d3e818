"""
Cocycle Lab - Model File Module
TOML model descriptions with explicit Fourier coefficients:

    [model]
    lambda_a = 1.0          # optional, default 1
    lambda_v = 10.0
    omega = "golden"        # golden | sqrt2m1 | p/q | cf:a1,a2,... | decimal
    depth = 40              # optional

    [function.v]
    reality = true
    rho = 0.5
    coeffs = [[1, 1.0, 0.0], [-1, 1.0, 0.0]]

    [function.a]            # optional, default a = 1
    ...
"""

import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from .analytic import TrigPolynomial
from .arithmetic import cf_expand, resolve_omega
from .cocycle import JacobiModel
from .errors import ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)


def _number(table: Dict[str, Any], key: str, where: str, default: Optional[float] = None) -> float:
    if key not in table:
        if default is None:
            raise ValidationError(f"missing {key} in [{where}]")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}.{key} must be a number, got {value!r}")
    return float(value)


def _parse_function(name: str, table: Dict[str, Any], must_be_real: bool) -> TrigPolynomial:
    where = f"function.{name}"
    rho = _number(table, "rho", where)
    coeffs = table.get("coeffs")
    if not isinstance(coeffs, list) or not coeffs:
        raise ValidationError(f"[{where}] needs a non-empty coeffs = [[k, re, im], ...]")
    triples = []
    for entry in coeffs:
        if not isinstance(entry, list) or len(entry) not in (2, 3):
            raise ValidationError(f"[{where}] bad coefficient entry {entry!r}")
        k, re, im = (entry + [0.0])[:3]
        if isinstance(k, bool) or not isinstance(k, int):
            raise ValidationError(f"[{where}] frequency {k!r} must be an integer")
        triples.append((k, float(re), float(im)))
    f = TrigPolynomial.from_triples(triples, rho)

    reality = table.get("reality", must_be_real)
    if must_be_real and reality is not True:
        raise ValidationError(f"[{where}] the potential must declare reality = true")
    if reality and not f.is_real:
        raise ValidationError(f"[{where}] coefficients violate c_-k = conj(c_k)")
    return f


def parse_model(text: str) -> JacobiModel:
    """Parse and validate a model description."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ValidationError(f"model file is not valid TOML: {e}") from e

    model = data.get("model")
    if not isinstance(model, dict):
        raise ValidationError("missing [model] section")
    lambda_a = _number(model, "lambda_a", "model", default=1.0)
    lambda_v = _number(model, "lambda_v", "model")
    if "omega" not in model:
        raise ValidationError("missing omega in [model]")
    omega_text = str(model["omega"])
    depth = model.get("depth")
    if depth is not None and (isinstance(depth, bool) or not isinstance(depth, int)):
        raise ValidationError("model.depth must be an integer")
    omega = cf_expand(resolve_omega(omega_text), depth, label=omega_text)

    functions = data.get("function", {})
    if "v" not in functions:
        raise ValidationError("missing [function.v] section")
    v = _parse_function("v", functions["v"], must_be_real=True)
    if "a" in functions:
        a = _parse_function("a", functions["a"], must_be_real=False)
    else:
        a = TrigPolynomial.constant(1.0, v.rho)
    unknown = set(functions) - {"a", "v"}
    if unknown:
        logger.warning(f"ignoring unknown function sections: {sorted(unknown)}")

    return JacobiModel(lambda_a=lambda_a, a=a, lambda_v=lambda_v, v=v, omega=omega)


def load_model(path: Path) -> JacobiModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"cannot read model file {path}: {e}") from e
    return parse_model(text)


def _function_block(name: str, f: TrigPolynomial, reality: bool) -> str:
    coeffs = ", ".join(f"[{k}, {c.real!r}, {c.imag!r}]" for k, c in f.coefficients.items()) or "[0, 0.0, 0.0]"
    return "\n".join(
        [
            f"[function.{name}]",
            f"reality = {'true' if reality else 'false'}",
            f"rho = {f.rho!r}",
            f"coeffs = [{coeffs}]",
        ]
    )


def serialize_model(model: JacobiModel) -> str:
    """Inverse of parse_model (the omega label must be one parse_model resolves)."""
    lines = [
        "[model]",
        f"lambda_a = {model.lambda_a!r}",
        f"lambda_v = {model.lambda_v!r}",
        f'omega = "{model.omega.label}"',
        f"depth = {model.omega.depth}",
        "",
        _function_block("v", model.v, True),
        "",
        _function_block("a", model.a, model.a.is_real),
        "",
    ]
    return "\n".join(lines)
