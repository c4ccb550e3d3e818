"""
Pytest configuration and fixtures for cocycle-lab tests.
"""

import sys
from pathlib import Path

import pytest

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from cocycle_lab.analytic import TrigPolynomial  # noqa: E402
from cocycle_lab.arithmetic import GOLDEN, SQRT2_MINUS_1, cf_expand  # noqa: E402
from cocycle_lab.cocycle import JacobiModel  # noqa: E402


@pytest.fixture(autouse=True)
def fresh_config(monkeypatch):
    """Every test starts from default configuration."""
    import cocycle_lab.config as cfg

    for var in (
        "COCYCLE_LAB_WORKERS",
        "COCYCLE_LAB_SEED",
        "COCYCLE_LAB_OUTPUT_DIR",
        "COCYCLE_LAB_C_ABS",
        "COCYCLE_LAB_SMALL_C_ABS",
        "COCYCLE_LAB_C_TEST",
        "COCYCLE_LAB_MU_GUESS",
        "COCYCLE_LAB_HOLDER_MIN_DELTA",
    ):
        monkeypatch.delenv(var, raising=False)
    cfg._config = None
    yield
    cfg._config = None


@pytest.fixture
def golden_cf():
    """Golden mean expanded symbolically to depth 20."""
    return cf_expand(GOLDEN, 20)


@pytest.fixture
def amo_model():
    """Almost Mathieu: v = 2 cos(2 pi x), lambda_s = 10, golden frequency."""
    return JacobiModel.schrodinger(TrigPolynomial.cosine(2.0, 0.5), 10.0, GOLDEN)


@pytest.fixture
def free_model():
    """v = 0, a = 1: every factor is the rotation [[-E, -1], [1, 0]]."""
    return JacobiModel.schrodinger(TrigPolynomial({}, 0.5), 1.0, GOLDEN)


@pytest.fixture
def jacobi_model():
    """A genuinely Jacobi model: complex a without real zeros, two-harmonic v."""
    a = TrigPolynomial({0: 1.0, 1: 0.3 + 0.2j}, 0.4)
    v = TrigPolynomial({1: 0.5, -1: 0.5, 2: 0.1 - 0.05j, -2: 0.1 + 0.05j}, 0.4)
    return JacobiModel(lambda_a=0.8, a=a, lambda_v=1.5, v=v, omega=cf_expand(SQRT2_MINUS_1, 20))


AMO_TOML = """
[model]
lambda_v = 10.0
omega = "golden"

[function.v]
reality = true
rho = 0.5
coeffs = [[1, 1.0, 0.0], [-1, 1.0, 0.0]]
"""


@pytest.fixture
def amo_toml():
    return AMO_TOML


@pytest.fixture
def amo_model_file(tmp_path):
    """The almost Mathieu model written to disk."""
    path = tmp_path / "amo.toml"
    path.write_text(AMO_TOML)
    return path
