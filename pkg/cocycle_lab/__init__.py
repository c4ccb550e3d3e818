"""
Cocycle Lab - numerical laboratory for analytic quasi-periodic cocycles.

Continued-fraction frequency arithmetic, Jacobi/Schrodinger transfer-matrix
products, finite-scale Lyapunov exponents, large-deviation experiments for
subharmonic Birkhoff sums and an executable Avalanche Principle checker.
"""

__version__ = "0.1.0"
__author__ = "AI Development Lab"

from pathlib import Path

# Default paths
DEFAULT_OUTPUT_DIR = Path("runs")
MANIFEST_SUFFIX = ".manifest.json"
