"""
Cocycle Lab - CLI Interface
Batch front-end: one experiment per invocation, data to stdout or --out,
a manifest next to every output file, logs to stderr.

Exit codes: 0 success, 2 invalid input, 3 numerically degenerate model.
"""

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .analytic import epsilon0_estimate, log_potential_I, log_potential_I_quad
from .arithmetic import (
    beta_estimate,
    cf_expand,
    convergent_bounds_hold,
    diophantine_check,
    resolve_omega,
)
from .avalanche import ap_blocks, ap_check
from .cocycle import GAUGES, JacobiModel
from .config import get_config
from .deviation import birkhoff_sample, ldt_experiment
from .errors import CocycleLabError, TerminatingExpansionError, ValidationError
from .lyapunov import (
    CSV_COLUMNS,
    energy_scan,
    finite_le,
    frequency_holder_fit,
    holder_fit,
    positivity_scan,
    thresholds,
)
from .manifest import ExperimentConfig, RunManifest, content_hash, dumps_csv, dumps_json, write_output
from .modelfile import parse_model

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


@dataclass
class CommandResult:
    text: str
    grid_sizes: List[int] = field(default_factory=list)
    dropped: List[int] = field(default_factory=list)


def _float_list(count: Optional[int] = None) -> Callable[[str], Tuple[float, ...]]:
    def parse(text: str) -> Tuple[float, ...]:
        try:
            values = tuple(float(t) for t in text.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
        if count is not None and len(values) != count:
            raise argparse.ArgumentTypeError(f"expected {count} values, got {text!r}")
        return values

    return parse


def _int_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _load_model(config: ExperimentConfig) -> JacobiModel:
    if not config.model_path:
        raise ValidationError(f"{config.command} needs --model")
    try:
        text = Path(config.model_path).read_text(encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"cannot read model file {config.model_path}: {e}") from e
    config.model_hash = content_hash(text)
    return parse_model(text)


def cmd_cf(config: ExperimentConfig) -> CommandResult:
    """Continued-fraction expansion with optional Diophantine scan."""
    p = config.params
    cf = cf_expand(resolve_omega(p["omega"]), p["depth"], label=p["omega"])
    data = cf.to_dict()
    try:
        data["beta"] = beta_estimate(cf).to_dict()
    except TerminatingExpansionError as e:
        logger.info(str(e))
        data["beta"] = None
    except ValidationError:
        data["beta"] = None
    if len(cf.convergents) >= 2 and not cf.resolution_limited:
        data["convergent_bounds"] = [list(convergent_bounds_hold(cf, s)) for s in range(1, len(cf.convergents))]
    if p.get("check_diophantine"):
        c_omega, alpha, n_max = p["check_diophantine"]
        data["diophantine"] = diophantine_check(cf, c_omega, alpha, int(n_max)).to_dict()
    return CommandResult(dumps_json(data))


def cmd_analytic(config: ExperimentConfig) -> CommandResult:
    """eps0 grid estimate, or I(zeta) with its quadrature cross-check."""
    p = config.params
    if p["analytic_command"] == "potential":
        zeta = complex(*p["zeta"])
        data = {"zeta": zeta, "I": log_potential_I(zeta), "quadrature": log_potential_I_quad(zeta)}
        return CommandResult(dumps_json(data))

    model = _load_model(config)
    nx, ny, ne = (int(g) for g in p["grid"])
    lo, hi = p["E_range"] if p.get("E_range") else (-model.v_sup, model.v_sup)
    delta = p["delta"] if p.get("delta") is not None else model.v.rho / 2
    estimate = epsilon0_estimate(model.v, delta, np.linspace(lo, hi, ne), nx, ny)
    return CommandResult(dumps_json(estimate.to_dict()), grid_sizes=[nx, ny, ne])


def cmd_lyapunov(config: ExperimentConfig) -> CommandResult:
    """L_n rows as CSV: one energy, or a --scan Emin,Emax,K."""
    p = config.params
    model = _load_model(config)
    if p.get("scan"):
        E_min, E_max, K = p["scan"]
        estimates = energy_scan(model, E_min, E_max, int(K), p["n"], p["grid"])
    else:
        estimates = [finite_le(model, p["E"], p["n"], p["grid"])]
    return CommandResult(
        dumps_csv(CSV_COLUMNS, [e.csv_row() for e in estimates]),
        grid_sizes=[p["grid"]],
        dropped=[e.dropped_orbits for e in estimates],
    )


def cmd_holder(config: ExperimentConfig) -> CommandResult:
    p = config.params
    model = _load_model(config)
    if p["variable"] == "omega":
        report = frequency_holder_fit(
            model, p["center"], p["radius"], p["pairs"], p["n"], p["grid"], E=p["E"], seed=config.seed,
            c_bar=p.get("c_bar"), min_delta=p.get("min_delta"),
        )
    else:
        report = holder_fit(
            model, p["center"], p["radius"], p["pairs"], p["n"], p["grid"], seed=config.seed,
            c_bar=p.get("c_bar"), min_delta=p.get("min_delta"),
        )
    return CommandResult(dumps_json(report.to_dict()), grid_sizes=[p["grid"]])


def cmd_ldt(config: ExperimentConfig) -> CommandResult:
    p = config.params
    model = _load_model(config)
    n_list = list(p["n"])
    L_hat = None
    delta = p.get("delta")
    if p.get("kappa") is not None:
        L_hat = finite_le(model, p["E"], n_list[-1], p["grid"]).L_n
        delta = p["kappa"] * L_hat
    if delta is None:
        raise ValidationError("ldt needs --delta or --kappa")
    report = ldt_experiment(model, p["E"], n_list, delta, p["grid"], L_hat=L_hat)
    return CommandResult(dumps_json(report.to_dict()), grid_sizes=[p["grid"]], dropped=report.dropped)


def _resolve_n(text: str, omega) -> int:
    text = str(text).strip()
    if text.startswith("q"):
        return cf_expand(omega).q(int(text[1:]))
    return int(text)


def cmd_birkhoff(config: ExperimentConfig) -> CommandResult:
    """F_n(x) on the grid as CSV (x, F_n); NaN marks excluded points."""
    p = config.params
    omega = resolve_omega(p["omega"])
    n = _resolve_n(p["n"], omega)
    step = omega if isinstance(omega, Fraction) else cf_expand(omega, label=p["omega"])
    sample = birkhoff_sample(complex(*p["zeta"]), step, n, p["grid"])
    logger.info(f"birkhoff: {sample.to_dict()}")
    return CommandResult(dumps_csv(["x", "F_n"], sample.csv_rows()), grid_sizes=[p["grid"]], dropped=[sample.excluded])


def cmd_ap(config: ExperimentConfig) -> CommandResult:
    p = config.params
    model = _load_model(config)
    blocks = ap_blocks(model, p["x"], p["E"], p["block_len"], p["blocks"], gauge=p["gauge"])
    report = ap_check(blocks, C_test=p.get("C_test"))
    return CommandResult(dumps_json(report.to_dict()))


def cmd_positivity(config: ExperimentConfig) -> CommandResult:
    p = config.params
    model = _load_model(config)
    rows = positivity_scan(model, p["gamma"], p["n"], p["grid"], p["num_E"], slack=p["slack"])
    return CommandResult(
        dumps_csv(["E", "L_n", "bound", "ok"], [[r.E, r.L_n, r.bound, int(r.ok)] for r in rows]),
        grid_sizes=[p["grid"]],
    )


def cmd_thresholds(config: ExperimentConfig) -> CommandResult:
    p = config.params
    model = _load_model(config)
    eps0 = p.get("epsilon0")
    if eps0 is None:
        lo, hi = -model.v_sup, model.v_sup
        estimate = epsilon0_estimate(model.v, model.v.rho / 2, np.linspace(lo, hi, 129), 256, 32)
        eps0 = estimate.value
        logger.info(f"epsilon0 grid estimate {eps0:.6g} (not certified)")
    table = thresholds(
        model,
        p["gamma"],
        eps0,
        C_abs=p.get("C_abs"),
        c_abs=p.get("c_abs"),
        C_omega=p["C_omega"],
        beta=p.get("beta"),
        L0=p.get("L0"),
        check_n=p.get("check_n"),
    )
    return CommandResult(dumps_json(table.to_dict()))


COMMANDS: Dict[str, Callable[[ExperimentConfig], CommandResult]] = {
    "cf": cmd_cf,
    "analytic": cmd_analytic,
    "lyapunov": cmd_lyapunov,
    "holder": cmd_holder,
    "ldt": cmd_ldt,
    "birkhoff": cmd_birkhoff,
    "ap": cmd_ap,
    "positivity": cmd_positivity,
    "thresholds": cmd_thresholds,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=None, help="Parallel workers (never changes results)")
    common.add_argument("--seed", type=int, default=None, help="Seed for randomised sampling")
    common.add_argument("--out", type=Path, default=None, help="Output file, relative paths under COCYCLE_LAB_OUTPUT_DIR (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(
        prog="cocycle-lab",
        description="Cocycle Lab - numerics for quasi-periodic Jacobi cocycles",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Continued fraction of the golden mean
  cocycle-lab cf --omega golden --depth 12

  # Finite-scale Lyapunov exponent of an almost Mathieu model
  cocycle-lab lyapunov --model amo.toml --E 0 --n 1000 --grid 4096

  # Avalanche Principle on 20 cocycle blocks of length 200
  cocycle-lab ap --model amo.toml --E 0 --x 0.1 --block-len 200 --blocks 20

Output columns:
  lyapunov   E (energy), n (steps), grid (x points), L_n and L_n_a (nats per step),
             D_hat (nats), dropped (orbits removed at singular steps)
  birkhoff   x (torus point), F_n (nats; NaN where excluded)
  positivity E, L_n, bound = (1 - gamma) log lambda_v, ok (0/1)
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", help="Available commands")

    p = sub.add_parser("cf", parents=[common], help="Continued-fraction expansion -> JSON")
    p.add_argument("--omega", required=True, help="golden, sqrt2m1, p/q, cf:a1,a2,... or a decimal")
    p.add_argument("--depth", type=int, default=None, help="Number of partial quotients")
    p.add_argument("--check-diophantine", type=_float_list(3), metavar="C,ALPHA,NMAX")

    p = sub.add_parser("analytic", help="Analytic helpers -> JSON")
    analytic_sub = p.add_subparsers(dest="analytic_command", required=True)
    q = analytic_sub.add_parser("eps0", parents=[common], help="Grid estimate of eps0(v)")
    q.add_argument("--model", required=True, type=Path)
    q.add_argument("--delta", type=float, default=None, help="Strip height (default rho/2)")
    q.add_argument("--grid", type=_float_list(3), default=(256.0, 32.0, 129.0), metavar="NX,NY,NE")
    q.add_argument("--E-range", type=_float_list(2), default=None, metavar="EMIN,EMAX")
    q = analytic_sub.add_parser("potential", parents=[common], help="I(zeta) and its quadrature value")
    q.add_argument("--zeta", type=_float_list(2), required=True, metavar="RE,IM")

    p = sub.add_parser("lyapunov", parents=[common], help="Finite-scale Lyapunov exponent -> CSV")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--E", type=float, default=0.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--grid", type=int, default=4096)
    p.add_argument("--scan", type=_float_list(3), default=None, metavar="EMIN,EMAX,K")

    p = sub.add_parser("holder", parents=[common], help="Holder-exponent regression -> JSON")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--center", type=float, required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--pairs", type=int, default=16)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--grid", type=int, default=1024)
    p.add_argument("--variable", choices=["E", "omega"], default="E")
    p.add_argument("--E", type=float, default=0.0, help="Energy for --variable omega")
    p.add_argument("--c-bar", type=float, default=None)
    p.add_argument("--min-delta", type=float, default=None, help="Smallest |dL| kept in the regression")

    p = sub.add_parser("ldt", parents=[common], help="Large-deviation experiment -> JSON")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--E", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None, help="delta = kappa * L_hat (deepest n)")
    p.add_argument("--n", type=_int_list, default=(100, 200, 400, 800), metavar="N1,N2,...")
    p.add_argument("--grid", type=int, default=8192)

    p = sub.add_parser("birkhoff", parents=[common], help="Kernel Birkhoff sums F_n(x) -> CSV")
    p.add_argument("--zeta", type=_float_list(2), required=True, metavar="RE,IM")
    p.add_argument("--omega", default="golden")
    p.add_argument("--n", default="q8", help="Integer, or qK for the K-th convergent denominator")
    p.add_argument("--grid", type=int, default=4096)

    p = sub.add_parser("ap", parents=[common], help="Avalanche Principle on cocycle blocks -> JSON")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--E", type=float, default=0.0)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--block-len", type=int, required=True)
    p.add_argument("--blocks", type=int, required=True)
    p.add_argument("--gauge", choices=list(GAUGES), default="unimodular")
    p.add_argument("--C-test", type=float, default=None)

    p = sub.add_parser("positivity", parents=[common], help="L_n > (1-gamma) log lambda_v scan -> CSV")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--gamma", type=float, default=0.2)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--grid", type=int, default=4096)
    p.add_argument("--num-E", type=int, default=21)
    p.add_argument("--slack", type=float, default=0.0)

    p = sub.add_parser("thresholds", parents=[common], help="Closed-form constants -> JSON")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--gamma", type=float, default=0.2)
    p.add_argument("--epsilon0", type=float, default=None, help="Default: grid estimate at delta = rho/2")
    p.add_argument("--C-abs", type=float, default=None)
    p.add_argument("--c-abs", type=float, default=None)
    p.add_argument("--C-omega", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--L0", type=float, default=None)
    p.add_argument("--check-n", type=int, default=None)

    return parser


GLOBAL_KEYS = {"workers", "seed", "out", "verbose", "model", "command"}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    lab = get_config()
    params = {k: v for k, v in vars(args).items() if k not in GLOBAL_KEYS}
    return ExperimentConfig(
        command=args.command,
        params=params,
        model_path=str(args.model) if getattr(args, "model", None) else None,
        output_path=str(lab.output_dir / args.out) if args.out else None,
        seed=lab.seed if args.seed is None else args.seed,
        constants=dict(lab.constants),
        workers=lab.workers if args.workers is None else args.workers,
    )


def run(config: ExperimentConfig) -> int:
    """Execute one experiment; returns the process exit code."""
    lab = get_config()
    lab.workers = config.workers
    lab.seed = config.seed
    lab.constants.update(config.constants)

    started = time.time()
    try:
        result = COMMANDS[config.command](config)
    except CocycleLabError as e:
        logger.error(f"{config.command}: {e}")
        return e.exit_code

    if config.output_path:
        manifest = RunManifest.for_run(config, Path(config.output_path), started, result.grid_sizes, result.dropped)
        write_output(result.text, Path(config.output_path), manifest)
    else:
        sys.stdout.write(result.text)
    return 0


def main(argv: Optional[Sequence[str]] = None):
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format=LOG_FORMAT,
        stream=sys.stderr,
    )

    if not args.command:
        parser.print_help()
        sys.exit(2)

    sys.exit(run(config_from_args(args)))


if __name__ == "__main__":
    main()
