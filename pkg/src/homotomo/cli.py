"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure. Failures print one JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .data import bin_dataset
from .io import (
    FORMAT_VERSION,
    DataFormatError,
    ingest_dataset,
    read_density_matrix,
    write_dataset,
    write_density_matrix,
    write_json,
    write_uncertainty,
    write_wigner_grid,
)
from .maxlik import (
    DegenerateMeasurementError,
    MeasurementSet,
    MonotonicityError,
    ReconstructionConfig,
    default_threads,
    log_likelihood,
    reconstruct,
)
from .radon import BackProjectionConfig, backproject
from .simulate import ReplicaError, SimulationPlan, bootstrap_uncertainty, sample_quadratures
from .states import InvalidStateError, StateSpec, check_density_matrix
from .wigner import WignerGridSpec, wigner_from_rho

log = logging.getLogger("homotomo")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Every tunable of every pipeline, with the library defaults."""

    n_max: int = 10
    eta: float = 1.0
    k_max: int | None = None
    max_iterations: int = 5000
    tolerance: float = 1e-10
    seed: int = 0
    grid: dict = field(default_factory=lambda: WignerGridSpec().to_dict())
    cutoff: float = 6.3
    binning: dict | None = None
    replicas: int = 50
    redraw_phases: bool = False

    def validate(self) -> "RunConfig":
        try:
            self.reconstruction().validate()
            self.grid_spec()
            BackProjectionConfig(self.cutoff)
        except (ValueError, TypeError, KeyError) as exc:
            raise UsageError(f"invalid configuration: {exc}") from exc
        if not 0 <= int(self.seed) < 2**64:
            raise UsageError("seed must fit in an unsigned 64-bit integer")
        if self.replicas < 2:
            raise UsageError("replicas must be >= 2")
        if self.binning is not None:
            unknown = set(self.binning) - {"theta_bins", "x_bins", "x_range"}
            if unknown or not {"theta_bins", "x_bins"} <= set(self.binning):
                raise UsageError("binning needs theta_bins and x_bins (and optionally x_range)")
        return self

    def reconstruction(self, threads: int | None = None) -> ReconstructionConfig:
        return ReconstructionConfig(
            n_max=self.n_max, eta=self.eta, k_max=self.k_max, max_iterations=self.max_iterations,
            tolerance=self.tolerance, threads=threads,
        )

    def grid_spec(self) -> WignerGridSpec:
        return WignerGridSpec.from_dict(self.grid)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        # result files nest the echo under "config"
        if "config" in d and isinstance(d["config"], dict) and "format" in d:
            d = d["config"]
        d = d.get("run", d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**d)


def _load_json_arg(value: str) -> dict:
    """A JSON file path, or an inline JSON object."""
    if value.lstrip().startswith("{"):
        try:
            return json.loads(value)
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid inline JSON: {exc}") from exc
    try:
        with open(value, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot read {value}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{value}: not valid JSON ({exc})") from exc


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_dict(_load_json_arg(args.config)) if getattr(args, "config", None) else RunConfig()
    for name in ("n_max", "eta", "k_max", "max_iterations", "tolerance", "seed", "cutoff", "replicas"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "grid", None):
        cfg.grid = _parse_grid(args.grid).to_dict()
    return cfg.validate()


def _parse_grid(value: str) -> WignerGridSpec:
    """``x_min,x_max,p_min,p_max,nx,np``, or JSON (inline or file)."""
    parts = value.split(",")
    try:
        if len(parts) == 6 and not value.lstrip().startswith("{"):
            lo_x, hi_x, lo_p, hi_p = (float(v) for v in parts[:4])
            return WignerGridSpec(lo_x, hi_x, lo_p, hi_p, int(parts[4]), int(parts[5]))
        doc = _load_json_arg(value)
        return WignerGridSpec.from_dict(doc.get("grid", doc))
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid grid {value!r}: {exc}") from exc


def _threads(args) -> int:
    return args.threads if args.threads else default_threads()


def _echo(cfg: RunConfig, command: str, threads: int, **inputs) -> dict:
    return {"format_version": FORMAT_VERSION, "homotomo_version": __version__, "command": command,
            "threads": threads, "run": asdict(cfg), "inputs": inputs}


def _ingest(args, cfg: RunConfig):
    return ingest_dataset(args.data, phase_unit=args.phase_unit, delimiter=args.delimiter, eta=cfg.eta)


def _diag_path(out: str) -> str:
    return str(out) + ".diag.json"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args)
    threads = _threads(args)
    data = _ingest(args, cfg)
    source = data
    if cfg.binning is not None:
        b = cfg.binning
        source = bin_dataset(data, b["theta_bins"], b["x_bins"], tuple(b["x_range"]) if b.get("x_range") else None)
    result = reconstruct(source, cfg.reconstruction(threads))
    echo = _echo(cfg, "reconstruct", threads, data=str(args.data))
    summary = {"iterations": result.iterations, "stop_reason": result.stop_reason, "loglik": result.loglik}
    diag = {"config": echo, **summary, "loglik_trace": result.loglik_trace.tolist(), **result.diagnostics}
    write_density_matrix(args.out, result.rho, echo, extra={"summary": summary})
    write_json(_diag_path(args.out), diag)
    print(json.dumps({"out": str(args.out), **summary}))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    state_doc = _load_json_arg(args.state)
    plan_doc = _load_json_arg(args.plan)
    try:
        state = StateSpec.from_dict(state_doc)
        plan = SimulationPlan.from_dict(plan_doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid state or plan: {exc}") from exc
    dataset = sample_quadratures(state, plan)
    echo = _echo(cfg, "simulate", 1, state=state.to_dict(), plan=plan.to_dict())
    write_dataset(args.out, dataset, echo)
    print(json.dumps({"out": str(args.out), "n_samples": len(dataset)}))
    return EXIT_OK


def _read_rho(path) -> np.ndarray:
    rho, _ = read_density_matrix(path)
    try:
        return check_density_matrix(rho, trace_tol=1e-9, hermitian_tol=1e-9, eigen_tol=1e-9)
    except InvalidStateError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def cmd_wigner(args) -> int:
    cfg = _load_config(args)
    rho = _read_rho(args.rho)
    grid = wigner_from_rho(rho, cfg.grid_spec())
    write_wigner_grid(args.out, grid, _echo(cfg, "wigner", 1, rho=str(args.rho)))
    print(json.dumps({"out": str(args.out), "min": float(grid.values.min()), "max": float(grid.values.max())}))
    return EXIT_OK


def cmd_radon(args) -> int:
    cfg = _load_config(args)
    data = _ingest(args, cfg)
    grid = backproject(data, BackProjectionConfig(cfg.cutoff, cfg.grid_spec()))
    write_wigner_grid(args.out, grid, _echo(cfg, "radon", 1, data=str(args.data)))
    print(json.dumps({"out": str(args.out), "min": float(grid.values.min()), "max": float(grid.values.max())}))
    return EXIT_OK


def cmd_uncertainty(args) -> int:
    cfg = _load_config(args)
    threads = _threads(args)
    rho = _read_rho(args.rho)
    if rho.shape[0] != cfg.n_max + 1:
        cfg.n_max = rho.shape[0] - 1
        cfg.validate()
    try:
        plan = SimulationPlan.from_dict(_load_json_arg(args.plan))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid plan: {exc}") from exc
    thetas = _ingest(args, cfg).thetas if args.data else None
    result = bootstrap_uncertainty(
        rho, plan, n_replicas=cfg.replicas, recon_config=cfg.reconstruction(1), thetas=thetas,
        redraw_phases=cfg.redraw_phases, threads=threads,
    )
    echo = _echo(cfg, "uncertainty", threads, rho=str(args.rho), plan=plan.to_dict(),
                 data=str(args.data) if args.data else None)
    write_uncertainty(args.out, result, echo)
    print(json.dumps({"out": str(args.out), "trace_distance": result.trace_distance}))
    return EXIT_OK


def cmd_likelihood(args) -> int:
    cfg = _load_config(args)
    rho = _read_rho(args.rho)
    data = _ingest(args, cfg)
    ms = MeasurementSet.from_dataset(data, rho.shape[0] - 1, cfg.eta, k_max=cfg.k_max)
    print(repr(log_likelihood(rho, data, ops=ms, threads=_threads(args))))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="homotomo", description="Maximum-likelihood homodyne tomography")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, data=False):
        p.add_argument("--config", help="JSON run configuration (file or inline); result files work too")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $HOMOTOMO_THREADS or CPU count); 1 is bit-reproducible")
        p.add_argument("--n-max", dest="n_max", type=int)
        p.add_argument("--eta", type=float)
        p.add_argument("--k-max", dest="k_max", type=int)
        if data:
            p.add_argument("--phase-unit", choices=("radians", "degrees"), default="radians")
            p.add_argument("--delimiter", default=None)

    p = sub.add_parser("reconstruct", help="maximum-likelihood density matrix")
    common(p, data=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--tolerance", type=float)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("simulate", help="synthetic homodyne dataset")
    common(p)
    p.add_argument("--state", required=True, help="state JSON (file or inline)")
    p.add_argument("--plan", required=True, help="simulation plan JSON (file or inline)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("wigner", help="Wigner function of a stored density matrix")
    common(p)
    p.add_argument("--rho", required=True)
    p.add_argument("--grid", help="x_min,x_max,p_min,p_max,nx,np or JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_wigner)

    p = sub.add_parser("radon", help="filtered back-projection Wigner function")
    common(p, data=True)
    p.add_argument("--data", required=True)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--grid", help="x_min,x_max,p_min,p_max,nx,np or JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_radon)

    p = sub.add_parser("uncertainty", help="bootstrap error bars of a density matrix")
    common(p, data=True)
    p.add_argument("--rho", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--replicas", type=int)
    p.add_argument("--data", help="original dataset; its phases are reused by every replica")
    p.add_argument("--out", required=True)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--tolerance", type=float)
    p.set_defaults(func=cmd_uncertainty)

    p = sub.add_parser("likelihood", help="print the log-likelihood of a matrix on a dataset")
    common(p, data=True)
    p.add_argument("--rho", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_likelihood)
    return parser


def _fail(code: int, exc: BaseException) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("indices", "index"):
        if hasattr(exc, attr):
            value = getattr(exc, attr)
            record[attr] = value[:10] if isinstance(value, list) else value
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except (DataFormatError, InvalidStateError, FileNotFoundError) as exc:
        return _fail(EXIT_DATA, exc)
    except (DegenerateMeasurementError, MonotonicityError, ReplicaError, ArithmeticError) as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except ValueError as exc:
        return _fail(EXIT_DATA, exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
