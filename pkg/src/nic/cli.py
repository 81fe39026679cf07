"""Command line front end: data generation, identification, validation
and closed-loop simulation driven by one YAML config file.

Exit codes: 0 success, 1 domain failure (identification or validation
verdict, plant divergence), 2 usage or parse error.  The NIC_LOG
environment variable (DEBUG/INFO/WARNING/ERROR) controls verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import fileio, sim
from .identify import IdentConfig, identify_model
from .invert import ControllerConfig
from .sim import Scenario, SimulationDiverged
from .validate import select_mu

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class DomainFailure(RuntimeError):
    pass


def _setup_logging() -> None:
    level = os.environ.get("NIC_LOG", "WARNING").upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        level = "WARNING"
    logging.basicConfig(level=getattr(logging, level),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with path.open("r") as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return cfg


def _section(cfg: dict, name: str) -> dict:
    if name not in cfg or not isinstance(cfg[name], dict):
        raise ConfigError(f"config is missing the '{name}' section")
    return cfg[name]


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _existing(base: Path, value, what: str) -> Path:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{what} must be a file path")
    p = _resolve(base, value)
    if not p.exists():
        raise ConfigError(f"{what} does not exist: {p}")
    return p


def _plant_from_spec(spec, what: str) -> sim.Plant:
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"{what} must be a mapping with a 'name' key")
    params = spec.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ConfigError(f"{what}.params must be a mapping")
    xi_bound = float(spec.get("xi_bound", 0.0))
    if xi_bound < 0:
        raise ConfigError(f"{what}.xi_bound must be non-negative")
    try:
        return sim.make_plant(spec["name"], xi_bound=xi_bound, **params)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _controller_from_config(cfg: dict) -> ControllerConfig:
    sec = _section(cfg, "controller")
    try:
        return ControllerConfig(u_min=float(sec["u_min"]),
                                u_max=float(sec["u_max"]),
                                mu=float(sec.get("mu", 0.0)))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"controller section invalid: {exc}") from None


def cmd_generate_data(cfg: dict, base: Path, out: Path, seed: int | None) -> int:
    sec = _section(cfg, "data")
    plant = _plant_from_spec(sec.get("plant"), "data.plant")
    exc = sec.get("excitation")
    if not isinstance(exc, dict):
        raise ConfigError("data.excitation must be a mapping")
    try:
        kind = exc["kind"]
        length = int(exc["length"])
        u_min = float(exc["u_min"])
        u_max = float(exc["u_max"])
    except (KeyError, ValueError) as e:
        raise ConfigError(f"data.excitation invalid: {e}") from None
    if length < 2:
        raise ConfigError("data.excitation.length must be >= 2")
    if u_max < u_min:
        raise ConfigError("data.excitation bounds reversed")
    use_seed = int(sec.get("seed", 0)) if seed is None else seed
    y0 = float(sec.get("y0", 0.0))
    sample_time = float(sec.get("sample_time", 1.0))
    try:
        data = sim.generate_dataset(plant, kind, length, (u_min, u_max),
                                    use_seed, y0=y0, sample_time=sample_time)
    except SimulationDiverged as e:
        raise DomainFailure(f"plant diverged while generating data: {e}") from None
    except ValueError as e:
        raise ConfigError(str(e)) from None
    target = out / "data.csv"
    fileio.write_dataset_csv(target, data)
    print(f"wrote {target} ({data.length} samples, seed {use_seed})")
    return 0


def cmd_identify(cfg: dict, base: Path, out: Path, seed: int | None) -> int:
    sec = _section(cfg, "identify")
    data_path = _existing(base, sec.get("data"), "identify.data")
    data = fileio.load_dataset_csv(data_path)
    try:
        icfg = IdentConfig(
            degree=int(sec.get("degree", 3)),
            n_max=int(sec.get("n_max", 4)),
            rho_init=float(sec.get("rho_init", 1.05)),
            rho_growth=float(sec.get("rho_growth", 1.25)),
            rho_max=float(sec.get("rho_max", 4.0)),
            gamma_tol=float(sec.get("gamma_tol", 1e-3)),
            order_improvement=float(sec.get("order_improvement", 0.05)),
            eta_floor_rel=float(sec.get("eta_floor_rel", 1e-9)),
            holdout_fraction=float(sec.get("holdout_fraction", 0.2)),
        )
    except ValueError as e:
        raise ConfigError(f"identify section invalid: {e}") from None
    result = identify_model(data, icfg)
    report = {
        "success": result.success,
        "eta": result.eta,
        "gamma_y": result.gamma_y,
        "rho": result.rho,
        "residual_linf": result.residual_linf,
        "holdout_linf": result.holdout_linf,
        "notes": list(result.notes),
        "trace": [
            {"n": e.n, "rho": e.rho, "eta": e.eta, "gamma_y": e.gamma_y,
             "nnz": e.nnz, "feasible": e.feasible}
            for e in result.trace
        ],
    }
    fileio.write_yaml(out / "identify_report.yaml", report)
    if result.model is not None:
        fileio.save_model(out / "model.yaml", result.model, eta=result.eta,
                          gamma_y=result.gamma_y, rho=result.rho)
        print(f"wrote {out / 'model.yaml'} (order {result.model.order}, "
              f"gamma_y {result.gamma_y:.4f})")
    if not result.success:
        raise DomainFailure(
            f"identification failed: gamma_y = {result.gamma_y:.4f} "
            f"did not drop below 1 (report at {out / 'identify_report.yaml'})")
    print(f"wrote {out / 'identify_report.yaml'}")
    return 0


def cmd_validate(cfg: dict, base: Path, out: Path, seed: int | None) -> int:
    sec = _section(cfg, "validate")
    model_path = _existing(base, sec.get("model"), "validate.model")
    data_path = _existing(base, sec.get("data"), "validate.data")
    model, diag = fileio.load_model(model_path)
    data = fileio.load_dataset_csv(data_path)
    gamma_y = float(diag["gamma_y"])
    if not gamma_y < 1.0:
        raise DomainFailure(
            f"model file reports gamma_y = {gamma_y:.4f} >= 1; "
            "no stability margin exists, refusing to validate")
    cfg_ctrl = _controller_from_config(cfg)
    m = sec.get("m")
    m = int(m) if m is not None else None
    eps = sec.get("eps")
    if eps is None:
        eps = float(diag["eta"]) * float(diag["rho"])
    eps = float(eps)
    if eps < 0:
        raise ConfigError("validate.eps must be non-negative")
    grid = sec.get("mu_grid", [0.0, 0.001, 0.01, 0.1, 1.0])
    if not isinstance(grid, (list, tuple)) or not grid:
        raise ConfigError("validate.mu_grid must be a non-empty list")
    try:
        mu, report = select_mu(model, data, cfg_ctrl, gamma_y, m=m,
                               mu_grid=[float(v) for v in grid], eps=eps)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    payload = {
        "verdict": report.verdict,
        "mu": report.mu,
        "gamma_y": report.gamma_y,
        "gamma_min": report.gamma_min,
        "gamma_hat": report.gamma_hat,
        "margin": report.margin,
        "eps": report.eps,
        "m": report.m,
        "grid": [
            {"mu": e.mu, "gamma_min": e.gamma_min, "gamma_hat": e.gamma_hat,
             "margin": e.margin, "admissible": e.admissible}
            for e in report.grid
        ],
    }
    fileio.write_yaml(out / "validation_report.yaml", payload)
    print(f"wrote {out / 'validation_report.yaml'} (verdict {report.verdict}, "
          f"mu {mu})")
    if report.verdict != "validated-stable":
        raise DomainFailure(f"validation verdict: {report.verdict}")
    return 0


def _scenario_from_spec(spec, index: int) -> tuple[sim.Plant, Scenario]:
    errors = []
    if not isinstance(spec, dict):
        raise ConfigError(f"scenario #{index} must be a mapping")
    name = spec.get("name", f"scenario{index}")
    plant_spec = spec.get("plant")
    plant = None
    try:
        plant = _plant_from_spec(plant_spec, f"scenario '{name}' plant")
    except ConfigError as e:
        errors.append(str(e))
    try:
        scenario = Scenario(
            name=str(name),
            horizon=int(spec.get("horizon", 0)),
            y0=float(spec.get("y0", 0.0)),
            reference=spec.get("reference", {"kind": "steps"}),
            xi_amplitude=float(spec.get("xi_amplitude", 0.0)),
            seed=int(spec.get("seed", 0)),
        )
        scenario.reference_sequence()
    except (TypeError, ValueError) as e:
        errors.append(f"scenario '{name}': {e}")
        scenario = None
    if errors:
        raise ConfigError("; ".join(errors))
    return plant, scenario


def cmd_simulate(cfg: dict, base: Path, out: Path, seed: int | None) -> int:
    sec = _section(cfg, "simulate")
    model_path = _existing(base, sec.get("model"), "simulate.model")
    model, _ = fileio.load_model(model_path)
    cfg_ctrl = _controller_from_config(cfg)
    specs = sec.get("scenarios")
    if not isinstance(specs, list) or not specs:
        raise ConfigError("simulate.scenarios must be a non-empty list")
    runs = []
    errors = []
    for i, spec in enumerate(specs):
        try:
            runs.append(_scenario_from_spec(spec, i))
        except ConfigError as e:
            errors.append(str(e))
    if errors:
        raise ConfigError("invalid scenarios: " + " | ".join(errors))
    summary = {}
    for i, (plant, scenario) in enumerate(runs):
        if seed is not None:
            scenario = Scenario(name=scenario.name, horizon=scenario.horizon,
                                y0=scenario.y0, reference=scenario.reference,
                                xi_amplitude=scenario.xi_amplitude,
                                seed=seed + i)
        traj = sim.run_closed_loop(plant, model, cfg_ctrl, scenario)
        fileio.write_trajectory_csv(out / f"traj_{scenario.name}.csv", traj)
        summary[scenario.name] = sim.metrics(traj)
    fileio.write_yaml(out / "metrics.yaml", summary)
    print(f"wrote {out / 'metrics.yaml'} ({len(runs)} scenario(s))")
    return 0


_COMMANDS = {
    "generate-data": cmd_generate_data,
    "identify": cmd_identify,
    "validate": cmd_validate,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nic",
        description="Polynomial one-step model identification, inversion "
                    "control and set-membership validation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configured seed(s)")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        config_path = Path(args.config)
        cfg = _load_config(config_path)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, config_path.parent, out, args.seed)
    except (ConfigError, fileio.FileFormatError, yaml.YAMLError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DomainFailure as e:
        print(f"failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
