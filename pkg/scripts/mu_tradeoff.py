#!/usr/bin/env python3
"""Sweep the command-activity weight on the scalar linear loop and print
the tracking-accuracy / input-energy trade-off, including the analytic
minimizer r / (1 + mu * rho_y / rho_u) as a cross-check."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from nic.invert import ControllerConfig
from nic.poly import AffineScaler, BasisTerm, PolyModel
from nic.sim import Scenario, metrics, plant_from_model, run_closed_loop

RHO_Y, RHO_U = 2.0, 3.0


def main() -> int:
    model = PolyModel(order=1, degree=1, terms=[BasisTerm((0, 1))],
                      alpha=np.array([1.0]), scaler=AffineScaler.identity(2),
                      rho_y=RHO_Y, rho_u=RHO_U)
    plant = plant_from_model(model)
    sc = Scenario(name="sine", horizon=400,
                  reference={"kind": "sine", "amplitude": 0.5, "period": 60},
                  seed=1)
    print(f"{'mu':>8} {'rms err':>10} {'energy':>10} {'closed-form dev':>16}")
    for mu in (0.0, 0.001, 0.01, 0.1, 1.0):
        cfg = ControllerConfig(-2.0, 2.0, mu=mu)
        traj = run_closed_loop(plant, model, cfg, sc)
        m = metrics(traj)
        dev = np.abs(traj.u - traj.r / (1.0 + mu * RHO_Y / RHO_U)).max()
        print(f"{mu:8.3f} {m['rms_error']:10.5f} {m['command_energy']:10.3f} "
              f"{dev:16.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
