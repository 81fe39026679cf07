"""Synthetic plants, excitation signals and closed-loop execution.

The plant registry holds a few polynomial benchmark systems with an
additive bounded disturbance.  The closed loop feeds the controller the
measured plant outputs plus its own past commands, applies the synthesized
input with the scheduled disturbance, and records everything; divergence
truncates the run with a flag instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .identify import DataSet
from .invert import ControllerConfig, control_details
from .poly import PolyModel

DIVERGENCE_LIMIT = 1e9


class SimulationDiverged(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"state became non-finite or exceeded bounds at step {step}")
        self.step = step


@dataclass(frozen=True)
class Plant:
    """Discrete-time update y+ = g(y_reg, u_reg) + xi with bounded xi.

    ``update`` receives the output and input regressors newest-first
    (u_reg includes the current input) and returns the next output before
    the disturbance is added.
    """

    name: str
    order: int
    update: Callable[[np.ndarray, np.ndarray], float]
    xi_bound: float = 0.0
    params: dict = field(default_factory=dict)


def _linear1(a: float = 0.5, b: float = 0.3) -> Callable:
    def g(yr, ur):
        return a * yr[0] + b * ur[0]
    return g


def _bilinear2(c_y: float = 0.4, c_u: float = 0.5, c_yu: float = 0.3) -> Callable:
    def g(yr, ur):
        return c_y * yr[0] + c_u * ur[0] + c_yu * yr[1] * ur[1]
    return g


def _stiffening2(a1: float = 0.6, a2: float = -0.1, b1: float = 0.5,
                 b2: float = 0.2, c3: float = -0.4) -> Callable:
    def g(yr, ur):
        return a1 * yr[0] + a2 * yr[1] + b1 * ur[0] + b2 * ur[1] + c3 * yr[0] ** 3
    return g


def _deadzone2(a1: float = 0.6, a2: float = -0.1, b: float = 0.7,
               width: float = 0.2) -> Callable:
    def g(yr, ur):
        u = ur[0]
        dz = np.sign(u) * max(abs(u) - width, 0.0)
        return a1 * yr[0] + a2 * yr[1] + b * dz
    return g


PLANT_REGISTRY: dict[str, tuple[int, Callable[..., Callable]]] = {
    # order, update factory
    "linear1": (1, _linear1),
    "bilinear2": (2, _bilinear2),
    # bounded-but-lively second-order benchmark with a stiffening cubic term
    "stiffening2": (2, _stiffening2),
    # piecewise benchmark: input deadzone ahead of linear dynamics
    "deadzone2": (2, _deadzone2),
}


def make_plant(name: str, xi_bound: float = 0.0, **params) -> Plant:
    if name not in PLANT_REGISTRY:
        raise KeyError(f"unknown plant '{name}' (available: {sorted(PLANT_REGISTRY)})")
    order, factory = PLANT_REGISTRY[name]
    return Plant(name=name, order=order, update=factory(**params),
                 xi_bound=xi_bound, params=dict(params))


def plant_from_model(model: PolyModel, xi_bound: float = 0.0) -> Plant:
    """Wrap a fitted model as a plant (useful for perfect-model studies)."""
    n = model.order

    def g(yr, ur):
        return model.predict(np.concatenate([yr[:n], ur[:n]]))

    return Plant(name="model", order=n, update=g, xi_bound=xi_bound)


def simulate_open_loop(plant: Plant, u, xi, y0) -> np.ndarray:
    """Iterate the plant under a given input and disturbance schedule.

    ``y0`` is the initial output regressor, newest first.  Returns the next
    outputs (y_1, ..., y_T); raises SimulationDiverged on a non-finite or
    runaway state.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != u.size:
        raise ValueError("u and xi must have the same length")
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if y0.size != plant.order:
        raise ValueError(f"initial regressor must have {plant.order} entries")
    n = plant.order
    y_hist = list(y0[::-1])          # oldest first
    u_hist = [0.0] * n
    out = np.empty(u.size)
    for t in range(u.size):
        u_hist.append(float(u[t]))
        yr = np.asarray(y_hist[-n:][::-1])
        ur = np.asarray(u_hist[-n:][::-1])
        ynext = plant.update(yr, ur) + float(xi[t])
        if not np.isfinite(ynext) or abs(ynext) > DIVERGENCE_LIMIT:
            raise SimulationDiverged(t)
        y_hist.append(ynext)
        out[t] = ynext
    return out


def generate_excitation(kind: str, length: int, u_bounds: tuple[float, float],
                        seed: int) -> np.ndarray:
    """Deterministic excitation signal inside the given bounds.

    Kinds: ``uniform`` (i.i.d. uniform), ``multisine`` (amplitude-modulated
    sum of incommensurate sinusoids), ``steps`` (random levels held for
    random durations).
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    lo, hi = float(u_bounds[0]), float(u_bounds[1])
    if hi < lo:
        raise ValueError("invalid bounds")
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        return rng.uniform(lo, hi, size=length)
    if kind == "multisine":
        t = np.arange(length)
        freqs = rng.uniform(0.02, 0.45, size=5)
        phases = rng.uniform(0, 2 * np.pi, size=5)
        amps = rng.uniform(0.5, 1.0, size=5)
        raw = (amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None])).sum(0)
        envelope = 0.6 + 0.4 * np.sin(2 * np.pi * rng.uniform(0.002, 0.01) * t)
        raw = raw * envelope
        peak = np.abs(raw).max()
        if peak == 0.0:
            return np.full(length, 0.5 * (lo + hi))
        center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return center + half * raw / peak
    if kind == "steps":
        out = np.empty(length)
        i = 0
        while i < length:
            hold = int(rng.integers(3, 12))
            out[i:i + hold] = rng.uniform(lo, hi)
            i += hold
        return out
    raise ValueError(f"unknown excitation kind '{kind}'")


def generate_reference(kind: str, horizon: int, seed: int = 0,
                       **params) -> np.ndarray:
    """Reference previews r_1 .. r_H for a closed-loop run."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = np.random.default_rng(seed)
    t = np.arange(1, horizon + 1)
    if kind == "steps":
        lo = params.get("low", -0.5)
        hi = params.get("high", 0.5)
        hold = int(params.get("hold", 50))
        levels = rng.uniform(lo, hi, size=horizon // hold + 1)
        return levels[t // hold]
    if kind == "sine":
        amp = params.get("amplitude", 0.5)
        period = params.get("period", 100.0)
        offset = params.get("offset", 0.0)
        return offset + amp * np.sin(2 * np.pi * t / period)
    if kind == "filtered":
        lo = params.get("low", -0.5)
        hi = params.get("high", 0.5)
        pole = params.get("pole", 0.95)
        w = rng.normal(size=horizon)
        r = np.empty(horizon)
        acc = 0.0
        for i in range(horizon):
            acc = pole * acc + (1 - pole) * w[i]
            r[i] = acc
        peak = np.abs(r).max()
        if peak > 0:
            r = r / peak
        return 0.5 * (lo + hi) + 0.5 * (hi - lo) * r
    raise ValueError(f"unknown reference kind '{kind}'")


@dataclass(frozen=True)
class Scenario:
    """One closed-loop experiment: plant, start, reference and disturbance."""

    name: str
    horizon: int
    y0: float = 0.0
    reference: dict | np.ndarray = field(default_factory=lambda: {"kind": "steps"})
    xi_amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.xi_amplitude < 0:
            raise ValueError("xi_amplitude must be non-negative")

    def reference_sequence(self) -> np.ndarray:
        if isinstance(self.reference, dict):
            spec = dict(self.reference)
            kind = spec.pop("kind")
            r = generate_reference(kind, self.horizon, seed=self.seed + 1, **spec)
        else:
            r = np.atleast_1d(np.asarray(self.reference, dtype=float))
            if r.size != self.horizon:
                raise ValueError("explicit reference length must equal horizon")
        if not np.isfinite(r).all():
            raise ValueError("reference values must be finite")
        return r


@dataclass(frozen=True)
class Trajectory:
    """Closed-loop record; all sequences share the recorded length."""

    r: np.ndarray
    y: np.ndarray
    u: np.ndarray
    xi: np.ndarray
    J: np.ndarray
    saturated: np.ndarray
    diverged: bool = False
    diverged_at: int | None = None

    @property
    def steps(self) -> int:
        return self.r.size


def run_closed_loop(plant: Plant, model: PolyModel, cfg: ControllerConfig,
                    scenario: Scenario) -> Trajectory:
    """Drive the plant with the inversion controller along the scenario.

    The controller consumes the reference preview r_{t+1} at step t.  The
    pre-horizon history is the scenario's initial output and zero commands.
    Divergence truncates the record and sets the flag.
    """
    n = model.order
    depth = max(n, plant.order)
    r = scenario.reference_sequence()
    H = r.size
    rng = np.random.default_rng(scenario.seed)
    xi = rng.uniform(-scenario.xi_amplitude, scenario.xi_amplitude, size=H) \
        if scenario.xi_amplitude > 0 else np.zeros(H)
    y_hist = [float(scenario.y0)] * depth
    u_hist = [0.0] * depth
    ys, us, js, sat = [], [], [], []
    diverged = False
    diverged_at = None
    q = np.empty(2 * n - 1)
    for t in range(H):
        q[:n] = y_hist[-n:][::-1]
        for j in range(n - 1):
            q[n + j] = u_hist[-1 - j]
        res = control_details(model, q, float(r[t]), cfg)
        yr = np.asarray(y_hist[-plant.order:][::-1])
        u_hist.append(res.u)
        ur = np.asarray(u_hist[-plant.order:][::-1])
        ynext = plant.update(yr, ur) + float(xi[t])
        if not np.isfinite(ynext) or abs(ynext) > DIVERGENCE_LIMIT:
            diverged = True
            diverged_at = t
            break
        y_hist.append(float(ynext))
        ys.append(float(ynext))
        us.append(res.u)
        js.append(res.objective_value)
        sat.append(res.saturated)
    k = len(ys)
    return Trajectory(r=r[:k], y=np.asarray(ys), u=np.asarray(us), xi=xi[:k],
                      J=np.asarray(js), saturated=np.asarray(sat, dtype=bool),
                      diverged=diverged, diverged_at=diverged_at)


def metrics(traj: Trajectory) -> dict:
    """Tracking and command-activity summary of one trajectory."""
    if traj.steps == 0:
        raise ValueError("empty trajectory")
    err = traj.y - traj.r
    return {
        "rms_error": float(np.sqrt(np.mean(np.square(err)))),
        "linf_error": float(np.abs(err).max()),
        "command_energy": float(np.sum(np.square(traj.u))),
        "saturation_duty": float(np.mean(traj.saturated)),
        "steps": int(traj.steps),
        "diverged": bool(traj.diverged),
    }


def generate_dataset(plant: Plant, kind: str, length: int,
                     u_bounds: tuple[float, float], seed: int,
                     y0: float = 0.0, sample_time: float = 1.0) -> DataSet:
    """Excite the plant open loop and package the aligned (u, y) record."""
    u = generate_excitation(kind, length, u_bounds, seed)
    rng = np.random.default_rng(seed + 1)
    xi = rng.uniform(-plant.xi_bound, plant.xi_bound, size=length) \
        if plant.xi_bound > 0 else np.zeros(length)
    y_next = simulate_open_loop(plant, u, xi, np.full(plant.order, y0))
    y = np.concatenate([[y0], y_next[:-1]])
    return DataSet(u=u, y=y, sample_time=sample_time)
