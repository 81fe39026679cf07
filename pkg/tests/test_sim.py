"""Plants, excitation, closed-loop execution and metrics."""

import numpy as np
import pytest

from conftest import identity_model
from nic.invert import ControllerConfig
from nic.sim import (Plant, Scenario, SimulationDiverged, generate_dataset,
                     generate_excitation, generate_reference, make_plant,
                     metrics, plant_from_model, run_closed_loop,
                     simulate_open_loop)


class TestOpenLoop:
    def test_geometric_decay(self):
        plant = Plant(name="decay", order=1, update=lambda yr, ur: 0.5 * yr[0])
        y = simulate_open_loop(plant, np.zeros(10), np.zeros(10), [1.0])
        np.testing.assert_allclose(y, 0.5 ** np.arange(1, 11))

    def test_zero_map(self):
        plant = Plant(name="null", order=1, update=lambda yr, ur: 0.0)
        y = simulate_open_loop(plant, np.ones(5), np.zeros(5), [3.0])
        np.testing.assert_array_equal(y, np.zeros(5))

    def test_matches_independent_recursion(self, rng):
        # oracle: an independently coded recursion for the same update rule
        a1, a2, b1, c = 0.3, -0.2, 0.4, 0.25
        plant = make_plant("stiffening2", a1=a1, a2=a2, b1=b1, b2=0.0, c3=-c)
        u = rng.uniform(-1, 1, 40)
        xi = rng.uniform(-0.01, 0.01, 40)
        y0 = [0.1, -0.05]
        got = simulate_open_loop(plant, u, xi, y0)
        hist = [y0[1], y0[0]]
        uh = [0.0, 0.0]
        want = []
        for t in range(40):
            uh.append(u[t])
            nxt = a1 * hist[-1] + a2 * hist[-2] + b1 * uh[-1] \
                - c * hist[-1] ** 3 + xi[t]
            hist.append(nxt)
            want.append(nxt)
        np.testing.assert_allclose(got, want, atol=1e-14)

    def test_divergence_reports_step(self):
        plant = Plant(name="boom", order=1, update=lambda yr, ur: 3.0 * yr[0])
        with pytest.raises(SimulationDiverged) as exc:
            simulate_open_loop(plant, np.zeros(100), np.zeros(100), [1.0])
        assert 0 < exc.value.step < 100

    def test_regressor_length_validated(self):
        plant = make_plant("bilinear2")
        with pytest.raises(ValueError):
            simulate_open_loop(plant, np.zeros(5), np.zeros(5), [1.0])


class TestExcitation:
    def test_zero_width_bounds_constant(self):
        u = generate_excitation("uniform", 50, (0.3, 0.3), seed=1)
        np.testing.assert_array_equal(u, np.full(50, 0.3))

    @pytest.mark.parametrize("kind", ["uniform", "multisine", "steps"])
    def test_deterministic_per_seed(self, kind):
        a = generate_excitation(kind, 200, (-1, 1), seed=5)
        b = generate_excitation(kind, 200, (-1, 1), seed=5)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("kind", ["uniform", "multisine", "steps"])
    def test_within_bounds(self, kind):
        u = generate_excitation(kind, 500, (-0.4, 0.9), seed=2)
        assert u.min() >= -0.4 - 1e-12 and u.max() <= 0.9 + 1e-12

    def test_uniform_coverage(self):
        u = generate_excitation("uniform", 10_000, (-1, 1), seed=3)
        assert (u.max() - u.min()) / 2.0 >= 0.95

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            generate_excitation("sawtooth", 10, (-1, 1), seed=0)


class TestReferences:
    @pytest.mark.parametrize("kind", ["steps", "sine", "filtered"])
    def test_deterministic_and_finite(self, kind):
        r1 = generate_reference(kind, 200, seed=7)
        r2 = generate_reference(kind, 200, seed=7)
        np.testing.assert_array_equal(r1, r2)
        assert np.isfinite(r1).all()


class TestClosedLoop:
    def test_perfect_model_tracks_exactly(self):
        model = identity_model()
        plant = plant_from_model(model)
        cfg = ControllerConfig(-1, 1, mu=0.0)
        sc = Scenario(name="sine", horizon=300,
                      reference={"kind": "sine", "amplitude": 0.5,
                                 "period": 70}, seed=2)
        traj = run_closed_loop(plant, model, cfg, sc)
        assert not traj.diverged
        assert np.abs(traj.y - traj.r).max() <= 1e-9

    def test_unreachable_reference_pins_saturation(self):
        model = identity_model()
        plant = plant_from_model(model)
        cfg = ControllerConfig(-1, 1, mu=0.0)
        sc = Scenario(name="big", horizon=20, reference=np.full(20, 5.0))
        traj = run_closed_loop(plant, model, cfg, sc)
        np.testing.assert_array_equal(traj.u, np.ones(20))
        assert traj.saturated.all()

    def test_reproducible_bit_for_bit(self):
        model = identity_model()
        plant = plant_from_model(model, xi_bound=0.0)
        cfg = ControllerConfig(-1, 1, mu=0.0)
        sc = Scenario(name="noisy", horizon=150,
                      reference={"kind": "filtered", "low": -0.5, "high": 0.5},
                      xi_amplitude=0.02, seed=9)
        t1 = run_closed_loop(plant, model, cfg, sc)
        t2 = run_closed_loop(plant, model, cfg, sc)
        for a, b in ((t1.y, t2.y), (t1.u, t2.u), (t1.xi, t2.xi), (t1.J, t2.J)):
            np.testing.assert_array_equal(a, b)

    def test_commands_always_inside_bounds(self, rng):
        model = identity_model()
        plant = plant_from_model(model)
        cfg = ControllerConfig(-0.6, 0.8, mu=0.0)
        sc = Scenario(name="wild", horizon=100,
                      reference=rng.uniform(-3, 3, 100), seed=1)
        traj = run_closed_loop(plant, model, cfg, sc)
        assert traj.u.min() >= -0.6 and traj.u.max() <= 0.8

    def test_divergence_truncates_with_flag(self):
        unstable = Plant(name="boom", order=1,
                         update=lambda yr, ur: 3.0 * yr[0] + 1e-3 * ur[0])
        model = identity_model()
        sc = Scenario(name="explode", horizon=100,
                      reference=np.zeros(100), y0=1.0)
        traj = run_closed_loop(unstable, model, ControllerConfig(-1, 1), sc)
        assert traj.diverged
        assert traj.diverged_at is not None
        assert traj.steps < 100

    def test_different_plant_and_model_orders(self):
        plant = make_plant("bilinear2")
        model = identity_model()
        sc = Scenario(name="mix", horizon=50,
                      reference={"kind": "sine", "amplitude": 0.2}, seed=3)
        traj = run_closed_loop(plant, model, ControllerConfig(-1, 1), sc)
        assert traj.steps == 50


class TestMetrics:
    def test_perfect_tracking_zero_error(self):
        traj = _traj(y=[0.1, 0.2], r=[0.1, 0.2], u=[0.0, 0.1])
        m = metrics(traj)
        assert m["rms_error"] == 0.0 and m["linf_error"] == 0.0

    def test_constant_offset(self):
        traj = _traj(y=[0.5, 0.5], r=[0.2, 0.2], u=[0.0, 0.0])
        m = metrics(traj)
        assert m["rms_error"] == pytest.approx(0.3)
        assert m["linf_error"] == pytest.approx(0.3)

    def test_matches_naive_formulas(self, rng):
        y = rng.normal(size=50)
        r = rng.normal(size=50)
        u = rng.normal(size=50)
        sat = rng.uniform(size=50) < 0.2
        traj = _traj(y=y, r=r, u=u, saturated=sat)
        m = metrics(traj)
        assert m["rms_error"] == pytest.approx(
            np.sqrt(sum((a - b) ** 2 for a, b in zip(y, r)) / 50))
        assert m["linf_error"] == pytest.approx(max(abs(a - b)
                                                    for a, b in zip(y, r)))
        assert m["command_energy"] == pytest.approx(sum(v * v for v in u))
        assert m["saturation_duty"] == pytest.approx(sum(sat) / 50)


def _traj(y, r, u, saturated=None):
    from nic.sim import Trajectory
    k = len(y)
    return Trajectory(r=np.asarray(r, float), y=np.asarray(y, float),
                      u=np.asarray(u, float), xi=np.zeros(k), J=np.zeros(k),
                      saturated=np.zeros(k, bool) if saturated is None
                      else np.asarray(saturated, bool))


class TestPlantRegistry:
    @pytest.mark.parametrize("name", ["linear1", "bilinear2", "stiffening2",
                                      "deadzone2"])
    def test_registered_plants_stay_bounded(self, name, rng):
        plant = make_plant(name)
        u = rng.uniform(-1, 1, 400)
        y = simulate_open_loop(plant, u, np.zeros(400),
                               np.zeros(plant.order))
        assert np.abs(y).max() < 10.0

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            make_plant("warpdrive")

    def test_deadzone_kills_small_inputs(self):
        plant = make_plant("deadzone2", width=0.3)
        y = simulate_open_loop(plant, np.full(20, 0.2), np.zeros(20),
                               np.zeros(2))
        np.testing.assert_array_equal(y, np.zeros(20))


class TestGenerateDataset:
    def test_alignment_one_step_shift(self):
        plant = make_plant("linear1", a=0.0, b=1.0)  # y_{t+1} = u_t
        data = generate_dataset(plant, "uniform", 30, (-1, 1), seed=4)
        np.testing.assert_allclose(data.y[1:], data.u[:-1])

    def test_divergence_propagates(self):
        plant = Plant(name="boom", order=1, update=lambda yr, ur: 4.0 * yr[0])
        import nic.sim as sim_mod
        with pytest.raises(SimulationDiverged):
            sim_mod.simulate_open_loop(plant, np.zeros(50), np.zeros(50), [1.0])


class TestScenario:
    def test_validation(self):
        with pytest.raises(ValueError):
            Scenario(name="bad", horizon=0)
        with pytest.raises(ValueError):
            Scenario(name="bad", horizon=5, xi_amplitude=-1.0)
        with pytest.raises(ValueError):
            Scenario(name="bad", horizon=5,
                     reference=np.array([1.0, 2.0])).reference_sequence()
