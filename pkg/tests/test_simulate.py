import numpy as np
import pytest

from conftest import linear_doc
from pinctrl.certify import certify_scenario
from pinctrl.graph import path_adjacency
from pinctrl.model import network_drift, reference_drift
from pinctrl.scenario import load_bundled, scenario_from_dict
from pinctrl.simulate import (
    IntegrationSettings,
    SimulationFault,
    check_proof_bounds,
    lyapunov_uphill,
    lyapunov_V,
    order_parameter,
    simulate,
    v_decomposition,
)


def rk4_decay_error(dt, t_end=1.0):
    from pinctrl.simulate import step_rk4
    x = np.array([1.0])
    for _ in range(int(round(t_end / dt))):
        x = step_rk4(lambda s: -s, x, dt)
    return abs(x[0] - np.exp(-t_end))


class TestRK4:
    def test_zero_drift(self):
        from pinctrl.simulate import step_rk4
        x = np.array([1.0, -2.0])
        np.testing.assert_array_equal(step_rk4(lambda s: np.zeros_like(s), x, 0.1), x)

    def test_constant_drift(self):
        from pinctrl.simulate import step_rk4
        assert step_rk4(lambda s: np.ones_like(s), np.array([0.0]), 0.1)[0] == pytest.approx(0.1, abs=1e-16)

    def test_exponential_decay(self):
        assert rk4_decay_error(0.01) < 1e-9

    @pytest.mark.parametrize("dt", [1e-2, 5e-3])
    def test_fourth_order(self, dt):
        assert 14 <= rk4_decay_error(dt) / rk4_decay_error(dt / 2) <= 18

    def test_nonfinite_raises(self):
        from pinctrl.simulate import step_rk4
        with pytest.raises(FloatingPointError):
            step_rk4(lambda s: s * np.inf, np.array([1.0]), 0.1)


class TestLyapunov:
    def test_zero(self):
        assert lyapunov_V(np.zeros((3, 2))) == 0.0

    def test_single(self):
        assert lyapunov_V([[3.0, 4.0]]) == 12.5

    def test_frobenius_oracle(self, rng):
        e = rng.normal(size=(6, 4))
        assert lyapunov_V(e) == pytest.approx(0.5 * np.linalg.norm(e, "fro") ** 2, rel=1e-14)

    def test_uphill_detection(self):
        assert list(lyapunov_uphill([3.0, 2.0, 2.0 + 1e-8, 2.5])) == [2]


class TestVDecomposition:
    def test_zero_error(self):
        sc = load_bundled("jansen_rit_paper")
        x = sc.reference_initial
        X = np.tile(x, (2, 1))
        v = v_decomposition(sc.reference_model, X, x, np.zeros((2, 6)))
        assert v == (0.0, 0.0, 0.0)

    def test_hand_built_linear(self):
        # f(x) = 0.5 x, path graph, c = 2, gain 3 on node 1, x = (1, 4), x_r = 2
        sc = scenario_from_dict(linear_doc([[0.5]], path_adjacency(2), 2.0, 3.0, [[1.0], [4.0]],
                                           pin=[1, 0], x_r0=[2.0]))
        e = np.array([[-1.0], [2.0]])
        u = np.array([[3.0], [0.0]])
        v1, v2, v3 = v_decomposition(sc.model, [[1.0], [4.0]], [2.0], u, sc.reference_model)
        assert (v1, v2, v3) == pytest.approx((2.5, -18.0, -3.0), rel=1e-15)
        assert v3 == pytest.approx(float(np.sum(e * u)))

    def test_zero_gain_v3(self, rng):
        sc = load_bundled("jansen_rit_paper").with_overrides(gain=0.0)
        X = sc.initial_states
        assert v_decomposition(sc.model, X, sc.reference_initial, np.zeros_like(X), sc.reference_model)[2] == 0.0

    def test_sum_equals_e_dot_edot(self, rng):
        sc = load_bundled("jansen_rit_paper")
        X = sc.initial_states + rng.normal(size=(2, 6))
        xr = sc.reference_initial + rng.normal(size=6)
        U = -30.0 * (X - xr)
        edot = network_drift(sc.model, X, U) - reference_drift(sc.reference_model, xr)
        direct = float(np.sum((X - xr) * edot))
        total = sum(v_decomposition(sc.model, X, xr, U, sc.reference_model))
        assert total == pytest.approx(direct, rel=1e-9)


class TestOrderParameter:
    def test_equal(self):
        assert order_parameter(np.full(7, 1.3)) == pytest.approx(1.0, abs=1e-15)

    def test_symmetric(self):
        assert order_parameter([0, np.pi / 2, np.pi, 3 * np.pi / 2]) == pytest.approx(0.0, abs=1e-15)

    def test_two_phases(self):
        # direct complex-sum evaluation of |(1 + exp(i pi/3)) / 2|
        assert order_parameter([0.0, np.pi / 3]) == pytest.approx(0.8660254037844387, rel=1e-15)

    def test_rejects_vector_states(self):
        with pytest.raises(ValueError):
            order_parameter(np.zeros((3, 2)))


class TestSimulate:
    def test_synchronized_start_stays_synchronized(self):
        sc = load_bundled("jansen_rit_paper").with_overrides(gain=0.0, t_end=0.5)
        doc = sc.document
        doc["model"]["params"]["A"] = [3.25, 3.25]
        doc["initial"] = {"states": [doc["reference"]["initial"]] * 2}
        rec = simulate(scenario_from_dict(doc))
        assert np.all(rec.V == 0.0)
        assert np.all(rec.error_norms == 0.0)

    def test_record_layout(self):
        sc = scenario_from_dict(linear_doc([[-1.0]], path_adjacency(2), 1.0, 1.0, [[1.0], [2.0]],
                                           dt=0.01, t_end=0.1, record_stride=3))
        rec = simulate(sc)
        np.testing.assert_allclose(rec.times, [0.0, 0.03, 0.06, 0.09, 0.1])
        assert rec.states.shape == (5, 2, 1)
        assert all(len(getattr(rec, k)) == 5 for k in ("V", "v1", "v2", "v3", "error_norms", "inputs"))
        assert np.all(rec.V >= 0)

    def test_pinned_inputs_are_exact(self):
        sc = scenario_from_dict(linear_doc(np.eye(2), path_adjacency(3), 0.5, 4.0,
                                           np.arange(6.0).reshape(3, 2), pin=[1, 0, 1], t_end=0.2))
        rec = simulate(sc)
        E = rec.errors
        np.testing.assert_array_equal(rec.inputs[:, [0, 2]], -4.0 * E[:, [0, 2]])
        assert np.all(rec.inputs[:, 1] == 0.0)

    def test_blowup_fault_keeps_partial_record(self):
        sc = scenario_from_dict(linear_doc([[40.0]], path_adjacency(2), 0.0, 0.0, [[1.0], [1.0]],
                                           dt=0.01, t_end=100.0))
        with pytest.raises(SimulationFault) as info:
            simulate(sc)
        assert info.value.record is not None and len(info.value.record) > 1
        assert np.all(np.isfinite(info.value.record.states))
        assert 0 < info.value.time < 100.0

    def test_invalid_settings(self):
        with pytest.raises(ValueError):
            IntegrationSettings(dt=0.0)
        with pytest.raises(ValueError):
            IntegrationSettings(dt=0.1, t_end=0.01)
        with pytest.raises(ValueError):
            IntegrationSettings(record_stride=0)

    def test_vdot_matches_numerical_derivative(self):
        A = np.array([[-0.5, 2.0], [-1.0, 0.3]])
        dt = 1e-3
        sc = scenario_from_dict(linear_doc(A, path_adjacency(3), 0.8, 2.5, [[1, 0], [0, 2], [-1, 1]],
                                           dt=dt, t_end=2.0))
        rec = simulate(sc)
        vsum = rec.v1 + rec.v2 + rec.v3
        numeric = (rec.V[2:] - rec.V[:-2]) / (2 * dt)
        scale = max(1.0, np.abs(vsum).max())
        assert np.max(np.abs(numeric - vsum[1:-1])) <= 2 * dt ** 2 * scale * 10

    def test_kuramoto_locks_to_reference_frequency(self):
        rec = simulate(load_bundled("kuramoto_paper").with_overrides(t_end=10.0))
        E = rec.errors[:, :, 0]
        drift_rate = np.abs(E[-1] - E[-101]) / (rec.times[-1] - rec.times[-101])
        assert drift_rate.max() < 1e-3
        assert np.all(np.abs(E[-1]) < 2 * np.pi + 0.5 * 4 * np.pi)


class TestProofBounds:
    def test_zero_error_trajectory(self):
        sc = scenario_from_dict(linear_doc([[1.0]], path_adjacency(2), 1.0, 5.0, [[0.0], [0.0]], t_end=0.1))
        rec = simulate(sc)
        rep = check_proof_bounds(rec, certify_scenario(sc))
        assert rep.ok
        assert all(v == 0.0 for v in rep.worst_margin.values())

    def test_linear_exact_constants_hold(self):
        A = np.array([[0.4, 1.0], [-0.5, -0.2]])
        sc = scenario_from_dict(linear_doc(A, path_adjacency(3), 0.6, 3.5, [[1, 0], [0, 2], [-1, 1]],
                                           t_end=3.0))
        cert = certify_scenario(sc)
        assert cert.certified
        rep = check_proof_bounds(simulate(sc), cert)
        assert rep.ok, rep.violations

    def test_kuramoto_v2_v3_hold(self):
        sc = load_bundled("kuramoto_paper").with_overrides(t_end=5.0)
        rep = check_proof_bounds(simulate(sc), certify_scenario(sc))
        assert rep.violations["v2"] == []
        assert rep.violations["v3"] == []
