import numpy as np
import pytest
from scipy.optimize import fsolve

from pinctrl.dynamics import (
    JansenRitNode,
    KuramotoNode,
    LinearNode,
    jansen_rit_coupling_output,
    jansen_rit_drift,
    kuramoto_pairwise_coupling,
    sigmoid,
)

# right-hand sides at the zero state, evaluated at 30 digits with mpmath
S_AT_ZERO = 0.167846116407412593616455707671
JR_ZERO_RHS = [0.0, 0.0, 0.0, 54.549987832409092925348104993,
               35141.3986859001820359375953392, 6231.28707162519253801091814728]


def brute_force_coupling(theta, K):
    N = len(theta)
    out = np.zeros(N)
    for i in range(N):
        for j in range(N):
            out[i] += np.sin(theta[j] - theta[i])
    return K / N * out


class TestKuramoto:
    def test_equal_phases(self):
        np.testing.assert_array_equal(kuramoto_pairwise_coupling(np.full(5, 0.7), 3.0), np.zeros(5))

    def test_two_nodes(self):
        np.testing.assert_allclose(kuramoto_pairwise_coupling([0.0, np.pi / 2], 2.0), [1.0, -1.0], atol=1e-15)

    def test_matches_double_loop(self):
        theta = np.random.default_rng(3).uniform(-10, 10, 10)
        np.testing.assert_allclose(kuramoto_pairwise_coupling(theta, 10.0),
                                   brute_force_coupling(theta, 10.0), rtol=1e-12, atol=1e-13)

    @pytest.mark.parametrize("shift", [0.3, -2.0, 17.0])
    def test_shift_invariance(self, shift):
        theta = np.random.default_rng(4).uniform(0, 6, 7)
        np.testing.assert_allclose(kuramoto_pairwise_coupling(theta + shift, 4.0),
                                   kuramoto_pairwise_coupling(theta, 4.0), atol=1e-12)

    def test_node_drift_is_frequency(self):
        node = KuramotoNode(omega=np.array([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(node.drift(np.zeros((3, 1))), [[1.0], [2.0], [3.0]])
        assert node.n_nodes == 3
        assert KuramotoNode(omega=np.pi / 2).analytic_theta_f() == 0.0


class TestSigmoid:
    def test_midpoint(self):
        assert sigmoid(6.0) == pytest.approx(2.5, rel=1e-15)

    def test_saturation(self):
        assert sigmoid(1e4) == pytest.approx(5.0, rel=1e-15)

    def test_closed_form(self):
        assert sigmoid(6.0 + 1 / 0.56) == pytest.approx(5.0 / (1 + np.exp(-1.0)), rel=1e-14)
        assert sigmoid(6.0 + 1 / 0.56) == pytest.approx(3.65529289315002439625579620911, rel=1e-14)

    def test_bounded_monotone(self):
        v = np.linspace(-50, 50, 2001)
        s = sigmoid(v)
        assert np.all((s > 0) & (s < 5.0))
        assert np.all(np.diff(s) >= 0)

    def test_lipschitz_bound(self):
        v = np.linspace(-40, 50, 400_001)
        slopes = np.abs(np.diff(sigmoid(v)) / np.diff(v))
        assert slopes.max() <= 2.5 * 0.56 / 2 + 1e-9


class TestJansenRit:
    def test_zero_state_rhs(self):
        np.testing.assert_allclose(jansen_rit_drift(np.zeros(6), JansenRitNode()), JR_ZERO_RHS, rtol=1e-13)

    def test_sigmoid_at_zero(self):
        assert sigmoid(0.0) == pytest.approx(S_AT_ZERO, rel=1e-14)

    def test_equilibrium_from_root_solver(self):
        node = JansenRitNode()
        y = fsolve(lambda y: jansen_rit_drift(y, node), np.zeros(6), xtol=1e-13)
        assert np.linalg.norm(jansen_rit_drift(y, node)) < 1e-8

    def test_linear_in_A(self):
        y = np.array([0.01, 3.0, 2.0, 1.0, -4.0, 2.0])
        base = JansenRitNode(A=3.25)
        d1 = jansen_rit_drift(y, base)
        d2 = jansen_rit_drift(y, JansenRitNode(A=6.5))
        lin = lambda d: d[3] + 2 * base.a * y[3] + base.a ** 2 * y[0]  # noqa: E731
        assert lin(d2) == pytest.approx(2 * lin(d1), rel=1e-12)
        np.testing.assert_array_equal(d1[[0, 1, 2, 5]], d2[[0, 1, 2, 5]])

    def test_coupling_in_adds_to_input(self):
        y = np.zeros(6)
        P = JansenRitNode()
        d = jansen_rit_drift(y, P, coupling_in=10.0) - jansen_rit_drift(y, P)
        np.testing.assert_allclose(d, [0, 0, 0, 0, P.A * P.a * 10.0, 0], atol=1e-9)

    def test_nonfinite_state_raises(self):
        with pytest.raises(FloatingPointError):
            jansen_rit_drift(np.array([np.nan, 0, 0, 0, 0, 0]), JansenRitNode())

    def test_coupling_output_midpoint(self):
        y = np.array([0.0, 2.0, 2.0, 0, 0, 0])
        np.testing.assert_allclose(jansen_rit_coupling_output(y, JansenRitNode(coupling_scale=3.0)),
                                   [0, 0, 0, 0, 3.0 * sigmoid(0.0), 0])

    def test_coupling_output_identical_states(self):
        y = np.array([0.1, 4.0, 1.0, 2.0, -3.0, 1.0])
        P = JansenRitNode()
        np.testing.assert_array_equal(jansen_rit_coupling_output(y, P) - jansen_rit_coupling_output(y.copy(), P), 0)

    def test_coupling_lipschitz_on_trajectory_box(self):
        P = JansenRitNode()
        rng = np.random.default_rng(0)
        Z = rng.uniform(-20, 20, (20000, 6))
        Y = Z + rng.normal(scale=1e-3, size=Z.shape)
        h = lambda X: jansen_rit_coupling_output(X, P)  # noqa: E731
        slopes = np.linalg.norm(h(Z) - h(Y), axis=1) / np.linalg.norm(Z - Y, axis=1)
        assert 0 < slopes.max() <= P.analytic_theta_h() + 1e-9
        assert np.isfinite(slopes).all()

    def test_per_node_parameters_vectorize(self):
        P = JansenRitNode(A=np.array([3.6, 3.25]))
        X = np.random.default_rng(1).normal(size=(2, 6))
        out = P.drift(X)
        np.testing.assert_allclose(out[0], jansen_rit_drift(X[0], JansenRitNode(A=3.6)))
        np.testing.assert_allclose(out[1], jansen_rit_drift(X[1], JansenRitNode(A=3.25)))

    def test_c1_drives_defaults(self):
        P = JansenRitNode.from_params({"C1": 100.0})
        assert (P.C2, P.C3, P.C4) == pytest.approx((80.0, 25.0, 25.0))

    def test_rejects_nonpositive_rate(self):
        with pytest.raises(ValueError, match="'a'"):
            JansenRitNode(a=0.0)


class TestLinear:
    def test_quadratic_constant_is_top_symmetric_eigenvalue(self):
        A = np.array([[1.0, 4.0], [0.0, -2.0]])
        node = LinearNode(A=A)
        assert node.analytic_theta_f() == pytest.approx(np.linalg.eigvalsh((A + A.T) / 2).max())

    def test_difference_is_exactly_linear(self):
        A = np.random.default_rng(5).normal(size=(3, 3))
        node = LinearNode(A=A)
        z, xr = np.array([[0.5, -1.0, 2.0]]), np.array([[1.0, 2.0, 3.0]])
        np.testing.assert_allclose(node.drift(z + xr) - node.drift(xr), z @ A.T, rtol=1e-14)

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            LinearNode(A=np.ones((2, 3)))
