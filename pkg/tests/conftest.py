import numpy as np
import pytest


def linear_doc(A, adjacency, c, gain, x0, pin="all", x_r0=None, dt=1e-3, t_end=1.0,
               record_stride=1, name="linear"):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    p = A.shape[0]
    return {
        "name": name,
        "model": {
            "dynamics": "linear",
            "params": {"A": A.tolist()},
            "coupling": {"mode": "laplacian", "strength": float(c),
                         "adjacency": np.asarray(adjacency, dtype=float).tolist()},
        },
        "reference": {"initial": [0.0] * p if x_r0 is None else list(map(float, x_r0))},
        "controller": {"pin": pin, "gain": float(gain)},
        "initial": {"states": np.asarray(x0, dtype=float).tolist()},
        "integration": {"dt": dt, "t_end": t_end, "record_stride": record_stride},
    }


def random_certified_linear(rng, n_max=5, p_max=3):
    """A random linear network plus a gain that makes the certificate strictly negative."""
    n = int(rng.integers(2, n_max + 1))
    p = int(rng.integers(1, p_max + 1))
    A = rng.normal(scale=1.0, size=(p, p))
    W = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < 0.7)
    W = np.triu(W, 1)
    W = W + W.T
    c = float(rng.uniform(0.1, 1.0))
    L = np.diag(W.sum(1)) - W
    theta_f = float(np.linalg.eigvalsh(0.5 * (A + A.T))[-1])
    norm = float(np.max(np.abs(np.linalg.eigvalsh(L))))
    bracket = theta_f + c * norm
    margin = float(rng.uniform(0.5, 2.0))
    gain = max(0.0, bracket + margin)
    x0 = rng.normal(size=(n, p))
    return dict(A=A, adjacency=W, c=c, gain=gain, x0=x0, expected_lambda=bracket - gain)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
