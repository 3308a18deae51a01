"""Concrete node models: Kuramoto phase oscillator, Jansen-Rit column, linear test node.

Every model maps a stack of node states ``X`` with shape ``(m, p)`` to a
stack of the same shape. Parameters may be scalars (shared by all nodes) or
length-``n`` arrays (one value per node), in which case ``m`` must equal ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import ClassVar

import numpy as np


def sigmoid(v, v0: float = 6.0, e0: float = 2.5, r: float = 0.56):
    """Potential-to-rate map ``2 e0 / (1 + exp(r (v0 - v)))`` in 1/s."""
    return 2.0 * e0 / (1.0 + np.exp(r * (v0 - np.asarray(v, dtype=float))))


def kuramoto_pairwise_coupling(theta, K: float) -> np.ndarray:
    """All-to-all phase coupling ``(K/N) sum_j sin(theta_j - theta_i)``."""
    theta = np.asarray(theta, dtype=float)
    N = theta.shape[0]
    return (K / N) * np.sin(theta[None, :] - theta[:, None]).sum(axis=1)


def _per_node(value, name: str):
    arr = np.asarray(value, dtype=float)
    if arr.ndim > 1:
        raise ValueError(f"parameter {name!r} must be a scalar or a per-node list")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"parameter {name!r} must be finite")
    return float(arr) if arr.ndim == 0 else arr


def _plain(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    return float(value)


class NodeDynamics:
    """Base class for the per-node drift ``f`` and coupling observable ``h``."""

    kind: ClassVar[str]
    p: ClassVar[int]
    observable_label: ClassVar[str] = "x"

    def drift(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def coupling_output(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def observable(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X)[..., 0]

    def analytic_theta_f(self) -> float | None:
        """Exact quadratic-condition constant, when one is known in closed form."""
        return None

    def analytic_theta_h(self) -> float | None:
        """Exact Lipschitz constant of ``coupling_output``, when known."""
        return None

    @property
    def n_nodes(self) -> int | None:
        """Number of nodes fixed by per-node parameters, or None if all are shared."""
        sizes = {len(v) for v in self._param_values().values() if isinstance(v, np.ndarray) and v.ndim == 1}
        if len(sizes) > 1:
            raise ValueError(f"per-node parameters of {self.kind} have inconsistent lengths {sorted(sizes)}")
        return sizes.pop() if sizes else None

    @property
    def homogeneous(self) -> bool:
        return self.n_nodes is None

    def _param_values(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def params(self) -> dict:
        return {k: _plain(v) for k, v in self._param_values().items()}

    @classmethod
    def from_params(cls, params: dict) -> "NodeDynamics":
        known = {f.name for f in fields(cls)}
        unknown = set(params) - known
        if unknown:
            raise KeyError(f"unknown {cls.kind} parameter(s): {', '.join(sorted(unknown))}")
        return cls(**{k: _per_node(v, k) for k, v in params.items()})


@dataclass(frozen=True)
class KuramotoNode(NodeDynamics):
    """Phase oscillator with natural frequency ``omega`` (rad/s).

    Phases are unwrapped reals so that tracking errors are plain differences.
    """

    omega: float | np.ndarray = 0.0

    kind: ClassVar[str] = "kuramoto"
    p: ClassVar[int] = 1
    observable_label: ClassVar[str] = r"$\sin\theta$"

    def drift(self, X):
        X = np.asarray(X, dtype=float)
        omega = self.omega[:, None] if isinstance(self.omega, np.ndarray) else self.omega
        return np.zeros_like(X) + omega

    def coupling_output(self, X):
        return np.sin(X)

    def observable(self, X):
        return np.sin(np.asarray(X)[..., 0])

    def analytic_theta_f(self):
        # constant drift: f(z + x_r) - f(x_r) vanishes identically
        return 0.0 if self.homogeneous else None

    def analytic_theta_h(self):
        return 1.0


@dataclass(frozen=True)
class JansenRitNode(NodeDynamics):
    """Jansen-Rit cortical column in SI-like units (mV, s).

    State order is ``(y0, y1, y2, y3, y4, y5)``: three postsynaptic potentials
    followed by their time derivatives. The coupling observable is the
    firing rate of the pyramidal population, injected into the velocity
    equation of the excitatory interneuron input (index 4).
    """

    A: float | np.ndarray = 3.25
    B: float | np.ndarray = 22.0
    a: float | np.ndarray = 100.0
    b: float | np.ndarray = 50.0
    C1: float | np.ndarray = 135.0
    C2: float | np.ndarray = 108.0
    C3: float | np.ndarray = 33.75
    C4: float | np.ndarray = 33.75
    v0: float | np.ndarray = 6.0
    e0: float | np.ndarray = 2.5
    r: float | np.ndarray = 0.56
    p_ext: float | np.ndarray = 90.0
    coupling_scale: float | np.ndarray = 1.0

    kind: ClassVar[str] = "jansen_rit"
    p: ClassVar[int] = 6
    observable_label: ClassVar[str] = r"$y_1 - y_2$ (mV)"
    COUPLING_CHANNEL: ClassVar[int] = 4

    def __post_init__(self):
        for name in ("a", "b", "r", "e0"):
            if np.any(np.asarray(getattr(self, name)) <= 0):
                raise ValueError(f"Jansen-Rit parameter {name!r} must be positive")

    def drift(self, X):
        return jansen_rit_drift(X, self)

    def coupling_output(self, X):
        return jansen_rit_coupling_output(X, self)

    def observable(self, X):
        X = np.asarray(X)
        return X[..., 1] - X[..., 2]

    def analytic_theta_h(self):
        if not self.homogeneous:
            return None
        # gradient of scale * S(y1 - y2) has norm sqrt(2) * scale * S'
        return float(np.sqrt(2.0) * abs(self.coupling_scale) * self.e0 * self.r / 2.0)

    @classmethod
    def from_params(cls, params):
        params = dict(params)
        # C2..C4 follow C1 unless given explicitly
        if "C1" in params:
            C1 = np.asarray(params["C1"], dtype=float)
            params.setdefault("C2", (0.8 * C1).tolist())
            params.setdefault("C3", (0.25 * C1).tolist())
            params.setdefault("C4", (0.25 * C1).tolist())
        return super().from_params(params)


def jansen_rit_drift(state, params: JansenRitNode, coupling_in=0.0) -> np.ndarray:
    """Right-hand side of the six Jansen-Rit equations.

    ``coupling_in`` is an extra rate (1/s) added to the external input of the
    excitatory channel, alongside ``p_ext``.
    """
    Y = np.asarray(state, dtype=float)
    if not np.all(np.isfinite(Y)):
        raise FloatingPointError("non-finite Jansen-Rit state")
    single = Y.ndim == 1
    Y = np.atleast_2d(Y)
    P = params
    y0, y1, y2, y3, y4, y5 = Y.T
    S = lambda v: sigmoid(v, P.v0, P.e0, P.r)  # noqa: E731
    out = np.empty_like(Y)
    out[:, 0] = y3
    out[:, 1] = y4
    out[:, 2] = y5
    out[:, 3] = P.A * P.a * S(y1 - y2) - 2.0 * P.a * y3 - P.a ** 2 * y0
    out[:, 4] = (P.A * P.a * (P.p_ext + coupling_in + P.C2 * S(P.C1 * y0))
                 - 2.0 * P.a * y4 - P.a ** 2 * y1)
    out[:, 5] = P.B * P.b * P.C4 * S(P.C3 * y0) - 2.0 * P.b * y5 - P.b ** 2 * y2
    return out[0] if single else out


def jansen_rit_coupling_output(state, params: JansenRitNode) -> np.ndarray:
    Y = np.asarray(state, dtype=float)
    out = np.zeros_like(Y)
    out[..., JansenRitNode.COUPLING_CHANNEL] = params.coupling_scale * sigmoid(
        Y[..., 1] - Y[..., 2], params.v0, params.e0, params.r)
    return out


@dataclass(frozen=True)
class LinearNode(NodeDynamics):
    """Linear drift ``f(x) = A x`` with identity coupling observable."""

    A: np.ndarray = field(default_factory=lambda: -np.eye(1))

    kind: ClassVar[str] = "linear"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"linear node matrix must be square, got shape {A.shape}")
        object.__setattr__(self, "A", A)

    @property
    def p(self) -> int:  # type: ignore[override]
        return self.A.shape[0]

    @property
    def n_nodes(self):
        return None

    def drift(self, X):
        return np.asarray(X, dtype=float) @ self.A.T

    def coupling_output(self, X):
        return np.array(X, dtype=float)

    def analytic_theta_f(self):
        return float(np.linalg.eigvalsh(0.5 * (self.A + self.A.T))[-1])

    def analytic_theta_h(self):
        return 1.0

    def params(self):
        return {"A": self.A.tolist()}

    @classmethod
    def from_params(cls, params):
        unknown = set(params) - {"A"}
        if unknown:
            raise KeyError(f"unknown linear parameter(s): {', '.join(sorted(unknown))}")
        return cls(A=np.asarray(params.get("A", [[-1.0]]), dtype=float))


DYNAMICS: dict[str, type[NodeDynamics]] = {
    cls.kind: cls for cls in (KuramotoNode, JansenRitNode, LinearNode)
}
