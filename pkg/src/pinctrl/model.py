"""Network-coupled system, reference dynamics and the pinning feedback law."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import NodeDynamics
from .graph import validate_laplacian

LAPLACIAN = "laplacian"
PAIRWISE_SINE = "pairwise-sine"
COUPLING_MODES = (LAPLACIAN, PAIRWISE_SINE)


@dataclass(frozen=True)
class NetworkModel:
    """``n`` copies of a node model coupled through a graph Laplacian.

    In ``laplacian`` mode node ``i`` feels ``-c sum_j L_ij h(x_j)``. In
    ``pairwise-sine`` mode (phase oscillators, p = 1) it feels
    ``c sum_j A_ij sin(x_j - x_i)`` with ``A`` the adjacency behind ``L``;
    on the complete graph with ``c = K/N`` this is the Kuramoto coupling.
    """

    dynamics: NodeDynamics
    L: np.ndarray
    c: float
    coupling_mode: str = LAPLACIAN
    _adjacency: np.ndarray = field(init=False, repr=False, compare=False)
    _row_sums: np.ndarray = field(init=False, repr=False, compare=False)
    _homogeneous: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        L = validate_laplacian(self.L)
        object.__setattr__(self, "L", L)
        if not np.isfinite(self.c):
            raise ValueError("coupling strength must be finite")
        if self.coupling_mode not in COUPLING_MODES:
            raise ValueError(f"unknown coupling mode {self.coupling_mode!r}")
        if self.coupling_mode == PAIRWISE_SINE and self.p != 1:
            raise ValueError("pairwise-sine coupling requires p = 1")
        n_dyn = self.dynamics.n_nodes
        if n_dyn is not None and n_dyn != self.n:
            raise ValueError(f"per-node parameters have length {n_dyn}, network has {self.n} nodes")
        object.__setattr__(self, "_adjacency", np.diag(np.diag(L)) - L)
        object.__setattr__(self, "_row_sums", L.sum(axis=1))
        object.__setattr__(self, "_homogeneous", n_dyn is None)

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def p(self) -> int:
        return self.dynamics.p

    @property
    def adjacency(self) -> np.ndarray:
        return self._adjacency


@dataclass(frozen=True)
class Controller:
    """Pinning law ``u_i = -w_i * gain * e_i`` with binary mask ``w``."""

    pin_mask: np.ndarray
    gain: float

    def __post_init__(self):
        w = np.asarray(self.pin_mask)
        if w.ndim != 1 or not np.all((w == 0) | (w == 1)):
            raise ValueError("pin mask entries must be 0 or 1")
        object.__setattr__(self, "pin_mask", w.astype(int))
        if not (np.isfinite(self.gain) and self.gain >= 0):
            raise ValueError(f"gain must be finite and nonnegative, got {self.gain!r}")

    @property
    def n(self) -> int:
        return len(self.pin_mask)


def _check_shape(name: str, arr: np.ndarray, shape: tuple) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
    return arr


def error_state(states, x_r) -> np.ndarray:
    """Per-node tracking error ``e_i = x_i - x_r``."""
    return np.asarray(states, dtype=float) - np.asarray(x_r, dtype=float)[None, :]


def coupling_term(model: NetworkModel, states) -> np.ndarray:
    """Coupling contribution to each node's drift, shape ``(n, p)``."""
    if model.coupling_mode == PAIRWISE_SINE:
        theta = states[:, 0]
        coupling = (model.adjacency * np.sin(theta[None, :] - theta[:, None])).sum(axis=1)
        return model.c * coupling[:, None]
    return -model.c * (model.L @ model.dynamics.coupling_output(states))


def reference_coupling_term(model: NetworkModel, x_r) -> np.ndarray:
    """Coupling each node would feel if every node sat at ``x_r``, shape ``(n, p)``."""
    x_r = np.asarray(x_r, dtype=float)
    if model.coupling_mode == PAIRWISE_SINE:
        # sin(x_r - x_r) = 0 for every pair
        return np.zeros((model.n, model.p))
    return -model.c * model._row_sums[:, None] * model.dynamics.coupling_output(x_r[None, :])


def network_drift(model: NetworkModel, states, inputs) -> np.ndarray:
    """Drift of the controlled network: ``f(x_i) + coupling_i + u_i``."""
    shape = (model.n, model.p)
    X = _check_shape("states", states, shape)
    U = _check_shape("inputs", inputs, shape)
    return model.dynamics.drift(X) + coupling_term(model, X) + U


def reference_drift(model: NetworkModel, x_r) -> np.ndarray:
    """Drift of the reference trajectory, coupling term included.

    Every row of a valid Laplacian sums to zero, so the coupling term vanishes
    and all rows agree; the first row is returned.
    """
    x_r = _check_shape("x_r", x_r, (model.p,))
    if not model._homogeneous:
        raise ValueError("reference dynamics must use shared (scalar) parameters")
    return model.dynamics.drift(x_r[None, :])[0] + reference_coupling_term(model, x_r)[0]


def control_input(ctrl: Controller, e) -> np.ndarray:
    """Pinning input; rows of unpinned nodes are exactly zero."""
    e = np.asarray(e, dtype=float)
    if e.ndim != 2 or e.shape[0] != ctrl.n:
        raise ValueError(f"error has shape {e.shape}, expected ({ctrl.n}, p)")
    pinned = ctrl.pin_mask[:, None] == 1
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(pinned, -ctrl.gain * e, 0.0)
