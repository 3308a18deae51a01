"""Joint integration of the controlled network and its reference trajectory.

The controlled states and the reference are stepped together by one
fixed-step RK4 scheme, with the pinning input re-evaluated at every stage,
so recorded errors are exact differences on a shared time grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import (
    Controller,
    NetworkModel,
    control_input,
    coupling_term,
    error_state,
    reference_coupling_term,
    reference_drift,
)

logger = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e9


class SimulationFault(RuntimeError):
    """Integration produced a non-finite or exploding state.

    ``record`` holds everything recorded up to the last finite sample.
    """

    def __init__(self, message: str, time: float, record: "TrajectoryRecord | None" = None):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time
        self.record = record


@dataclass(frozen=True)
class IntegrationSettings:
    dt: float = 1e-3
    t_end: float = 10.0
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.t_end >= self.dt:
            raise ValueError(f"t_end must be at least dt, got t_end={self.t_end!r}, dt={self.dt!r}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError(f"record_stride must be a positive integer, got {self.record_stride!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class TrajectoryRecord:
    """Time series sampled every ``record_stride`` steps (and at the final step)."""

    times: np.ndarray
    states: np.ndarray       # (T, n, p)
    reference: np.ndarray    # (T, p)
    inputs: np.ndarray       # (T, n, p)
    V: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    error_norms: np.ndarray  # (T, n)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def p(self) -> int:
        return self.states.shape[2]

    @property
    def errors(self) -> np.ndarray:
        return self.states - self.reference[:, None, :]

    @property
    def total_error_norm(self) -> np.ndarray:
        return np.sqrt((self.errors ** 2).sum(axis=(1, 2)))


def step_rk4(drift, state, dt: float):
    """One classical fourth-order Runge-Kutta step of ``d state/dt = drift(state)``."""
    k1 = drift(state)
    k2 = drift(state + 0.5 * dt * k1)
    k3 = drift(state + 0.5 * dt * k2)
    k4 = drift(state + dt * k3)
    new = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(new)):
        raise FloatingPointError("non-finite state after RK4 step")
    return new


def lyapunov_V(e) -> float:
    """Quadratic tracking energy ``sum_i e_i.e_i / 2``."""
    e = np.asarray(e, dtype=float)
    return 0.5 * float(np.sum(e * e))


def v_decomposition(model: NetworkModel, states, x_r, inputs, reference_model: NetworkModel | None = None):
    """Split ``dV/dt`` into drift, coupling and control contributions.

    ``v1 = sum_i e_i.(f_i(x_i) - f(x_r))``, ``v2`` the same with the coupling
    terms of controlled and reference systems, ``v3 = sum_i e_i.u_i``.
    The three add up to ``e.de/dt`` exactly.
    """
    ref = reference_model if reference_model is not None else model
    X = np.asarray(states, dtype=float)
    x_r = np.asarray(x_r, dtype=float)
    U = np.asarray(inputs, dtype=float)
    e = error_state(X, x_r)
    drift_gap = model.dynamics.drift(X) - ref.dynamics.drift(x_r[None, :])
    coupling_gap = coupling_term(model, X) - reference_coupling_term(ref, x_r)
    v1 = float(np.sum(e * drift_gap))
    v2 = float(np.sum(e * coupling_gap))
    v3 = float(np.sum(e * U))
    return v1, v2, v3


def order_parameter(theta) -> float:
    """Kuramoto synchrony ``|mean(exp(i theta))|`` in [0, 1]."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 2:
        if theta.shape[1] != 1:
            raise ValueError(f"order parameter needs scalar phases, got p={theta.shape[1]}")
        theta = theta[:, 0]
    return float(np.abs(np.mean(np.exp(1j * theta))))


def simulate_system(
    model: NetworkModel,
    controller: Controller,
    initial_states,
    reference_initial,
    settings: IntegrationSettings,
    reference_model: NetworkModel | None = None,
) -> TrajectoryRecord:
    ref = reference_model if reference_model is not None else model
    n, p = model.n, model.p
    if controller.n != n:
        raise ValueError(f"pin mask has length {controller.n}, network has {n} nodes")
    if ref.p != p:
        raise ValueError(f"reference state dimension {ref.p} does not match network p={p}")
    X0 = np.asarray(initial_states, dtype=float).reshape(n, p)
    xr0 = np.asarray(reference_initial, dtype=float).reshape(p)
    split = n * p

    # stage states are finite (checked after every step), so the mask product
    # leaves unpinned rows at zero
    pin_gain = (controller.gain * controller.pin_mask)[:, None]
    drift = model.dynamics.drift

    def joint(s):
        X = s[:split].reshape(n, p)
        xr = s[split:]
        dX = drift(X) + coupling_term(model, X) - pin_gain * (X - xr)
        return np.concatenate([dX.ravel(), reference_drift(ref, xr)])

    n_steps = settings.n_steps
    stride = settings.record_stride
    n_rec = n_steps // stride + 1 + (n_steps % stride != 0)
    rec = {
        "times": np.empty(n_rec),
        "states": np.empty((n_rec, n, p)),
        "reference": np.empty((n_rec, p)),
        "inputs": np.empty((n_rec, n, p)),
        "V": np.empty(n_rec),
        "v1": np.empty(n_rec),
        "v2": np.empty(n_rec),
        "v3": np.empty(n_rec),
        "error_norms": np.empty((n_rec, n)),
    }
    count = 0

    def record(t, s):
        nonlocal count
        X = s[:split].reshape(n, p)
        xr = s[split:]
        e = X - xr
        u = control_input(controller, e)
        rec["times"][count] = t
        rec["states"][count] = X
        rec["reference"][count] = xr
        rec["inputs"][count] = u
        rec["V"][count] = lyapunov_V(e)
        rec["v1"][count], rec["v2"][count], rec["v3"][count] = v_decomposition(model, X, xr, u, ref)
        rec["error_norms"][count] = np.sqrt((e * e).sum(axis=1))
        count += 1

    def partial():
        return TrajectoryRecord(**{k: v[:count].copy() for k, v in rec.items()})

    s = np.concatenate([X0.ravel(), xr0])
    record(0.0, s)
    dt = settings.dt
    for k in range(1, n_steps + 1):
        try:
            s = step_rk4(joint, s, dt)
        except FloatingPointError as exc:
            raise SimulationFault(str(exc), k * dt, partial()) from exc
        if np.max(np.abs(s)) > BLOWUP_THRESHOLD:
            raise SimulationFault(f"state magnitude exceeded {BLOWUP_THRESHOLD:g}", k * dt, partial())
        if k % stride == 0 or k == n_steps:
            record(k * dt, s)
    logger.debug("integrated %d steps, recorded %d samples", n_steps, count)
    return partial()


def simulate(scenario) -> TrajectoryRecord:
    """Run a scenario: controlled network and reference on one RK4 grid."""
    out = simulate_system(
        scenario.model,
        scenario.controller,
        scenario.initial_states,
        scenario.reference_initial,
        scenario.integration,
        reference_model=scenario.reference_model,
    )
    out.meta.update(scenario=scenario.name, seed=scenario.seed, gain=scenario.controller.gain)
    return out


@dataclass
class BoundReport:
    """Worst margins (value minus bound; <= 0 means satisfied) and violating times."""

    worst_margin: dict
    violations: dict
    samples: int

    @property
    def violation_count(self) -> int:
        return sum(len(v) for v in self.violations.values())

    @property
    def ok(self) -> bool:
        return self.violation_count == 0


def check_proof_bounds(record: TrajectoryRecord, certificate, rtol: float = 1e-9,
                       identity_rtol: float = 1e-12) -> BoundReport:
    """Check the per-term Lyapunov bounds at every recorded instant.

    Inequalities are judged with a relative slack of ``rtol`` on the sum of
    magnitudes of both sides; the control term is an identity and is judged
    with ``identity_rtol``.
    """
    E = record.errors
    ee = np.sum(E * E, axis=(1, 2))
    w = np.asarray(certificate.pin_mask, dtype=float)
    pinned_ee = np.einsum("i,tip,tip->t", w, E, E)
    c_norm = certificate.c * certificate.theta_h * certificate.norm_L_kron
    checks = {
        "v1": (record.v1, certificate.theta_f * ee, rtol),
        "v2": (record.v2, c_norm * ee, rtol),
        "v3": (record.v3, -certificate.gain * pinned_ee, identity_rtol),
        "total": (record.v1 + record.v2 + record.v3, certificate.lambda_max * ee, rtol),
    }
    worst, violations = {}, {}
    for name, (lhs, rhs, tol) in checks.items():
        margin = lhs - rhs
        slack = tol * (np.abs(lhs) + np.abs(rhs))
        if name == "v3":
            bad = np.abs(margin) > slack
            margin = np.abs(margin)
        else:
            bad = margin > slack
        worst[name] = float(margin.max()) if len(margin) else 0.0
        violations[name] = record.times[bad].tolist()
    return BoundReport(worst_margin=worst, violations=violations, samples=len(record))


def lyapunov_uphill(V, rtol: float = 1e-7) -> np.ndarray:
    """Indices k where ``V[k+1]`` exceeds ``V[k]`` by more than ``rtol * max(1, V[k])``."""
    V = np.asarray(V, dtype=float)
    rise = np.diff(V)
    return np.flatnonzero(rise > rtol * np.maximum(1.0, V[:-1]))
