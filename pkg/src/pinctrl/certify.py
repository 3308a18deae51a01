"""Lyapunov stability certificate for pinning control.

The certificate needs two constants of the node model:

* ``theta_f``: one-sided growth of the drift around the reference,
  ``z.(f(z + x_r) - f(x_r)) <= theta_f z.z``;
* ``theta_h``: Lipschitz constant of the coupling observable ``h``.

With these, the controlled network tracks the reference whenever
``max_i(theta_f + c theta_h ||L (x) I_p|| - gain w_i) <= 0``. The matrix whose
largest eigenvalue that is, is diagonal, so the maximum is taken directly.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .graph import kron_identity_norm
from .model import PAIRWISE_SINE, Controller, NetworkModel

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 100_000
SAFETY_FACTOR = 1.05
_CHUNK = 16_384
_REFINE_TOP = 8


class EstimationError(RuntimeError):
    """An assumption constant could not be estimated."""


@dataclass(frozen=True)
class AssumptionEstimate:
    theta_f: float
    theta_h: float
    region: tuple | None
    theta_f_method: str
    theta_h_method: str
    sample_count: int


@dataclass(frozen=True)
class Certificate:
    theta_f: float
    theta_h: float
    c: float
    norm_L_kron: float
    gain: float
    pin_mask: np.ndarray
    lambda_max: float
    certified: bool
    min_gain: float | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def bracket(self) -> float:
        return self.theta_f + self.c * self.theta_h * self.norm_L_kron

    @property
    def verdict(self) -> str:
        # sufficient condition only: failing it says nothing about instability
        return "certified" if self.certified else "not certified"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pin_mask"] = np.asarray(self.pin_mask).tolist()
        d["bracket"] = self.bracket
        d["verdict"] = self.verdict
        return d


def inflate(value: float, factor: float) -> float:
    """Push an estimated supremum upward by ``(factor - 1) |value|``."""
    return float(value + (factor - 1.0) * abs(value))


def _region_arrays(region):
    low, high = (np.asarray(b, dtype=float) for b in region)
    if low.shape != high.shape or low.ndim != 1:
        raise EstimationError("region bounds must be two vectors of equal length")
    if np.any(high < low) or np.all(high == low):
        raise EstimationError("estimation region is degenerate")
    return low, high


def _halton(d: int, m: int, seed: int) -> np.ndarray:
    return qmc.Halton(d=d, scramble=True, seed=seed).random(m)


def estimate_theta_f(f, x_r_samples, region, samples: int = DEFAULT_SAMPLES,
                     safety_factor: float = SAFETY_FACTOR, seed: int = 0,
                     refine: bool = True) -> float:
    """Sampled quadratic-condition constant of ``f`` over a state box.

    Points ``y`` fill ``region`` quasi-randomly and are paired cyclically with
    the reference samples, ``z = y - x_r``. The largest ratio
    ``z.(f(y) - f(x_r)) / z.z`` is polished by a bounded local search and
    then inflated by ``safety_factor``.
    """
    if samples < 1:
        raise EstimationError("need at least one sample")
    low, high = _region_arrays(region)
    XR = np.atleast_2d(np.asarray(x_r_samples, dtype=float))
    if XR.shape[1] != len(low):
        raise EstimationError(f"reference samples have dimension {XR.shape[1]}, region has {len(low)}")
    f_xr = f(XR)

    def ratios(Y, idx):
        Z = Y - XR[idx]
        zz = np.sum(Z * Z, axis=1)
        num = np.sum(Z * (f(Y) - f_xr[idx]), axis=1)
        out = np.full(len(Y), -np.inf)
        ok = zz > 0
        out[ok] = num[ok] / zz[ok]
        return out

    pts = low + (high - low) * _halton(len(low), samples, seed)
    ref_idx = np.arange(samples) % len(XR)
    vals = np.concatenate([ratios(pts[s:s + _CHUNK], ref_idx[s:s + _CHUNK])
                           for s in range(0, samples, _CHUNK)])
    if not np.any(np.isfinite(vals)):
        raise EstimationError("no usable samples (every z was zero)")
    best = float(np.max(vals))

    if refine:
        bounds = list(zip(low, high))
        for k in np.argsort(vals)[::-1][:_REFINE_TOP]:
            if not np.isfinite(vals[k]):
                continue
            j = np.array([ref_idx[k]])
            obj = lambda y: -ratios(y[None, :], j)[0]  # noqa: E731
            res = optimize.minimize(obj, pts[k], method="L-BFGS-B", bounds=bounds)
            if np.isfinite(res.fun):
                best = max(best, float(-res.fun))
    logger.debug("theta_f raw estimate %.6g from %d samples", best, samples)
    return inflate(best, safety_factor)


def estimate_theta_h(h, region, samples: int = DEFAULT_SAMPLES,
                     safety_factor: float = SAFETY_FACTOR, seed: int = 0,
                     refine: bool = True) -> float:
    """Sampled Lipschitz constant of ``h`` over a state box.

    Pairs are built from a base point in ``region`` and a displacement whose
    direction is quasi-random and whose length is log-uniform between
    ``1e-6`` and ``1`` times the box diagonal, so both local slopes and
    long-range secants are seen.
    """
    if samples < 1:
        raise EstimationError("need at least one sample")
    low, high = _region_arrays(region)
    d = len(low)
    diag = float(np.linalg.norm(high - low))
    u = _halton(2 * d + 1, samples, seed)
    Z = low + (high - low) * u[:, :d]
    direction = u[:, d:2 * d] - 0.5
    dnorm = np.linalg.norm(direction, axis=1, keepdims=True)
    direction = np.where(dnorm > 0, direction / np.where(dnorm > 0, dnorm, 1.0), 0.0)
    length = diag * 10.0 ** (-6.0 * u[:, 2 * d])
    D = direction * length[:, None]

    def ratios(Z, D):
        Y = np.clip(Z + D, low, high)
        dist = np.linalg.norm(Z - Y, axis=1)
        gap = np.linalg.norm(h(Z) - h(Y), axis=1)
        out = np.full(len(Z), -np.inf)
        ok = dist > 0
        out[ok] = gap[ok] / dist[ok]
        return out

    vals = np.concatenate([ratios(Z[s:s + _CHUNK], D[s:s + _CHUNK])
                           for s in range(0, samples, _CHUNK)])
    if not np.any(np.isfinite(vals)):
        raise EstimationError("no usable sample pairs")
    best = float(np.max(vals))

    if refine:
        bounds = list(zip(low, high))
        for k in np.argsort(vals)[::-1][:_REFINE_TOP]:
            if not np.isfinite(vals[k]):
                continue
            Dk = D[k:k + 1]
            obj = lambda z: -ratios(z[None, :], Dk)[0]  # noqa: E731
            res = optimize.minimize(obj, Z[k], method="L-BFGS-B", bounds=bounds)
            if np.isfinite(res.fun):
                best = max(best, float(-res.fun))
    best = max(best, 0.0)
    logger.debug("theta_h raw estimate %.6g from %d samples", best, samples)
    return inflate(best, safety_factor)


def certificate_lambda_max(theta_f, theta_h, c, norm_L_kron, gain, pin_mask) -> float:
    """Largest eigenvalue of ``((theta_f + c theta_h ||L (x) I||) I_n - gain W) (x) I_p``."""
    if theta_h < 0:
        raise ValueError("theta_h must be nonnegative")
    if gain < 0:
        raise ValueError("gain must be nonnegative")
    w = np.asarray(pin_mask, dtype=float)
    bracket = theta_f + c * theta_h * norm_L_kron
    return float(np.max(bracket - gain * w))


def min_certified_gain(theta_f, theta_h, c, norm_L_kron, pin_mask) -> float | None:
    """Smallest gain with ``lambda_max <= 0``; ``None`` when no gain can certify."""
    if theta_h < 0:
        raise ValueError("theta_h must be nonnegative")
    bracket = theta_f + c * theta_h * norm_L_kron
    if bracket <= 0:
        return 0.0
    if np.any(np.asarray(pin_mask) == 0):
        return None
    return float(bracket)


def estimation_region(scenario, padding: float | None = None):
    """Bounding box of an uncontrolled pilot run, padded by a fraction of its width.

    Also returns the pilot's reference samples (at most 256).
    """
    from .simulate import IntegrationSettings, SimulationFault, simulate_system

    est = scenario.estimation
    padding = est.padding if padding is None else padding
    t_end = est.pilot_t_end or scenario.integration.t_end
    settings = IntegrationSettings(dt=scenario.integration.dt, t_end=t_end,
                                   record_stride=scenario.integration.record_stride)
    pilot_ctrl = Controller(scenario.controller.pin_mask, 0.0)
    try:
        rec = simulate_system(scenario.model, pilot_ctrl, scenario.initial_states,
                              scenario.reference_initial, settings, scenario.reference_model)
    except SimulationFault as exc:
        raise EstimationError(f"pilot simulation failed: {exc}") from exc
    pts = np.concatenate([rec.states.reshape(-1, rec.p), rec.reference])
    low, high = pts.min(axis=0), pts.max(axis=0)
    width = high - low
    pad = padding * np.where(width > 0, width, np.maximum(np.abs(low), 1.0))
    step = max(1, len(rec.reference) // 256)
    return (low - pad, high + pad), rec.reference[::step]


def certify_scenario(scenario, samples: int | None = None, seed: int | None = None) -> Certificate:
    """Estimate both constants for a scenario and evaluate the certificate."""
    est = scenario.estimation
    samples = est.samples if samples is None else samples
    seed = scenario.seed if seed is None else seed
    model: NetworkModel = scenario.model
    ref_dyn = scenario.reference_model.dynamics
    force_sampled = est.method == "sampled"

    theta_f = None if force_sampled else ref_dyn.analytic_theta_f()
    theta_h = None if force_sampled else ref_dyn.analytic_theta_h()
    if model.coupling_mode == PAIRWISE_SINE:
        theta_h = 1.0 if not force_sampled else None
    f_method = "analytic" if theta_f is not None else "sampled"
    h_method = "analytic" if theta_h is not None else "sampled"

    region = None
    if theta_f is None or theta_h is None:
        if est.region is not None:
            region = (np.asarray(est.region[0], float), np.asarray(est.region[1], float))
            xr_samples = np.asarray(scenario.reference_initial, float)[None, :]
        else:
            region, xr_samples = estimation_region(scenario)
        try:
            if theta_f is None:
                theta_f = estimate_theta_f(ref_dyn.drift, xr_samples, region, samples,
                                           est.safety_factor, seed)
            if theta_h is None:
                h = np.sin if model.coupling_mode == PAIRWISE_SINE else ref_dyn.coupling_output
                theta_h = estimate_theta_h(h, region, samples, est.safety_factor, seed)
        except EstimationError:
            raise
        except Exception as exc:
            raise EstimationError(f"assumption estimation failed: {exc}") from exc

    norm = kron_identity_norm(model.L, model.p)
    ctrl = scenario.controller
    lam = certificate_lambda_max(theta_f, theta_h, model.c, norm, ctrl.gain, ctrl.pin_mask)
    provenance = {
        "theta_f": f_method,
        "theta_h": h_method,
        "norm_L_kron": "spectral norm of L",
        "samples": samples if "sampled" in (f_method, h_method) else 0,
        "seed": seed,
        "safety_factor": est.safety_factor,
        "region": None if region is None else [np.asarray(region[0]).tolist(), np.asarray(region[1]).tolist()],
    }
    if model.coupling_mode == PAIRWISE_SINE:
        provenance["mapping"] = ("pairwise-sine coupling mapped to c = K/N, L = Laplacian of the "
                                 "coupling graph, theta_h = 1 (Lipschitz constant of sine)")
    return Certificate(
        theta_f=float(theta_f),
        theta_h=float(theta_h),
        c=float(model.c),
        norm_L_kron=norm,
        gain=float(ctrl.gain),
        pin_mask=ctrl.pin_mask.copy(),
        lambda_max=lam,
        certified=lam <= 0,
        min_gain=min_certified_gain(theta_f, theta_h, model.c, norm, ctrl.pin_mask),
        provenance=provenance,
    )


def assumption_estimate(cert: Certificate) -> AssumptionEstimate:
    prov = cert.provenance
    region = prov.get("region")
    return AssumptionEstimate(
        theta_f=cert.theta_f,
        theta_h=cert.theta_h,
        region=None if region is None else tuple(map(tuple, region)),
        theta_f_method=prov.get("theta_f", "analytic"),
        theta_h_method=prov.get("theta_h", "analytic"),
        sample_count=prov.get("samples", 0),
    )
