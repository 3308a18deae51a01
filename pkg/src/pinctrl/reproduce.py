"""Convergence checks for the two bundled experiments."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .scenario import load_bundled
from .simulate import TrajectoryRecord, simulate

KURAMOTO = "kuramoto_paper"
JANSEN_RIT = "jansen_rit_paper"


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _window(record: TrajectoryRecord, start: float, stop: float) -> np.ndarray:
    return (record.times >= start) & (record.times <= stop)


def kuramoto_checks(record: TrajectoryRecord, runtime: float) -> list[CheckResult]:
    e = record.error_norms
    ratio = e[-1] / np.maximum(e[0], np.finfo(float).tiny)
    total = record.total_error_norm
    T = record.times[-1]
    early = total[_window(record, 0.0, 0.2 * T)].mean()
    late = total[_window(record, 0.8 * T, T)].mean()
    return [
        CheckResult("kuramoto per-node final/initial error <= 0.1", bool(np.all(ratio <= 0.1)),
                    f"worst ratio {ratio.max():.4g} (node {int(np.argmax(ratio)) + 1})"),
        CheckResult("kuramoto late/early mean error <= 1/5", bool(late * 5 <= early),
                    f"early {early:.4g}, late {late:.4g}, factor {early / late:.3g}"),
        CheckResult("kuramoto runtime < 5 s", runtime < 5.0, f"{runtime:.2f} s"),
    ]


def jansen_rit_checks(controlled: TrajectoryRecord, uncontrolled: TrajectoryRecord,
                      runtime: float, dynamics=None) -> list[CheckResult]:
    err = controlled.total_error_norm
    after = controlled.times >= 0.5
    seg = err[after]
    rise = np.diff(seg) - 1e-6 * seg[:-1]
    uphill = int(np.sum(rise > 0))
    V = controlled.V
    T_c, T_u = controlled.times[-1], uncontrolled.times[-1]
    obs_c = controlled.states[:, 0, 1] - controlled.states[:, 0, 2]
    obs_u = uncontrolled.states[:, 0, 1] - uncontrolled.states[:, 0, 2]
    ptp_c = np.ptp(obs_c[_window(controlled, T_c - 1.0, T_c)])
    ptp_u = np.ptp(obs_u[_window(uncontrolled, T_u - 1.0, T_u)])
    return [
        CheckResult("jansen-rit error monotone after 0.5 s", uphill == 0,
                    f"{uphill} uphill samples (relative slack 1e-6)"),
        CheckResult("jansen-rit final V < 1% of peak V", bool(V[-1] < 0.01 * V.max()),
                    f"V_final/V_peak = {V[-1] / V.max():.3g}"),
        CheckResult("jansen-rit uncontrolled oscillation > 5x controlled", bool(ptp_u > 5 * ptp_c),
                    f"peak-to-peak uncontrolled {ptp_u:.4g} mV, controlled final second {ptp_c:.3g} mV"),
        CheckResult("jansen-rit runtime < 30 s", runtime < 30.0, f"{runtime:.2f} s"),
    ]


def run_kuramoto(**overrides) -> tuple[TrajectoryRecord, float]:
    sc = load_bundled(KURAMOTO).with_overrides(**overrides)
    t0 = time.perf_counter()
    rec = simulate(sc)
    return rec, time.perf_counter() - t0


def run_jansen_rit(**overrides) -> tuple[TrajectoryRecord, TrajectoryRecord, float]:
    sc = load_bundled(JANSEN_RIT).with_overrides(**overrides)
    t0 = time.perf_counter()
    controlled = simulate(sc)
    uncontrolled = simulate(sc.with_overrides(gain=0.0))
    return controlled, uncontrolled, time.perf_counter() - t0


def reproduce_all() -> list[CheckResult]:
    rec, dt = run_kuramoto()
    results = kuramoto_checks(rec, dt)
    c, u, dt = run_jansen_rit()
    results += jansen_rit_checks(c, u, dt)
    return results
