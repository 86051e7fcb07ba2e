"""Trajectory diagnostics: shrinking-radius energy decay, vorticity bound
margins and the two-run continuous-dependence test."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fields import ALPHAS, InitialDataSpec, State, hprime_margins, make_initial_data
from .functionals import (EnergySettings, calE, energies, energies_from_sequences,
                          find_critical_curve, norm_sequences)
from .gevrey import GevreyWeight
from .grid import SpectralGrid
from .solver import Integrator, SolverConfig, run


class InsufficientTrajectoryError(ValueError):
    """Fewer than three samples available for the decay verdict."""


@dataclass(frozen=True)
class TauSchedule:
    tau0: float
    C: float
    tau_min: float | None = None

    def __post_init__(self):
        if not self.tau0 > 0 or self.C < 0:
            raise ValueError("need tau0 > 0 and C >= 0")
        floor = self.tau0 / 2 if self.tau_min is None else self.tau_min
        if not 0 < floor <= self.tau0:
            raise ValueError("tau_min must lie in (0, tau0]")
        object.__setattr__(self, "tau_min", floor)

    def tau(self, t: float) -> float:
        return self.tau0 - self.C * t

    def t_max(self, t_end: float) -> float:
        """Run length: min(t_end, (tau0 - tau_min)/C)."""
        if self.C == 0:
            return t_end
        return min(t_end, (self.tau0 - self.tau_min) / self.C)

    def admissible(self, times: np.ndarray) -> np.ndarray:
        return np.asarray([self.tau(t) >= self.tau_min - 1e-15 for t in times])


SLACK = 1e-6
C_RANGE = (0.0, 64.0)
BISECTIONS = 20


@dataclass
class DecayTrace:
    times: np.ndarray
    series: np.ndarray
    minimal_C: float
    decay_ok: bool
    tau0: float
    # minimal C from refined runs, in refinement order
    refinement: list = field(default_factory=list)

    @property
    def stable_under_refinement(self) -> bool:
        cs = [self.minimal_C] + list(self.refinement)
        return all(b <= a for a, b in zip(cs, cs[1:]))


def _series(times: np.ndarray, sequences: Sequence[dict], sched: TauSchedule, alpha: float):
    keep = sched.admissible(times)
    vals = np.array([calE(seq, GevreyWeight(sched.tau(t)), alpha)
                     for t, seq, k in zip(times, sequences, keep) if k])
    return times[keep], vals


def _non_increasing(vals: np.ndarray, slack: float = SLACK) -> bool:
    return bool(np.all(vals[1:] <= vals[:-1] * (1 + slack)))


def decay_trace(times: Sequence[float], sequences: Sequence[dict], tau0: float,
                tau_min: float | None = None, alpha: float = 0.1) -> DecayTrace:
    """Smallest C in [0, 64] for which calE(alpha, t, tau0 - C t) is non-increasing.

    ``sequences`` are the per-sample norm sequences (see norm_sequences); the
    energies are re-weighted for each trial C. Bisection takes 20 steps; C = 0 is
    tried first. Samples below the floor tau_min are dropped, and a trial C
    leaving fewer than three samples counts as failing; if that happens at
    C = 64 the result is C = inf.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 3:
        raise InsufficientTrajectoryError(f"need >= 3 samples, got {len(times)}")

    def ok(C):
        t, v = _series(times, sequences, TauSchedule(tau0, C, tau_min), alpha)
        return len(v) >= 3 and _non_increasing(v)

    lo, hi = C_RANGE
    if ok(lo):
        c_min = lo
    elif not ok(hi):
        c_min = math.inf
    else:
        for _ in range(BISECTIONS):
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if ok(mid) else (mid, hi)
        c_min = hi
    c_series = 0.0 if not math.isfinite(c_min) else c_min
    t, v = _series(times, sequences, TauSchedule(tau0, c_series, tau_min), alpha)
    return DecayTrace(t, v, c_min, math.isfinite(c_min), tau0)


@dataclass(frozen=True)
class BoundMargins:
    lower_margin: float
    upper_margins: dict

    @property
    def upper_margin_min(self) -> float:
        return min(self.upper_margins.values())

    @property
    def positive(self) -> bool:
        return self.lower_margin > 0 and self.upper_margin_min > 0


def bound_margins(state: State, delta: float, sigma: float, y_split: float = 3.0,
                  y_top: float | None = None) -> BoundMargins:
    """lower = min (1+y)^sigma |omega| - delta over y_split < y <= y_top, upper per |alpha| <= 2."""
    lower, upper = hprime_margins(state, delta, sigma, y_split, factor=1.0, y_top=y_top)
    return BoundMargins(lower, upper)


# -- trajectory driver --------------------------------------------------------


@dataclass
class Trajectory:
    times: list
    sequences: list
    margins: list
    reports: list
    final: State


def trace_run(state0: State, cfg: SolverConfig, settings: EnergySettings, tau0: float,
              delta: float, sigma: float) -> Trajectory:
    """Run the solver, recording norm sequences, margins and energies at tau0."""
    w = GevreyWeight(tau0)
    rec = Trajectory([], [], [], [], state0)

    def observe(s: State):
        curve = find_critical_curve(s.grid, s.omega, settings.y_split)
        seq = norm_sequences(s, curve, settings)
        rec.times.append(s.t)
        rec.sequences.append(seq)
        rec.margins.append(bound_margins(s, delta, sigma, settings.y_split,
                                         settings.y_top(s.grid)))
        rec.reports.append(energies(s, curve, w, settings, sequences=seq))

    res = run(state0, cfg, [observe])
    rec.final = res.final
    return rec


CSV_HEADER = ("t", "tau", "E_omega", "E_dot_omega", "E_h", "E_g1", "E_g2", "calE", "dtau_calE",
              "D_dot_omega", "D_h", "D_g1", "D_g2", "lower_margin", "upper_margin_max")


def csv_rows(traj: Trajectory, schedule: TauSchedule, settings: EnergySettings) -> list[dict]:
    """One row per admissible sample, energies evaluated at tau(t).

    ``upper_margin_max`` is the largest violation measure over alpha, i.e. the
    minimum margin, so that a negative value flags any failing bound.
    """
    rows = []
    for t, seq, m in zip(traj.times, traj.sequences, traj.margins):
        tau = schedule.tau(t)
        if tau < schedule.tau_min - 1e-15:
            break
        rep = energies_from_sequences(t, seq, GevreyWeight(tau), settings)
        rows.append({"t": t, "tau": tau, "E_omega": rep.E_omega, "E_dot_omega": rep.E_dot_omega,
                     "E_h": rep.E_h, "E_g1": rep.E_g1, "E_g2": rep.E_g2, "calE": rep.calE_alpha,
                     "dtau_calE": rep.dtau_calE, "D_dot_omega": rep.D_dot_omega, "D_h": rep.D_h,
                     "D_g1": rep.D_g1, "D_g2": rep.D_g2, "lower_margin": m.lower_margin,
                     "upper_margin_max": m.upper_margin_min})
    return rows


def format_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: repr(float(r[k])) for k in CSV_HEADER})
    return buf.getvalue()


def format_summary(verdicts: dict) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        if isinstance(v, (np.floating, np.integer)):
            return v.item()
        if isinstance(v, np.bool_):
            return bool(v)
        return v
    return json.dumps({k: clean(v) for k, v in verdicts.items()}, indent=2, sort_keys=True) + "\n"


# -- two-run divergence -------------------------------------------------------


def perturbation_bump(grid: SpectralGrid, x0: float = math.pi, y0: float = 8.0,
                      width: float = 1.5) -> np.ndarray:
    """Smooth bump in (x, y), placed above the critical curve."""
    x = grid.x_nodes[:, None]
    y = grid.y_nodes[None, :]
    return 0.5 * (1 + np.cos(x - x0)) * np.exp(-((y - y0) / width) ** 2)


@dataclass
class DivergenceResult:
    slope: float
    times: np.ndarray
    gaps: np.ndarray
    eta: float
    bound_ok: bool | None = None

    def check(self, lambda_cal: float, t: float | None = None) -> bool:
        t = self.times[-1] if t is None else t
        i = int(np.argmin(np.abs(self.times - t)))
        self.bound_ok = bool(self.gaps[i] <= self.eta * math.exp(lambda_cal * self.times[i]))
        return self.bound_ok


def _perturbed_pair(grid: SpectralGrid, omega0: np.ndarray, eta: float):
    chi = perturbation_bump(grid)
    du = grid.integrate_y(omega0 * chi)
    scale = math.sqrt(grid.weighted_l2_sq(du))
    # initial gap ||u2 - u1|| equals eta exactly
    base = State.from_u(grid, grid.integrate_y(omega0))
    pert = State.from_u(grid, base.u + (eta / scale) * du) if eta else base
    return base, pert


def two_run_divergence(grid: SpectralGrid, spec: InitialDataSpec, eta: float,
                       cfg: SolverConfig) -> DivergenceResult:
    """Gap ||u1 - u2||_{L2} between runs from omega0 and omega0 (1 + eta chi).

    The perturbation is normalized so the initial gap is eta. The returned
    slope is the least-squares fit of ln(gap) against t (nan when the gap is
    identically zero).
    """
    if eta != 0 and not 1e-12 <= eta <= 1e-6:
        raise ValueError(f"eta must be 0 or lie in [1e-12, 1e-6], got {eta}")
    omega0 = make_initial_data(grid, spec).omega
    s1, s2 = _perturbed_pair(grid, omega0, eta)
    far = s1.u[:, -1].copy()
    r1 = run(s1, cfg, [lambda s: s.u], integrator=Integrator(grid, cfg, far_field=far))
    r2 = run(s2, cfg, [lambda s: s.u], integrator=Integrator(grid, cfg, far_field=far))
    times = np.array(r1.samples)
    gaps = np.array([math.sqrt(grid.weighted_l2_sq(a - b))
                     for a, b in zip(r1.aggregates[0], r2.aggregates[0])])
    if np.all(gaps == 0):
        slope = float("nan")
    else:
        ok = gaps > 0
        slope = float(np.polyfit(times[ok], np.log(gaps[ok]), 1)[0])
    return DivergenceResult(slope, times, gaps, eta)
