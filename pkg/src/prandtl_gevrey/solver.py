"""IMEX time integration of the regularized, Galerkin-truncated Prandtl system.

    u_t + P_n(u u_x + v u_y) - u_yy - eps u_xx = 0,   v = -int_0^y u_x,

with u = 0 at the wall. At y = L_y either u is held at its incoming value
("dirichlet", the default) or the log-slope omega_y / omega of the incoming
state is preserved ("robin"). Either condition leaves a thin layer at the
truncation height; diagnostics exclude it through a y-window.
Diffusion is Crank-Nicolson (one banded solve per Fourier mode), the
projected nonlinear term is second-order Adams-Bashforth. The first step
takes its nonlinear term from a forward-Euler half step.
Order inside a step: nonlinear term, projection, implicit solve, boundary
values.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fields import State, recover_v
from .grid import SpectralGrid


class SolverError(RuntimeError):
    pass


class StepRejected(SolverError):
    """The explicit advection CFL bound is violated."""


class BlowUpError(SolverError):
    """Vorticity exceeded the blow-up threshold or became non-finite."""

    def __init__(self, t: float, message: str):
        super().__init__(f"blow-up at t={t:.6g}: {message}")
        self.t = t


BLOWUP_THRESHOLD = 1e8
CFL_LIMIT = 0.5


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-3
    n_galerkin: int | None = None
    dt: float = 1e-3
    t_end: float = 0.05
    sample_every: int = 10
    dealias: bool = True
    scheme: str = "cn-ab2"
    top_bc: str = "dirichlet"

    def galerkin_cutoff(self, grid: SpectralGrid) -> int:
        if self.n_galerkin is not None:
            return self.n_galerkin
        return grid.nx // 3 if self.dealias else grid.nx // 2

    def validate(self, grid: SpectralGrid) -> None:
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        n = self.galerkin_cutoff(grid)
        if not 1 <= n <= grid.nx // 2:
            raise ValueError(f"n_galerkin must lie in [1, nx/2 = {grid.nx // 2}], got {n}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")
        if self.top_bc not in ("robin", "dirichlet"):
            raise ValueError(f"top_bc must be 'robin' or 'dirichlet', got {self.top_bc!r}")
        if self.scheme != "cn-ab2":
            raise ValueError(f"unknown scheme {self.scheme!r}")


def thread_cap() -> int:
    """Worker cap from PRANDTL_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("PRANDTL_THREADS", "1")))
    except ValueError:
        return 1


class Integrator:
    """Holds the per-mode factorizations and the Adams-Bashforth history."""

    def __init__(self, grid: SpectralGrid, cfg: SolverConfig, far_field: np.ndarray | None = None):
        cfg.validate(grid)
        self.grid = grid
        self.cfg = cfg
        self.n = cfg.galerkin_cutoff(grid)
        self.far_field = None if far_field is None else np.asarray(far_field, dtype=float)
        self._prev_nonlinear = None
        self.top_slope = None
        self._lu = {}
        self._explicit = {}
        k2 = grid.wavenumbers**2
        self._keys = np.round(cfg.epsilon * k2, 14)

    def reset(self) -> None:
        self._prev_nonlinear = None

    def _operators(self, key: float):
        if key not in self._lu:
            g, dt = self.grid, self.cfg.dt
            eye = sp.identity(g.ny, format="csr")
            lap = g.D2 - key * eye
            lhs = (eye - 0.5 * dt * lap).tolil()
            rhs = (eye + 0.5 * dt * lap).tolil()
            for row in (0, g.ny - 1):
                lhs.rows[row], lhs.data[row] = [row], [1.0]
                rhs.rows[row], rhs.data[row] = [], []
            if self.cfg.top_bc == "robin":
                last = (g.D2[-1] - self.top_slope * g.D1[-1]).tocoo()
                lhs.rows[-1], lhs.data[-1] = last.col.tolist(), last.data.tolist()
            self._lu[key] = splu(lhs.tocsc())
            self._explicit[key] = rhs.tocsr()
        return self._lu[key], self._explicit[key]

    def nonlinear(self, u: np.ndarray) -> np.ndarray:
        """Projected advection term in Fourier space (rfft along x)."""
        g = self.grid
        v = recover_v(g, u)
        adv = u * g.dx(u, 1) + v * g.dy(u, 1)
        nh = np.fft.rfft(adv, axis=0)
        nh[self.n + 1:] = 0.0
        return nh

    def _check_cfl(self, u: np.ndarray) -> None:
        g = self.grid
        kmax = self.n * 2 * np.pi / g.x_period
        cfl = self.cfg.dt * np.max(np.abs(u)) * kmax
        if cfl >= CFL_LIMIT:
            raise StepRejected(f"CFL number {cfl:.3g} >= {CFL_LIMIT}")

    def _implicit(self, uh: np.ndarray, forcing: np.ndarray, top: np.ndarray) -> np.ndarray:
        g = self.grid
        out = np.empty_like(uh)
        for m in range(uh.shape[0]):
            lu, rhs_op = self._operators(self._keys[m])
            b = rhs_op @ uh[m] - self.cfg.dt * forcing[m]
            b[0] = 0.0
            b[-1] = top[m] if self.cfg.top_bc == "dirichlet" else 0.0
            sol = lu.solve(np.column_stack([b.real, b.imag]))
            out[m] = sol[:, 0] + 1j * sol[:, 1]
        return out

    def step(self, state: State) -> State:
        g, dt = self.grid, self.cfg.dt
        u = state.u
        if not np.all(np.isfinite(u)):
            raise BlowUpError(state.t, "non-finite velocity")
        self._check_cfl(u)
        if self.far_field is None:
            self.far_field = u[:, -1].copy()
        if self.top_slope is None:
            self.top_slope = _top_log_slope(g, state.omega)
        top = np.fft.rfft(self.far_field)
        uh = np.fft.rfft(u, axis=0)
        nl = self.nonlinear(u)
        if self._prev_nonlinear is None:
            half = self._implicit_euler_half(uh, nl, top)
            forcing = self.nonlinear(half)
        else:
            forcing = 1.5 * nl - 0.5 * self._prev_nonlinear
        new_hat = self._implicit(uh, forcing, top)
        self._prev_nonlinear = nl
        u_new = np.fft.irfft(new_hat, n=g.nx, axis=0)
        u_new[:, 0] = 0.0
        if self.cfg.top_bc == "dirichlet":
            u_new[:, -1] = self.far_field
        t_new = state.t + dt
        omega = g.dy(u_new, 1)
        if not np.all(np.isfinite(omega)):
            raise BlowUpError(t_new, "non-finite vorticity")
        peak = np.max(np.abs(omega))
        if peak > BLOWUP_THRESHOLD:
            raise BlowUpError(t_new, f"max|omega| = {peak:.3g}")
        return State(t=t_new, u=u_new, v=recover_v(g, u_new), omega=omega, grid=g)

    def _implicit_euler_half(self, uh, nl, top):
        # forward-Euler half step: u + dt/2 (L u - N(u)), L applied spectrally in x
        g = self.grid
        lap = np.fft.rfft(g.dy(np.fft.irfft(uh, n=g.nx, axis=0), 2), axis=0)
        lap -= self.cfg.epsilon * (g.wavenumbers**2)[:, None] * uh
        half = uh + 0.5 * self.cfg.dt * (lap - nl)
        half[:, 0] = 0.0
        if self.cfg.top_bc == "dirichlet":
            half[:, -1] = top
        return np.fft.irfft(half, n=g.nx, axis=0)


def _top_log_slope(grid: SpectralGrid, omega: np.ndarray) -> float:
    # x-mean of omega_y / omega at y = L_y; 0 (Neumann on omega) if omega vanishes there
    top = omega[:, -1]
    slope = (grid.D1[-1] @ omega.T).ravel()
    ok = np.abs(top) > 1e-300
    if not np.all(ok):
        return 0.0
    return float(np.mean(slope / top))


def step(state: State, cfg: SolverConfig, integrator: Integrator | None = None) -> State:
    """One time step; pass an Integrator to keep the multistep history."""
    integ = integrator if integrator is not None else Integrator(state.grid, cfg)
    return integ.step(state)


@dataclass
class RunResult:
    final: State
    samples: list
    aggregates: dict
    steps: int


Observer = Callable[[State], object]


def run(state0: State, cfg: SolverConfig, observers: Sequence[Observer] = (),
        integrator: Integrator | None = None, t_stop: float | None = None) -> RunResult:
    """Advance to t_end (or t_stop if earlier).

    Observers see the initial state and every ``sample_every``-th state;
    their return values are collected per observer. Step errors are re-raised
    with the time and step count attached.
    """
    integ = integrator if integrator is not None else Integrator(state0.grid, cfg)
    t_end = cfg.t_end if t_stop is None else min(cfg.t_end, t_stop)
    n_steps = int(np.floor(t_end / cfg.dt + 1e-9))
    outputs = [[] for _ in observers]
    state = state0
    times = []

    def observe(s):
        times.append(s.t)
        for out, obs in zip(outputs, observers):
            out.append(obs(s))

    if n_steps == 0:
        if observers:
            observe(state)
        return RunResult(state, times, {i: o for i, o in enumerate(outputs)}, 0)
    observe(state)
    for k in range(1, n_steps + 1):
        try:
            state = integ.step(state)
        except SolverError as exc:
            exc.args = (f"{exc.args[0]} (step {k} of {n_steps}, t={state.t:.6g})",)
            raise
        if k % cfg.sample_every == 0 or k == n_steps:
            observe(state)
    return RunResult(state, times, {i: o for i, o in enumerate(outputs)}, n_steps)
