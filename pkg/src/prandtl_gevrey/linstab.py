"""Linearized Prandtl dynamics around a shear flow U_s(y).

    u_t + U_s u_x + U_s' v - u_yy = 0,   u_x + v_y = 0.

The coefficients do not depend on x, so each Fourier mode k evolves on its
own: ``u_t = u_yy - i k U_s u + i k U_s' int_0^y u``. The step treats
diffusion and the local advection i k U_s by Crank-Nicolson (banded) and the
nonlocal term by second-order Adams-Bashforth.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .grid import SpectralGrid
from .solver import BlowUpError


class InsufficientDataError(ValueError):
    """Fewer than four positive growth rates to fit."""


@dataclass(frozen=True)
class ShearProfile:
    name: str
    y: np.ndarray
    Us: np.ndarray
    dUs: np.ndarray
    d2Us: np.ndarray
    monotone: bool
    critical_y: float | None = None

    @classmethod
    def gaussian(cls, y: np.ndarray, ell: float = 6.0) -> "ShearProfile":
        """U = y exp(-y^2 / (2 ell^2)): U'(0) = 1, single critical point at y = ell."""
        e = np.exp(-0.5 * (y / ell) ** 2)
        return cls(f"gaussian(ell={ell:g})", y, y * e, (1 - (y / ell) ** 2) * e,
                   (y**3 / ell**4 - 3 * y / ell**2) * e, False, ell)

    @classmethod
    def tanh(cls, y: np.ndarray, amplitude: float) -> "ShearProfile":
        """Monotone U = A tanh(y / A) with U'(0) = 1 and sup U = A."""
        t = np.tanh(y / amplitude)
        sech2 = 1 - t**2
        return cls(f"tanh(A={amplitude:g})", y, amplitude * t, sech2, -2 * t * sech2 / amplitude, True)

    @classmethod
    def matched_monotone(cls, y: np.ndarray, ell: float = 6.0) -> "ShearProfile":
        """Monotone partner of the gaussian profile with the same sup-norm and U'(0)."""
        return cls.tanh(y, ell * np.exp(-0.5))

    @classmethod
    def zero(cls, y: np.ndarray) -> "ShearProfile":
        z = np.zeros_like(y)
        return cls("zero", y, z, z, z, True)

    def check(self, tol: float = 1e-8) -> None:
        if abs(self.Us[0]) > tol:
            raise ValueError("U_s(0) must vanish")
        if not self.monotone:
            a = self.critical_y
            dU = np.interp(a, self.y, self.dUs)
            d2U = np.interp(a, self.y, self.d2Us)
            if abs(dU) > 1e-3 or abs(d2U) < 1e-6:
                raise ValueError("critical point must satisfy U'(a) = 0, U''(a) != 0")


REFERENCE_ELL = 6.0


def frozen_dispersion(dUs_at_y0: float, kx: float, ky: float) -> float:
    """sigma = U_s'(y0) kx / ky - ky^2, correctly rounded.

    Evaluated in exact rational arithmetic: the two terms can nearly cancel, and
    the naive float expression then loses several ulps.
    """
    if ky == 0:
        raise ValueError("ky must be nonzero")
    d, a, b = Fraction(dUs_at_y0), Fraction(kx), Fraction(ky)
    return float(d * a / b - b * b)


class ModeStepper:
    """IMEX propagator for one wavenumber, with Adams-Bashforth history."""

    def __init__(self, grid: SpectralGrid, profile: ShearProfile, k: float, dt: float):
        if len(profile.y) != grid.ny or not np.allclose(profile.y, grid.y_nodes):
            raise ValueError("profile must be tabulated on the grid y nodes")
        self.k = k
        self.dt = dt
        n = grid.ny
        eye = sp.identity(n, format="csr", dtype=complex)
        op = grid.D2.astype(complex) - 1j * k * sp.diags(profile.Us.astype(complex))
        lhs = (eye - 0.5 * dt * op).tolil()
        rhs = (eye + 0.5 * dt * op).tolil()
        for row in (0, n - 1):
            lhs.rows[row], lhs.data[row] = [row], [1.0 + 0j]
            rhs.rows[row], rhs.data[row] = [], []
        self._lu = splu(lhs.tocsc())
        self._rhs = rhs.tocsr()
        # running spline integral as a dense matrix
        self._cum = grid.integrate_y(np.eye(n)).T
        self._coef = 1j * k * profile.dUs
        self._prev = None

    def nonlocal_term(self, uh: np.ndarray) -> np.ndarray:
        return self._coef * (self._cum @ uh)

    def step(self, uh: np.ndarray) -> np.ndarray:
        f = self.nonlocal_term(uh)
        if self._prev is None:
            half = uh + 0.5 * self.dt * f
            forcing = self.nonlocal_term(half)
        else:
            forcing = 1.5 * f - 0.5 * self._prev
        self._prev = f
        b = self._rhs @ uh + self.dt * forcing
        b[0] = b[-1] = 0.0
        out = self._lu.solve(b)
        if not np.all(np.isfinite(out)):
            raise BlowUpError(float("nan"), f"non-finite perturbation at k={self.k:g}")
        return out


def linearized_step(grid: SpectralGrid, pert_u: np.ndarray, profile: ShearProfile, dt: float,
                    steppers: dict | None = None) -> np.ndarray:
    """Advance a real perturbation field by one step, mode by mode."""
    pert_u = grid.check_field(pert_u)
    if np.any(pert_u[:, 0] != 0):
        raise ValueError("perturbation must vanish at y = 0")
    steppers = {} if steppers is None else steppers
    uh = np.fft.rfft(pert_u, axis=0)
    out = np.empty_like(uh)
    for m, k in enumerate(grid.wavenumbers):
        if not np.any(uh[m]):
            out[m] = 0.0
            continue
        if m not in steppers:
            steppers[m] = ModeStepper(grid, profile, k, dt)
        out[m] = steppers[m].step(uh[m])
    return np.fft.irfft(out, n=grid.nx, axis=0)


class GrowthResult(NamedTuple):
    kx: float
    rate: float
    r2: float
    conclusive: bool
    seed_rates: tuple


def _random_mode(rng: np.random.Generator, y: np.ndarray) -> np.ndarray:
    window = y * np.exp(-y / 4.0)
    z = rng.standard_normal(len(y)) + 1j * rng.standard_normal(len(y))
    out = z * window
    out[0] = out[-1] = 0.0
    return out


def growth_rate(grid: SpectralGrid, profile: ShearProfile, kx: float, horizon: float, dt: float,
                n_seeds: int = 2, seed: int = 0, fit_window: float = 0.5,
                samples: int = 200) -> GrowthResult:
    """Dominant growth rate of mode kx by time marching.

    Each seed starts from random data; ln||u|| is fitted by least squares on
    the final ``fit_window`` fraction of the horizon. The maximum slope over
    seeds is returned, flagged inconclusive if the best fit has R^2 < 0.99.
    """
    n_steps = int(round(horizon / dt))
    every = max(1, n_steps // samples)
    weights = grid.y_weights
    results = []
    for s in range(n_seeds):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(kx), s)))
        stepper = ModeStepper(grid, profile, kx, dt)
        uh = _random_mode(rng, grid.y_nodes)
        log_scale = 0.0
        times, logs = [], []
        for n in range(1, n_steps + 1):
            uh = stepper.step(uh)
            if n % every == 0:
                nrm = np.sqrt(np.sum(np.abs(uh) ** 2 * weights))
                times.append(n * dt)
                logs.append(log_scale + np.log(nrm))
                # renormalize; the stepper history scales with the state
                uh = uh / nrm
                stepper._prev = stepper._prev / nrm
                log_scale += np.log(nrm)
        t = np.array(times)
        lg = np.array(logs)
        sel = t >= (1 - fit_window) * t[-1]
        fit = np.polyfit(t[sel], lg[sel], 1)
        resid = lg[sel] - np.polyval(fit, t[sel])
        tot = np.sum((lg[sel] - lg[sel].mean()) ** 2)
        r2 = 1.0 - np.sum(resid**2) / tot if tot > 0 else 1.0
        results.append((float(fit[0]), float(r2)))
    best = max(results, key=lambda r: r[0])
    return GrowthResult(float(kx), best[0], best[1], best[1] >= 0.99, tuple(r[0] for r in results))


class ExponentFit(NamedTuple):
    slope: float
    intercept: float
    r2: float
    n_used: int


def fit_growth_exponent(rates: Mapping[float, float], min_points: int = 4) -> ExponentFit:
    """Least squares of ln(sigma) against ln(kx) over the positive rates."""
    pts = [(k, r) for k, r in sorted(rates.items()) if r > 0 and k > 0]
    if len(pts) < min_points:
        raise InsufficientDataError(f"need {min_points} positive rates, got {len(pts)}")
    lk = np.log([p[0] for p in pts])
    lr = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(lk, lr, 1)
    resid = lr - (slope * lk + intercept)
    tot = np.sum((lr - lr.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / tot if tot > 0 else 1.0
    return ExponentFit(float(slope), float(intercept), float(r2), len(pts))


def dense_spectrum(grid: SpectralGrid, profile: ShearProfile, kx: float) -> np.ndarray:
    """Eigenvalues of the discrete mode operator (interior nodes).

    An independent check on the time-marching rates; not used by growth_rate.
    """
    cum = grid.integrate_y(np.eye(grid.ny)).T
    op = (grid.D2.toarray() - 1j * kx * np.diag(profile.Us)
          + 1j * kx * profile.dUs[:, None] * cum)
    return np.linalg.eigvals(op[1:-1, 1:-1])


KX_SWEEP = (8, 12, 16, 24, 32, 48, 64)


def phase_dt(profile: ShearProfile, kx: float, phase_step: float) -> float:
    """Step with kx * max|U_s| * dt = phase_step, so the advective phase error is kx-independent."""
    speed = float(np.max(np.abs(profile.Us)))
    if speed == 0.0 or kx == 0:
        return phase_step
    return phase_step / (abs(kx) * speed)


@dataclass
class SweepResult:
    profile: str
    rates: dict
    results: list
    fit: ExponentFit | None
    error: str | None = None

    @property
    def exponent(self) -> float:
        """Fitted exponent; 0.0 when too few rates are positive (no growth to fit)."""
        return self.fit.slope if self.fit is not None else 0.0

    @property
    def conclusive(self) -> bool:
        return all(r.conclusive for r in self.results)


def growth_sweep(grid: SpectralGrid, profile: ShearProfile, kx_list: Sequence[int] = KX_SWEEP,
                 horizon: float = 10.0, n_seeds: int = 1, seed: int = 0,
                 phase_step: float = 0.12, fit_window: float = 0.5) -> SweepResult:
    """Growth rates over kx (ordered) and the exponent fit."""
    results = [growth_rate(grid, profile, k, horizon, phase_dt(profile, k, phase_step),
                           n_seeds=n_seeds, seed=seed, fit_window=fit_window)
               for k in sorted(kx_list)]
    rates = {r.kx: r.rate for r in results}
    try:
        fit = fit_growth_exponent(rates)
        err = None
    except InsufficientDataError as exc:
        fit, err = None, str(exc)
    return SweepResult(profile.name, rates, results, fit, err)
