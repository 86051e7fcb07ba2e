"""Flow state, incompressibility, weighted Sobolev norms and initial data."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .grid import GridError, SpectralGrid


class HypothesisError(ValueError):
    """Generated or supplied data violates (H) or (H')."""


@dataclass(frozen=True)
class State:
    """Discrete fields at one time instant.

    ``omega`` is the y derivative of ``u``; ``v`` is slaved to ``u`` through
    the divergence-free condition.
    """

    t: float
    u: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    grid: SpectralGrid = field(repr=False)

    @classmethod
    def from_u(cls, grid: SpectralGrid, u: np.ndarray, t: float = 0.0) -> "State":
        u = np.array(grid.check_field(u), dtype=float)
        u[:, 0] = 0.0
        return cls(t=t, u=u, v=recover_v(grid, u), omega=grid.dy(u, 1), grid=grid)

    def check(self, tol: float = 1e-5, far_field: float = 0.0) -> None:
        """Raise if the boundary, consistency or divergence invariants fail."""
        g = self.grid
        if np.any(self.u[:, 0] != 0.0) or np.any(self.v[:, 0] != 0.0):
            raise HypothesisError("u and v must vanish at y=0")
        if np.max(np.abs(self.u[:, -1] - far_field)) > 1e-8:
            raise HypothesisError("u does not match its far-field value at y=L_y")
        scale = max(1.0, np.sqrt(g.weighted_l2_sq(self.omega)))
        if np.sqrt(g.weighted_l2_sq(g.dy(self.u, 1) - self.omega)) > tol * scale:
            raise HypothesisError("stored omega is not dy(u)")
        div = g.dx(self.u, 1) + g.dy(self.v, 1)
        if np.sqrt(g.weighted_l2_sq(div)) > tol * scale:
            raise HypothesisError("discrete incompressibility violated")


def recover_v(grid: SpectralGrid, u: np.ndarray) -> np.ndarray:
    """v = -int_0^y dx u, with v = 0 at the wall."""
    v = -grid.integrate_y(grid.dx(u, 1))
    v[:, 0] = 0.0
    return v


def _check_norm_args(s: int, gamma: float) -> None:
    if s < 0 or gamma < 0:
        raise GridError(f"need s >= 0 and gamma >= 0, got s={s}, gamma={gamma}")


def sobolev_weighted_norm(grid: SpectralGrid, g: np.ndarray, s: int, gamma: float) -> float:
    """Norm of H^s_gamma in y (L^2 in x for 2-D fields).

    ``||g||^2 = sum_{k<=s} ||(1+y)^(gamma+k) d_y^k g||^2``.
    """
    _check_norm_args(s, gamma)
    g = np.asarray(g, dtype=float)
    one_y = 1.0 + grid.y_nodes
    total = 0.0
    deriv = g
    for k in range(s + 1):
        if k:
            deriv = grid.dy(deriv, 1) if k == 1 else grid.dy_power(g, k)
        total += grid.weighted_l2_sq(deriv, one_y ** (gamma + k))
    return float(np.sqrt(total))


def _x_power_spectrum_logs(grid: SpectralGrid, f: np.ndarray, weight: np.ndarray):
    # log of the y-integrated, weighted Fourier energies per rfft mode, such
    # that ||dx^j f||^2 = sum_k exp(2 j log|k| + out[k]) (Parseval).
    fh = np.fft.rfft(f * weight, axis=0)
    e = (np.abs(fh) ** 2) @ grid.y_weights
    mult = np.full(len(e), 2.0)
    mult[0] = 1.0
    mult[-1] = 1.0
    e = e * mult * grid.x_period / grid.nx**2
    with np.errstate(divide="ignore"):
        return np.log(e)


def x_derivative_norms(grid: SpectralGrid, f: np.ndarray, j_max: int,
                       weight: np.ndarray | None = None) -> np.ndarray:
    """||weight * dx^j f||_{L^2} for j = 0..j_max, computed through Parseval."""
    w = np.ones(grid.ny) if weight is None else np.asarray(weight)
    loge = _x_power_spectrum_logs(grid, f, w)
    k = grid.wavenumbers
    with np.errstate(divide="ignore"):
        logk = np.log(k)
    out = np.empty(j_max + 1)
    nyq = np.zeros(len(k), dtype=bool)
    nyq[-1] = True
    for j in range(j_max + 1):
        terms = loge.copy()
        if j:
            terms = terms + 2 * j * logk
            if j % 2:
                terms[nyq] = -np.inf
        out[j] = np.exp(0.5 * logsumexp(terms)) if np.isfinite(terms).any() else 0.0
    return out


def diagnostic_window(grid: SpectralGrid, lo: float = 0.75, hi: float = 0.9) -> np.ndarray:
    """Smooth y-window, 1 below lo*L_y and 0 above hi*L_y.

    Norms taken under this window ignore the layer that any truncation
    condition at y = L_y leaves behind.
    """
    return smooth_step(grid.y_nodes, lo * grid.y_max, hi * grid.y_max)


def calH_norms(grid: SpectralGrid, omega: np.ndarray, j_max: int, gamma: float, s: int,
               homogeneous: bool = False, y_derivs: list | None = None,
               window: np.ndarray | None = None) -> np.ndarray:
    """All ||omega||_{calH^j_gamma} (or the homogeneous variant) for j <= j_max.

    Sums ||(1+y)^(gamma+j2) dx^j1 dy^j2 omega||^2 over j1 + j2 = j with
    j2 <= min(j, s); the homogeneous variant keeps only j2 >= 1.
    ``y_derivs`` may supply precomputed dy^k omega for k = 0..s; ``window``
    multiplies the y-integrand (see diagnostic_window).
    """
    _check_norm_args(s, gamma)
    one_y = 1.0 + grid.y_nodes
    root = 1.0 if window is None else np.sqrt(window)
    sq = np.zeros(j_max + 1)
    for j2 in range(1 if homogeneous else 0, min(s, j_max) + 1):
        d = y_derivs[j2] if y_derivs is not None else grid.dy_power(omega, j2)
        xn = x_derivative_norms(grid, d, j_max - j2, root * one_y ** (gamma + j2))
        sq[j2:] += xn**2
    return np.sqrt(sq)


def calH_norm(grid: SpectralGrid, omega: np.ndarray, j: int, gamma: float, s: int,
              homogeneous: bool = False) -> float:
    if j < 0:
        raise GridError("j must be >= 0")
    return float(calH_norms(grid, omega, j, gamma, s, homogeneous)[j])


class InequalityReport(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def hardy_check(grid: SpectralGrid, f: np.ndarray, lam: float, tol: float = 1e-10) -> InequalityReport:
    """Weighted Hardy inequality on [0, L_y] with the sharp classical constants.

    For lam > -1/2 (f vanishing at the top):
        ||(1+y)^lam f|| <= 2/(2 lam + 1) ||(1+y)^(lam+1) f'||.
    For lam < -1/2:
        ||(1+y)^lam f|| <= sqrt(-1/(2 lam + 1)) ||f(0)|| - 2/(2 lam + 1) ||(1+y)^(lam+1) f'||.
    """
    f = np.asarray(f, dtype=float)
    if lam == -0.5:
        raise GridError("lambda = -1/2 is not supported (constant blows up)")
    one_y = 1.0 + grid.y_nodes
    lhs = np.sqrt(grid.weighted_l2_sq(f, one_y**lam))
    grad = np.sqrt(grid.weighted_l2_sq(grid.dy(f, 1), one_y ** (lam + 1)))
    if lam > -0.5:
        if np.max(np.abs(f[..., -1])) > 1e-8:
            raise GridError("first Hardy inequality needs f -> 0 at y = L_y")
        rhs = 2.0 / (2 * lam + 1) * grad
    else:
        trace = f[..., 0]
        trace_norm = abs(float(trace)) if f.ndim == 1 else np.sqrt(grid.dx_cell * np.sum(trace**2))
        rhs = np.sqrt(-1.0 / (2 * lam + 1)) * trace_norm - 2.0 / (2 * lam + 1) * grad
    return InequalityReport(float(lhs), float(rhs), bool(lhs <= rhs * (1 + tol)))


class SobolevReport(NamedTuple):
    lhs: float
    rhs: float
    ratio: float
    holds: bool


def sobolev_check(grid: SpectralGrid, f: np.ndarray, c_sob: float) -> SobolevReport:
    """Grid-max of |f| against ||f|| + ||f_x|| + ||f_y|| + ||f_xy||."""
    f = grid.check_field(np.asarray(f, dtype=float))
    fx = grid.dx(f, 1)
    terms = [f, fx, grid.dy(f, 1), grid.dy(fx, 1)]
    rhs = float(sum(np.sqrt(grid.weighted_l2_sq(t)) for t in terms))
    lhs = float(np.max(np.abs(f)))
    ratio = 0.0 if rhs == 0.0 else lhs / rhs
    return SobolevReport(lhs, rhs, ratio, ratio <= c_sob)


# -- initial data --------------------------------------------------------------


@dataclass(frozen=True)
class InitialDataSpec:
    """Parameters of the generated initial vorticity.

    The critical height is ``a0(x) = a0_mean + a0_amp sin(a0_mode x)`` unless a
    callable ``a0`` is given.
    """

    a0_mean: float = 1.5
    a0_amp: float = 0.5
    a0_mode: int = 1
    sigma: float = 2.0
    delta: float = 0.01
    gamma: float = 1.0
    s: int = 8
    monotone: bool = False
    compatible: bool = False
    y_split: float = 3.0
    a0: Callable[[np.ndarray], np.ndarray] | None = None

    def critical_height(self, x: np.ndarray) -> np.ndarray:
        if self.a0 is not None:
            return np.asarray(self.a0(x), dtype=float)
        return self.a0_mean + self.a0_amp * np.sin(self.a0_mode * x)

    def validate(self) -> None:
        if self.s < 8 or self.s % 2:
            raise HypothesisError(f"s must be even and >= 8 (got {self.s})")
        if self.gamma < 1:
            raise HypothesisError(f"gamma must be >= 1 (got {self.gamma})")
        if self.sigma < self.gamma + 0.5:
            raise HypothesisError(
                f"sigma must satisfy sigma >= gamma + 1/2 (got sigma={self.sigma}, gamma={self.gamma})")
        if self.delta <= 0:
            raise HypothesisError("delta must be positive")


def profile_phi(y: np.ndarray, sigma: float, width: float = 1.0) -> np.ndarray:
    """Positive profile (1 + tanh y)(1 + y/width)^(-sigma-1)."""
    return (1.0 + np.tanh(y)) * (1.0 + y / width) ** (-sigma - 1.0)


def smooth_step(p: np.ndarray, r1: float, r2: float) -> np.ndarray:
    """C-infinity transition: 1 for p <= r1, 0 for p >= r2."""
    if not r2 > r1:
        raise ValueError("need r2 > r1")
    q = np.clip((np.asarray(p, dtype=float) - r1) / (r2 - r1), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f_up = np.where(q < 1, np.exp(-1.0 / np.where(q < 1, 1 - q, 1.0)), 0.0)
        f_dn = np.where(q > 0, np.exp(-1.0 / np.where(q > 0, q, 1.0)), 0.0)
    return f_up / (f_up + f_dn)


def _column(y: np.ndarray, a: float, sigma: float, width: float, mass_fn, wall=None):
    p = profile_phi(y, sigma, width)
    col = (y - a) * p / mass_fn(p)
    if wall is None:
        return col
    blend, wall_profile = wall
    return blend * wall_profile + (1.0 - blend) * col


def _solve_width(grid: SpectralGrid, a: float, sigma: float, wall=None) -> float:
    # Width whose column integral vanishes, so u -> 0 at L_y.
    y = grid.y_nodes

    def mass(f):
        return grid.integrate_y(f, 0.0, grid.y_max)

    def moment(log_w):
        return mass(_column(y, a, sigma, np.exp(log_w), mass, wall))

    lo, hi = np.log(1e-3), np.log(1e4)
    if not moment(lo) < 0 < moment(hi):
        raise HypothesisError(f"cannot balance the column integral for a0={a:.4g}")
    return float(np.exp(brentq(moment, lo, hi, xtol=1e-14, rtol=1e-14)))


def _wall_layer(grid: SpectralGrid, a0: np.ndarray, sigma: float):
    """x-independent, even-in-y wall profile and its blending weight.

    Below 0.1 min(a0) the vorticity equals -A exp(-y^2) in every column, so
    u_x = v = 0 there and the data meet the wall compatibility conditions of
    every order (all odd y-derivatives of omega vanish at y = 0).
    """
    y = grid.y_nodes
    lo = float(np.min(a0))
    blend = smooth_step(y, 0.1 * lo, 0.9 * lo)
    a_bar = float(np.mean(a0))
    w_bar = _solve_width(grid, a_bar, sigma)
    p = profile_phi(y, sigma, w_bar)
    amp = a_bar / grid.integrate_y(p, 0.0, grid.y_max)
    return blend, -amp * np.exp(-y**2)


def make_initial_data(grid: SpectralGrid, spec: InitialDataSpec, check: bool = True) -> State:
    """Initial state with a single non-degenerate critical curve y = a0(x).

    Each column is ``omega0 = (y - a0) phi(y; w)`` where the profile width
    ``w(x)`` is chosen so that ``int_0^{L_y} omega0 dy = 0`` (u vanishes at
    the top). With ``monotone=True`` the profile itself is used, x-modulated
    by a zero-mass perturbation. ``compatible=True`` blends every column
    into a common even wall profile below the critical curve (see
    ``_wall_layer``), which makes the data compatible with the wall to all
    orders; the root, its slope and everything above 0.9 min(a0) are
    unchanged in form.
    """
    spec.validate()
    x, y = grid.x_nodes, grid.y_nodes
    a0 = spec.critical_height(x)
    if spec.monotone:
        base = profile_phi(y, spec.sigma)
        base /= grid.integrate_y(base, 0.0, grid.y_max)
        rho = np.exp(-y / 2)
        rho = rho - y * rho * (grid.integrate_y(base * rho, 0.0, grid.y_max)
                               / grid.integrate_y(base * y * rho, 0.0, grid.y_max))
        rho /= np.max(np.abs(rho))
        amp = min(0.3, abs(spec.a0_amp))
        omega = base[None, :] * (1.0 + amp * np.sin(spec.a0_mode * x)[:, None] * rho[None, :])
    else:
        if np.any(a0 <= 0) or np.any(a0 >= spec.y_split):
            raise HypothesisError(f"critical height must lie in (0, {spec.y_split})")
        wall = _wall_layer(grid, a0, spec.sigma) if spec.compatible else None

        def mass(f):
            return grid.integrate_y(f, 0.0, grid.y_max)

        omega = np.empty(grid.shape)
        for i, a in enumerate(a0):
            w = _solve_width(grid, a, spec.sigma, wall)
            omega[i] = _column(y, a, spec.sigma, w, mass, wall)
    u = grid.integrate_y(omega)
    u[:, 0] = 0.0
    far = u[:, -1].mean() if spec.monotone else 0.0
    u[:, -1] = far
    state = State(t=0.0, u=u, v=recover_v(grid, u), omega=omega, grid=grid)
    if check:
        verify_hypotheses(state, spec)
    return state


class HypothesisReport(NamedTuple):
    monotone: bool
    single_curve: bool
    lower_margin: float
    upper_margin: float


def verify_hypotheses(state: State, spec: InitialDataSpec, factor: float = 2.0) -> HypothesisReport:
    """Node-wise (H) and (H') checks; raises HypothesisError naming the failing bound.

    ``factor`` is 2 for the initial-time bounds and 1 for the all-time ones.
    """
    from .functionals import CriticalCurveError, find_critical_curve

    g = state.grid
    om = state.omega
    try:
        curve = find_critical_curve(g, om, y_split=spec.y_split)
    except CriticalCurveError as exc:
        raise HypothesisError(f"(H) violated: {exc}") from exc
    if spec.monotone:
        if curve.valid:
            raise HypothesisError("monotone data must not have a critical curve")
    else:
        if not curve.valid:
            raise HypothesisError("(H) violated: no critical curve")
        if np.any(curve.dy_omega_on_curve <= 0):
            raise HypothesisError("(H) violated: d_y omega <= 0 on the critical curve")
    lower, upper = hprime_margins(state, spec.delta, spec.sigma, spec.y_split, factor)
    if lower < 0:
        raise HypothesisError(f"(H') lower bound |omega| >= {factor:g} delta/(1+y)^sigma violated "
                              f"(margin {lower:.3g})")
    if min(upper.values()) < 0:
        bad = min(upper, key=upper.get)
        raise HypothesisError(f"(H') upper bound on d^alpha omega, alpha={bad}, violated "
                              f"(margin {upper[bad]:.3g})")
    return HypothesisReport(spec.monotone, curve.valid, lower, min(upper.values()))


ALPHAS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


def hprime_margins(state: State, delta: float, sigma: float, y_split: float, factor: float = 1.0,
                   y_top: float | None = None):
    """Margins of the pointwise vorticity bounds on y_split < y <= y_top (default L_y).

    lower = min (1+y)^sigma |omega| - factor*delta;
    upper[alpha] = min 1/(factor*delta*(1+y)^(sigma+alpha_2)) - |d^alpha omega|.
    """
    g = state.grid
    om = state.omega
    mask = g.y_nodes > y_split
    if y_top is not None:
        mask &= g.y_nodes <= y_top
    one_y = 1.0 + g.y_nodes[mask]
    lower = float(np.min(one_y**sigma * np.abs(om[:, mask])) - factor * delta)
    upper = {}
    for a1, a2 in ALPHAS:
        d = g.dx(om, a1) if a1 else om
        d = g.dy(d, a2) if a2 else d
        bound = 1.0 / (factor * delta * one_y ** (sigma + a2))
        upper[(a1, a2)] = float(np.min(bound - np.abs(d[:, mask])))
    return lower, upper


def with_time(state: State, t: float) -> State:
    return replace(state, t=t)
