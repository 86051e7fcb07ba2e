"""Critical curve, auxiliary quantities and the Gevrey energy functionals.

Notation: ``D^j f`` is the j-th spectral x derivative, ``f_y`` the y
derivative. The monotonicity quantity is

    g_j = psi (omega D^j omega - omega_y D^j u)
          + (1 - psi)(D^j omega - (omega_y / omega) D^j u),

and the hydrostatic one ``h_j = chi(y - a) D^j omega / sqrt(omega_y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .fields import State, calH_norms, diagnostic_window, x_derivative_norms
from .fields import smooth_step as _smooth_step
from .gevrey import GevreySeq, GevreyWeight, dtau_lp2, lp_tau_norm
from .grid import GridError, SpectralGrid, fornberg_weights


class CriticalCurveError(ValueError):
    """Zero set of omega is not a single non-degenerate curve."""


class CutoffError(ValueError):
    """Cutoff support incompatible with the critical curve or the vorticity."""


class FunctionalError(ValueError):
    """Non-finite energy component or violated lower bound."""


# -- cutoffs -----------------------------------------------------------------


def smooth_step(p: np.ndarray, r1: float, r2: float) -> np.ndarray:
    """C-infinity transition: 1 for p <= r1, 0 for p >= r2."""
    try:
        return _smooth_step(p, r1, r2)
    except ValueError as exc:
        raise CutoffError(str(exc)) from None


@dataclass(frozen=True)
class Cutoffs:
    """chi localizes near the critical curve, psi is 1 on a neighborhood of [0, y_split]."""

    chi_r1: float = 0.25
    chi_r2: float = 0.5
    psi_edge: float = 3.5
    psi_width: float = 0.5

    def __post_init__(self):
        if not 0 < self.chi_r1 < self.chi_r2:
            raise CutoffError("need 0 < chi_r1 < chi_r2")
        if self.psi_width <= 0:
            raise CutoffError("psi_width must be positive")

    def chi(self, p: np.ndarray) -> np.ndarray:
        return smooth_step(np.abs(p), self.chi_r1, self.chi_r2)

    def psi(self, y: np.ndarray) -> np.ndarray:
        return smooth_step(y, self.psi_edge, self.psi_edge + self.psi_width)


# -- critical curve ----------------------------------------------------------


@dataclass(frozen=True)
class CriticalCurve:
    a: np.ndarray
    dy_omega_on_curve: np.ndarray
    valid: bool

    @classmethod
    def empty(cls) -> "CriticalCurve":
        return cls(np.empty(0), np.empty(0), False)


_STENCIL = 6


def _local_nodes(y: np.ndarray, z: float) -> np.ndarray:
    i = int(np.searchsorted(y, z))
    lo = min(max(i - _STENCIL // 2, 0), len(y) - _STENCIL)
    return np.arange(lo, lo + _STENCIL)


def interp_column(y: np.ndarray, f: np.ndarray, z: float, order: int = 0) -> float:
    """Value (order 0) or derivative (order 1) of the local degree-5 interpolant."""
    idx = _local_nodes(y, z)
    return float(fornberg_weights(z, y[idx], order)[:, order] @ f[idx])


def interp_at(grid: SpectralGrid, f: np.ndarray, z: np.ndarray, order: int = 0) -> np.ndarray:
    """Per-column interpolation of f (or its y derivative) at heights z(x)."""
    y = grid.y_nodes
    return np.array([interp_column(y, f[i], z[i], order) for i in range(grid.nx)])


def _column_root(y: np.ndarray, col: np.ndarray, i: int) -> tuple[float, float]:
    idx = _local_nodes(y, 0.5 * (y[i] + y[i + 1]))
    nodes, vals = y[idx], col[idx]

    def poly(z):
        return float(fornberg_weights(z, nodes, 0)[:, 0] @ vals)

    lo, hi = y[i], y[i + 1]
    if col[i] == 0.0:
        root = lo
    elif col[i + 1] == 0.0:
        root = hi
    else:
        root = brentq(poly, lo, hi, xtol=1e-15, rtol=1e-15)
    slope = float(fornberg_weights(root, nodes, 1)[:, 1] @ vals)
    return root, slope


def find_critical_curve(grid: SpectralGrid, omega: np.ndarray, y_split: float = 3.0) -> CriticalCurve:
    """Locate the zero of omega in (0, y_split) in every column.

    Sign changes are bracketed on the nodes; the root is refined on the local
    degree-5 interpolant. Columns must all have exactly one root or all none.
    """
    omega = grid.check_field(omega)
    y = grid.y_nodes
    top = int(np.searchsorted(y, y_split))
    a = np.empty(grid.nx)
    slope = np.empty(grid.nx)
    counts = np.empty(grid.nx, dtype=int)
    for ix in range(grid.nx):
        col = omega[ix]
        seg = np.sign(col[1:top + 1])
        # a node value of exactly zero joins the sign of its left neighbour
        for k in range(1, len(seg)):
            if seg[k] == 0:
                seg[k] = seg[k - 1]
        changes = np.nonzero(seg[:-1] * seg[1:] < 0)[0]
        counts[ix] = len(changes)
        if len(changes) > 1:
            raise CriticalCurveError(f"column x={grid.x_nodes[ix]:.4g} has {len(changes)} sign changes")
        if len(changes) == 1:
            a[ix], slope[ix] = _column_root(y, col, changes[0] + 1)
    if np.all(counts == 0):
        return CriticalCurve.empty()
    if np.any(counts == 0):
        raise CriticalCurveError("critical curve present in some columns only")
    return CriticalCurve(a, slope, True)


def _check_nondegenerate(dy_om: np.ndarray, threshold: float) -> None:
    if np.any(dy_om < threshold):
        raise CriticalCurveError(f"d_y omega on the curve fell below {threshold:g}")


def evolve_critical_curve(grid: SpectralGrid, curve: CriticalCurve, omega: np.ndarray,
                          dt_omega: np.ndarray, dt: float, omega_next: np.ndarray | None = None,
                          dt_omega_next: np.ndarray | None = None,
                          threshold: float = 1e-6) -> CriticalCurve:
    """One RK2 step of da/dt = -omega_t(a) / omega_y(a).

    With only the current fields the ODE is frozen in time and integrated by
    the midpoint rule; when the fields at t + dt are supplied Heun's method
    is used instead.
    """
    if not curve.valid:
        raise CriticalCurveError("cannot evolve an invalid curve")
    dy_om = grid.dy(omega, 1)

    def rate(a, om_y, om_t):
        slope = interp_at(grid, om_y, a)
        _check_nondegenerate(slope, threshold)
        return -interp_at(grid, om_t, a) / slope

    k1 = rate(curve.a, dy_om, dt_omega)
    if omega_next is None or dt_omega_next is None:
        a_new = curve.a + dt * rate(curve.a + 0.5 * dt * k1, dy_om, dt_omega)
        dy_end = dy_om
    else:
        dy_end = grid.dy(omega_next, 1)
        k2 = rate(curve.a + dt * k1, dy_end, dt_omega_next)
        a_new = curve.a + 0.5 * dt * (k1 + k2)
    slope = interp_at(grid, dy_end, a_new)
    _check_nondegenerate(slope, threshold)
    return CriticalCurve(a_new, slope, True)


def omega_time_derivative(state: State, epsilon: float = 0.0) -> np.ndarray:
    """omega_t from the vorticity equation (with tangential diffusion epsilon)."""
    g = state.grid
    om = state.omega
    out = g.dy(om, 2) - state.u * g.dx(om, 1) - state.v * g.dy(om, 1)
    if epsilon:
        out = out + epsilon * g.dx(om, 2)
    return out


# -- auxiliary quantities ----------------------------------------------------


def _chi_field(grid: SpectralGrid, curve: CriticalCurve, cutoffs: Cutoffs, y_split: float) -> np.ndarray:
    if np.any(curve.a - cutoffs.chi_r2 <= 0) or np.any(curve.a + cutoffs.chi_r2 >= y_split):
        raise CutoffError(f"chi(y - a) is not supported in (0, {y_split})")
    return cutoffs.chi(grid.y_nodes[None, :] - curve.a[:, None])


def compute_hj(grid: SpectralGrid, omega: np.ndarray, j: int, curve: CriticalCurve,
               cutoffs: Cutoffs, y_split: float = 3.0, dy_omega: np.ndarray | None = None) -> np.ndarray:
    """h_j = chi(y - a) D^j omega / sqrt(omega_y); zero for invalid curves."""
    if not curve.valid:
        return np.zeros(grid.shape)
    chi = _chi_field(grid, curve, cutoffs, y_split)
    om_y = grid.dy(omega, 1) if dy_omega is None else dy_omega
    return _hj_from(grid, chi, om_y, grid.dx(omega, j))


def _hj_from(grid, chi, om_y, dxj_omega):
    support = chi > 0
    bad = support & (om_y <= 0)
    if np.any(bad):
        ix, iy = np.argwhere(bad)[0]
        raise CutoffError(f"d_y omega <= 0 on supp chi at x={grid.x_nodes[ix]:.4g}, "
                          f"y={grid.y_nodes[iy]:.4g}")
    root = np.sqrt(np.where(support, om_y, 1.0))
    return np.where(support, chi * dxj_omega / root, 0.0)


def _gj_from(psi, om, om_y, dxj_omega, dxj_u, lower=None):
    outer = psi < 1
    if lower is not None and np.any(outer & (np.abs(om) < lower)):
        raise FunctionalError("|omega| below half the lower bound where psi < 1")
    safe = np.where(outer, om, 1.0)
    # omega_y / omega is taken as 0 where omega_y vanishes (covers omega = 0);
    # omega = 0 with omega_y != 0 stays infinite and is caught downstream
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(om_y != 0, om_y / safe, 0.0)
    far = dxj_omega - coef * dxj_u
    near = om * dxj_omega - om_y * dxj_u
    return psi * near + np.where(outer, (1.0 - psi) * far, 0.0)


def _lower_bound_field(grid: SpectralGrid, delta: float | None, sigma: float | None):
    if delta is None or sigma is None:
        return None
    return 0.5 * delta / (1.0 + grid.y_nodes[None, :]) ** sigma


def compute_gj(grid: SpectralGrid, omega: np.ndarray, u: np.ndarray, j: int, cutoffs: Cutoffs,
               delta: float | None = None, sigma: float | None = None) -> np.ndarray:
    """Monotonicity quantity g_j in its singularity-free form."""
    psi = cutoffs.psi(grid.y_nodes)[None, :]
    return _gj_from(psi, omega, grid.dy(omega, 1), grid.dx(omega, j), grid.dx(u, j),
                    _lower_bound_field(grid, delta, sigma))


def compute_tilde_gj(grid: SpectralGrid, omega: np.ndarray, u: np.ndarray, j: int) -> np.ndarray:
    """D^(j-5)(omega D^5 omega - omega_y D^5 u); zero for j < 5."""
    if j < 5:
        return np.zeros(grid.shape)
    bar5, _ = compute_bar_hat_g(grid, omega, u, 5)
    return grid.dx(bar5, j - 5)


def compute_bar_hat_g(grid: SpectralGrid, omega: np.ndarray, u: np.ndarray, k: int):
    """(omega D^k omega - omega_y D^k u, omega D^(k-1) omega_y - omega_y D^(k-1) omega)."""
    if not 1 <= k <= 5:
        raise GridError(f"k must lie in 1..5, got {k}")
    om_y = grid.dy(omega, 1)
    bar = omega * grid.dx(omega, k) - om_y * grid.dx(u, k)
    hat = omega * grid.dx(om_y, k - 1) - om_y * grid.dx(omega, k - 1)
    return bar, hat


def compute_Cj(grid: SpectralGrid, omega: np.ndarray, u: np.ndarray, j: int,
               y_split: float = 3.0, floor: float = 1e-10) -> np.ndarray:
    """C_j(x) = -D^j u(x, y_split) / omega(x, y_split) (cubic interpolation to y_split)."""
    om3 = CubicSpline(grid.y_nodes, omega, axis=1)(y_split)
    if np.any(np.abs(om3) < floor):
        raise FunctionalError(f"|omega| at y={y_split} below {floor:g}")
    u3 = CubicSpline(grid.y_nodes, grid.dx(u, j), axis=1)(y_split)
    return -u3 / om3


def reconstruct_dxju(grid: SpectralGrid, gj: np.ndarray, omega: np.ndarray, curve: CriticalCurve,
                     cutoffs: Cutoffs, j: int, u: np.ndarray, y_split: float = 3.0,
                     band: float | None = None) -> np.ndarray:
    """Rebuild D^j u from g_j.

    Above the curve ``D^j u = omega int_3^y F - C_j omega`` and below it
    ``D^j u = omega int_0^y F`` with ``F = (psi + (1 - psi)/omega)^(-1) g_j / omega^2``.
    ``C_j`` uses the sign convention of :func:`compute_Cj`, hence the minus
    sign. Nodes with ``|y - a| < band`` (default chi_r1/2) are excluded from
    the quadrature and filled by cubic interpolation.
    """
    if not curve.valid:
        raise CriticalCurveError("reconstruction needs a valid critical curve")
    band = 0.5 * cutoffs.chi_r1 if band is None else band
    y = grid.y_nodes
    psi = cutoffs.psi(y)
    cj = compute_Cj(grid, omega, u, j, y_split)
    out = np.empty(grid.shape)
    for ix in range(grid.nx):
        a = curve.a[ix]
        om = omega[ix]
        below = y < a - band
        above = y > a + band
        keep = below | above
        dens = np.where(keep, psi * om + (1.0 - psi), 1.0)
        om_safe = np.where(keep, om, 1.0)
        integrand = om_safe * gj[ix] / (dens * om_safe**2)
        col = np.empty(grid.ny)
        yb = y[below]
        anti_b = CubicSpline(yb, integrand[below]).antiderivative()
        col[below] = om[below] * (anti_b(yb) - anti_b(0.0))
        ya = y[above]
        anti_a = CubicSpline(ya, integrand[above]).antiderivative()
        col[above] = om[above] * (anti_a(ya) - anti_a(y_split) - cj[ix])
        col[~keep] = CubicSpline(y[keep], col[keep])(y[~keep])
        out[ix] = col
    return out


# -- energies ----------------------------------------------------------------


FAMILIES = ("E_omega", "E_dot_omega", "E_h", "E_g1", "E_g2")
DISSIPATIONS = ("D_dot_omega", "D_h", "D_g1", "D_g2")


@dataclass(frozen=True)
class EnergyReport:
    t: float
    tau: float
    E_omega: float
    E_dot_omega: float
    E_h: float
    E_g1: float
    E_g2: float
    calE_alpha: float
    D_dot_omega: float
    D_h: float
    D_g1: float
    D_g2: float
    dtau_calE: float
    alpha: float
    dtau: dict = field(default_factory=dict)
    sequences: dict = field(default_factory=dict, repr=False, compare=False)
    bound_margins: object = None

    def row(self) -> dict:
        return {k: getattr(self, k) for k in (
            "t", "tau", "E_omega", "E_dot_omega", "E_h", "E_g1", "E_g2", "calE_alpha",
            "dtau_calE", "D_dot_omega", "D_h", "D_g1", "D_g2")}


@dataclass(frozen=True)
class EnergySettings:
    gamma: float = 1.0
    s: int = 8
    alpha: float = 0.1
    j_max: int = 48
    y_split: float = 3.0
    cutoffs: Cutoffs = Cutoffs()
    delta: float | None = None
    sigma: float | None = None
    # fractions of L_y; None integrates up to L_y
    window: tuple | None = (0.75, 0.9)

    def window_field(self, grid: SpectralGrid) -> np.ndarray:
        if self.window is None:
            return np.ones(grid.ny)
        return diagnostic_window(grid, *self.window)

    def y_top(self, grid: SpectralGrid) -> float | None:
        return None if self.window is None else self.window[0] * grid.y_max


def _l2(grid, f, weight=None):
    return np.sqrt(grid.weighted_l2_sq(f, weight))


def norm_sequences(state: State, curve: CriticalCurve, settings: EnergySettings) -> dict:
    """All per-j norm sequences used by the energies and dissipations."""
    g = state.grid
    om, u = state.omega, state.u
    jm = settings.j_max
    s = settings.s
    one_y = 1.0 + g.y_nodes
    win = settings.window_field(g)
    root = np.sqrt(win)
    wg = root * one_y**settings.gamma
    y_derivs = [om] + [g.dy_power(om, k) for k in range(1, s + 2)]
    seq = {
        "E_omega": calH_norms(g, om, jm, settings.gamma, s, y_derivs=y_derivs[:s + 1], window=win),
        "E_dot_omega": calH_norms(g, om, jm, settings.gamma, s, True, y_derivs=y_derivs[:s + 1],
                                  window=win),
        "D_dot_omega": calH_norms(g, y_derivs[1], jm, settings.gamma, s, True, y_derivs=y_derivs[1:],
                                  window=win),
        "dxj_omega": x_derivative_norms(g, om, jm, root),
    }
    om_y = y_derivs[1]
    psi = settings.cutoffs.psi(g.y_nodes)[None, :]
    lower = _lower_bound_field(g, settings.delta, settings.sigma)
    chi = _chi_field(g, curve, settings.cutoffs, settings.y_split) if curve.valid else None
    bar5 = om * g.dx(om, 5) - om_y * g.dx(u, 5)
    om_hat = np.fft.rfft(om, axis=0)
    u_hat = np.fft.rfft(u, axis=0)
    bar_hat = np.fft.rfft(bar5, axis=0)
    names = ("E_h", "D_h", "E_g1", "D_g1", "E_g2", "D_g2", "g_low", "tg_low", "g_minus_tg")
    for name in names:
        seq[name] = np.zeros(jm + 1)
    seq["dy_tg_shift"] = np.zeros((3, jm + 1))
    low = g.y_nodes <= settings.y_split
    chi_root = None if chi is None else np.sqrt(chi)
    tg_prev = [np.zeros(g.shape), np.zeros(g.shape)]
    for j in range(jm + 1):
        dj_om = np.fft.irfft(om_hat * g.fourier_multiplier(j)[:, None], n=g.nx, axis=0)
        dj_u = np.fft.irfft(u_hat * g.fourier_multiplier(j)[:, None], n=g.nx, axis=0)
        gj = _gj_from(psi, om, om_y, dj_om, dj_u, lower)
        gj_y = g.dy(gj, 1)
        seq["E_g1"][j] = _l2(g, gj, wg)
        seq["D_g1"][j] = _l2(g, gj_y, wg)
        seq["g_low"][j] = _restricted_l2(g, gj, low)
        if j >= 5:
            tg = np.fft.irfft(bar_hat * g.fourier_multiplier(j - 5)[:, None], n=g.nx, axis=0)
        else:
            tg = np.zeros(g.shape)
        tg_y = g.dy(tg, 1)
        seq["E_g2"][j] = (j + 1) ** 0.75 * _l2(g, tg, root)
        seq["D_g2"][j] = j**0.75 * _l2(g, tg_y, root)
        seq["tg_low"][j] = _restricted_l2(g, tg, low)
        # ||d_y^l tilde g_{j-l}|| for l = 0, 1, 2, indexed by j
        seq["dy_tg_shift"][0, j] = _l2(g, tg, root)
        if j >= 1:
            seq["dy_tg_shift"][1, j] = _l2(g, g.dy(tg_prev[0], 1), root)
        if j >= 2:
            seq["dy_tg_shift"][2, j] = _l2(g, g.dy(tg_prev[1], 2), root)
        tg_prev = [tg, tg_prev[0]]
        if chi is not None:
            hj = _hj_from(g, chi, om_y, dj_om)
            seq["E_h"][j] = _l2(g, hj, root)
            seq["D_h"][j] = _l2(g, g.dy(hj, 1), root)
            seq["g_minus_tg"][j] = _l2(g, chi_root * (tg_y - gj_y), root)
    for name, vals in seq.items():
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(np.atleast_2d(vals)))[0][-1]
            raise FunctionalError(f"non-finite {name} at j={bad}")
    return seq


def _restricted_l2(grid: SpectralGrid, f: np.ndarray, mask: np.ndarray) -> float:
    return float(np.sqrt(grid.dx_cell * np.sum((f[:, mask] ** 2) @ grid.y_weights[mask])))


def _sq_and_dtau(values: np.ndarray, w: GevreyWeight) -> tuple[float, float]:
    s = GevreySeq(values)
    return lp_tau_norm(s, w) ** 2, dtau_lp2(s, w).exact


def calE(sequences: dict, w: GevreyWeight, alpha: float = 0.1) -> float:
    """Combined functional E_dot_omega + E_h + E_g1 + alpha E_g2 from stored norm sequences."""
    parts = {n: lp_tau_norm(GevreySeq(sequences[n]), w) ** 2
             for n in ("E_dot_omega", "E_h", "E_g1", "E_g2")}
    return parts["E_dot_omega"] + parts["E_h"] + parts["E_g1"] + alpha * parts["E_g2"]


def energies(state: State, curve: CriticalCurve, w: GevreyWeight,
             settings: EnergySettings = EnergySettings(), sequences: dict | None = None) -> EnergyReport:
    """Energies, dissipations and the exact tau derivative at radius w.tau."""
    seq = norm_sequences(state, curve, settings) if sequences is None else sequences
    return energies_from_sequences(state.t, seq, w, settings)


def energies_from_sequences(t: float, seq: dict, w: GevreyWeight,
                            settings: EnergySettings = EnergySettings()) -> EnergyReport:
    vals, dtau = {}, {}
    for name in FAMILIES + DISSIPATIONS:
        vals[name], dtau[name] = _sq_and_dtau(seq[name], w)
    a = settings.alpha
    cal = vals["E_dot_omega"] + vals["E_h"] + vals["E_g1"] + a * vals["E_g2"]
    dcal = dtau["E_dot_omega"] + dtau["E_h"] + dtau["E_g1"] + a * dtau["E_g2"]
    for name, v in list(vals.items()) + [("calE", cal)]:
        if not np.isfinite(v):
            raise FunctionalError(f"non-finite energy {name}")
    return EnergyReport(
        t=t, tau=w.tau, calE_alpha=cal, dtau_calE=dcal, alpha=a, dtau=dtau,
        sequences=seq, **vals)


# -- lemma harnesses ---------------------------------------------------------


class RatioReport(NamedTuple):
    name: str
    lhs: float
    rhs: float
    ratio: float
    determinate: bool


def _ratio(name: str, lhs: float, rhs: float) -> RatioReport:
    if rhs < 1e-300:
        return RatioReport(name, lhs, rhs, float("nan"), False)
    return RatioReport(name, lhs, rhs, lhs / rhs, True)


def relations_check(report: EnergyReport) -> list[RatioReport]:
    """(E_omega - E_dot_omega) vs (E_g1 + E_h), and the same for tau derivatives.

    The difference E_omega - E_dot_omega is evaluated directly as the l2(tau)
    energy of ||D^j omega|| to avoid cancellation.
    """
    seq = report.sequences
    w = GevreyWeight(report.tau)
    diff, ddiff = _sq_and_dtau(seq["dxj_omega"], w)
    mono = report.E_g1 + report.E_h
    dmono = report.dtau["E_g1"] + report.dtau["E_h"]
    return [
        _ratio("r1", diff, mono),
        _ratio("r2", mono, diff),
        _ratio("r1_dtau", ddiff, dmono),
        _ratio("r2_dtau", dmono, ddiff),
    ]


def _jpow(j_max: int, power: float) -> np.ndarray:
    j = np.maximum(np.arange(j_max + 1, dtype=float), 1.0)
    return j**power


def appendix_lemma_suite(state: State, report: EnergyReport, settings: EnergySettings) -> list[RatioReport]:
    """Ratios lhs/rhs of the auxiliary lemmas on one snapshot.

    Powers ``j^beta`` with beta < 0 are evaluated at max(j, 1).
    """
    seq = report.sequences
    w = GevreyWeight(report.tau)
    jm = settings.j_max
    g = state.grid

    def l2tau(values):
        return lp_tau_norm(GevreySeq(values), w)

    out = []
    for alpha in (0.0, 3.0, 5.0):
        lhs = l2tau(_jpow(jm, alpha / 4) * seq["g_low"])
        rhs = l2tau(_jpow(jm, alpha / 4) * seq["tg_low"]) + l2tau(_jpow(jm, (alpha - 3) / 4) * seq["E_omega"])
        out.append(_ratio(f"g_vs_tilde_g[alpha={alpha:g}]", lhs, rhs))
    for alpha in (0.0, 1.0):
        rhs = l2tau(_jpow(jm, alpha) * seq["E_omega"])
        for l in range(3):
            lhs = l2tau(_jpow(jm, alpha) * seq["dy_tg_shift"][l])
            out.append(_ratio(f"tilde_g_vs_omega[alpha={alpha:g},l={l}]", lhs, rhs))
    lhs = l2tau(_jpow(jm, 0.75) * seq["g_minus_tg"]) ** 2
    out.append(_ratio("dy_tilde_g_minus_g", lhs, report.D_h + report.E_omega))
    worst = None
    for j in range(min(jm, 8) + 1):
        cj = compute_Cj(g, state.omega, state.u, j, settings.y_split)
        r = _ratio(f"C_j[j={j}]", float(np.sqrt(g.dx_cell * np.sum(cj**2))), seq["dxj_omega"][j])
        if r.determinate and (worst is None or r.ratio > worst.ratio):
            worst = r
    if worst is not None:
        out.append(worst._replace(name="C_j_vs_dxj_omega"))
    return out
