import numpy as np
import pytest

from prandtl_gevrey.fields import InitialDataSpec, State, make_initial_data
from prandtl_gevrey.functionals import (CriticalCurve, CriticalCurveError, CutoffError, Cutoffs,
                                        EnergySettings, FunctionalError, appendix_lemma_suite, calE,
                                        compute_bar_hat_g, compute_Cj, compute_gj, compute_hj,
                                        compute_tilde_gj, energies, evolve_critical_curve,
                                        find_critical_curve, reconstruct_dxju, relations_check,
                                        smooth_step)
from prandtl_gevrey.gevrey import GevreyWeight
from prandtl_gevrey.grid import GridError, SpectralGrid

SMALL = EnergySettings(j_max=8)


@pytest.fixture(scope="module")
def g():
    return SpectralGrid(16, 257)


def column_field(g, f):
    _, y = g.mesh()
    return f(y)


def test_smooth_step():
    p = np.array([0.0, 0.25, 0.375, 0.5, 1.0])
    s = smooth_step(p, 0.25, 0.5)
    assert s[0] == 1 and s[1] == 1 and s[3] == 0 and s[4] == 0
    assert 0 < s[2] < 1
    with pytest.raises(CutoffError):
        Cutoffs(chi_r1=0.5, chi_r2=0.25)


def test_linear_curve(g):
    curve = find_critical_curve(g, column_field(g, lambda y: y - 1.0))
    assert curve.valid
    assert np.max(np.abs(curve.a - 1.0)) < 1e-12
    assert np.max(np.abs(curve.dy_omega_on_curve - 1.0)) < 1e-10


def test_no_root_gives_invalid_curve(g):
    assert not find_critical_curve(g, column_field(g, lambda y: np.exp(-y))).valid


def test_two_roots_rejected(g):
    with pytest.raises(CriticalCurveError):
        find_critical_curve(g, column_field(g, lambda y: (y - 1.0) * (y - 2.0)))


def test_partial_curve_rejected(g):
    x, y = g.mesh()
    with pytest.raises(CriticalCurveError):
        find_critical_curve(g, y - (1.0 + 2.0 * np.sin(x)))


def test_evolve_static(g):
    om = column_field(g, lambda y: y - 1.0)
    curve = find_critical_curve(g, om)
    new = evolve_critical_curve(g, curve, om, np.zeros(g.shape), 0.01)
    assert np.array_equal(new.a, curve.a)


def test_evolve_translating_zero(g):
    # omega = y - (1 + t): da/dt = 1
    om = column_field(g, lambda y: y - 1.0)
    curve = find_critical_curve(g, om)
    rate = -np.ones(g.shape)
    new = evolve_critical_curve(g, curve, om, rate, 0.01, om - 0.01, rate)
    assert np.max(np.abs(new.a - 1.01)) < 1e-12


def test_evolve_rejects_degenerate_slope(g):
    om = column_field(g, lambda y: (y - 1.0) ** 3)
    curve = CriticalCurve(np.ones(g.nx), np.zeros(g.nx), True)
    with pytest.raises(CriticalCurveError):
        evolve_critical_curve(g, curve, om, np.zeros(g.shape), 0.01)


def test_evolution_tracks_solver(compat_state):
    from prandtl_gevrey.functionals import omega_time_derivative
    from prandtl_gevrey.solver import Integrator, SolverConfig

    cfg = SolverConfig(dt=1e-3)
    integ = Integrator(compat_state.grid, cfg)
    g = compat_state.grid
    st = compat_state
    curve = find_critical_curve(g, st.omega)
    for _ in range(10):
        nxt = integ.step(st)
        curve = evolve_critical_curve(g, curve, st.omega, omega_time_derivative(st), cfg.dt,
                                      nxt.omega, omega_time_derivative(nxt))
        st = nxt
    assert np.max(np.abs(curve.a - find_critical_curve(g, st.omega).a)) < 1e-4


def test_hj_x_independent(g):
    om = column_field(g, lambda y: y - 1.0)
    curve = find_critical_curve(g, om)
    cut = Cutoffs()
    h0 = compute_hj(g, om, 0, curve, cut)
    _, y = g.mesh()
    assert np.allclose(h0, cut.chi(y - 1.0) * (y - 1.0), atol=1e-10)
    assert np.max(np.abs(compute_hj(g, om, 1, curve, cut))) < 1e-12


def test_hj_support_and_invalid_curve(ref_state):
    g = ref_state.grid
    curve = find_critical_curve(g, ref_state.omega)
    h = compute_hj(g, ref_state.omega, 2, curve, Cutoffs())
    _, y = g.mesh()
    assert np.all(h[(y <= 0) | (y >= 3)] == 0)
    assert np.all(compute_hj(g, ref_state.omega, 2, CriticalCurve.empty(), Cutoffs()) == 0)


def test_hj_cutoff_outside_window(g):
    om = column_field(g, lambda y: y - 0.3)
    with pytest.raises(CutoffError):
        compute_hj(g, om, 0, find_critical_curve(g, om), Cutoffs())


def test_gj_x_independent(g):
    y = g.y_nodes
    om = np.tile(np.exp(-y) * (y - 1), (g.nx, 1))
    u = g.integrate_y(om)
    cut = Cutoffs()
    for j in (1, 3):
        assert np.max(np.abs(compute_gj(g, om, u, j, cut))) < 1e-10
    g0 = compute_gj(g, om, u, 0, cut)
    near = y < cut.psi_edge
    assert np.allclose(g0[:, near], (om * om - g.dy(om, 1) * u)[:, near], atol=1e-13)


def test_gj_lower_bound_violation(ref_state):
    g = ref_state.grid
    om = ref_state.omega.copy()
    om[:, -5:] = 0.0
    with pytest.raises(FunctionalError):
        compute_gj(g, om, ref_state.u, 1, Cutoffs(), delta=0.1, sigma=2.0)


def test_tilde_g(ref_state):
    g = ref_state.grid
    om, u = ref_state.omega, ref_state.u
    assert np.all(compute_tilde_gj(g, om, u, 4) == 0)
    bar5, _ = compute_bar_hat_g(g, om, u, 5)
    assert np.array_equal(compute_tilde_gj(g, om, u, 5), bar5)
    assert np.allclose(compute_tilde_gj(g, om, u, 6), g.dx(bar5, 1))


def test_bar_hat(ref_state):
    g = ref_state.grid
    _, hat = compute_bar_hat_g(g, ref_state.omega, ref_state.u, 1)
    assert np.all(hat == 0)
    with pytest.raises(GridError):
        compute_bar_hat_g(g, ref_state.omega, ref_state.u, 6)


def test_cj_values(g):
    y = g.y_nodes
    om = np.tile(np.exp(-y), (g.nx, 1))
    u = 1 - om
    c0 = compute_Cj(g, om, u, 0)
    assert np.allclose(c0, -(1 - np.exp(-3)) / np.exp(-3), rtol=1e-6)
    assert np.max(np.abs(compute_Cj(g, om, u, 2))) < 1e-10
    with pytest.raises(FunctionalError):
        compute_Cj(g, column_field(g, lambda y: y - 3.0), u, 0)


@pytest.mark.parametrize("j", [0, 1, 3])
def test_reconstruction(ref_state, j):
    g = ref_state.grid
    cut = Cutoffs()
    curve = find_critical_curve(g, ref_state.omega)
    gj = compute_gj(g, ref_state.omega, ref_state.u, j, cut)
    rec = reconstruct_dxju(g, gj, ref_state.omega, curve, cut, j, ref_state.u)
    ref = g.dx(ref_state.u, j)
    far = np.abs(g.y_nodes[None, :] - curve.a[:, None]) > 0.2
    err = np.sqrt(np.sum((rec - ref)[far] ** 2) / np.sum(ref[far] ** 2))
    assert err < 1e-5


def test_reconstruction_needs_curve(ref_state):
    g = ref_state.grid
    with pytest.raises(CriticalCurveError):
        reconstruct_dxju(g, np.zeros(g.shape), ref_state.omega, CriticalCurve.empty(), Cutoffs(), 0,
                         ref_state.u)


def test_energies_zero_state(g):
    st = State.from_u(g, np.zeros(g.shape))
    rep = energies(st, CriticalCurve.empty(), GevreyWeight(1.0), SMALL)
    assert all(getattr(rep, k) == 0 for k in ("E_omega", "E_dot_omega", "E_h", "E_g1", "E_g2",
                                               "calE_alpha", "dtau_calE"))
    assert all(not r.determinate for r in relations_check(rep))


def test_energies_monotone(grid32):
    spec = InitialDataSpec(monotone=True)
    st = make_initial_data(grid32, spec)
    curve = find_critical_curve(grid32, st.omega)
    rep = energies(st, curve, GevreyWeight(1.0), SMALL)
    assert rep.E_h == 0 and rep.D_h == 0
    assert rep.E_g1 > 0


@pytest.fixture(scope="module")
def ref_report(ref_state):
    curve = find_critical_curve(ref_state.grid, ref_state.omega)
    return curve, energies(ref_state, curve, GevreyWeight(1.0), SMALL)


def test_energy_ordering(ref_report):
    _, rep = ref_report
    assert 0 < rep.E_dot_omega < rep.E_omega
    assert rep.E_h > 0 and rep.E_g2 > 0


def test_dtau_total_is_sum_of_parts(ref_report):
    _, rep = ref_report
    d = rep.dtau
    expect = d["E_dot_omega"] + d["E_h"] + d["E_g1"] + rep.alpha * d["E_g2"]
    assert rep.dtau_calE == pytest.approx(expect, rel=1e-14)
    assert rep.calE_alpha == pytest.approx(calE(rep.sequences, GevreyWeight(rep.tau), rep.alpha),
                                           rel=1e-12)


def test_dtau_matches_difference_quotient(ref_report, ref_state):
    curve, rep = ref_report
    h = 1e-5
    up = energies(ref_state, curve, GevreyWeight(1 + h), SMALL, rep.sequences).calE_alpha
    dn = energies(ref_state, curve, GevreyWeight(1 - h), SMALL, rep.sequences).calE_alpha
    assert rep.dtau_calE == pytest.approx((up - dn) / (2 * h), rel=1e-6)


def test_relations_finite(ref_report):
    _, rep = ref_report
    for r in relations_check(rep):
        assert r.determinate and np.isfinite(r.ratio) and r.ratio > 0


def test_appendix_suite_runs(ref_report, ref_state):
    _, rep = ref_report
    out = appendix_lemma_suite(ref_state, rep, SMALL)
    names = {r.name for r in out}
    assert "C_j_vs_dxj_omega" in names and "dy_tilde_g_minus_g" in names
    assert all(np.isfinite(r.ratio) for r in out if r.determinate)


def test_eh_ignores_far_field(ref_report, ref_state):
    curve, rep = ref_report
    g = ref_state.grid
    x, y = g.mesh()
    om = ref_state.omega + np.where(y > 4.0, 0.01 * np.sin(x) * np.exp(-(y - 6) ** 2), 0.0)
    st = State(0.0, ref_state.u, ref_state.v, om, g)
    other = energies(st, curve, GevreyWeight(1.0), SMALL)
    assert other.E_h == pytest.approx(rep.E_h, rel=1e-12)
    assert other.E_omega != rep.E_omega
