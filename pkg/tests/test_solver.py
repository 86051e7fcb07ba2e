import numpy as np
import pytest

from prandtl_gevrey.fields import InitialDataSpec, State, make_initial_data
from prandtl_gevrey.grid import SpectralGrid
from prandtl_gevrey.solver import (BlowUpError, Integrator, SolverConfig, StepRejected, run, step,
                                   thread_cap)


def heat_exact(y, t):
    s = t + 1.0
    return y * s**-1.5 * np.exp(-y * y / (4 * s))


def test_zero_is_fixed_point():
    g = SpectralGrid(8, 65)
    st0 = State.from_u(g, np.zeros(g.shape))
    res = run(st0, SolverConfig(dt=1e-2, t_end=0.1))
    assert np.all(res.final.u == 0)


def test_heat_reduction_matches_exact():
    g = SpectralGrid(4, 257)
    st0 = State.from_u(g, np.tile(heat_exact(g.y_nodes, 0.0), (4, 1)))
    res = run(st0, SolverConfig(epsilon=0.0, dt=1e-4, t_end=0.1, sample_every=100))
    err = np.max(np.abs(res.final.u - heat_exact(g.y_nodes, res.final.t)))
    assert err < 1e-9
    assert np.max(np.abs(res.final.v)) == 0.0


def test_heat_norm_decreases():
    g = SpectralGrid(4, 129)
    st0 = State.from_u(g, np.tile(heat_exact(g.y_nodes, 0.0), (4, 1)))
    res = run(st0, SolverConfig(epsilon=0.0, dt=1e-3, t_end=0.2, sample_every=10),
              [lambda s: g.weighted_l2_sq(s.u)])
    norms = np.array(res.aggregates[0])
    assert np.all(np.diff(norms) < 0)


def test_diffusion_dominated_decay():
    g = SpectralGrid(16, 129)
    x, y = g.mesh()
    u0 = 1e-3 * np.sin(x) * y * np.exp(-y)
    cfg = SolverConfig(epsilon=0.1, n_galerkin=8, dt=1e-3, t_end=0.05, sample_every=5)
    norms = run(State.from_u(g, u0), cfg, [lambda s: g.weighted_l2_sq(s.u)]).aggregates[0]
    assert np.all(np.diff(norms) < 0)


def test_zero_horizon_returns_initial(ref_state):
    res = run(ref_state, SolverConfig(t_end=0.0))
    assert res.final is ref_state and res.steps == 0


def test_reference_run_completes_without_blowup():
    g = SpectralGrid(64, 257)
    st0 = make_initial_data(g, InitialDataSpec(compatible=True))
    cfg = SolverConfig(epsilon=1e-3, dt=1e-3, t_end=0.05, sample_every=10)
    energy = run(st0, cfg, [lambda s: g.weighted_l2_sq(s.u)])
    assert np.isclose(energy.final.t, 0.05)
    final = energy.final
    assert np.all(final.u[:, 0] == 0) and np.max(np.abs(final.u[:, -1])) < 1e-8
    # diffusive scheme: the L2 energy does not grow beyond O(dt^3) per step
    e = np.array(energy.aggregates[0])
    assert np.all(e[1:] <= e[:-1] * (1 + 1e-6))


def test_cfl_rejection(ref_state):
    with pytest.raises(StepRejected):
        step(ref_state, SolverConfig(dt=0.5))


def test_nan_triggers_blowup():
    g = SpectralGrid(8, 65)
    u = np.zeros(g.shape)
    u[3, 10] = np.nan
    st0 = State(0.0, u, np.zeros(g.shape), np.zeros(g.shape), g)
    with pytest.raises(BlowUpError):
        step(st0, SolverConfig(dt=1e-3))


@pytest.mark.parametrize("kw", [dict(epsilon=-1.0), dict(n_galerkin=17), dict(n_galerkin=0),
                                dict(dt=0.0), dict(sample_every=0), dict(top_bc="neumann"),
                                dict(scheme="rk4")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw).validate(SpectralGrid(32, 65))


def test_default_cutoff_is_two_thirds_rule():
    assert SolverConfig().galerkin_cutoff(SpectralGrid(96 // 3 * 2, 65)) == 64 // 3
    assert SolverConfig(dealias=False).galerkin_cutoff(SpectralGrid(64, 65)) == 32


def test_nonlinear_term_is_projected(ref_state):
    integ = Integrator(ref_state.grid, SolverConfig())
    nh = integ.nonlinear(ref_state.u)
    assert np.all(nh[integ.n + 1:] == 0)


def test_deterministic(compat_state):
    cfg = SolverConfig(dt=1e-3, t_end=0.01)
    a = run(compat_state, cfg).final.u
    b = run(compat_state, cfg).final.u
    assert np.array_equal(a, b)


def test_robin_option_runs(compat_state):
    res = run(compat_state, SolverConfig(dt=1e-3, t_end=0.01, top_bc="robin"))
    assert np.all(np.isfinite(res.final.u))


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("PRANDTL_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("PRANDTL_THREADS", "junk")
    assert thread_cap() == 1
