import csv
import io
import json
import math

import numpy as np
import pytest

from prandtl_gevrey.fields import InitialDataSpec, State, make_initial_data
from prandtl_gevrey.functionals import EnergySettings
from prandtl_gevrey.grid import SpectralGrid
from prandtl_gevrey.monitor import (CSV_HEADER, DivergenceResult, InsufficientTrajectoryError,
                                    TauSchedule, bound_margins, csv_rows, decay_trace, format_csv,
                                    format_summary, two_run_divergence, trace_run)
from prandtl_gevrey.solver import SolverConfig

N = 8


def seqs(j0=0.0, j1=0.0):
    out = {k: np.zeros(N) for k in ("E_dot_omega", "E_h", "E_g1", "E_g2")}
    out["E_dot_omega"][0] = j0
    out["E_dot_omega"][1] = j1
    return out


def test_schedule():
    s = TauSchedule(2.0, 10.0, 0.5)
    assert s.tau(0.1) == pytest.approx(1.0)
    assert s.t_max(1.0) == pytest.approx(0.15)
    assert TauSchedule(2.0, 0.0).t_max(0.3) == 0.3
    assert TauSchedule(2.0, 1.0).tau_min == 1.0
    assert list(s.admissible(np.array([0.0, 0.15, 0.2]))) == [True, True, False]
    for bad in (dict(tau0=0.0, C=1.0), dict(tau0=1.0, C=-1.0), dict(tau0=1.0, C=1.0, tau_min=2.0)):
        with pytest.raises(ValueError):
            TauSchedule(**bad)


def test_zero_trace_needs_no_decay():
    tr = decay_trace([0.0, 0.01, 0.02, 0.03], [seqs()] * 4, tau0=1.0)
    assert tr.minimal_C == 0.0 and tr.decay_ok


def test_heat_like_trace_needs_no_decay():
    times = np.linspace(0, 0.05, 6)
    tr = decay_trace(times, [seqs(j0=math.exp(-t)) for t in times], tau0=2.0)
    assert tr.minimal_C == 0.0


def test_growth_forces_positive_C():
    # j = 1 weight is tau^2 2^20, so tau(t)^2 e^{2t} must not grow: C about tau0
    # the C = 64 bracket end must keep three samples above the floor
    times = np.linspace(0, 0.1, 101)
    tr = decay_trace(times, [seqs(j1=math.exp(t)) for t in times], tau0=1.0, tau_min=0.01)
    assert tr.decay_ok and 0.8 < tr.minimal_C < 1.1
    assert np.all(np.diff(tr.series) <= tr.series[:-1] * 1e-6)


def test_unbounded_growth_is_reported():
    times = np.linspace(0, 0.1, 11)
    tr = decay_trace(times, [seqs(j0=math.exp(100 * t)) for t in times], tau0=1.0)
    assert not tr.decay_ok and math.isinf(tr.minimal_C)


def test_too_few_samples():
    with pytest.raises(InsufficientTrajectoryError):
        decay_trace([0.0, 0.1], [seqs(), seqs()], 1.0)


def test_refinement_flag():
    tr = decay_trace([0.0, 0.01, 0.02], [seqs()] * 3, tau0=1.0)
    tr.refinement = [0.0, 0.0]
    assert tr.stable_under_refinement
    tr.minimal_C, tr.refinement = 1.0, [2.0]
    assert not tr.stable_under_refinement


def test_margins_scale_with_vorticity(ref_state):
    spec = InitialDataSpec()
    g = ref_state.grid
    full = bound_margins(ref_state, spec.delta, spec.sigma)
    half = bound_margins(State(0.0, ref_state.u / 2, ref_state.v / 2, ref_state.omega / 2, g),
                         spec.delta, spec.sigma)
    assert half.lower_margin < full.lower_margin
    zero = bound_margins(State.from_u(g, np.zeros(g.shape)), spec.delta, spec.sigma)
    assert zero.lower_margin == pytest.approx(-spec.delta)
    assert not zero.positive


@pytest.fixture(scope="module")
def small_traj():
    g = SpectralGrid(16, 129)
    spec = InitialDataSpec(compatible=True)
    st0 = make_initial_data(g, spec)
    settings = EnergySettings(j_max=6)
    cfg = SolverConfig(dt=1e-3, t_end=0.01, sample_every=2)
    return trace_run(st0, cfg, settings, 2.0, spec.delta, spec.sigma), settings


def test_trace_and_csv(small_traj):
    traj, settings = small_traj
    assert len(traj.times) == 6 and traj.times[0] == 0.0
    rows = csv_rows(traj, TauSchedule(2.0, 1.0, 0.5), settings)
    text = format_csv(rows)
    parsed = list(csv.reader(io.StringIO(text)))
    assert tuple(parsed[0]) == CSV_HEADER
    assert len(parsed) == len(rows) + 1
    assert float(parsed[1][1]) == 2.0
    assert float(parsed[2][0]) == pytest.approx(traj.times[1])


def test_csv_rows_stop_at_floor(small_traj):
    traj, settings = small_traj
    rows = csv_rows(traj, TauSchedule(2.0, 300.0, 0.5), settings)
    assert len(rows) == 3 and rows[-1]["tau"] >= 0.5


def test_summary_format():
    text = format_summary({"b": np.float64(1.5), "a": float("inf"), "c": np.bool_(True),
                           "d": None, "e": np.int64(3)})
    data = json.loads(text)
    assert list(data) == ["a", "b", "c", "d", "e"]
    assert data == {"a": "inf", "b": 1.5, "c": True, "d": None, "e": 3}


def test_divergence_zero_eta():
    g = SpectralGrid(16, 129)
    res = two_run_divergence(g, InitialDataSpec(compatible=True), 0.0,
                             SolverConfig(dt=1e-3, t_end=0.005, sample_every=1))
    assert np.all(res.gaps == 0) and math.isnan(res.slope)


def test_divergence_initial_gap_is_eta():
    g = SpectralGrid(16, 129)
    res = two_run_divergence(g, InitialDataSpec(compatible=True), 1e-10,
                             SolverConfig(dt=1e-3, t_end=0.005, sample_every=1))
    assert res.gaps[0] == pytest.approx(1e-10, rel=1e-9)


@pytest.mark.parametrize("eta", [1e-13, 1e-5, -1e-10])
def test_divergence_eta_range(eta):
    with pytest.raises(ValueError):
        two_run_divergence(SpectralGrid(8, 65), InitialDataSpec(), eta, SolverConfig())


def test_divergence_check():
    res = DivergenceResult(0.0, np.array([0.0, 1.0]), np.array([1.0, 0.5]), 1.0)
    assert res.check(-0.5) and res.bound_ok
    assert not res.check(-1.0)
