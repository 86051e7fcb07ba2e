import json
import math

import numpy as np
import pytest

from prandtl_gevrey import calibration as cal
from prandtl_gevrey.fields import make_initial_data, verify_hypotheses
from prandtl_gevrey.grid import SpectralGrid


def test_philox_streams():
    a = cal.philox(7, 1).random(4)
    assert np.array_equal(a, cal.philox(7, 1).random(4))
    assert not np.array_equal(a, cal.philox(7, 2).random(4))
    assert not np.array_equal(a, cal.philox(8, 1).random(4))


def test_committed_constants():
    data = cal.load_calibration()
    for key in ("C_rel", "C_sob", "Lambda_cal", "T0", "convolution", "appendix", "seed"):
        assert key in data
    assert data["seed"] == cal.DEFAULT_SEED
    assert set(data["convolution"]) == set(cal.iter_conv_keys())
    assert len(data["convolution"]) == 54
    assert data["C_rel"] >= 1 and data["C_sob"] > 0
    # the committed bound sits above the measured rate
    assert data["Lambda_cal"] > data["Lambda_measured"]
    assert math.isclose(data["Lambda_cal"], round(data["Lambda_cal"], 2))


def test_dump_round_trip():
    data = cal.load_calibration()
    assert json.loads(cal.dump_calibration(data)) == data


def test_family_is_admissible():
    g = SpectralGrid(32, 257)
    specs = cal.h_family(n=4, grid=g)
    assert specs == cal.h_family(n=4, grid=g)
    for spec in specs:
        rep = verify_hypotheses(make_initial_data(g, spec), spec)
        assert rep.single_curve
        assert 1.2 <= spec.a0_mean <= 1.8 and 2.0 <= spec.sigma <= 2.35


def test_decaying_profiles_vanish_at_top():
    g = SpectralGrid(8, 129)
    profs = cal.decaying_profiles(g, n=10)
    assert len(profs) == 10
    assert all(abs(f[-1]) < 1e-12 for f in profs)


def test_convolution_sweep_small():
    a = cal.convolution_sweep(trials=3, j_max=8)
    assert a == cal.convolution_sweep(trials=3, j_max=8)
    assert set(a) == set(cal.iter_conv_keys())
    assert all(np.isfinite(v) and v >= 0 for v in a.values())


def test_relations_constant():
    assert cal.relations_constant({"r1": np.array([0.5, 2.0]), "r2": np.array([0.25])}) == 4.0
