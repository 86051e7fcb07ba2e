"""Seeded families and the frozen constants measured on them.

Every random draw comes from a Philox counter-based generator keyed by
``(seed, stream)``: the 64-bit seed is the low key word and the stream id
the high one, so each family member is reproducible on its own.
The committed constants live in ``data/calibration.json``; ``calibrate``
recomputes them from scratch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterator

import numpy as np

from .fields import HypothesisError, InitialDataSpec, make_initial_data, sobolev_check
from .functionals import (EnergySettings, appendix_lemma_suite, energies, find_critical_curve,
                          relations_check)
from .gevrey import (GevreyWeight, binom_convolution_check, multinom_convolution_check,
                     random_sequence)
from .grid import SpectralGrid
from .monitor import two_run_divergence
from .solver import SolverConfig

DEFAULT_SEED = 0x5EED_0F_9E77E1
CONV_TAUS = (0.5, 1.0, 2.0)
CONV_SHIFTS = (0, 1, 2, 3, 4, 5)
CONV_TRIALS = 1000
CONV_JMAX = 24
MULTINOM_N = 3
FAMILY_SIZE = 20
RELATIONS_TAU = 1.0
T0 = 0.05
DIVERGENCE_ETAS = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8)

# stream ids, one block per sweep
_STREAM_CONV = 1 << 32
_STREAM_FAMILY = 2 << 32
_STREAM_SOBOLEV = 3 << 32
_STREAM_HARDY = 4 << 32


def philox(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator keyed by (seed, stream)."""
    key = (int(seed) & (2**64 - 1)) | ((int(stream) & (2**64 - 1)) << 64)
    return np.random.Generator(np.random.Philox(key=key))


# -- families -----------------------------------------------------------------


def h_family(seed: int = DEFAULT_SEED, n: int = FAMILY_SIZE, grid: SpectralGrid | None = None,
             max_draws: int = 50) -> list[InitialDataSpec]:
    """n (H)/(H') data specs, redrawing any whose generated data fail a bound."""
    grid = SpectralGrid(32, 257) if grid is None else grid
    out = []
    for member in range(n):
        rng = philox(seed, _STREAM_FAMILY + member)
        for _ in range(max_draws):
            spec = InitialDataSpec(
                a0_mean=float(rng.uniform(1.2, 1.8)), a0_amp=float(rng.uniform(0.1, 0.4)),
                a0_mode=int(rng.integers(1, 3)), sigma=float(rng.uniform(2.0, 2.35)), delta=0.005)
            try:
                make_initial_data(grid, spec)
            except HypothesisError:
                continue
            out.append(spec)
            break
        else:
            raise RuntimeError(f"family member {member}: no admissible draw")
    return out


def decaying_profiles(grid: SpectralGrid, seed: int = DEFAULT_SEED, n: int = 100) -> list[np.ndarray]:
    """y-profiles vanishing at L_y: polynomial times exponential, or shifted powers."""
    y = grid.y_nodes
    L = grid.y_max
    out = []
    for i in range(n):
        rng = philox(seed, _STREAM_HARDY + i)
        if i % 2 == 0:
            beta = rng.uniform(0.8, 2.0)
            c = rng.standard_normal(3)
            f = (c[0] + c[1] * y + c[2] * y**2 / 4) * np.exp(-beta * y)
        else:
            p = rng.uniform(0.75, 3.0)
            f = rng.uniform(0.5, 2.0) * ((1 + y) ** (-p) - (1 + L) ** (-p))
        f[-1] = 0.0 if abs(f[-1]) < 1e-8 else f[-1]
        out.append(f)
    return out


def sobolev_fields(grid: SpectralGrid, seed: int = DEFAULT_SEED, n_random: int = 12) -> list[np.ndarray]:
    """sin(kx) e^{-y} for k = 1..8 plus random smooth combinations."""
    x, y = grid.mesh()
    fields = [np.sin(k * x) * np.exp(-y) for k in range(1, 9)]
    for i in range(n_random):
        rng = philox(seed, _STREAM_SOBOLEV + i)
        f = np.zeros(grid.shape)
        for _ in range(3):
            k = int(rng.integers(0, 9))
            phase = rng.uniform(0, 2 * np.pi)
            beta = rng.uniform(0.5, 3.0)
            f += rng.standard_normal() * np.cos(k * x + phase) * y * np.exp(-beta * y)
        fields.append(f)
    return fields


# -- sweeps -------------------------------------------------------------------


def _conv_key(kind: str, m: int, tau: float, side: str = "") -> str:
    return f"{kind}:m={m}:tau={tau:g}" + (f":{side}" if side else "")


def convolution_sweep(seed: int = DEFAULT_SEED, trials: int = CONV_TRIALS,
                      j_max: int = CONV_JMAX) -> dict:
    """Max ratio per (kind, m, tau) over ``trials`` random sequence draws."""
    out = {}
    for ti, tau in enumerate(CONV_TAUS):
        w = GevreyWeight(tau)
        for m in CONV_SHIFTS:
            rng = philox(seed, _STREAM_CONV + 100 * ti + m)
            best = {"low": 0.0, "high": 0.0, "multi": 0.0}
            for _ in range(trials):
                seqs = [random_sequence(rng, j_max, w) for _ in range(MULTINOM_N)]
                for side in ("low", "high"):
                    r = binom_convolution_check(seqs[0], seqs[1], m, w, side).ratio
                    best[side] = max(best[side], r)
                r = multinom_convolution_check(seqs, [m] * (MULTINOM_N - 1), w).ratio
                best["multi"] = max(best["multi"], r)
            out[_conv_key("binom", m, tau, "low")] = best["low"]
            out[_conv_key("binom", m, tau, "high")] = best["high"]
            out[_conv_key("multinom", m, tau)] = best["multi"]
    return out


def sobolev_sweep(grid: SpectralGrid | None = None, seed: int = DEFAULT_SEED) -> float:
    grid = SpectralGrid(32, 257) if grid is None else grid
    return max(sobolev_check(grid, f, math.inf).ratio for f in sobolev_fields(grid, seed))


@dataclass
class FamilyRatios:
    relations: dict
    appendix: dict


def family_sweep(seed: int = DEFAULT_SEED, n: int = FAMILY_SIZE,
                 grid: SpectralGrid | None = None) -> FamilyRatios:
    """Relations and appendix-lemma ratios for each family member."""
    grid = SpectralGrid(32, 257) if grid is None else grid
    rel, app = {}, {}
    w = GevreyWeight(RELATIONS_TAU)
    for spec in h_family(seed, n, grid):
        state = make_initial_data(grid, spec)
        settings = EnergySettings(delta=spec.delta, sigma=spec.sigma)
        rep = energies(state, find_critical_curve(grid, state.omega), w, settings)
        for r in relations_check(rep):
            rel.setdefault(r.name, []).append(r.ratio if r.determinate else float("nan"))
        for r in appendix_lemma_suite(state, rep, settings):
            app.setdefault(r.name, []).append(r.ratio if r.determinate else float("nan"))
    return FamilyRatios(rel, app)


def relations_constant(ratios: dict) -> float:
    """C_rel = max over names and members of max(r, 1/r)."""
    vals = [v for rs in ratios.values() for v in rs if np.isfinite(v) and v > 0]
    return max(max(v, 1.0 / v) for v in vals)


def divergence_sweep(grid: SpectralGrid | None = None, cfg: SolverConfig | None = None) -> float:
    """Largest growth rate ln(gap(t)/eta)/t seen over the eta sweep."""
    grid = SpectralGrid(32, 257) if grid is None else grid
    cfg = SolverConfig(t_end=T0) if cfg is None else cfg
    spec = InitialDataSpec(compatible=True)
    worst = -math.inf
    for eta in DIVERGENCE_ETAS:
        res = two_run_divergence(grid, spec, eta, cfg)
        t, gaps = res.times[1:], res.gaps[1:]
        worst = max(worst, float(np.max(np.log(gaps / eta) / t)))
    return worst


SOBOLEV_SAFETY = 1.5


def calibrate(seed: int = DEFAULT_SEED) -> dict:
    """Run every sweep.

    Measured maxima are committed as they are, except C_sob (times a safety
    factor, since it also guards fields outside the family) and Lambda_cal
    (rounded up to 0.01, plus 0.01).
    """
    fam = family_sweep(seed)
    lam = divergence_sweep()
    return {
        "seed": seed,
        "T0": T0,
        "C_sob": SOBOLEV_SAFETY * sobolev_sweep(seed=seed),
        "C_rel": relations_constant(fam.relations),
        "appendix": {k: float(np.nanmax(v)) for k, v in fam.appendix.items()},
        "convolution": convolution_sweep(seed),
        "Lambda_cal": math.ceil(lam * 100) / 100 + 0.01,
        "Lambda_measured": lam,
    }


def load_calibration() -> dict:
    text = resources.files("prandtl_gevrey").joinpath("data/calibration.json").read_text()
    return json.loads(text)


def dump_calibration(values: dict) -> str:
    return json.dumps(values, indent=2, sort_keys=True) + "\n"


def iter_conv_keys() -> Iterator[str]:
    for tau in CONV_TAUS:
        for m in CONV_SHIFTS:
            yield _conv_key("binom", m, tau, "low")
            yield _conv_key("binom", m, tau, "high")
            yield _conv_key("multinom", m, tau)


if __name__ == "__main__":
    import sys

    text = dump_calibration(calibrate())
    if len(sys.argv) > 1:
        with open(sys.argv[1], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
