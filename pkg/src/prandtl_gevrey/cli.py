"""Command line front end: config parsing, subcommand dispatch and report files.

Config files hold one ``key = value`` per line; ``#`` starts a comment.
Command line flags ``--key value`` override the file.

Exit codes:

    0  all verdicts pass
    1  a verdict failed
    2  configuration error (unknown key, bad value, malformed line)
    3  step rejected (CFL bound)
    4  blow-up
    5  initial data violate the hypotheses
    6  insufficient data for the growth exponent fit
    7  too few trajectory samples for the decay verdict
    8  critical curve lost or degenerate
    9  snapshot or output I/O error
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_STEP_REJECTED = 3
EXIT_BLOWUP = 4
EXIT_HYPOTHESIS = 5
EXIT_INSUFFICIENT_DATA = 6
EXIT_INSUFFICIENT_TRAJECTORY = 7
EXIT_CRITICAL_CURVE = 8
EXIT_IO = 9

COMMANDS = ("simulate", "linstab", "verify", "diagnose", "divergence")


class ConfigError(ValueError):
    pass


# -- schema -------------------------------------------------------------------


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _opt_int(text: str):
    return None if text.strip().lower() == "none" else int(text)


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    help: str
    check: Callable[[Any], str | None] = lambda v: None


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonneg(v):
    return None if v >= 0 else "must be >= 0"


def _choice(*opts):
    return lambda v: None if v in opts else f"must be one of {', '.join(opts)}"


def _pow2(v):
    return None if v >= 4 and not v & (v - 1) else "must be a power of two >= 4"


def _eta(v):
    return None if v == 0 or 1e-12 <= v <= 1e-6 else "must be 0 or lie in [1e-12, 1e-6]"


SCHEMA: dict[str, Key] = {
    "command": Key(str, "simulate", "subcommand", _choice(*COMMANDS)),
    "output_dir": Key(str, "out", "directory for run.csv, summary.json, snapshots/"),
    "seed": Key(int, 0x5EED_0F_9E77E1, "64-bit seed of the random sweeps",
                lambda v: None if 0 <= v < 2**64 else "must fit in 64 bits"),
    "format": Key(str, "csv", "trajectory table format", _choice("csv", "json")),
    # grid
    "nx": Key(int, 64, "Fourier modes in x", _pow2),
    "ny": Key(int, 257, "graded nodes in y", lambda v: None if v >= 5 else "must be >= 5"),
    "y_max": Key(float, 40.0, "truncation height", _positive),
    "grading_c": Key(float, 4.0, "sinh grading strength (0 = uniform)", _nonneg),
    "fd_accuracy": Key(int, 6, "finite-difference accuracy order",
                       lambda v: None if v in (2, 4, 6, 8) else "must be 2, 4, 6 or 8"),
    # solver
    "epsilon": Key(float, 1e-3, "horizontal viscosity", _nonneg),
    "dt": Key(float, 1e-3, "time step", _positive),
    "t_end": Key(float, 0.05, "final time", _nonneg),
    "sample_every": Key(int, 5, "steps between samples", _positive),
    "n_galerkin": Key(_opt_int, None, "Galerkin cutoff (none = nx/3)",
                      lambda v: None if v is None or v >= 1 else "must be >= 1"),
    "top_bc": Key(str, "dirichlet", "condition at y = y_max", _choice("dirichlet", "robin")),
    # initial data
    "a0_mean": Key(float, 1.5, "mean critical height", _positive),
    "a0_amp": Key(float, 0.5, "critical height amplitude", _nonneg),
    "a0_mode": Key(int, 1, "critical height wavenumber", _positive),
    "sigma": Key(float, 2.0, "decay exponent of omega (sigma >= gamma + 1/2)"),
    "delta": Key(float, 0.01, "lower bound constant", _positive),
    "gamma": Key(float, 1.0, "weight exponent (>= 1)"),
    "s": Key(int, 8, "number of y-derivatives (even, >= 8)"),
    "compatible": Key(_bool, True, "blend to a wall profile compatible to all orders"),
    "y_split": Key(float, 3.0, "height separating the lower region", _positive),
    # energies and monitor
    "alpha": Key(float, 0.1, "weight of the g energies in calE", _positive),
    "j_max": Key(int, 48, "highest x-derivative order",
                  lambda v: None if v >= 5 else "must be >= 5"),
    "tau0": Key(float, 2.0, "initial Gevrey radius", _positive),
    "tau_min": Key(float, 0.5, "radius floor", _positive),
    "refine": Key(_bool, False, "repeat simulate at 2 nx, epsilon/2"),
    # linstab
    "profile": Key(str, "gaussian", "shear profile", _choice("gaussian", "tanh")),
    "ell": Key(float, 6.0, "profile length scale", _positive),
    "kx_list": Key(_int_list, (8, 12, 16, 24, 32, 48, 64), "wavenumbers of the sweep",
                   lambda v: None if v and all(k > 0 for k in v) else "must be positive integers"),
    "horizon": Key(float, 10.0, "growth-rate time horizon", _positive),
    "phase_step": Key(float, 0.12, "kx max|U| dt per step", _positive),
    "n_seeds": Key(int, 1, "random starts per wavenumber", _positive),
    # divergence, diagnose, verify
    "eta": Key(float, 1e-10, "perturbation size", _eta),
    "lambda_cal": Key(lambda t: None if t.strip().lower() == "none" else float(t), None,
                      "growth bound (none = committed value)"),
    "snapshot": Key(str, "", "snapshot file for diagnose"),
    "conv_trials": Key(int, 1000, "trials per convolution cell", _positive),
}


def _cross_check(values: dict, where: dict | None = None) -> None:
    """Constraints tying several keys; ``where`` maps keys to their source location."""
    where = where or {}

    def fail(key, msg):
        loc = where.get(key)
        raise ConfigError(f"{loc}: {msg}" if loc else msg)

    if values["gamma"] < 1:
        fail("gamma", "gamma must be >= 1")
    if values["sigma"] < values["gamma"] + 0.5:
        fail("sigma", f"sigma = {values['sigma']!r} out of range: need sigma >= gamma + 1/2 "
                      f"(gamma = {values['gamma']!r})")
    if values["s"] < 8 or values["s"] % 2:
        fail("s", "s must be even and >= 8")
    if not values["tau_min"] <= values["tau0"]:
        fail("tau_min", "tau_min must not exceed tau0")
    if values["n_galerkin"] is not None and values["n_galerkin"] > values["nx"] // 2:
        fail("n_galerkin", "n_galerkin must not exceed nx/2")


def _convert(key: str, text: str, where: str) -> Any:
    spec = SCHEMA[key]
    try:
        value = spec.parse(text.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key}: {exc}") from None
    problem = spec.check(value)
    if problem:
        raise ConfigError(f"{where}: {key} = {text.strip()} {problem}")
    return value


def read_config_text(text: str, source: str = "<config>", where: dict | None = None) -> dict:
    """Parse ``key = value`` lines; returns only the keys present.

    ``where``, if given, receives ``source:line`` for each key.
    """
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: malformed line (expected key = value)")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        out[key] = _convert(key, value, f"{source}:{n}")
        if where is not None:
            where[key] = f"{source}:{n}"
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prandtl-gevrey",
                                description="Regularized Prandtl solver and Gevrey-energy diagnostics.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key = value config file")
    for key, spec in SCHEMA.items():
        if key == "command":
            continue
        p.add_argument(f"--{key}", dest=key, default=None, metavar="VALUE",
                       help=f"{spec.help} (default: {_fmt(spec.default)})")
    return p


def parse_config(argv: list[str] | None = None) -> dict:
    """Defaults, then the config file, then flags; all values validated."""
    args = build_parser().parse_args(argv)
    values = {k: s.default for k, s in SCHEMA.items()}
    where = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        values.update(read_config_text(text, args.config, where))
    for key in SCHEMA:
        flag = getattr(args, key, None)
        if key != "command" and flag is not None:
            values[key] = _convert(key, flag, f"--{key}")
            where[key] = f"--{key}"
    values["command"] = args.command
    _cross_check(values, where)
    return values


def dump_config(values: dict) -> str:
    return "".join(f"{k} = {_fmt(values[k])}\n" for k in SCHEMA)


# -- files --------------------------------------------------------------------


def atomic_write(path: Path, data: bytes | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        os.chmod(tmp, 0o644)
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


SNAP_MAGIC = "prandtl-gevrey-snapshot 1"


def snapshot_bytes(state) -> bytes:
    g = state.grid
    header = (f"{SNAP_MAGIC}\nnx = {g.nx}\nny = {g.ny}\ny_max = {g.y_max!r}\n"
              f"grading_c = {g.grading_c!r}\nt = {float(state.t)!r}\nend\n")
    body = np.ascontiguousarray(state.u, dtype="<f8").tobytes()
    body += np.ascontiguousarray(state.omega, dtype="<f8").tobytes()
    return header.encode() + body


def read_snapshot(path: Path):
    """State stored by ``snapshot_bytes``; omega is taken from the file."""
    from .fields import State, recover_v
    from .grid import SpectralGrid

    raw = Path(path).read_bytes()
    end = raw.find(b"\nend\n")
    if not raw.startswith(SNAP_MAGIC.encode()) or end < 0:
        raise OSError(f"{path}: not a snapshot file")
    head = {}
    for line in raw[:end].decode().splitlines()[1:]:
        k, v = (p.strip() for p in line.split("=", 1))
        head[k] = v
    nx, ny = int(head["nx"]), int(head["ny"])
    data = np.frombuffer(raw[end + 5:], dtype="<f8")
    if data.size != 2 * nx * ny:
        raise OSError(f"{path}: expected {2 * nx * ny} values, found {data.size}")
    grid = SpectralGrid(nx, ny, float(head["y_max"]), float(head.get("grading_c", 4.0)))
    u = data[:nx * ny].reshape(nx, ny).copy()
    omega = data[nx * ny:].reshape(nx, ny).copy()
    return State(t=float(head["t"]), u=u, v=recover_v(grid, u), omega=omega, grid=grid)


# -- commands -----------------------------------------------------------------


def _grid(c, nx=None):
    from .grid import SpectralGrid
    return SpectralGrid(nx or c["nx"], c["ny"], c["y_max"], c["grading_c"], fd_accuracy=c["fd_accuracy"])


def _solver_cfg(c, epsilon=None):
    from .solver import SolverConfig
    return SolverConfig(epsilon=c["epsilon"] if epsilon is None else epsilon, n_galerkin=c["n_galerkin"],
                        dt=c["dt"], t_end=c["t_end"], sample_every=c["sample_every"], top_bc=c["top_bc"])


def _data_spec(c):
    from .fields import InitialDataSpec
    return InitialDataSpec(a0_mean=c["a0_mean"], a0_amp=c["a0_amp"], a0_mode=c["a0_mode"],
                           sigma=c["sigma"], delta=c["delta"], gamma=c["gamma"], s=c["s"],
                           compatible=c["compatible"], y_split=c["y_split"])


def _energy_settings(c):
    from .functionals import EnergySettings
    return EnergySettings(gamma=c["gamma"], s=c["s"], alpha=c["alpha"], j_max=c["j_max"],
                          y_split=c["y_split"], delta=c["delta"], sigma=c["sigma"])


def _simulate_once(c, nx, epsilon):
    from .fields import make_initial_data
    from .monitor import decay_trace, trace_run

    grid = _grid(c, nx)
    state0 = make_initial_data(grid, _data_spec(c))
    settings = _energy_settings(c)
    traj = trace_run(state0, _solver_cfg(c, epsilon), settings, c["tau0"], c["delta"], c["sigma"])
    trace = decay_trace(traj.times, traj.sequences, c["tau0"], c["tau_min"], c["alpha"])
    return traj, trace, settings


def cmd_simulate(c, out: Path) -> int:
    from .monitor import CSV_HEADER, TauSchedule, csv_rows, format_csv, format_summary

    traj, trace, settings = _simulate_once(c, c["nx"], c["epsilon"])
    if c["refine"]:
        _, fine, _ = _simulate_once(c, 2 * c["nx"], c["epsilon"] / 2)
        trace.refinement.append(fine.minimal_C)
    C = trace.minimal_C if math.isfinite(trace.minimal_C) else 0.0
    rows = csv_rows(traj, TauSchedule(c["tau0"], C, c["tau_min"]), settings)
    margins_ok = all(m.positive for m in traj.margins)
    if c["format"] == "csv":
        atomic_write(out / "run.csv", format_csv(rows))
    else:
        table = [{k: float(r[k]) for k in CSV_HEADER} for r in rows]
        atomic_write(out / "run.json", json.dumps(table, indent=1) + "\n")
    atomic_write(out / "snapshots" / "initial.snap", snapshot_bytes(_initial(c)))
    atomic_write(out / "snapshots" / "final.snap", snapshot_bytes(traj.final))
    verdicts = {"minimal_C": trace.minimal_C, "decay_ok": trace.decay_ok, "margins_ok": margins_ok,
                "divergence_slope": None}
    if c["refine"]:
        verdicts["refined_minimal_C"] = trace.refinement[0]
        verdicts["stable_under_refinement"] = trace.stable_under_refinement
    atomic_write(out / "summary.json", format_summary(verdicts))
    ok = trace.decay_ok and margins_ok and (not c["refine"] or trace.stable_under_refinement)
    return EXIT_OK if ok else EXIT_VERDICT


def _initial(c):
    from .fields import make_initial_data
    return make_initial_data(_grid(c), _data_spec(c))


def cmd_linstab(c, out: Path) -> int:
    from .linstab import InsufficientDataError, ShearProfile, growth_sweep
    from .monitor import format_summary

    grid = _grid(c)
    y = grid.y_nodes
    prof = ShearProfile.gaussian(y, c["ell"]) if c["profile"] == "gaussian" else \
        ShearProfile.matched_monotone(y, c["ell"])
    res = growth_sweep(grid, prof, c["kx_list"], c["horizon"], c["n_seeds"], c["seed"], c["phase_step"])
    lines = ["kx,rate,r2,conclusive"] + [f"{r.kx!r},{r.rate!r},{r.r2!r},{r.conclusive}" for r in res.results]
    atomic_write(out / "linstab.csv", "\n".join(lines) + "\n")
    summary = {"profile": res.profile, "exponent": res.exponent,
               "r2": None if res.fit is None else res.fit.r2, "conclusive": res.conclusive,
               "error": res.error}
    atomic_write(out / "summary.json", format_summary(summary))
    if res.fit is None:
        raise InsufficientDataError(res.error)
    if c["profile"] == "gaussian":
        ok = 0.35 <= res.fit.slope <= 0.65 and res.fit.r2 >= 0.95
    else:
        ok = res.fit.slope < 0.2
    return EXIT_OK if ok else EXIT_VERDICT


def run_verify(seed: int, conv_trials: int = 1000) -> dict:
    """All inequality suites against the committed constants; name -> (worst, bound, ok)."""
    from . import calibration as cal
    from .fields import hardy_check, sobolev_check
    from .grid import SpectralGrid

    frozen = cal.load_calibration()
    out = {}
    g = SpectralGrid(16, 513)
    profiles = cal.decaying_profiles(g, seed)
    for lam in (0.0, 0.5, 1.0, -1.0, -2.0):
        reps = [hardy_check(g, f, lam) for f in profiles]
        worst = max(r.lhs / r.rhs for r in reps)
        out[f"hardy[lambda={lam:g}]"] = (worst, 1.0, all(r.holds for r in reps))
    sob_grid = SpectralGrid(32, 257)
    worst = max(sobolev_check(sob_grid, f, frozen["C_sob"]).ratio
                for f in cal.sobolev_fields(sob_grid, seed))
    out["sobolev"] = (worst, frozen["C_sob"], worst <= frozen["C_sob"])
    conv = cal.convolution_sweep(seed, conv_trials)
    for k, v in conv.items():
        bound = frozen["convolution"][k]
        out[k] = (v, bound, v <= bound)
    fam = cal.family_sweep(seed)
    c_rel = cal.relations_constant(fam.relations)
    out["relations"] = (c_rel, frozen["C_rel"], c_rel <= frozen["C_rel"])
    for k, vals in fam.appendix.items():
        worst = float(np.nanmax(vals))
        bound = frozen["appendix"][k]
        out[f"appendix:{k}"] = (worst, bound, worst <= bound)
    return out


def cmd_verify(c, out: Path) -> int:
    from .monitor import format_summary

    res = run_verify(c["seed"], c["conv_trials"])
    summary = {k: {"worst": v[0], "bound": v[1], "ok": v[2]} for k, v in res.items()}
    atomic_write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    failed = [k for k, v in res.items() if not v[2]]
    atomic_write(out / "verify.json", format_summary({"failed": ", ".join(failed), "all_ok": not failed}))
    return EXIT_OK if not failed else EXIT_VERDICT


def cmd_diagnose(c, out: Path) -> int:
    from .functionals import energies, find_critical_curve
    from .gevrey import GevreyWeight
    from .monitor import bound_margins, format_summary

    if not c["snapshot"]:
        raise ConfigError("diagnose needs --snapshot FILE")
    state = read_snapshot(Path(c["snapshot"]))
    settings = _energy_settings(c)
    rep = energies(state, find_critical_curve(state.grid, state.omega, settings.y_split),
                   GevreyWeight(c["tau0"]), settings)
    m = bound_margins(state, c["delta"], c["sigma"], settings.y_split, settings.y_top(state.grid))
    values = rep.row()
    finite = all(math.isfinite(float(v)) for v in values.values())
    summary = dict(values, lower_margin=m.lower_margin, upper_margin_min=m.upper_margin_min,
                   margins_ok=m.positive)
    atomic_write(out / "summary.json", format_summary(summary))
    return EXIT_OK if finite and m.positive else EXIT_VERDICT


def cmd_divergence(c, out: Path) -> int:
    from .calibration import load_calibration
    from .monitor import format_summary, two_run_divergence

    lam = c["lambda_cal"] if c["lambda_cal"] is not None else load_calibration()["Lambda_cal"]
    res = two_run_divergence(_grid(c), _data_spec(c), c["eta"], _solver_cfg(c))
    ok = bool(np.all(res.gaps == 0)) if c["eta"] == 0 else res.check(lam)
    lines = ["t,gap"] + [f"{t!r},{gp!r}" for t, gp in zip(res.times, res.gaps)]
    atomic_write(out / "divergence.csv", "\n".join(lines) + "\n")
    atomic_write(out / "summary.json", format_summary({
        "divergence_slope": res.slope, "eta": c["eta"], "lambda_cal": lam,
        "final_gap": float(res.gaps[-1]), "bound_ok": ok}))
    return EXIT_OK if ok else EXIT_VERDICT


HANDLERS = {"simulate": cmd_simulate, "linstab": cmd_linstab, "verify": cmd_verify,
            "diagnose": cmd_diagnose, "divergence": cmd_divergence}


def dispatch(c: dict) -> int:
    from .fields import HypothesisError
    from .functionals import CriticalCurveError
    from .linstab import InsufficientDataError
    from .monitor import InsufficientTrajectoryError
    from .solver import BlowUpError, StepRejected

    out = Path(c["output_dir"])
    try:
        return HANDLERS[c["command"]](c, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepRejected as exc:
        print(f"step rejected: {exc}", file=sys.stderr)
        return EXIT_STEP_REJECTED
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except HypothesisError as exc:
        print(f"initial data rejected: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except InsufficientDataError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA
    except InsufficientTrajectoryError as exc:
        print(f"insufficient trajectory: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT_TRAJECTORY
    except CriticalCurveError as exc:
        print(f"critical curve: {exc}", file=sys.stderr)
        return EXIT_CRITICAL_CURVE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv: list[str] | None = None) -> int:
    try:
        c = parse_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(c)


if __name__ == "__main__":
    sys.exit(main())
