"""Command-line entry point.

Exit codes: 0 success, 1 check failed, 2 configuration error, 3 numerical
precondition error.
"""
from __future__ import annotations

import argparse
import copy
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .evolution import EvolutionConfig, evolve
from .io import COMPONENT_SUFFIXES, dumps, fmt, grid_to_dict, write_diagnostics, write_trajectory
from .phasegrid import MomentumLine, UnitSystem, integrate, make_grid
from .quantcheck import verify
from .relkin import (
    EnergyRep,
    dispersion,
    fv_evolve,
    fv_split,
    fv_unsplit,
    oscillator_spectrum,
    relativistic_level,
)
from .starcalc import Symbol
from .wigner import (
    COMPONENT_NAMES,
    WavePacketSpec,
    coherent_state,
    decompose,
    gaussian_wigner,
    mean_value,
    negativity_volume,
    total,
)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

# Tail level used when sizing a grid automatically, with a safety margin.
_TAIL_SIGMAS = math.sqrt(2 * math.log(1e12))
_MARGIN = 1.1

DEFAULTS = {
    "grid": {"n": 256, "q_extent": "auto", "p_center": 0.0},
    "units": {"hbar": 1.0, "mass": 1.0, "c": 1.0},
    "packet": {"q0": 0.0, "p0": 0.0, "sigma_q": 1.0, "minus_weight": 0.0, "minus_p0": None},
    "evolution": {"dt": 0.1, "t_final": 1.0, "scheme": "exact-mixed", "record_every": 1},
    "check": {
        "kind": "even",
        "window": [-1.0, 1.0],
        "tolerance": 1e-4,
        "state": "coherent",
        "rhs": "relativistic",
    },
    "spectrum": {"omega": 0.1, "n_max": 10},
    "output": {"format": "csv", "path": ".", "fields": True},
}


class ConfigError(ValueError):
    pass


# --- configuration -----------------------------------------------------------


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _number(cfg, section, key, positive=False, integer=False, allow_none=False):
    v = cfg[section][key]
    name = f"{section}.{key}"
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{name} must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{name} must be positive, got {v!r}")
    return int(v) if integer else float(v)


def _choice(cfg, section, key, options):
    v = cfg[section][key]
    if v not in options:
        raise ConfigError(f"{section}.{key} must be one of {', '.join(options)}, got {v!r}")
    return v


def load_config(path=None, overrides=(), fmt_flag=None, output_flag=None) -> dict:
    """Merge defaults, the JSON file and ``--set`` overrides, then validate."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        for section, body in doc.items():
            if section not in cfg:
                raise ConfigError(f"unknown config section {section!r}")
            if not isinstance(body, dict):
                raise ConfigError(f"section {section!r} must be an object")
            for key, value in body.items():
                if key not in cfg[section]:
                    raise ConfigError(f"unknown key {section}.{key}")
                cfg[section][key] = value
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) != 2 or parts[0] not in cfg or parts[1] not in cfg[parts[0]]:
            raise ConfigError(f"unknown key {key!r}")
        cfg[parts[0]][parts[1]] = _parse_value(value)
    if fmt_flag is not None:
        cfg["output"]["format"] = fmt_flag
    if output_flag is not None:
        cfg["output"]["path"] = output_flag
    validate(cfg)
    return cfg


def validate(cfg):
    n = _number(cfg, "grid", "n", positive=True, integer=True)
    if n < 8 or n & (n - 1):
        raise ConfigError(f"grid.n must be a power of two >= 8, got {cfg['grid']['n']!r}")
    if cfg["grid"]["q_extent"] != "auto":
        _number(cfg, "grid", "q_extent", positive=True)
    _number(cfg, "grid", "p_center")
    for key in ("hbar", "mass", "c"):
        _number(cfg, "units", key, positive=True)
    _number(cfg, "packet", "q0")
    _number(cfg, "packet", "p0")
    _number(cfg, "packet", "sigma_q", positive=True)
    _number(cfg, "packet", "minus_p0", allow_none=True)
    w = _number(cfg, "packet", "minus_weight")
    if not 0 <= w <= 1:
        raise ConfigError(f"packet.minus_weight must lie in [0, 1], got {w!r}")
    _number(cfg, "evolution", "dt", positive=True)
    _number(cfg, "evolution", "t_final")
    _choice(cfg, "evolution", "scheme", ("exact-mixed", "split-step"))
    _number(cfg, "evolution", "record_every", positive=True, integer=True)
    _choice(cfg, "check", "kind", ("even", "odd"))
    _choice(cfg, "check", "state", ("coherent", "gaussian"))
    _choice(cfg, "check", "rhs", ("relativistic", "nonrelativistic"))
    _number(cfg, "check", "tolerance", positive=True)
    win = cfg["check"]["window"]
    if (
        not isinstance(win, (list, tuple))
        or len(win) != 2
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in win)
    ):
        raise ConfigError(f"check.window must be [p_lo, p_hi], got {win!r}")
    if not win[0] < win[1]:
        raise ConfigError(f"check.window must have p_lo < p_hi, got {win!r}")
    _number(cfg, "spectrum", "omega")
    if cfg["spectrum"]["omega"] < 0:
        raise ConfigError("spectrum.omega must be non-negative")
    _number(cfg, "spectrum", "n_max", integer=True)
    if cfg["spectrum"]["n_max"] < 0:
        raise ConfigError("spectrum.n_max must be non-negative")
    _choice(cfg, "output", "format", ("csv", "json"))
    if not isinstance(cfg["output"]["path"], str):
        raise ConfigError("output.path must be a string")
    if not isinstance(cfg["output"]["fields"], bool):
        raise ConfigError("output.fields must be true or false")


def threads_from_env(environ=None) -> int:
    environ = os.environ if environ is None else environ
    raw = environ.get("MOYALREL_THREADS")
    if raw is None or raw == "":
        return 0
    try:
        val = int(raw)
    except ValueError as exc:
        raise ConfigError(f"MOYALREL_THREADS must be a positive integer, got {raw!r}") from exc
    if val < 1:
        raise ConfigError(f"MOYALREL_THREADS must be a positive integer, got {raw!r}")
    return val


# --- state construction ----------------------------------------------------


def auto_q_extent(n, packet: WavePacketSpec, units: UnitSystem, p_center=0.0, prefer="balanced"):
    """Position window that keeps every packet tail below 1e-12 on an n-point grid.

    ``prefer='balanced'`` takes the geometric middle of the feasible range,
    ``'fine-p'`` its largest value (smallest momentum step).
    """
    hbar, s = units.hbar, packet.sigma_q
    reach = max(_TAIL_SIGMAS * s, 0.5 * math.log(1e12) * units.compton_length)
    lq_min = _MARGIN * 2 * (abs(packet.q0) + reach)
    lp_min = _MARGIN * max(
        2 * abs(packet.p0 - p_center) + 2 * _TAIL_SIGMAS * hbar / s,
        4 * hbar * math.sqrt(math.log(1e12)) / s,
    )
    lq_max = 2 * math.pi * hbar * n / lp_min
    if lq_max < lq_min:
        raise ValueError(f"packet does not fit an n={n} grid; increase grid.n")
    return lq_max if prefer == "fine-p" else math.sqrt(lq_min * lq_max)


def build_grid(cfg, prefer="balanced"):
    units = UnitSystem(**{k: float(cfg["units"][k]) for k in ("hbar", "mass", "c")})
    packet = build_packet(cfg)
    n = int(cfg["grid"]["n"])
    pc = float(cfg["grid"]["p_center"])
    ext = cfg["grid"]["q_extent"]
    if ext == "auto":
        ext = auto_q_extent(n, packet, units, pc, prefer)
    return make_grid(n, float(ext), pc, units)


def build_packet(cfg):
    pk = cfg["packet"]
    return WavePacketSpec(float(pk["q0"]), float(pk["p0"]), float(pk["sigma_q"]))


def build_state(cfg, grid) -> EnergyRep:
    """Positive-branch packet, optionally mixed with a negative-branch copy."""
    pk = cfg["packet"]
    packet = build_packet(cfg)
    plus = coherent_state(packet, grid)
    w = float(pk["minus_weight"])
    if w == 0:
        return plus
    p0m = pk["minus_p0"] if pk["minus_p0"] is not None else pk["p0"]
    other = coherent_state(WavePacketSpec(packet.q0, float(p0m), packet.sigma_q), grid)
    return EnergyRep(
        MomentumLine(grid, plus.c_plus.values * math.sqrt(1 - w)),
        MomentumLine(grid, other.c_plus.values * math.sqrt(w)),
    )


def hamiltonian(grid):
    units = grid.units
    return Symbol.from_p_function(grid, lambda p: dispersion(p, units))


# --- output helpers --------------------------------------------------------


def _axis_csv(sym, grid, path):
    """Field CSV with axes in Compton wavelengths (q) and mc (p)."""
    u = grid.units
    qs = [fmt(x) for x in grid.q / u.compton_length]
    ps = [fmt(x) for x in grid.p / (u.mass * u.c)]
    lines = ["q,p,re,im"]
    vals = sym.values
    for i in range(grid.n):
        row = vals[i]
        lines.extend(f"{qs[j]},{ps[i]},{fmt(row[j].real)},{fmt(row[j].imag)}" for j in range(grid.n))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _write_fields(fields, grid, out_dir, stem, fmt_name):
    """``fields`` maps a suffix to a Symbol; CSV writes one file each, JSON one document."""
    if fmt_name == "csv":
        return [_axis_csv(sym, grid, os.path.join(out_dir, f"{stem}{suffix}.csv")) for suffix, sym in fields.items()]
    u = grid.units
    doc = {
        "grid": grid_to_dict(grid),
        "axis_units": {"q": u.compton_length, "p": u.mass * u.c},
        "fields": {},
    }
    for suffix, sym in fields.items():
        v = sym.values.reshape(-1)
        doc["fields"][suffix.lstrip(".")] = np.stack([v.real, v.imag], axis=1).tolist()
    path = os.path.join(out_dir, f"{stem}.json")
    with open(path, "w") as fh:
        fh.write(dumps(doc))
    return [path]


def _write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj))
    return path


def _write_sidecar(out_dir, command, cfg, threads, argv):
    meta = {
        "command": command,
        "version": __version__,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "threads": threads,
        "argv": list(argv),
        "config": cfg,
    }
    with open(os.path.join(out_dir, "run_metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)


# --- commands --------------------------------------------------------------


def cmd_coherent_wigner(cfg, out_dir, fmt_name, args):
    grid = build_grid(cfg)
    rep = build_state(cfg, grid)
    comp = decompose(rep)
    w = total(comp)
    fields = {COMPONENT_SUFFIXES[name]: sym for name, sym in comp.items()}
    fields[".total"] = w
    if cfg["output"]["fields"]:
        _write_fields(fields, grid, out_dir, "wigner", fmt_name)
    P, Q = grid.mesh()
    summary = {
        "grid": {"n": grid.n, "q_extent": grid.q_max - grid.q_min, "dq": grid.dq, "dp": grid.dp},
        "norms": {**comp.branch_weights(), "total": integrate(w).real},
        "min_value": float(w.values.real.min()),
        "peak_value": float(w.values.real.max()),
        "negativity_volume": negativity_volume(w),
        "mean_q": mean_value(Symbol(grid, Q), w),
        "mean_p": mean_value(Symbol(grid, P), w),
    }
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    return EXIT_OK


def cmd_evolve(cfg, out_dir, fmt_name, args):
    grid = build_grid(cfg)
    rep = build_state(cfg, grid)
    comp = decompose(rep)
    ev = cfg["evolution"]
    ecfg = EvolutionConfig(float(ev["dt"]), float(ev["t_final"]), ev["scheme"], int(ev["record_every"]))
    traj = evolve(comp, hamiltonian(grid), ecfg)
    if cfg["output"]["fields"]:
        write_trajectory(traj, out_dir, fmt_name)
    else:
        write_diagnostics(traj, os.path.join(out_dir, "diagnostics.csv"))
    summary = {"t_final": traj.times[-1], "n_snapshots": len(traj.times), "final": traj.diagnostics[-1]}
    code = EXIT_OK
    if args.oracle:
        t = traj.times[-1]
        ref = decompose(fv_split(fv_evolve(fv_unsplit(rep), t)))
        gaps = {
            name: float(np.max(np.abs(getattr(traj.final(), name).values - getattr(ref, name).values)))
            for name in COMPONENT_NAMES
        }
        gap = max(gaps.values())
        summary["oracle"] = {"max_abs_gap": gap, "per_component": gaps, "tolerance": 1e-5, "pass": gap <= 1e-5}
        if gap > 1e-5:
            code = EXIT_CHECK_FAILED
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    return code


def cmd_check_quantization(cfg, out_dir, fmt_name, args):
    ck = cfg["check"]
    grid = build_grid(cfg, prefer="fine-p")
    if ck["state"] == "gaussian":
        w = gaussian_wigner(build_packet(cfg), grid)
    else:
        comp = decompose(build_state(cfg, grid))
        w = comp.even_plus if ck["kind"] == "even" else comp.odd_plus
        if ck["kind"] == "odd" and not np.any(w.values):
            raise ConfigError("odd check needs packet.minus_weight > 0")
    report = verify(w, ck["kind"], tuple(ck["window"]), float(ck["tolerance"]), rhs=ck["rhs"])
    _write_json(os.path.join(out_dir, "quantization_report.json"), report.to_dict())
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_spectrum(cfg, out_dir, fmt_name, args):
    sp = cfg["spectrum"]
    units = UnitSystem(**{k: float(cfg["units"][k]) for k in ("hbar", "mass", "c")})
    spec = oscillator_spectrum(float(sp["omega"]), units)
    levels = np.arange(int(sp["n_max"]) + 1)
    e_plus = relativistic_level(spec, levels, +1)
    e_minus = relativistic_level(spec, levels, -1)
    e_plus, e_minus = np.atleast_1d(e_plus), np.atleast_1d(e_minus)
    gap = 2 * units.rest_energy
    if fmt_name == "csv":
        with open(os.path.join(out_dir, "spectrum.csv"), "w", newline="") as fh:
            fh.write("n,E_plus,E_minus\n")
            for k, a, b in zip(levels, e_plus, e_minus):
                fh.write(f"{k},{fmt(a)},{fmt(b)}\n")
    else:
        rows = [{"n": int(k), "E_plus": a, "E_minus": b} for k, a, b in zip(levels, e_plus, e_minus)]
        _write_json(os.path.join(out_dir, "spectrum.json"), {"rows": rows})
    _write_json(os.path.join(out_dir, "summary.json"), {"gap": gap, "omega": float(sp["omega"]), "n_max": int(sp["n_max"])})
    return EXIT_OK


COMMANDS = {
    "coherent-wigner": cmd_coherent_wigner,
    "evolve": cmd_evolve,
    "check-quantization": cmd_check_quantization,
    "spectrum": cmd_spectrum,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="moyalrel", description="Relativistic phase-space toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "coherent-wigner": "Wigner components of a coherent packet",
        "evolve": "evolve the components of a packet in time",
        "check-quantization": "test a component against the quantization conditions",
        "spectrum": "two-branch levels of the oscillator ladder",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--set", metavar="K=V", action="append", default=[], dest="overrides",
                       help="override a config value, e.g. grid.n=128 (repeatable)")
        p.add_argument("--output", metavar="DIR", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), help="field file format")
        if name == "evolve":
            p.add_argument("--oracle", action="store_true",
                           help="compare the final state with the two-component propagator")
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        threads = threads_from_env()
        cfg = load_config(args.config, args.overrides, args.format, args.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = cfg["output"]["path"]
    os.makedirs(out_dir, exist_ok=True)
    try:
        code = COMMANDS[args.command](cfg, out_dir, cfg["output"]["format"], args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, MemoryError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _write_sidecar(out_dir, args.command, cfg, threads, argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
