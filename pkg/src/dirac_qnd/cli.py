"""Command-line runner for the named experiments.

Every output is a table: CSV with ``#key=value`` header lines, or the same
content as JSON.  Positions, momenta and quadratures are reported in units
of their zero-point widths (variances in squared widths); time is in 1/omega.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, scenarios
from .errors import ConfigurationError, DiracQndError

SQRT2 = math.sqrt(2.0)

FIG1 = dict(epsilon=0.1, alpha=0.5, c1=1 / SQRT2, c2=1 / SQRT2, beta=2.0, g=0.1, omega_b=1.0,
            osc_dim=300, probe_dim=24, t_max=2.0, samples=1025)
FIG2 = dict(epsilon=[0.001, 0.02, 0.1], alpha=1.0, c1=1 / SQRT2, c2=1 / SQRT2, beta=1.0, g=1.0,
            omega_b=1.0, osc_dim=300, probe_dim=None, t_max=2.0, samples=257)
SCAN = dict(FIG2, epsilon=None, points=25, eps_min=1e-3, eps_max=0.2, samples=33)
SPECTRUM = dict(epsilon=0.1, osc_dim=60)
SCALES = dict(platform="electron", mass=None, c_eff=None, epsilon=None, n=None)
CUSTOM = dict(FIG1, scheme="fw")

DEFAULTS = {"fig1": FIG1, "fig2": FIG2, "scan": SCAN, "spectrum": SPECTRUM,
            "scales": SCALES, "custom": CUSTOM}

COMPLEX_KEYS = {"alpha", "c1", "c2", "beta"}
INT_KEYS = {"osc_dim", "probe_dim", "samples", "points"}
STR_KEYS = {"platform", "scheme"}

OBSERVABLE_ORDER = {
    "fw": ("X1_F", "X2_F", "x", "p"),
    "weak": ("X1_nr", "X2_nr", "x", "p"),
}


# ------------------------------------------------------------ config

def _parse_value(key, raw):
    if raw is None:
        return None
    if key in STR_KEYS:
        return str(raw)
    try:
        if key == "epsilon":
            if isinstance(raw, (list, tuple)):
                return [float(v) for v in raw]
            parts = [p for p in str(raw).replace(",", " ").split() if p]
            vals = [float(p) for p in parts]
            return vals if len(vals) != 1 else vals[0]
        if key in COMPLEX_KEYS:
            z = complex(str(raw).replace(" ", ""))
            return z.real if z.imag == 0 else z
        if key in INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse {key}={raw!r}") from exc


def read_config_file(path):
    """Flat key=value file; an optional [section] header is ignored."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        for key, val in parser.items(section):
            out[key.replace("-", "_")] = val
    return out


def resolve(command, args):
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS[command])
    if args.config:
        for key, raw in read_config_file(args.config).items():
            if key not in cfg:
                raise ConfigurationError(f"unknown config key {key!r} for {command}")
            cfg[key] = _parse_value(key, raw)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = _parse_value(key, val)
    for key, val in cfg.items():
        vals = val if isinstance(val, list) else [val]
        for v in vals:
            if isinstance(v, (int, float, complex)) and not np.isfinite(v):
                raise ConfigurationError(f"{key} must be finite")
    return cfg


def _probed_config(cfg, epsilon):
    probe_dim = cfg["probe_dim"] or scenarios.default_probe_dim(cfg["beta"])
    return scenarios.ProbedRunConfig(
        epsilon=float(epsilon), alpha=cfg["alpha"], c1=cfg["c1"], c2=cfg["c2"], beta=cfg["beta"],
        g=cfg["g"], omega_b=cfg["omega_b"], osc_dim=cfg["osc_dim"], probe_dim=probe_dim,
        t_max=2 * math.pi * cfg["t_max"], samples=cfg["samples"])


def _epsilon_list(cfg):
    eps = cfg["epsilon"]
    return list(eps) if isinstance(eps, list) else [eps]


# ------------------------------------------------------------ tables

class Table:
    def __init__(self, columns, rows, header):
        self.columns = list(columns)
        self.rows = rows
        self.header = header


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, complex):
        return f"{_fmt(v.real)}{'+' if v.imag >= 0 else '-'}{_fmt(abs(v.imag))}j"
    return format(float(v), ".12g")


def _header(command, cfg, extra):
    items = [("tool", "dirac_qnd"), ("version", __version__), ("scenario", command)]
    for key in sorted(cfg):
        val = cfg[key]
        if isinstance(val, list):
            val = " ".join(_fmt(v) for v in val)
        items.append((key, "none" if val is None else _fmt(val)))
    items.extend(extra)
    return items


def write_table(table, stream, fmt):
    if fmt == "json":
        doc = {"header": {k: v for k, v in table.header},
               "columns": table.columns,
               "rows": [[_json_value(v) for v in row] for row in table.rows]}
        json.dump(doc, stream, indent=1, sort_keys=False)
        stream.write("\n")
        return
    for key, val in table.header:
        stream.write(f"#{key}={val}\n")
    stream.write(",".join(table.columns) + "\n")
    for row in table.rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def _json_value(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(format(float(v), ".12g"))


def series_table(series, names, command, cfg, epsilon):
    """Time series in zero-point units: t, then mean and variance per observable."""
    columns = ["t"]
    for name in names:
        columns += [f"mean_{name}", f"var_{name}"]
    data = [series.times]
    for name in names:
        data += [SQRT2 * series.mean(name), 2.0 * series.var(name)]
    rows = [list(r) for r in zip(*data)]
    extra = [("run_epsilon", _fmt(epsilon)), ("leakage_max", _fmt(float(np.max(series.leakage)))),
             ("sectors", _fmt(series.meta.get("sectors", 0))),
             ("skipped_probe_weight", _fmt(series.meta.get("skipped_weight", 0.0)))]
    return Table(columns, rows, _header(command, cfg, extra))


# ------------------------------------------------------------ scenario runners

def _weak_run(cfg_and_eps):
    cfg, eps = cfg_and_eps
    return scenarios.run_weak_probe(_probed_config(cfg, eps))


def _workers(n_jobs):
    raw = os.environ.get("DIRAC_QND_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"DIRAC_QND_THREADS must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise ConfigurationError("DIRAC_QND_THREADS must be at least 1")
    return max(1, min(cap, n_jobs))


def _map(fn, jobs):
    """Ordered map over independent runs, fanned out to worker processes if allowed."""
    n = _workers(len(jobs))
    if n == 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, jobs))


def run_fig1(cfg):
    eps = _epsilon_list(cfg)
    if len(eps) != 1:
        raise ConfigurationError("fig1 takes a single epsilon")
    series = scenarios.run_fw_probe(_probed_config(cfg, eps[0]))
    return [("", series_table(series, OBSERVABLE_ORDER["fw"], "fig1", cfg, eps[0]))]


def _snapshot_row(eps, series):
    x1 = "X1_nr"
    x2 = "X2_nr"
    return [eps, SQRT2 * series.mean(x1)[-1], SQRT2 * series.mean(x2)[-1],
            2 * series.var(x1)[-1], 2 * series.var(x2)[-1],
            SQRT2 * scenarios.deviation_metric(series, x1), float(np.max(series.leakage))]


SNAPSHOT_COLUMNS = ["epsilon", "mean_X1_nr", "mean_X2_nr", "var_X1_nr", "var_X2_nr",
                    "deviation_X1_nr", "leakage_max"]


def run_fig2(cfg):
    eps = _epsilon_list(cfg)
    runs = _map(_weak_run, [(cfg, e) for e in eps])
    out = []
    for e, series in zip(eps, runs):
        out.append((f"eps{_fmt(e)}", series_table(series, OBSERVABLE_ORDER["weak"], "fig2", cfg, e)))
    rows = [_snapshot_row(e, s) for e, s in zip(eps, runs)]
    leak = max(float(np.max(s.leakage)) for s in runs)
    out.append(("summary", Table(SNAPSHOT_COLUMNS, rows,
                                 _header("fig2", cfg, [("leakage_max", _fmt(leak)),
                                                       ("snapshot_t", _fmt(2 * math.pi * cfg["t_max"]))]))))
    return out


def scan_grid(cfg):
    if cfg["epsilon"] is not None:
        return _epsilon_list(cfg)
    lo, hi, n = cfg["eps_min"], cfg["eps_max"], cfg["points"]
    if n < 1 or not 0 < lo <= hi:
        raise ConfigurationError("scan needs points >= 1 and 0 < eps_min <= eps_max")
    return [float(v) for v in np.geomspace(lo, hi, n)]


def run_scan(cfg):
    eps = scan_grid(cfg)
    runs = _map(_weak_run, [(cfg, e) for e in eps])
    rows = [_snapshot_row(e, s) for e, s in zip(eps, runs)]
    leak = max(float(np.max(s.leakage)) for s in runs)
    header = _header("scan", cfg, [("leakage_max", _fmt(leak)),
                                   ("snapshot_t", _fmt(2 * math.pi * cfg["t_max"]))])
    return [("", Table(SNAPSHOT_COLUMNS, rows, header))]


def run_spectrum(cfg):
    eps = _epsilon_list(cfg)
    if len(eps) != 1:
        raise ConfigurationError("spectrum takes a single epsilon")
    rows = scenarios.spectrum_table(eps[0], cfg["osc_dim"])
    columns = ["n", "E_plus", "E_minus", "omega_plus", "omega_minus", "residual_plus", "residual_minus"]
    worst = max(max(r["residual_plus"], r["residual_minus"]) for r in rows)
    header = _header("spectrum", cfg, [("residual_max_over_mc2", _fmt(worst)), ("leakage_max", "0")])
    return [("", Table(columns, [[r[c] for c in columns] for r in rows], header))]


def run_scales(cfg):
    est = scenarios.scale_estimate(cfg["platform"], mass_kg=cfg["mass"], c_eff_m_per_s=cfg["c_eff"],
                                   epsilon=cfg["epsilon"], n_excitation=cfg["n"])
    columns = ["platform", "mass_kg", "c_eff_m_per_s", "epsilon", "n_excitation",
               "omega_hz", "delta_x1_m", "energy_ev"]
    row = [getattr(est, c) for c in columns]
    return [("", Table(columns, [row], _header("scales", cfg, [("leakage_max", "0")])))]


def run_custom(cfg):
    scheme = cfg["scheme"]
    if scheme not in OBSERVABLE_ORDER:
        raise ConfigurationError(f"scheme must be one of {sorted(OBSERVABLE_ORDER)}")
    eps = _epsilon_list(cfg)
    if scheme == "fw":
        runs = [scenarios.run_fw_probe(_probed_config(cfg, e)) for e in eps]
    else:
        runs = _map(_weak_run, [(cfg, e) for e in eps])
    return [(f"eps{_fmt(e)}" if len(eps) > 1 else "",
             series_table(s, OBSERVABLE_ORDER[scheme], "custom", cfg, e)) for e, s in zip(eps, runs)]


RUNNERS = {"fig1": run_fig1, "fig2": run_fig2, "scan": run_scan, "spectrum": run_spectrum,
           "scales": run_scales, "custom": run_custom}


# ------------------------------------------------------------ output

def _target(out, tag, fmt):
    if not tag:
        return out
    root, ext = os.path.splitext(out)
    return f"{root}_{tag}{ext or '.' + fmt}"


def emit(tables, out, fmt, stream=None):
    stream = stream or sys.stdout
    if out is None:
        for i, (_, table) in enumerate(tables):
            if i:
                stream.write("\n")
            write_table(table, stream, fmt)
        return []
    written = []
    for tag, table in tables:
        path = _target(out, tag, fmt)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            write_table(table, fh, fmt)
        written.append(path)
    return written


# ------------------------------------------------------------ argument parsing

def _add_physics(p, epsilon_help="relativistic parameter (list allowed)"):
    p.add_argument("--epsilon", help=epsilon_help)
    p.add_argument("--alpha", help="oscillator coherent amplitude (complex allowed)")
    p.add_argument("--c1", help="upper spinor amplitude")
    p.add_argument("--c2", help="lower spinor amplitude")
    p.add_argument("--beta", help="probe coherent amplitude")
    p.add_argument("--g", help="measurement strength in units of hbar omega")
    p.add_argument("--omega-b", dest="omega_b", help="probe mode frequency")
    p.add_argument("--osc-dim", dest="osc_dim", help="oscillator Fock cutoff")
    p.add_argument("--probe-dim", dest="probe_dim", help="probe Fock cutoff")
    p.add_argument("--t-max", dest="t_max", help="final time in units of 2 pi / omega")
    p.add_argument("--samples", help="number of time samples")


def build_parser():
    parser = argparse.ArgumentParser(prog="dirac-qnd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output path (a tag is appended for multi-table runs)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--config", help="key=value file; flags override it")

    for name, text in (("fig1", "FW-frame probing of the relativistic quadrature"),
                       ("fig2", "weak-regime probing under the full Dirac Hamiltonian")):
        p = sub.add_parser(name, help=text)
        _add_physics(p)
        common(p)
    p = sub.add_parser("scan", help="snapshot at t_max against epsilon")
    _add_physics(p, "explicit epsilon list (overrides the log grid)")
    p.add_argument("--points", help="log grid size")
    p.add_argument("--eps-min", dest="eps_min", help="log grid start")
    p.add_argument("--eps-max", dest="eps_max", help="log grid end")
    common(p)
    p = sub.add_parser("spectrum", help="numerical against analytic energies")
    p.add_argument("--epsilon")
    p.add_argument("--osc-dim", dest="osc_dim")
    common(p)
    p = sub.add_parser("scales", help="SI order-of-magnitude estimates")
    p.add_argument("--platform", choices=("electron", "cold_atom", "custom"))
    p.add_argument("--mass", help="mass in kg")
    p.add_argument("--c-eff", dest="c_eff", help="effective light speed in m/s")
    p.add_argument("--epsilon")
    p.add_argument("--n", help="oscillator excitation number")
    common(p)
    p = sub.add_parser("custom", help="any probed run with explicit parameters")
    _add_physics(p)
    p.add_argument("--scheme", choices=tuple(OBSERVABLE_ORDER))
    common(p)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args.command, args)
        tables = RUNNERS[args.command](cfg)
        emit(tables, args.out, args.format)
    except DiracQndError as exc:
        print(f"error: {exc}", file=sys.stderr)
        hint = getattr(exc, "suggested_cutoff", None) or getattr(exc, "recommended_dt", None)
        if hint is not None:
            print(f"hint: {hint}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
