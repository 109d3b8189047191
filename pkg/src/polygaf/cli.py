"""Command-line experiment driver.

    polygaf <subcommand> [--config FILE] [--key value ...]

Configuration is a flat ``key = value`` text file ('#' starts a comment);
every key can also be given as a flag of the same name (``--L-list`` and
``--L_list`` are equivalent).  Exit status: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .experiments import (
    FormSpec,
    StokesSetup,
    clt_run,
    dilog_bounds,
    intensity_counts,
    intensity_stokes,
    kernel_identities,
    mean_value_sweep,
    resolve_box,
    variance_chain,
)
from .hole import HoleEstimateError, decay_fit, deviation_probability_mc, hole_probability_grid, hole_probability_mc
from .quadrature import QuadratureError
from .runner import default_workers
from .sampler import TruncationError, draw_sample
from .zeros1d import ZeroCountError, polynomial_roots

SUBCOMMANDS = ("kernel-check", "sample", "intensity", "variance", "clt", "deviation", "hole", "mean-value")


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default); every subcommand reads the keys it needs
SCHEMA = {
    "n": (int, 1),
    "L": (_floats, (8.0,)),
    "L_list": (_floats, (1.0, 2.0, 3.0, 4.0)),
    "r": (float, 0.5),
    "radius": (_floats, (0.5,)),
    "form": (str, "smooth"),  # smooth | polynomial | count (n = 1 zero count in |z| < r)
    "trials": (int, 1000),
    "seed": (int, 42),
    "tol": (float, 1e-18),
    "tol_relative": (_bool, False),
    "margin": (float, 0.01),
    "kappa": (float, 10.0),
    "delta": (float, 0.5),
    "s": (_floats, (0.4,)),
    "pairs": (int, 1000),
    "grid_radial": (int, 0),
    "grid_angular": (int, 0),
    "grid_density": (int, 12),
    "bip_radial": (int, 160),
    "bip_terms": (int, 32),
    "chunk": (int, 2000),
    "workers": (int, 0),
    "out": (str, "."),
    "gnuplot": (_bool, False),
}

# run-time only: never written into outputs, so results do not depend on them
NOT_EMBEDDED = ("workers", "out")


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[_canonical(key)] = value
    return out


def _canonical(key: str) -> str:
    k = key.strip().lstrip("-").replace("-", "_")
    if k not in SCHEMA:
        raise ConfigError(f"unknown configuration key {key!r}")
    return k


def resolve_config(raw: dict) -> dict:
    cfg = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw:
            try:
                cfg[key] = conv(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
        else:
            cfg[key] = default
    if cfg["trials"] < 1 or cfg["chunk"] < 1:
        raise ConfigError("trials and chunk must be positive")
    if not 0 < cfg["r"] < 1:
        raise ConfigError("r must lie in (0, 1)")
    if any(not 0 < x < 1 for x in cfg["radius"] + cfg["s"]):
        raise ConfigError("radius and s entries must lie in (0, 1)")
    if any(x <= 0 for x in cfg["L"] + cfg["L_list"]):
        raise ConfigError("intensities must be positive")
    return cfg


def _vector(values, n: int, name: str) -> tuple:
    if len(values) == 1:
        return tuple(values) * n
    if len(values) != n:
        raise ConfigError(f"{name} has {len(values)} entries, expected 1 or n={n}")
    return tuple(values)


def _workers(cfg) -> int:
    return cfg["workers"] if cfg["workers"] > 0 else default_workers()


def embedded_config(cfg: dict) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(cfg.items()) if k not in NOT_EMBEDDED}


# ----------------------------------------------------------------------------
# serialization


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: str, payload: dict, cfg: dict, subcommand: str) -> None:
    doc = {"version": __version__, "subcommand": subcommand, "config": embedded_config(cfg), "result": payload}
    text = json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def write_csv(path: str, header, rows, cfg: dict, subcommand: str) -> None:
    """CSV with '#' preamble lines holding the version and resolved config."""
    buf = io.StringIO()
    buf.write(f"# polygaf {__version__} {subcommand}\n")
    buf.write("# config " + json.dumps(_clean(embedded_config(cfg)), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_gnuplot(path: str, data: str, plot: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("set datafile separator ','\nset key autotitle columnhead\n")
        fh.write(plot.format(data=data) + "\n")


# ----------------------------------------------------------------------------
# subcommands


def _form(cfg) -> FormSpec:
    return FormSpec(cfg["form"], _vector(cfg["radius"], cfg["n"], "radius"))


def _grid(cfg, n):
    defaults = {1: (128, 256), 2: (24, 96)}.get(n, (8, 16))
    return (cfg["grid_radial"] or defaults[0], cfg["grid_angular"] or defaults[1])


def _stokes_setup(cfg) -> StokesSetup:
    n = cfg["n"]
    L = _vector(cfg["L"], n, "L")
    form = _form(cfg)
    grid = _grid(cfg, n)
    R = np.asarray(form.radius) + cfg["margin"]
    box = resolve_box(L, R, cfg["tol"], cfg["tol_relative"])
    return StokesSetup(tuple(float(x) for x in L), form, box, tuple(float(x) for x in R), int(grid[0]), int(grid[1]))


def cmd_kernel_check(cfg, out):
    rows = kernel_identities(cfg["pairs"], cfg["seed"])
    write_csv(os.path.join(out, "kernel_identities.csv"),
              ["pair", "n", "series_rel_err", "product_rel_err", "moebius_rel_err"],
              [(i, *r) for i, r in enumerate(rows)], cfg, "kernel-check")
    arr = np.array(rows)
    margin = dilog_bounds()
    summary = {
        "max_series_rel_err": float(arr[:, 1].max()),
        "max_product_rel_err": float(arr[:, 2].max()),
        "max_moebius_rel_err": float(arr[:, 3].max()),
        "dilog_bound_margin": margin,
        "pass": bool(arr[:, 1].max() <= 1e-10 and arr[:, 2].max() <= 1e-12 and arr[:, 3].max() <= 1e-12 and margin >= 0),
    }
    write_json(os.path.join(out, "kernel_summary.json"), summary, cfg, "kernel-check")
    return summary


def cmd_sample(cfg, out):
    n = cfg["n"]
    L = _vector(cfg["L"], n, "L")
    R = np.array(_vector(cfg["radius"], n, "radius"))
    box = resolve_box(L, R, cfg["tol"], cfg["tol_relative"])
    rows, roots_rows, tails = [], [], []
    for trial in range(cfg["trials"]):
        s = draw_sample(L, box, cfg["seed"], trial, eval_radius=R)
        tails.append(s.tail_variance_bound)
        for alpha in np.ndindex(s.scaled.shape):
            v = s.scaled[alpha]
            rows.append((trial, *alpha, float(v.real), float(v.imag)))
        if n == 1:
            for z in np.sort_complex(polynomial_roots(s)):
                if abs(z) < R[0]:
                    roots_rows.append((trial, float(z.real), float(z.imag), float(abs(z))))
    header = ["trial"] + [f"alpha_{j + 1}" for j in range(n)] + ["re", "im"]
    write_csv(os.path.join(out, "sample_coefficients.csv"), header, rows, cfg, "sample")
    if n == 1:
        write_csv(os.path.join(out, "sample_roots.csv"), ["trial", "re", "im", "modulus"], roots_rows, cfg, "sample")
    summary = {"box": list(box), "eval_radius": list(R), "tail_variance_bound": max(tails), "trials": cfg["trials"]}
    write_json(os.path.join(out, "sample_summary.json"), summary, cfg, "sample")
    return summary


def cmd_intensity(cfg, out):
    n = cfg["n"]
    w = _workers(cfg)
    if n == 1 and cfg["form"] == "count":
        res = intensity_counts(cfg["L"][0], cfg["r"], cfg["trials"], cfg["seed"], w, cfg["chunk"])
    else:
        res = intensity_stokes(_stokes_setup(cfg), cfg["trials"], cfg["seed"], w, cfg["chunk"])
    res["within_3se"] = bool(abs(res["z_score"]) <= 3)
    write_json(os.path.join(out, "intensity_report.json"), res, cfg, "intensity")
    return res


def cmd_variance(cfg, out):
    setup = _stokes_setup(cfg)
    summary, fl = variance_chain(setup, cfg["trials"], cfg["seed"], _workers(cfg), cfg["chunk"],
                                 cfg["bip_radial"], cfg["bip_terms"])
    summary["box"] = list(setup.box)
    write_csv(os.path.join(out, "variance_trials.csv"), ["trial", "fluctuation"], enumerate(fl), cfg, "variance")
    write_json(os.path.join(out, "variance_report.json"), summary, cfg, "variance")
    return summary


def cmd_clt(cfg, out):
    setup = _stokes_setup(cfg)
    summary, z = clt_run(setup, cfg["trials"], cfg["seed"], _workers(cfg), cfg["chunk"], cfg["bip_radial"], cfg["bip_terms"])
    summary["box"] = list(setup.box)
    write_csv(os.path.join(out, "clt_values.csv"), ["trial", "normalized"], enumerate(z), cfg, "clt")
    write_json(os.path.join(out, "clt_report.json"), summary, cfg, "clt")
    if cfg["gnuplot"]:
        write_gnuplot(os.path.join(out, "clt.gp"), "clt_values.csv",
                      "binwidth = 0.2\nbin(x) = binwidth * floor(x / binwidth)\n"
                      "plot '{data}' using (bin($2)):(1.0 / (binwidth * " + str(cfg["trials"]) + ")) "
                      "smooth freq with boxes title 'normalized statistic', exp(-x**2 / 2) / sqrt(2 * pi) title 'N(0,1)'")
    return summary


def _estimate_rows(ests):
    return [(e.L[0] if len(e.L) == 1 else ";".join(repr(x) for x in e.L), e.trials, e.events, e.used, e.excluded,
             e.probability, e.ci_low, e.ci_high, e.log_probability) for e in ests]


EST_HEADER = ["L", "trials", "events", "used", "excluded", "probability", "ci_low", "ci_high", "log_probability"]


def cmd_deviation(cfg, out):
    w = _workers(cfg)
    ests = [deviation_probability_mc(cfg["r"], cfg["delta"], L, cfg["trials"], cfg["seed"], cfg["tol"], w, cfg["chunk"])
            for L in cfg["L_list"]]
    write_csv(os.path.join(out, "deviation.csv"), EST_HEADER, _estimate_rows(ests), cfg, "deviation")
    p = [e.probability for e in ests]
    summary = {
        "estimates": [e.to_dict() for e in ests],
        "decreasing": bool(all(a > b for a, b in zip(p, p[1:]))),
        "first_last_disjoint": bool(ests[0].ci_low > ests[-1].ci_high or ests[-1].ci_low > ests[0].ci_high),
    }
    write_json(os.path.join(out, "deviation_report.json"), summary, cfg, "deviation")
    return summary


def cmd_hole(cfg, out):
    w = _workers(cfg)
    n = cfg["n"]
    if n == 1:
        ests = [hole_probability_mc(L, cfg["r"], cfg["trials"], cfg["seed"], tol=min(cfg["tol"], 1e-24),
                                    kappa=cfg["kappa"], workers=w, chunk=cfg["chunk"]) for L in cfg["L_list"]]
        pairs = [(e.L[0], e.log_probability) for e in ests]
    else:
        ests = [hole_probability_grid((L,) * n, cfg["r"], cfg["trials"], cfg["seed"], cfg["grid_density"],
                                      cfg["tol"], w, min(cfg["chunk"], 200)) for L in cfg["L_list"]]
        pairs = [(e.L, e.log_probability) for e in ests]
    write_csv(os.path.join(out, "hole_decay.csv"), EST_HEADER, _estimate_rows(ests), cfg, "hole")
    summary = {"estimates": [e.to_dict() for e in ests], "heuristic": n > 1}
    try:
        summary["fit"] = decay_fit(pairs).to_dict()
    except ValueError as exc:
        summary["fit"] = {"error": str(exc)}
    logs = [p[1] for p in pairs]
    summary["strictly_decreasing"] = bool(all(a > b for a, b in zip(logs, logs[1:])))
    write_json(os.path.join(out, "hole_fit.json"), summary, cfg, "hole")
    if cfg["gnuplot"]:
        write_gnuplot(os.path.join(out, "hole.gp"), "hole_decay.csv",
                      "set logscale xy\nplot '{data}' using 1:(-$9) with linespoints title '-log P'")
    return summary


def cmd_mean_value(cfg, out):
    n = cfg["n"]
    L = _vector(cfg["L"], n, "L")
    s = _vector(cfg["s"], n, "s")
    res = mean_value_sweep(L, s, cfg["trials"], cfg["seed"], tol=cfg["tol"], workers=_workers(cfg),
                           chunk=min(cfg["chunk"], 100))
    holds = res[:, 0] <= res[:, 1] + 1e-6
    write_csv(os.path.join(out, "mean_value.csv"), ["trial", "lhs", "rhs", "quadrature_change", "holds"],
              [(i, *row, bool(h)) for i, (row, h) in enumerate(zip(res, holds))], cfg, "mean-value")
    summary = {"trials": cfg["trials"], "all_hold": bool(holds.all()), "min_gap": float(np.min(res[:, 1] - res[:, 0]))}
    write_json(os.path.join(out, "mean_value_report.json"), summary, cfg, "mean-value")
    return summary


COMMANDS = {
    "kernel-check": cmd_kernel_check,
    "sample": cmd_sample,
    "intensity": cmd_intensity,
    "variance": cmd_variance,
    "clt": cmd_clt,
    "deviation": cmd_deviation,
    "hole": cmd_hole,
    "mean-value": cmd_mean_value,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polygaf", description="Hyperbolic GAF experiments on the polydisk.",
                                allow_abbrev=False)
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="flat key = value configuration file")
    return p


def _split_overrides(extra) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        if "=" in tok:
            k, v = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"flag {tok} needs a value")
            k, v = tok[2:], extra[i + 1]
            i += 2
        out[_canonical(k)] = v
    return out


def run(subcommand: str, config_path: str | None = None, overrides: dict | None = None) -> int:
    try:
        raw = {}
        if config_path:
            try:
                with open(config_path, encoding="utf-8") as fh:
                    raw.update(parse_config_text(fh.read()))
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        raw.update({_canonical(k): v for k, v in (overrides or {}).items()})
        cfg = resolve_config(raw)
        if subcommand not in COMMANDS:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
        if not os.path.isdir(cfg["out"]):
            raise ConfigError(f"output directory {cfg['out']!r} does not exist")
        COMMANDS[subcommand](cfg, cfg["out"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, ZeroCountError, TruncationError, HoleEstimateError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = _split_overrides(extra)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(args.subcommand, args.config, overrides)


if __name__ == "__main__":
    sys.exit(main())
