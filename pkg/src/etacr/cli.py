"""Command-line front end.

    etacr coeffs  --config run.cfg [--key value ...]
    etacr acr     --config run.cfg --method all
    etacr compare --output out/
    etacr platoon --etas 1,2,3,4 --output out/ --plot

Configuration files hold one ``key = value`` per line; ``#`` starts a
comment. Every key has a default (see ``DEFAULTS``) and may be overridden by
``--key value`` on the command line. Exit status is 0 on success, 2 for
configuration errors and 1 for runtime failures; errors are reported as a
single ``error: <kind>: <detail>`` line on stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import acr as acrmod
from .coeffs import METHODS, coefficients, error_densities, open_loop_variance
from .dist import GridOptions, SystemSpec, make_gaussian, moments
from .errors import AcrError, InvalidGrid, InvalidParameter
from .platoon import PlatoonConfig, run_platoon, sweep_row
from .sim import conditional_frequencies, monte_carlo_acr

log = logging.getLogger(__name__)

ALL_METHODS = METHODS + ("monte-carlo",)

# key -> (type, default); order fixes the --help listing and the JSON "config" block
DEFAULTS = {
    "A": (float, 1.25),
    "B": (float, 1.0),
    "sigma": (float, 1.0),
    "x0": (float, -2.0),
    "eta": (float, 1.0),
    "T": (int, 5),
    "method": (str, "quadrature"),
    "horizon": (int, 50),
    "trials": (int, 10_000),
    "particles": (int, 10_000),
    "bandwidth": (float, 0.1),
    "seed": (int, 0),
    "nodes": (int, 4001),
    "support_factor": (float, 8.0),
    "workers": (int, 1),
    "format": (str, "csv"),
    "output": (str, ""),
    "d": (float, 3.0),
    "gamma": (float, 1.0),
    "Q": (float, 1.0),
    "Kgain": (float, 1.0),
    "dt": (float, 0.1),
    "duration": (float, 40.0),
    "platoon_T": (int, 20),
    "platoon_sigma": (float, 1.0),
    "etas": (str, "1,2,3,4"),
}


class ConfigError(Exception):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class RunConfig:
    system: SystemSpec
    method: str
    horizon: int
    trials: int
    particles: int
    bandwidth: float
    seed: int
    grid: GridOptions
    format: str
    output: str
    workers: int = 1
    platoon: PlatoonConfig = field(default_factory=PlatoonConfig)
    etas: tuple = (1.0, 2.0, 3.0, 4.0)
    raw: dict = field(default_factory=dict, compare=False)


def _coerce(key, text):
    kind = DEFAULTS[key][0]
    try:
        if kind is int:
            f = float(text)
            if f != int(f):
                raise ValueError
            return int(f)
        return kind(text)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {kind.__name__}") from None


def parse_config_text(text):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _coerce(key, value)
    return values


def build_config(values):
    """Validate merged key/values into a ``RunConfig``; raises ``ConfigError``."""
    v = {k: d for k, (_, d) in DEFAULTS.items()}
    v.update(values)
    if v["method"] not in ALL_METHODS + ("all",):
        raise ConfigError("method", f"must be one of {', '.join(ALL_METHODS + ('all',))}")
    if v["format"] not in ("csv", "json"):
        raise ConfigError("format", "must be csv or json")
    for key in ("horizon", "trials", "particles", "workers"):
        if v[key] < 1:
            raise ConfigError(key, "must be >= 1")
    if not v["bandwidth"] > 0:
        raise ConfigError("bandwidth", "must be > 0")
    try:
        etas = tuple(float(s) for s in str(v["etas"]).split(",") if s.strip())
    except ValueError:
        raise ConfigError("etas", "expected a comma-separated list of numbers") from None
    if not etas or any(not e > 0 for e in etas):
        raise ConfigError("etas", "thresholds must be positive")
    try:
        system = SystemSpec(v["A"], v["B"], v["sigma"], v["x0"], v["eta"], v["T"])
        grid = GridOptions(v["nodes"], v["support_factor"])
        platoon = PlatoonConfig(
            d=v["d"], gamma=v["gamma"], Q=v["Q"], Kgain=v["Kgain"], dt=v["dt"],
            duration=v["duration"], eta=etas[0], T=v["platoon_T"], sigma=v["platoon_sigma"],
            trials=v["trials"], particles=v["particles"], bandwidth=v["bandwidth"],
        )
    except InvalidParameter as exc:
        raise ConfigError(exc.field, str(exc).split(": ", 1)[-1]) from None
    except InvalidGrid as exc:
        key = "support_factor" if "support_factor" in str(exc) else "nodes"
        raise ConfigError(key, str(exc)) from None
    return RunConfig(
        system, v["method"], v["horizon"], v["trials"], v["particles"], v["bandwidth"],
        v["seed"], grid, v["format"], v["output"], v["workers"], platoon, etas, raw=v,
    )


# -- serialisation -------------------------------------------------------------

def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "" if x is None else str(x)


def csv_text(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(c) for c in row) + "\n")
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# execution settings that must not change the bytes of a result
_NOT_ECHOED = ("output", "workers")


def json_text(cfg, results, diagnostics):
    config = {k: v for k, v in cfg.raw.items() if k not in _NOT_ECHOED}
    doc = {"config": config, "results": results, "diagnostics": list(diagnostics)}
    return json.dumps(_jsonable(doc), sort_keys=True, indent=1) + "\n"


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _emit(cfg, text):
    if cfg.output:
        write_atomic(cfg.output, text)
    else:
        sys.stdout.write(text)


class _Diagnostics(logging.Handler):
    """Collects warnings raised by the engines during one command."""

    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages = []

    def emit(self, record):
        msg = f"{record.name}: {record.getMessage()}"
        if msg not in self.messages:
            self.messages.append(msg)


# -- engines -------------------------------------------------------------------

def _coeffs_for(cfg, method, mc=None):
    if method == "monte-carlo":
        mc = mc or _mc(cfg)
        est = conditional_frequencies(mc, cfg.system.T)
        pbar = np.nan_to_num(est.pbar, nan=0.0)
        for n in np.flatnonzero(est.low_confidence):
            log.warning("monte-carlo coefficient n=%d rests on %d runs", n + 1, est.at_risk[n])
        from .coeffs import CoeffSet
        return CoeffSet.from_pbar(pbar, "monte-carlo")
    return coefficients(cfg.system, method, cfg.grid, cfg.particles, cfg.bandwidth, cfg.seed)


def _mc(cfg):
    return monte_carlo_acr(cfg.system, None, cfg.horizon, cfg.trials, cfg.seed, cfg.workers)


def _methods(cfg):
    return ALL_METHODS if cfg.method == "all" else (cfg.method,)


def cmd_coeffs(cfg):
    """Coefficient table (n, pbar, p) per method."""
    results, rows = {}, []
    mc = None
    for method in _methods(cfg):
        if method == "monte-carlo":
            mc = mc or _mc(cfg)
        c = _coeffs_for(cfg, method, mc)
        results[method] = {"pbar": c.pbar, "p": c.p}
        rows += [(n, pb, p, method) for n, (pb, p) in enumerate(zip(c.pbar, c.p), start=1)]
    return results, {"coeffs.csv": (("n", "pbar", "p", "method"), rows)}


def _tail_average(values):
    v = np.asarray(values)
    return float(v[len(v) - max(1, (len(v) - 1) // 4):].mean())


def acr_columns(cfg, methods, mc=None):
    """Per-method transient series, stationary value and Jury verdict."""
    cols = {}
    for method in methods:
        if method == "monte-carlo":
            mc = mc or _mc(cfg)
            values = mc.acr.values
            cols[method] = (values, _tail_average(values), None)
            continue
        c = _coeffs_for(cfg, method)
        series = acrmod.recursive_acr(c, cfg.horizon)
        verdict = acrmod.jury_stable(acrmod.characteristic_polynomial(c)).stable
        cols[method] = (series.values, series.stationary, verdict)
    return cols


def _acr_table(cfg, cols):
    names = list(cols)
    rows = [(k, *(cols[m][0][k] for m in names)) for k in range(cfg.horizon + 1)]
    rows.append(("stationary", *(cols[m][1] for m in names)))
    rows.append(("jury_stable", *(cols[m][2] for m in names)))
    return ("k", *names), rows


def cmd_acr(cfg):
    """Transient and stationary communication rate per method."""
    cols = acr_columns(cfg, _methods(cfg))
    results = {m: {"values": v, "stationary": s, "jury_stable": j} for m, (v, s, j) in cols.items()}
    return results, {"acr.csv": _acr_table(cfg, cols)}


def cmd_compare(cfg):
    """All methods side by side, moment table and gridded error densities."""
    spec = cfg.system
    mc = _mc(cfg)
    order = ("monte-carlo", "quadrature", "particle", "open-loop", "open-loop-particle")
    cols = acr_columns(cfg, order, mc)
    header, rows = _acr_table(cfg, cols)
    header = ("k", "gt") + header[2:]
    tables = {"acr_table.csv": (header, rows)}
    results = {"acr": {m: {"values": v, "stationary": s, "jury_stable": j}
                       for m, (v, s, j) in cols.items()}}

    dens = error_densities(spec, spec.T, cfg.grid)
    mrows = []
    for k, pdf in enumerate(dens, start=1):
        mom = moments(pdf)
        s_mc = mc.error_samples.get(k, np.empty(0))
        s_ol = mc.openloop_samples.get(k, np.empty(0))
        mc_mean = float(s_mc.mean()) if s_mc.size else float("nan")
        mc_var = float(s_mc.var(ddof=1)) if s_mc.size > 1 else float("nan")
        ol_var = float(s_ol.var(ddof=1)) if s_ol.size > 1 else float("nan")
        mrows.append((k, mom.mean, 0.0, mom.variance, open_loop_variance(spec, k),
                      mc_mean, mc_var, ol_var, int(s_mc.size)))
    tables["moments.csv"] = (
        ("k", "mean_ehat", "mean_e", "var_ehat", "var_e",
         "mc_mean_ehat", "mc_var_ehat", "mc_var_e", "mc_count"),
        mrows,
    )
    results["moments"] = [dict(zip(tables["moments.csv"][0], r)) for r in mrows]
    results["pdfs"] = {}
    for k in range(2, min(spec.T, 5) + 1):
        ehat = dens[k - 1]
        e = make_gaussian(np.sqrt(open_loop_variance(spec, k)), cfg.grid)
        tables[f"pdf_ehat_k{k}.csv"] = (("z", "density"), list(zip(ehat.z, ehat.values)))
        tables[f"pdf_e_k{k}.csv"] = (("z", "density"), list(zip(e.z, e.values)))
        results["pdfs"][f"ehat_k{k}"] = {"z": ehat.z, "density": ehat.values}
        results["pdfs"][f"e_k{k}"] = {"z": e.z, "density": e.values}
    return results, tables, {"spec": spec, "densities": dens, "mc": mc, "cols": cols}


def cmd_platoon(cfg):
    """Platoon tracking, per-threshold rate trajectories and sweep table."""
    from dataclasses import replace

    tables, results, runs = {}, {"runs": {}, "sweep": []}, []
    for i, eta in enumerate(cfg.etas):
        res = run_platoon(replace(cfg.platoon, eta=eta), cfg.seed, cfg.workers)
        runs.append(res)
        tag = f"{eta:g}"
        if i == 0:
            tables["tracking.csv"] = (
                ("t", "mean_gap", "mean_velocity", "leader_velocity"),
                list(zip(res.t, res.mean_gap, res.mean_velocity, res.leader_velocity)),
            )
            results["tracking"] = {"eta": eta, "t": res.t, "mean_gap": res.mean_gap,
                                   "mean_velocity": res.mean_velocity,
                                   "leader_velocity": res.leader_velocity}
        tables[f"acr_eta{tag}.csv"] = (
            ("k", "t", "gt", "model", "openloop"),
            [(k, t, g, m, o) for k, (t, g, m, o) in enumerate(
                zip(res.t, res.acr_gt.values, res.acr_model.values, res.acr_openloop.values))],
        )
        results["runs"][tag] = {"gt": res.acr_gt.values, "model": res.acr_model.values,
                                "openloop": res.acr_openloop.values}
    rows = [sweep_row(r) for r in runs]
    tables["sweep.csv"] = (
        ("eta", "model_stationary", "openloop_stationary", "gt_tail", "ratio"),
        [(r.eta, r.model, r.openloop, r.gt_tail, r.ratio) for r in rows],
    )
    results["sweep"] = [asdict(r) for r in rows]
    return results, tables, {"runs": runs, "sweep": rows}


# -- entry point ---------------------------------------------------------------

COMMANDS = {"coeffs": cmd_coeffs, "acr": cmd_acr, "compare": cmd_compare, "platoon": cmd_platoon}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: usage: {message}\n")


def make_parser():
    parser = _Parser(prog="etacr", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=COMMANDS[name].__doc__)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--plot", action="store_true",
                       help="also render PNG figures next to the tables (compare, platoon)")
        for key, (kind, default) in DEFAULTS.items():
            p.add_argument(f"--{key}", dest=f"opt_{key}", metavar=kind.__name__.upper(),
                           default=None, help=f"default: {default!r}")
    return parser


def _write_tables(cfg, command, results, tables, diagnostics, multi):
    if cfg.format == "json":
        text = json_text(cfg, results, diagnostics)
        if multi:
            out = Path(cfg.output or f"{command}-output") / f"{command}.json"
            write_atomic(out, text)
        else:
            _emit(cfg, text)
        return
    if not multi:
        (header, rows), = tables.values()
        _emit(cfg, csv_text(header, rows))
        return
    outdir = Path(cfg.output or f"{command}-output")
    for name, (header, rows) in tables.items():
        write_atomic(outdir / name, csv_text(header, rows))


def run(argv=None):
    args = make_parser().parse_args(argv)
    values = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc.strerror}") from None
        values.update(parse_config_text(text))
    for key in DEFAULTS:
        given = getattr(args, f"opt_{key}")
        if given is not None:
            values[key] = _coerce(key, given)
    cfg = build_config(values)

    handler = _Diagnostics()
    root = logging.getLogger("etacr")
    root.addHandler(handler)
    try:
        out = COMMANDS[args.command](cfg)
    finally:
        root.removeHandler(handler)
    results, tables = out[0], out[1]
    multi = args.command in ("compare", "platoon")
    _write_tables(cfg, args.command, results, tables, handler.messages, multi)
    if args.plot and multi:
        from . import plotting

        outdir = Path(cfg.output or f"{args.command}-output")
        if cfg.format == "json":
            outdir = outdir if not outdir.suffix else outdir.parent
        getattr(plotting, f"plot_{args.command}")(out[2], outdir)
    return 0


def main(argv=None):
    logging.basicConfig(level=logging.ERROR, format="%(name)s: %(message)s")
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except AcrError as exc:
        print(f"error: runtime: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
