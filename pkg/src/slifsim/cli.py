"""Command-line front end: ``slifsim {simulate,curve,sweep}``.

Every run is described by one JSON document (file or ``-`` for stdin);
``--out-dir``, ``--plot`` and ``--dt`` override the matching fields.
Exit codes: 0 success, 2 bad configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import metrics, sweep
from .neuron import (
    IntegrationError,
    NeuronParams,
    SimConfig,
    SynapseParams,
    default_dt,
    simulate,
)

log = logging.getLogger("slifsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

DEFAULTS = {
    "model": "slif",
    "neuron": {"c_m": 1e-4, "g_l": 1e-4},
    "synapse": {"tau_s": 0.1},
    "simulate": {"spike_sets": [[0.0]], "t_end": None},
    "curve": {"grid": None, "tw_offset": metrics.DEFAULT_TW_OFFSET, "v_th": None},
    "sweep": {"axes": ["c_m", "g_l"], "scale_lo": 0.1, "scale_hi": 10.0,
              "points_per_axis": 25, "ist_points": metrics.DEFAULT_GRID_POINTS,
              "tw_offset": metrics.DEFAULT_TW_OFFSET, "workers": 1},
    "out_dir": "out",
    "plot": False,
    "dt": None,
}


class ConfigError(ValueError):
    pass


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(source) -> dict:
    if source is None:
        return {}
    try:
        text = sys.stdin.read() if source == "-" else Path(source).read_text()
        doc = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {source}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def resolve_config(doc: dict, args) -> dict:
    """Defaults, then the document, then command-line overrides."""
    unknown = set(doc) - set(DEFAULTS) - {"experiment"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = _merge(DEFAULTS, doc)
    cfg["experiment"] = args.command
    if args.out_dir is not None:
        cfg["out_dir"] = args.out_dir
    if args.plot:
        cfg["plot"] = True
    if args.dt is not None:
        cfg["dt"] = args.dt
    if cfg["model"] not in ("lif", "slif", "both"):
        raise ConfigError(f"model must be lif, slif or both, got {cfg['model']!r}")
    return cfg


def _params(cfg):
    try:
        p = NeuronParams(**cfg["neuron"])
        s = SynapseParams(**cfg["synapse"])
    except TypeError as exc:
        raise ConfigError(f"bad parameter block: {exc}") from exc
    return p, s


def _models(cfg):
    return ["lif", "slif"] if cfg["model"] == "both" else [cfg["model"]]


def _ist_grid(spec):
    if spec is None:
        return None
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    try:
        lo, hi, n = float(spec["lo"]), float(spec["hi"]), int(spec["n"])
        spacing = spec.get("spacing", "log")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"IST grid needs lo, hi, n: {exc}") from exc
    if spacing == "log":
        return np.geomspace(lo, hi, n)
    if spacing == "linear":
        return np.linspace(lo, hi, n)
    raise ConfigError(f"grid spacing must be log or linear, got {spacing!r}")


def cmd_simulate(cfg, out: Path) -> None:
    p, s = _params(cfg)
    block = cfg["simulate"]
    sets = block["spike_sets"]
    if not isinstance(sets, list) or not all(isinstance(x, list) for x in sets):
        raise ConfigError("simulate.spike_sets must be a list of spike-time lists")
    for model in _models(cfg):
        dt = cfg["dt"] or (default_dt(p, s) if model == "slif" else default_dt(p))
        traces, labels = [], []
        for k, times in enumerate(sets):
            times = [float(t) for t in times]
            last = times[-1] if times else 0.0
            t_end = block["t_end"]
            if t_end is None:
                t_end = last + metrics.settle_margin(p, s)
            tr = simulate(model, p, s, times, SimConfig(dt, t_end))
            tr.to_csv(out / f"{model}_trace_{k}.csv")
            traces.append(tr)
            labels.append("spikes " + ", ".join(f"{t:g}" for t in times) + " ms" if times else "no input")
        if cfg["plot"]:
            from .plotting import plot_traces
            plot_traces(out / f"{model}_traces.svg", traces, labels, v_th=p.v_th,
                        title=f"{model.upper()} membrane response")
        log.info("%s: wrote %d traces", model, len(traces))


def cmd_curve(cfg, out: Path) -> None:
    p, s = _params(cfg)
    block = cfg["curve"]
    summary = {}
    curves, labels = [], []
    for model in _models(cfg):
        grid = _ist_grid(block["grid"])
        if model == "slif":
            if grid is None:
                grid = metrics.default_ist_grid(p, s)
            sim = None
            if cfg["dt"]:
                sim = SimConfig(cfg["dt"], float(grid[-1]) + metrics.settle_margin(p, s))
            curve = metrics.ist_response_curve(p, s, grid, sim)
        else:
            sim = SimConfig(cfg["dt"], 0.0) if cfg["dt"] else None
            curve = metrics.lif_curve(p, grid, sim)
        m = metrics.tuning_metrics(curve, block["tw_offset"])
        extra = {"model": model}
        if model == "slif" and block["v_th"] is not None:
            win = metrics.spiking_ist_window(p, s, block["v_th"], curve.ist_grid, sim)
            extra["spiking_window_ms"] = list(win) if win else None
        curve.to_csv(out / f"{model}_curve.csv")
        m.to_json(out / f"{model}_metrics.json", extra)
        summary[model] = {**m.to_dict(), **extra}
        curves.append(curve)
        labels.append(model.upper())
        for w in m.warnings:
            log.warning("%s: %s", model, w)
    if cfg["plot"]:
        from .plotting import plot_curves
        plot_curves(out / "curves.svg", curves, labels, title="Two-spike peak amplitude vs IST")
    print(json.dumps(summary, indent=2))


def cmd_sweep(cfg, out: Path) -> None:
    p, s = _params(cfg)
    block = dict(cfg["sweep"])
    workers = int(block.pop("workers", 1))
    try:
        spec = sweep.SweepSpec(p, s, **block)
    except TypeError as exc:
        raise ConfigError(f"bad sweep block: {exc}") from exc
    res = sweep.run_sweep(spec, workers=workers)
    res.to_csv(out / "sweep.csv")
    rep = sweep.monotonicity_report(res)
    ok, verdicts = sweep.joint_optimum_check(res)
    doc = rep.to_dict()
    doc["joint_optimum"] = {"all_compatible": ok, "axes": [asdict(v) for v in verdicts]}
    doc["failed_cells"] = sum(not c.ok for c in res.cells)
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n")
    text = rep.table() + "\n\njoint optimum: " + ", ".join(
        f"+{v.axis} {'compatible' if v.compatible else 'conflicting'}" for v in verdicts) + "\n"
    (out / "report.txt").write_text(text)
    if cfg["plot"]:
        from .plotting import plot_sweep_map
        tag = "_".join(spec.axes)
        for metric, label in (("max_amplitude", "peak amplitude (mV)"),
                              ("amplitude", "curve amplitude (mV)"),
                              ("tw", "TW (ms)"), ("favorite_ist", "favorite IST (ms)")):
            plot_sweep_map(out / f"sweep_{tag}_{metric}.svg", res, metric, label)
    print(text, end="")


COMMANDS = {"simulate": cmd_simulate, "curve": cmd_curve, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slifsim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file, or - for stdin")
        sp.add_argument("--out-dir", help="output directory")
        sp.add_argument("--plot", action="store_true", help="also write SVG figures")
        sp.add_argument("--dt", type=float, help="integration step (ms)")
        sp.add_argument("--dump-config", action="store_true",
                        help="print the resolved config and exit")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(load_config(args.config), args)
        if cfg["dt"] is not None and not (isinstance(cfg["dt"], (int, float)) and cfg["dt"] > 0):
            raise ConfigError(f"dt must be a positive number, got {cfg['dt']!r}")
        if args.dump_config:
            print(json.dumps(cfg, indent=2))
            return EXIT_OK
        _params(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg["out_dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"config error: cannot create {out}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, metrics.NonContiguousWindowError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # parameter validation that only surfaces once blocks are combined
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
