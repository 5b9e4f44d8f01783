"""File outputs: metric tables, learning curves, traces, manifests and
plot-ready series.  All tables are comma-separated with fixed column order
and contain no timestamps, so reruns are byte-identical."""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .. import __version__
from ..hppo.train import CURVE_COLUMNS
from .config import ExperimentConfig
from .evaluate import METRIC_COLUMNS

TRACE_COLUMNS = ("episode", "slot", "uav_x", "uav_y", "move", "lambdas", "mean_amplification",
                 "reward", "r_total", "r_center", "r_edge", "oob", "no_fly", "qos")

SERIES = {
    "sum_rate_vs_pt": ("mode", "policy", "fairness", "p_t_dbm", "mean_sum_rate", "ci_sum_rate"),
    "reward_vs_iteration": ("mode", "sweep_value", "iteration", "mean_reward",
                                  "mean_episode_reward"),
    "outage_vs_pt": ("mode", "policy", "fairness", "p_t_dbm", "outage"),
    "ee_vs_sum_rate": ("mode", "policy", "fairness", "sweep_parameter", "sweep_value",
                             "mean_sum_rate", "energy_efficiency"),
    "sum_rate_vs_k": ("mode", "policy", "fairness", "k", "mean_sum_rate", "ci_sum_rate"),
    "fairness_vs_pt": ("mode", "policy", "fairness", "p_t_dbm", "mean_sum_rate", "jain"),
}


def _ensure_dir(outdir) -> Path:
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out}: {e}") from e
    return out


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) if not isinstance(x, float) else repr(x) for x in v)
    return v


def write_table(path, columns, rows):
    path = Path(path)
    try:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in columns])
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e
    return path


def write_metrics(path, rows):
    return write_table(path, METRIC_COLUMNS, [dict(zip(METRIC_COLUMNS, r.as_list())) for r in rows])


def write_curve(path, curve):
    return write_table(path, CURVE_COLUMNS, curve)


def write_traces(path, traces):
    return write_table(path, TRACE_COLUMNS, traces)


def read_table(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def write_series(outdir, rows, curves=None) -> list[Path]:
    """One file per figure family; families without data get a header-only file."""
    out = _ensure_dir(outdir)
    recs = [dict(zip(METRIC_COLUMNS, r.as_list())) for r in rows]
    pt = [dict(r, p_t_dbm=r["sweep_value"]) for r in recs if r["sweep_parameter"] == "p_t"]
    kk = [dict(r, k=int(r["sweep_value"])) for r in recs if r["sweep_parameter"] == "k"]
    curve_rows = []
    for (mode, value), curve in sorted((curves or {}).items(), key=lambda kv: (kv[0][0], kv[0][1])):
        for c in curve:
            curve_rows.append({"mode": mode, "sweep_value": value, **c})
    data = {
        "sum_rate_vs_pt": pt,
        "reward_vs_iteration": curve_rows,
        "outage_vs_pt": pt,
        "ee_vs_sum_rate": recs,
        "sum_rate_vs_k": kk,
        "fairness_vs_pt": pt,
    }
    return [write_table(out / f"{name}.csv", SERIES[name], data[name]) for name in SERIES]


def manifest(cfg: ExperimentConfig, command: str, seeds, files=()) -> dict:
    return {"version": __version__, "command": command, "seeds": [int(s) for s in seeds],
            "config": cfg.to_dict(), "files": sorted(str(f) for f in files)}


def write_manifest(path, cfg: ExperimentConfig, command: str, seeds, files=()):
    path = Path(path)
    text = json.dumps(manifest(cfg, command, seeds, files), indent=2, sort_keys=True)
    try:
        path.write_text(text + "\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e
    return path


def load_manifest(path) -> tuple[ExperimentConfig, dict]:
    d = json.loads(Path(path).read_text())
    return ExperimentConfig.from_dict(d["config"]), d


def export_all(outdir, cfg: ExperimentConfig, command: str, rows, traces=None, curves=None,
               seeds=()) -> list[Path]:
    out = _ensure_dir(outdir)
    files = [write_metrics(out / "metrics.csv", rows)]
    if traces is not None:
        files.append(write_traces(out / "traces.csv", traces))
    for (mode, value), curve in sorted((curves or {}).items(), key=lambda kv: (kv[0][0], kv[0][1])):
        files.append(write_curve(out / f"curve_{mode}_{value:g}.csv", curve))
    files += write_series(out / "series", rows, curves)
    rel = [f.relative_to(out) for f in files]
    files.append(write_manifest(out / "manifest.json", cfg, command, seeds or (cfg.seed,), rel))
    return files
