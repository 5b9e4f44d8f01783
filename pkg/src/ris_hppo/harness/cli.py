"""Command-line entry point: ``ris-hppo {train,evaluate,sweep,oracle,export}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..hppo.checkpoint import save_checkpoint
from ..scenario import build_topology
from .baselines import oracle_search
from .config import MODES, load_config, mode_parts, tiny_preset
from .evaluate import (MetricRow, METRIC_COLUMNS, evaluate_baseline, evaluate_policy, run_sweep,
                       train_agent)
from .export import export_all, read_table, write_curve, write_manifest, write_series

log = logging.getLogger("ris_hppo")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML or JSON experiment config")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--mode", choices=MODES, help="RIS/access mode (overrides the config)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-path config override, repeatable")
    p.add_argument("--tiny", action="store_true", help="start from the small exhaustive-search preset")
    p.add_argument("-v", "--verbose", action="store_true")


def _config(args):
    if args.tiny and args.config is None:
        cfg = tiny_preset().with_overrides(args.override)
    else:
        cfg = load_config(args.config, args.override)
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.out is not None:
        kw["out_dir"] = args.out
    if args.mode is not None:
        kw["mode"] = args.mode
    return cfg.replace(**kw) if kw else cfg


def cmd_train(args, cfg):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def progress(row):
        log.info("iter %d  reward %.4f  sum rate %.4f", row["iteration"], row["mean_reward"],
                 row["mean_sum_rate"])

    res, header = train_agent(cfg, progress=progress)
    ck = out / "checkpoint.bin"
    save_checkpoint(ck, res.agent, header["seed"], header["config_hash"],
                    {"mode": cfg.mode, "iterations": cfg.train.iterations})
    files = [ck.relative_to(out), write_curve(out / "curve.csv", res.curve).relative_to(out)]
    files += [f.relative_to(out) for f in
              write_series(out / "series", [], {(cfg.mode, cfg.radio.p_t_dbm): res.curve})]
    write_manifest(out / "manifest.json", cfg, "train", [cfg.seed], files)
    print(f"checkpoint written to {ck}")
    return 0


def cmd_evaluate(args, cfg):
    traces = []
    if args.baseline:
        row = evaluate_baseline(args.baseline, cfg, episodes=args.episodes, traces=traces)
    else:
        if not args.checkpoint:
            raise SystemExit("evaluate needs --checkpoint or --baseline")
        row = evaluate_policy(args.checkpoint, cfg, episodes=args.episodes, traces=traces)
    export_all(cfg.out_dir, cfg, "evaluate", [row], traces=traces)
    print(f"mean sum rate {row.mean_sum_rate:.4f} bps/Hz  outage {row.outage:.4f}  "
          f"EE {row.energy_efficiency:.1f} bit/J")
    return 0


def cmd_sweep(args, cfg):
    modes = args.modes.split(",") if args.modes else None
    curves = {}
    traces = [] if args.traces else None
    rows = run_sweep(cfg, args.policy, modes, checkpoint=args.checkpoint, traces=traces,
                     curves=curves)
    export_all(cfg.out_dir, cfg, f"sweep --policy {args.policy}", rows, traces, curves)
    for r in rows:
        print(f"{r.sweep_parameter}={r.sweep_value:g} {r.mode}: {r.mean_sum_rate:.4f}")
    return 0


def cmd_oracle(args, cfg):
    ris_mode, access = mode_parts(cfg.mode)
    o = cfg.oracle
    top = build_topology(cfg.scenario)
    res = oracle_search(top, cfg.radio.radio(), cfg.channel, (cfg.ris.k_ground, cfg.ris.k_uav),
                        ris_mode, seed=cfg.seed, q_theta=o.q_theta, q_lambda=o.q_lambda,
                        q_p=o.q_p, s_max=cfg.ris.s_max, amplitude=cfg.ris.amplitude,
                        access=access, variant=cfg.env.edge_variant, uav_grid=o.uav_grid,
                        max_space=o.max_space)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    best = {"best_sum_rate": res.best_rate, "phases": res.phases.tolist(),
            "amplification": res.amplification.tolist(), "lambdas": res.lambdas.tolist(),
            "uav_xy": res.uav_xy.tolist(), "rates": res.report.rates.tolist(),
            "n_configs": res.n_configs, "mode": cfg.mode}
    (out / "oracle.json").write_text(json.dumps(best, indent=2, sort_keys=True) + "\n")
    write_manifest(out / "manifest.json", cfg, "oracle", [cfg.seed], ["oracle.json"])
    print(f"oracle sum rate {res.best_rate:.6f} bps/Hz over {res.n_configs} configurations")
    return 0


def _row_from_record(r: dict) -> MetricRow:
    conv = {"sweep_value": float, "n": int, "ci_defined": lambda s: bool(int(s))}
    kw = {}
    for c in METRIC_COLUMNS:
        f = conv.get(c, float if c not in ("sweep_parameter", "mode", "policy", "fairness") else str)
        kw[c] = f(r[c])
    return MetricRow(**kw)


def cmd_export(args, cfg):
    rows = []
    for src in args.inputs:
        path = Path(src)
        table = path / "metrics.csv" if path.is_dir() else path
        rows += [_row_from_record(r) for r in read_table(table)]
    files = write_series(Path(cfg.out_dir), rows)
    print(f"wrote {len(files)} series files to {cfg.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ris-hppo", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an H-PPO agent and save a checkpoint")
    _common(p)

    p = sub.add_parser("evaluate", help="greedy evaluation of a checkpoint or a baseline")
    _common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--baseline", choices=("random", "fixed"))
    p.add_argument("--episodes", type=int)

    p = sub.add_parser("sweep", help="metric rows over p_t or RIS size")
    _common(p)
    p.add_argument("--policy", choices=("oracle", "random", "fixed", "trained"), default="oracle")
    p.add_argument("--modes", help="comma-separated modes (default: --mode)")
    p.add_argument("--checkpoint", help="evaluate this checkpoint instead of training per point")
    p.add_argument("--traces", action="store_true", help="also write per-slot traces")

    p = sub.add_parser("oracle", help="exhaustive search on one realization")
    _common(p)

    p = sub.add_parser("export", help="rebuild plot-ready series from metric tables")
    _common(p)
    p.add_argument("inputs", nargs="+", help="run directories or metrics.csv files")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = _config(args)
    handler = {"train": cmd_train, "evaluate": cmd_evaluate, "sweep": cmd_sweep,
               "oracle": cmd_oracle, "export": cmd_export}[args.command]
    try:
        return handler(args, cfg)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
