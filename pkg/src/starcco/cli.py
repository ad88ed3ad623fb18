"""Command-line entry point: ``starcco {simulate,train,sweep,plot,selftest}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, Strategy, load_config, scene_for
from .env import StarRisEnv
from .metrics import points_csv
from .moppo import LOG_FIELDS, _derive, evaluate, make_net, train
from .plots import render_heatmap, render_plots
from .scene import build_scene
from .sweep import (
    EVAL_KEY,
    read_results,
    read_summary,
    run_sweep,
    summarize,
    write_meta,
    write_summary,
)

log = logging.getLogger("starcco")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _resolve_seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env_seed = os.environ.get("STARCCO_SEED")
    if env_seed:
        try:
            return int(env_seed)
        except ValueError:
            raise ConfigError(f"STARCCO_SEED is not an integer: {env_seed!r}")
    return None


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    seed = _resolve_seed(args)
    if seed is not None:
        cfg = cfg.with_seeds([seed])
    if getattr(args, "workers", None):
        cfg = dataclasses.replace(cfg, workers=args.workers)
    cfg.validate()
    return cfg


def _out(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    seed = cfg.seeds[0]
    scene = build_scene(cfg.scene, seed=seed)
    env = StarRisEnv(scene, cfg.channel, cfg.env)
    state = env.reset(_derive(seed, EVAL_KEY))
    (out / "metrics.csv").write_text(points_csv(scene, state.metrics))
    (out / "scene.json").write_text(scene.to_json())
    if args.dump_channels:
        (out / "channels.csv").write_text(env.channels.to_csv())
    with np.errstate(divide="ignore"):
        render_heatmap(scene, 10 * np.log10(state.metrics.rsrp) + 30, out / "rsrp_heatmap.svg")
    write_meta(cfg, out)
    print(f"coverage={state.coverage:.6f} capacity={state.capacity:.6f} -> {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    strategy = Strategy.parse(args.strategy) if args.strategy else cfg.strategies[0]
    seed = cfg.seeds[0]
    value = args.value
    scene = build_scene(scene_for(cfg, value), seed=seed)
    tcfg = dataclasses.replace(cfg.train, seed=seed)

    def factory():
        return StarRisEnv(scene, cfg.channel, cfg.env)

    env = factory()
    net = make_net(env, tcfg)
    result = train(factory, net, tcfg, fixed_weights=strategy.weights, out_dir=out)
    with open(out / "train_log.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LOG_FIELDS, lineterminator="\n")
        w.writeheader()
        for rec in result.log:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in rec.items()})
    net.save(out / "final.npz", result.params)
    point = evaluate(env, net, result.params, _derive(seed, EVAL_KEY))
    (out / "episode_trace.csv").write_text(env.trace_csv())
    write_meta(cfg, out)
    (out / "final.json").write_text(json.dumps(
        {"strategy": strategy.label, "seed": seed, "coverage": point.cov, "capacity": point.cap,
         "l_init": result.l_init}, indent=2))
    print(f"{strategy.label}: coverage={point.cov:.6f} capacity={point.cap:.6f} -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _out(args, cfg)
    rows = run_sweep(cfg, out, workers=cfg.workers)
    ok = [r for r in rows if r.ok]
    if not ok:
        log.error("every cell failed")
        return EXIT_RUNTIME
    summary = summarize(rows)
    write_summary(summary, out / "summary.csv")
    render_plots(summary, out)
    failed = len(rows) - len(ok)
    print(f"{len(ok)} cells ok, {failed} failed -> {out}")
    return EXIT_OK if not failed else EXIT_RUNTIME


def cmd_plot(args) -> int:
    src = Path(args.input)
    if src.name == "summary.csv" or args.summary:
        summary = read_summary(src)
    else:
        rows = read_results(src)
        summary = summarize(rows) if rows else []
    if not summary:
        log.error("nothing to plot in %s", src)
        return EXIT_RUNTIME
    out = Path(args.out or src.parent)
    for p in render_plots(summary, out):
        print(p)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_all

    return EXIT_OK if run_all() else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="starcco", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, workers=False):
        sp.add_argument("--config", help="INI experiment config")
        sp.add_argument("--seed", type=int, help="overrides the config seeds (and STARCCO_SEED)")
        sp.add_argument("--out", help="output directory (default: experiment.output_dir)")
        if workers:
            sp.add_argument("--workers", type=int, help="concurrent sweep cells")

    sp = sub.add_parser("simulate", help="one scene -> per-point metrics CSV and RSRP heatmap")
    common(sp)
    sp.add_argument("--dump-channels", action="store_true", help="also write channels.csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("train", help="train one cell")
    common(sp)
    sp.add_argument("--strategy", help="mgda or fixed(w_cov, w_cap); default: first in config")
    sp.add_argument("--value", type=int, help="sweep value for this cell (N_s or K)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("sweep", help="full (strategy x value x seed) grid")
    common(sp, workers=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("plot", help="results.csv or summary.csv -> SVG charts")
    sp.add_argument("input")
    sp.add_argument("--out")
    sp.add_argument("--summary", action="store_true", help="input is a summary CSV")
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("selftest", help="run the built-in oracle checks")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
