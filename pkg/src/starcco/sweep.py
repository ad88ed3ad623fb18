"""Grid runner over (strategy, sweep value, seed) cells, result CSVs and per-cell summaries."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import ExperimentConfig, Strategy, scene_for
from .env import StarRisEnv
from .metrics import METRIC_CONVENTION
from .moppo import ObjectivePoint, TrainResult, _derive, evaluate, make_net, train
from .scene import build_scene

log = logging.getLogger(__name__)

RESULT_FIELDS = ("strategy", "sweep_variable", "sweep_value", "seed", "coverage", "capacity",
                 "iterations", "wall_time", "error")
METRIC_FIELDS = ("strategy", "sweep_variable", "sweep_value", "seed", "coverage", "capacity",
                 "iterations", "error")
EVAL_KEY = 7919


@dataclass(frozen=True)
class ResultRow:
    strategy: str
    sweep_variable: str
    sweep_value: int
    seed: int
    coverage: float
    capacity: float
    iterations: int
    wall_time: float
    error: str = ""

    def to_csv(self) -> list[str]:
        return [self.strategy, self.sweep_variable, str(self.sweep_value), str(self.seed),
                repr(float(self.coverage)), repr(float(self.capacity)), str(self.iterations),
                f"{self.wall_time:.3f}", self.error]

    @classmethod
    def from_csv(cls, rec: dict) -> "ResultRow":
        return cls(rec["strategy"], rec["sweep_variable"], int(rec["sweep_value"]), int(rec["seed"]),
                   float(rec["coverage"]), float(rec["capacity"]), int(rec["iterations"]),
                   float(rec["wall_time"]), rec.get("error", ""))

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass(frozen=True)
class Cell:
    strategy: Strategy
    value: int | None
    seed: int


def cells(cfg: ExperimentConfig) -> list[Cell]:
    values = cfg.sweep_values if cfg.sweep_variable else (None,)
    return [Cell(s, v, seed) for s in cfg.strategies for v in values for seed in cfg.seeds]


def run_cell(cfg: ExperimentConfig, cell: Cell, out_dir: str | Path | None = None,
             keep_log: bool = False) -> tuple[ResultRow, TrainResult | None]:
    """Build the scene for one cell, train with its strategy, evaluate greedily."""
    var = cfg.sweep_variable or "none"
    value = -1 if cell.value is None else int(cell.value)
    t0 = time.perf_counter()
    try:
        scene = build_scene(scene_for(cfg, cell.value), seed=cell.seed)
        tcfg = dataclasses.replace(cfg.train, seed=cell.seed)

        def factory() -> StarRisEnv:
            return StarRisEnv(scene, cfg.channel, cfg.env)

        env = factory()
        net = make_net(env, tcfg)
        result = train(factory, net, tcfg, fixed_weights=cell.strategy.weights, out_dir=out_dir)
        point = evaluate(env, net, result.params, _derive(cell.seed, EVAL_KEY))
        row = ResultRow(cell.strategy.label, var, value, cell.seed, point.cov, point.cap,
                        tcfg.iterations, time.perf_counter() - t0)
        return row, (result if keep_log else None)
    except Exception as exc:  # recorded as an error row; the sweep continues
        log.exception("cell %s failed", cell)
        row = ResultRow(cell.strategy.label, var, value, cell.seed, float("nan"), float("nan"),
                        0, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")
        return row, None


def _run_cell_only(args) -> ResultRow:
    cfg, cell = args
    return run_cell(cfg, cell)[0]


def write_meta(cfg: ExperimentConfig, out_dir: Path) -> None:
    meta = {
        "metric_convention": METRIC_CONVENTION,
        "interference": cfg.env.interference,
        "config": json.loads(json.dumps(dataclasses.asdict(cfg), default=str)),
    }
    (out_dir / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def run_sweep(cfg: ExperimentConfig, out_dir: str | Path | None = None,
              workers: int | None = None) -> list[ResultRow]:
    """Run every cell; rows are appended to ``results.csv`` in grid order as they finish."""
    cfg.validate()
    todo = cells(cfg)
    workers = workers or cfg.workers
    rows: list[ResultRow] = []
    fh = writer = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_meta(cfg, out)
        fh = open(out / "results.csv", "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_FIELDS)
        fh.flush()
    try:
        if workers > 1:
            pool = ProcessPoolExecutor(max_workers=workers)
            stream: Iterable[ResultRow] = pool.map(_run_cell_only, [(cfg, c) for c in todo])
        else:
            pool = None
            stream = (run_cell(cfg, c)[0] for c in todo)
        for row in stream:
            rows.append(row)
            log.info("%s %s=%s seed=%d cov=%.4f cap=%.4f (%.1fs)%s", row.strategy, row.sweep_variable,
                     row.sweep_value, row.seed, row.coverage, row.capacity, row.wall_time,
                     f" ERROR {row.error}" if row.error else "")
            if writer is not None:
                writer.writerow(row.to_csv())
                fh.flush()
        if pool is not None:
            pool.shutdown()
    finally:
        if fh is not None:
            fh.close()
    return rows


def read_results(path: str | Path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        return [ResultRow.from_csv(rec) for rec in csv.DictReader(fh)]


def summarize(rows: list[ResultRow]) -> list[dict]:
    """Mean and sample std per (strategy, sweep value) plus MGDA-minus-baseline gap columns."""
    if not rows:
        raise ValueError("empty result table")
    groups: dict[tuple[str, int], list[ResultRow]] = {}
    for r in rows:
        if r.ok:
            groups.setdefault((r.strategy, r.sweep_value), []).append(r)
    out = []
    for (strategy, value), grp in groups.items():
        cov = np.array([r.coverage for r in grp])
        cap = np.array([r.capacity for r in grp])
        out.append({
            "strategy": strategy,
            "sweep_variable": grp[0].sweep_variable,
            "sweep_value": value,
            "n": len(grp),
            "cov_mean": float(cov.mean()),
            "cov_std": float(cov.std(ddof=1)) if len(grp) > 1 else 0.0,
            "cap_mean": float(cap.mean()),
            "cap_std": float(cap.std(ddof=1)) if len(grp) > 1 else 0.0,
        })
    by_key = {(s["strategy"], s["sweep_value"]): s for s in out}
    baselines = sorted({s["strategy"] for s in out if s["strategy"] != "mgda"})
    for s in out:
        if s["strategy"] != "mgda":
            continue
        for b in baselines:
            other = by_key.get((b, s["sweep_value"]))
            if other is not None:
                s[f"gap_cov_vs_{b}"] = s["cov_mean"] - other["cov_mean"]
                s[f"gap_cap_vs_{b}"] = s["cap_mean"] - other["cap_mean"]
    return out


def write_summary(summary: list[dict], path: str | Path) -> None:
    keys: list[str] = []
    for s in summary:
        keys += [k for k in s if k not in keys]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for s in summary:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in s.items()})


def read_summary(path: str | Path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row: dict = {}
            for k, v in rec.items():
                if k in ("strategy", "sweep_variable"):
                    row[k] = v
                elif k in ("sweep_value", "n"):
                    row[k] = int(v)
                elif v != "":
                    row[k] = float(v)
            out.append(row)
    return out


def outcome_points(rows: list[ResultRow], strategy: str, value: int) -> list[ObjectivePoint]:
    return [ObjectivePoint(r.coverage, r.capacity) for r in rows
            if r.ok and r.strategy == strategy and r.sweep_value == value]
