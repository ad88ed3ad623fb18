import dataclasses
import math

import pytest
from conftest import TINY
from hypothesis import given, settings
from hypothesis import strategies as st

from starcco.config import loads_config
from starcco.plots import render_plots, sweep_figure
from starcco.sweep import (
    METRIC_FIELDS,
    ResultRow,
    cells,
    read_results,
    read_summary,
    run_sweep,
    summarize,
    write_summary,
)


def row(strategy, value, seed, cov, cap, error=""):
    return ResultRow(strategy, "ns", value, seed, cov, cap, 10, 0.5, error)


def test_summary_statistics():
    rows = [row("mgda", 1, 0, 0.4, 1.0), row("mgda", 1, 1, 0.6, 2.0)]
    (s,) = summarize(rows)
    assert s["n"] == 2 and s["cov_mean"] == pytest.approx(0.5)
    assert s["cov_std"] == pytest.approx(0.1414, abs=1e-4)
    assert s["cap_std"] == pytest.approx(math.sqrt(0.5))


def test_single_seed_std_is_zero():
    (s,) = summarize([row("mgda", 1, 0, 0.4, 1.0)])
    assert s["cov_std"] == 0.0 and s["cap_std"] == 0.0


def test_gap_columns():
    rows = [row("mgda", 2, 0, 0.7, 1.0), row("fixed_0.3_0.7", 2, 0, 0.5, 1.5)]
    mgda = next(s for s in summarize(rows) if s["strategy"] == "mgda")
    assert mgda["gap_cov_vs_fixed_0.3_0.7"] == pytest.approx(0.2)
    assert mgda["gap_cap_vs_fixed_0.3_0.7"] == pytest.approx(-0.5)


def test_error_rows_are_excluded_from_summary():
    rows = [row("mgda", 1, 0, 0.4, 1.0), row("mgda", 1, 1, float("nan"), float("nan"), "ValueError: x")]
    (s,) = summarize(rows)
    assert s["n"] == 1
    with pytest.raises(ValueError):
        summarize([])


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["mgda", "fixed_0.3_0.7"]), st.integers(1, 32), st.integers(0, 2**31),
       finite, finite, st.integers(0, 1000), st.floats(0, 1e4), st.sampled_from(["", "ValueError: boom"]))
def test_result_row_round_trip(strategy, value, seed, cov, cap, iters, wall, error):
    r = ResultRow(strategy, "k", value, seed, cov, cap, iters, round(wall, 3), error)
    rec = dict(zip(["strategy", "sweep_variable", "sweep_value", "seed", "coverage", "capacity",
                    "iterations", "wall_time", "error"], r.to_csv()))
    assert ResultRow.from_csv(rec) == r


def test_summary_csv_round_trip(tmp_path):
    rows = [row("mgda", v, s, 0.1 * v + 0.01 * s, v + s, "") for v in (1, 2) for s in (0, 1)]
    summary = summarize(rows)
    write_summary(summary, tmp_path / "summary.csv")
    assert read_summary(tmp_path / "summary.csv") == summary


def three_by_four():
    return [row(strat, v, s, 0.1 * v + 0.01 * s, 0.2 * v, "")
            for strat in ("mgda", "fixed_0.3_0.7", "fixed_0.6_0.4") for v in (1, 2, 3, 4) for s in (0, 1)]


def test_sweep_figure_series():
    fig = sweep_figure(summarize(three_by_four()), "cov")
    ax = fig.axes[0]
    assert len(ax.containers) == 3
    assert all(len(c.lines[0].get_xdata()) == 4 for c in ax.containers)
    labels = [t.get_text() for t in ax.get_legend().get_texts()]
    assert labels[0] == "mgda"


def test_svgs_are_byte_identical(tmp_path):
    summary = summarize(three_by_four())
    a = render_plots(summary, tmp_path / "a")
    b = render_plots(summary, tmp_path / "b")
    assert [p.name for p in a] == ["coverage_vs_ns.svg", "capacity_vs_ns.svg"]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


def test_empty_summary_cannot_be_plotted(tmp_path):
    with pytest.raises(ValueError):
        render_plots([], tmp_path)


def test_cell_grid_order():
    cfg = loads_config(TINY.replace("values = 1", "values = 1, 2").replace("seeds = 0", "seeds = 0, 1"))
    grid = [(c.strategy.label, c.value, c.seed) for c in cells(cfg)]
    assert len(grid) == 8 and grid[0] == ("mgda", 1, 0) and grid[1] == ("mgda", 1, 1)
    assert grid[-1] == ("fixed_0.3_0.7", 2, 1)


def test_failing_cell_does_not_stop_the_sweep(tmp_path):
    # nine panels 10 m apart cannot fit in a 20 m square, so that cell errors out
    cfg = loads_config(TINY.replace("values = 1", "values = 9, 1"))
    before = dataclasses.replace(cfg)
    rows = run_sweep(cfg, tmp_path)
    assert [r.ok for r in rows] == [False, True, False, True]
    assert "could not place" in rows[0].error
    assert len(read_results(tmp_path / "results.csv")) == 4
    assert cfg == before


def test_parallel_workers_match_serial(tmp_path):
    cfg = loads_config(TINY.replace("seeds = 0", "seeds = 0, 1"))
    serial = run_sweep(cfg, tmp_path / "w1", workers=1)
    parallel = run_sweep(cfg, tmp_path / "w2", workers=2)
    strip = [tuple(getattr(r, f) for f in METRIC_FIELDS) for r in serial]
    assert strip == [tuple(getattr(r, f) for f in METRIC_FIELDS) for r in parallel]
