"""Independent reference implementations used by the test suite and ``starcco selftest``.

Nothing here imports the pipeline modules: every oracle is a direct loop or
grid search over plain numpy arrays and Python scalars, so agreement with the
vectorized code is evidence rather than tautology.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np


def grid_min_norm(g1: np.ndarray, g2: np.ndarray, n: int = 1001) -> float:
    """Smallest squared norm of ``nu g1 + (1 - nu) g2`` over ``n`` evenly spaced ``nu`` in [0, 1]."""
    nu = np.linspace(0.0, 1.0, n)[:, None]
    d = nu * np.asarray(g1, float)[None, :] + (1.0 - nu) * np.asarray(g2, float)[None, :]
    return float(np.min(np.sum(d * d, axis=1)))


def brute_pareto(points: Sequence[Sequence[float]], maximize: bool = False) -> list[int]:
    """Indices of the non-dominated points, by pairwise comparison."""
    sign = -1.0 if maximize else 1.0
    keep = []
    for i, p in enumerate(points):
        dominated = False
        for j, q in enumerate(points):
            if i == j:
                continue
            no_worse = all(sign * qa <= sign * pa for qa, pa in zip(q, p))
            strictly = any(sign * qa < sign * pa for qa, pa in zip(q, p))
            if no_worse and strictly:
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return keep


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(x)
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        grad[k] = (f(xp) - f(xm)) / (2.0 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-12)
    return float(np.linalg.norm(a - b)) / scale


def brute_link_metrics(ris_xy, point_xy, h_bs_ris, h_ris_point, h_bs_point, beta_re, phases,
                       P_t: float, sigma2: float, R_th: float, w_cov, w_cap, B: float = 1.0,
                       interference: str = "other_bs") -> dict:
    """Per-point RSRP, serving pair, SINR and the weighted objectives, one scalar at a time.

    Arrays follow the pipeline's index order: ``h_bs_ris[a][n][k]``,
    ``h_ris_point[mode][n][i][k]``, ``h_bs_point[a][i]``, ``phases[mode][n][k]``.
    Mode 0 (reflection) applies when the point's x is at or beyond the panel's x.
    """
    n_ris = len(ris_xy)
    n_pts = len(point_xy)
    K = len(h_bs_ris[0][0])
    root = math.sqrt(P_t)

    power = {}
    for a in range(2):
        for n in range(n_ris):
            for i in range(n_pts):
                mode = 0 if point_xy[i][0] >= ris_xy[n][0] else 1
                beta = beta_re[n] if mode == 0 else 1.0 - beta_re[n]
                acc = 0j
                for k in range(K):
                    coef = math.sqrt(beta) * complex(math.cos(phases[mode][n][k]),
                                                     math.sin(phases[mode][n][k]))
                    acc += complex(h_ris_point[mode][n][i][k]).conjugate() * coef * complex(h_bs_ris[a][n][k])
                y = (acc + complex(h_bs_point[a][i])) * root
                power[a, n, i] = abs(y) ** 2

    rsrp, serving, sinr, covered = [], [], [], []
    for i in range(n_pts):
        best, pair = -1.0, None
        for a in range(2):               # lexicographic scan keeps the first maximum
            for n in range(n_ris):
                if power[a, n, i] > best:
                    best, pair = power[a, n, i], (a, n)
        a, n = pair
        if interference == "other_bs":
            interf = sum(power[1 - a, m, i] for m in range(n_ris) if m != n)
        else:
            interf = sum(power[b, m, i] for b in range(2) for m in range(n_ris) if (b, m) != (a, n))
        rsrp.append(best)
        serving.append(pair)
        sinr.append(power[a, n, i] / (interf + sigma2))
        covered.append(best >= R_th)

    cov = sum(w for w, c in zip(w_cov, covered) if c)
    cap = sum(w * B * math.log2(1.0 + s) for w, s in zip(w_cap, sinr))
    return {"rsrp": rsrp, "serving": serving, "sinr": sinr, "covered": covered,
            "coverage": cov, "capacity": cap}


def power_statistics(h: np.ndarray, los: np.ndarray) -> tuple[float, float]:
    """(mean |h|^2, mean |los|^2 / mean |h|^2) over all draws and entries."""
    total = float(np.mean(np.abs(h) ** 2))
    return total, float(np.mean(np.abs(los) ** 2)) / total
