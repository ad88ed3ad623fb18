"""STAR-RIS coefficients, received signals, RSRP/SINR and the weighted coverage/capacity objectives."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .channel import RE, TR, ChannelSet
from .scene import Scene

Interference = Literal["other_bs", "all_nonserving"]

# Which literal reading of the coverage/capacity formulas is in effect; written into run metadata.
METRIC_CONVENTION = "coverage=sum_of_covered_weights;capacity=sum_over_all_N_points"


@dataclass(frozen=True)
class RisConfig:
    """Controllable surface state.

    ``beta_re`` has shape ``(N_s,)``; ``phases`` has shape ``(2, N_s, K)`` indexed
    by mode (0 = reflection, 1 = transmission), panel, element.
    """
    beta_re: np.ndarray
    phases: np.ndarray

    @property
    def beta_tr(self) -> np.ndarray:
        return 1.0 - self.beta_re

    @property
    def N_s(self) -> int:
        return self.beta_re.shape[0]

    @property
    def K(self) -> int:
        return self.phases.shape[-1]

    @classmethod
    def create(cls, beta_re, phases) -> "RisConfig":
        beta_re = np.asarray(beta_re, dtype=float).copy()
        phases = np.mod(np.asarray(phases, dtype=float), 2.0 * np.pi)
        return cls(beta_re=beta_re, phases=phases)

    def betas(self) -> np.ndarray:
        """Amplitudes stacked as ``(2, N_s)`` in mode order."""
        return np.stack([self.beta_re, self.beta_tr])


@dataclass(frozen=True)
class WeightField:
    w_cov: np.ndarray
    w_cap: np.ndarray

    @classmethod
    def uniform(cls, N: int) -> "WeightField":
        w = np.full(N, 1.0 / N)
        return cls(w_cov=w, w_cap=w.copy())


@dataclass(frozen=True)
class LinkMetrics:
    rsrp: np.ndarray       # (N,) linear W
    serving: np.ndarray    # (N, 2) int, 0-based (bs, ris)
    sinr: np.ndarray       # (N,)
    covered: np.ndarray    # (N,) bool
    power: np.ndarray      # (2, N_s, N) noiseless |y|^2


def star_coefficients(ris: RisConfig, n: int, delta: int) -> np.ndarray:
    """Diagonal of the mode-``delta`` coefficient matrix of panel ``n``."""
    beta = ris.beta_re[n] if delta == RE else ris.beta_tr[n]
    return np.sqrt(beta) * np.exp(1j * ris.phases[delta, n])


def all_coefficients(ris: RisConfig) -> np.ndarray:
    return np.sqrt(ris.betas())[:, :, None] * np.exp(1j * ris.phases)


def mode_map(scene: Scene) -> np.ndarray:
    """``(N_s, N)`` mode per (panel, point): reflection on the BS side (x >= x_ris), else transmission."""
    x_pts = scene.sample_points[:, 0][None, :]
    x_ris = scene.ris_positions[:, 0][:, None]
    return np.where(x_pts >= x_ris, RE, TR)


def received_amplitudes(scene: Scene, channels: ChannelSet, ris: RisConfig, P_t: float,
                        modes: np.ndarray | None = None) -> np.ndarray:
    """Noiseless ``y[a, n, i]`` for every BS, panel and sample point."""
    if modes is None:
        modes = mode_map(scene)
    coef = all_coefficients(ris)                                   # (2, N_s, K)
    n_idx = np.arange(scene.N_s)[:, None]
    g = channels.h_ris_point[modes, n_idx, np.arange(scene.N)[None, :]]   # (N_s, N, K)
    phi = coef[modes, n_idx]                                       # (N_s, N, K)
    cascade = np.einsum("nik,nik,ank->ani", g.conj(), phi, channels.h_bs_ris)
    return (cascade + channels.h_bs_point[:, None, :]) * np.sqrt(P_t)


def received_signal(a: int, n: int, i: int, scene: Scene, channels: ChannelSet,
                    ris: RisConfig, P_t: float) -> complex:
    delta = int(mode_map(scene)[n, i])
    phi = star_coefficients(ris, n, delta)
    h_rp = channels.h_ris_point[delta, n, i]
    cascade = np.vdot(h_rp, phi * channels.h_bs_ris[a, n])
    return complex((cascade + channels.h_bs_point[a, i]) * np.sqrt(P_t))


def serving_pairs(power: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """RSRP and argmax ``(a, n)`` per point; ties go to the smallest (a, n)."""
    _, N_s, N = power.shape
    flat = power.reshape(2 * N_s, N)
    best = np.argmax(flat, axis=0)
    rsrp = flat[best, np.arange(N)]
    return rsrp, np.column_stack([best // N_s, best % N_s])


def rsrp(i: int, scene: Scene, channels: ChannelSet, ris: RisConfig, P_t: float):
    power = np.abs(received_amplitudes(scene, channels, ris, P_t)[:, :, i:i + 1]) ** 2
    val, pair = serving_pairs(power)
    return float(val[0]), (int(pair[0, 0]), int(pair[0, 1]))


def sinr_from_power(power: np.ndarray, serving: np.ndarray, sigma2: float,
                    interference: Interference = "other_bs") -> np.ndarray:
    N = power.shape[2]
    cols = np.arange(N)
    a, n = serving[:, 0], serving[:, 1]
    signal = power[a, n, cols]
    if interference == "other_bs":
        other = power[1 - a, :, cols]                      # (N, N_s)
        interf = other.sum(axis=1) - other[np.arange(N), n]
    elif interference == "all_nonserving":
        interf = power.sum(axis=(0, 1)) - signal
    else:
        raise ValueError(f"unknown interference mode {interference!r}")
    return signal / (np.maximum(interf, 0.0) + sigma2)


def sinr(i: int, scene: Scene, channels: ChannelSet, ris: RisConfig, P_t: float, sigma2: float,
         interference: Interference = "other_bs") -> float:
    power = np.abs(received_amplitudes(scene, channels, ris, P_t)[:, :, i:i + 1]) ** 2
    _, pair = serving_pairs(power)
    return float(sinr_from_power(power, pair, sigma2, interference)[0])


def link_metrics(scene: Scene, channels: ChannelSet, ris: RisConfig, P_t: float, sigma2: float,
                 R_th: float, interference: Interference = "other_bs",
                 modes: np.ndarray | None = None) -> LinkMetrics:
    if sigma2 <= 0:
        raise ValueError("noise power must be positive")
    power = np.abs(received_amplitudes(scene, channels, ris, P_t, modes)) ** 2
    value, pair = serving_pairs(power)
    return LinkMetrics(
        rsrp=value,
        serving=pair,
        sinr=sinr_from_power(power, pair, sigma2, interference),
        covered=value >= R_th,
        power=power,
    )


def coverage(metrics: LinkMetrics, weights: WeightField) -> float:
    return float(np.sum(weights.w_cov[metrics.covered]))


def capacity(metrics: LinkMetrics, weights: WeightField, B: float = 1.0) -> float:
    return float(np.sum(weights.w_cap * B * np.log2(1.0 + metrics.sinr)))


def points_csv(scene: Scene, metrics: LinkMetrics) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["point_id", "x", "y", "rsrp_dBm", "sinr_dB", "covered", "serving_bs", "serving_ris"])
    with np.errstate(divide="ignore"):
        rsrp_dbm = 10.0 * np.log10(metrics.rsrp) + 30.0
        sinr_db = 10.0 * np.log10(metrics.sinr)
    for i, (x, y, _) in enumerate(scene.sample_points):
        w.writerow([i, f"{x:g}", f"{y:g}", f"{rsrp_dbm[i]:.6f}", f"{sinr_db[i]:.6f}",
                    int(metrics.covered[i]), int(metrics.serving[i, 0]) + 1,
                    int(metrics.serving[i, 1]) + 1])
    return buf.getvalue()
