"""Rician fading channels for the BS->RIS, RIS->point and BS->point links.

One :class:`ChannelSet` holds a single realization of every link. Draw order is
fixed (direct links first, then one block per RIS) so that a scene with more
panels reuses the realizations of the panels it shares with a smaller scene.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .scene import Scene, SingularGeometryError, los_angles

RE, TR = 0, 1
MODES = ("Re", "Tr")


@dataclass(frozen=True)
class PathLossParams:
    C: float = 1e-3
    gamma_aR: float = 2.2
    gamma_RP: float = 2.2
    gamma_aP: float = 3.5

    def validate(self) -> None:
        if self.C <= 0:
            raise ValueError("C must be positive")
        if min(self.gamma_aR, self.gamma_RP, self.gamma_aP) < 0:
            raise ValueError("path-loss exponents must be non-negative")


@dataclass(frozen=True)
class RicianParams:
    alpha_aR: float = 10.0
    alpha_RP: float = 10.0
    alpha_aP: float = 1.0

    def validate(self) -> None:
        if min(self.alpha_aR, self.alpha_RP, self.alpha_aP) < 0:
            raise ValueError("Rician factors must be non-negative")


@dataclass(frozen=True)
class ChannelParams:
    path_loss: PathLossParams = PathLossParams()
    rician: RicianParams = RicianParams()
    nlos_correlation: Literal["sinc", "iid"] = "sinc"

    def validate(self) -> None:
        self.path_loss.validate()
        self.rician.validate()
        if self.nlos_correlation not in ("sinc", "iid"):
            raise ValueError(f"unknown nlos_correlation {self.nlos_correlation!r}")


@dataclass(frozen=True)
class ChannelSet:
    h_bs_ris: np.ndarray     # (2, N_s, K)
    h_ris_point: np.ndarray  # (2 modes, N_s, N, K)
    h_bs_point: np.ndarray   # (2, N)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChannelSet):
            return NotImplemented
        return (np.array_equal(self.h_bs_ris, other.h_bs_ris)
                and np.array_equal(self.h_ris_point, other.h_ris_point)
                and np.array_equal(self.h_bs_point, other.h_bs_point))

    def to_csv(self) -> str:
        """Rows ``link, index, re, im`` with ``index`` a slash-joined tuple."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["link", "index", "re", "im"])
        for name, arr in (("bs_ris", self.h_bs_ris), ("ris_point", self.h_ris_point),
                          ("bs_point", self.h_bs_point)):
            for idx in np.ndindex(arr.shape):
                v = arr[idx]
                w.writerow([name, "/".join(map(str, idx)), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()


def path_loss(d: float | np.ndarray, gamma: float, C: float) -> float | np.ndarray:
    """Large-scale gain ``C d^-gamma``; the model is only defined from 1 m outwards."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 1.0):
        raise ValueError(f"distance below the 1 m reference: {d_arr.min()}")
    out = C * d_arr ** (-gamma)
    return float(out) if np.ndim(out) == 0 else out


def standard_cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def nlos_covariance(scene: Scene, mode: str = "sinc") -> np.ndarray:
    K = scene.K
    if mode == "iid":
        return np.eye(K)
    diff = scene.element_offsets[:, None, :] - scene.element_offsets[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    return np.sinc(2.0 * dist / scene.config.wavelength)


def covariance_sqrt(sigma: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Symmetric square root; eigenvalues down to ``-tol`` are clipped to zero."""
    vals, vecs = np.linalg.eigh(sigma)
    if vals.min() < -tol:
        raise ValueError(f"covariance is not PSD (min eigenvalue {vals.min():.3e})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def _rician_mix(los, nlos, alpha: float, L):
    los_w = np.sqrt(alpha / (1.0 + alpha))
    nlos_w = np.sqrt(1.0 / (1.0 + alpha))
    sqrt_L = np.sqrt(L)
    return sqrt_L * los_w * los, sqrt_L * nlos_w * nlos


def _steering(scene: Scene, src: np.ndarray, dsts: np.ndarray) -> np.ndarray:
    """Array responses (n_dst, K) for LoS rays from ``src`` to each row of ``dsts``."""
    d = src[None, :] - dsts
    d2 = np.hypot(d[:, 0], d[:, 1])
    if np.any(d2 == 0.0):
        bad = dsts[np.argmin(d2)]
        raise SingularGeometryError(f"vertical alignment between {src.tolist()} and {bad.tolist()}")
    d3 = np.sqrt(d2 ** 2 + d[:, 2] ** 2)
    theta = np.arcsin(np.clip(d[:, 2] / d3, -1.0, 1.0))
    psi = np.arccos(np.clip(d[:, 0] / d2, -1.0, 1.0))
    k = 2.0 * np.pi / scene.config.wavelength
    b = k * np.column_stack([np.cos(theta) * np.cos(psi), np.cos(theta) * np.sin(psi), np.sin(theta)])
    return np.exp(1j * (b @ scene.element_offsets.T))


def _steering_single(scene: Scene, psi: float, theta: float) -> np.ndarray:
    k = 2.0 * np.pi / scene.config.wavelength
    b = k * np.array([np.cos(theta) * np.cos(psi), np.cos(theta) * np.sin(psi), np.sin(theta)])
    return np.exp(1j * (scene.element_offsets @ b))


class _Sqrt:
    # per-scene cache of the NLoS colouring matrix
    def __init__(self, scene: Scene, params: ChannelParams):
        self.matrix = covariance_sqrt(nlos_covariance(scene, params.nlos_correlation)) \
            if params.nlos_correlation != "iid" else None

    def colour(self, w: np.ndarray) -> np.ndarray:
        return w if self.matrix is None else w @ self.matrix.T


def draw_bs_ris_channel(a: int, n: int, scene: Scene, params: ChannelParams,
                        rng: np.random.Generator, size: int | None = None,
                        return_parts: bool = False, _sqrt: _Sqrt | None = None):
    """BS ``a`` -> RIS ``n`` channel (0-based ids), shape ``(K,)`` or ``(size, K)``."""
    bs = scene.bs_positions[a]
    ris = scene.ris_positions[n]
    d = float(np.linalg.norm(bs - ris))
    L = path_loss(d, params.path_loss.gamma_aR, params.path_loss.C)
    psi, theta = los_angles(bs, ris)
    los = _steering_single(scene, psi, theta)
    shape = (scene.K,) if size is None else (size, scene.K)
    colour = _sqrt or _Sqrt(scene, params)
    nlos = colour.colour(standard_cn(rng, shape))
    los_part, nlos_part = _rician_mix(los, nlos, params.rician.alpha_aR, L)
    h = los_part + nlos_part
    if return_parts:
        return h, np.broadcast_to(los_part, h.shape), nlos_part
    return h


def draw_ris_point_channel(delta: int, n: int, i: int, scene: Scene, params: ChannelParams,
                           rng: np.random.Generator, size: int | None = None,
                           return_parts: bool = False, _sqrt: _Sqrt | None = None):
    """RIS ``n`` -> point ``i`` channel in mode ``delta`` (0 = Re, 1 = Tr)."""
    if delta not in (RE, TR):
        raise ValueError(f"mode must be 0 (Re) or 1 (Tr), got {delta}")
    ris = scene.ris_positions[n]
    pt = scene.sample_points[i]
    d = float(np.linalg.norm(ris - pt))
    L = path_loss(d, params.path_loss.gamma_RP, params.path_loss.C)
    psi, theta = los_angles(ris, pt)
    los = _steering_single(scene, psi, theta)
    shape = (scene.K,) if size is None else (size, scene.K)
    colour = _sqrt or _Sqrt(scene, params)
    nlos = colour.colour(standard_cn(rng, shape))
    los_part, nlos_part = _rician_mix(los, nlos, params.rician.alpha_RP, L)
    h = los_part + nlos_part
    if return_parts:
        return h, np.broadcast_to(los_part, h.shape), nlos_part
    return h


def draw_bs_point_channel(a: int, i: int, scene: Scene, params: ChannelParams,
                          rng: np.random.Generator, size: int | None = None,
                          return_parts: bool = False):
    """Direct BS ``a`` -> point ``i`` scalar; both Rician terms are CN(0, 1) draws."""
    d = float(np.linalg.norm(scene.bs_positions[a] - scene.sample_points[i]))
    L = path_loss(d, params.path_loss.gamma_aP, params.path_loss.C)
    shape = () if size is None else (size,)
    g = standard_cn(rng, (2,) + shape)
    los_part, nlos_part = _rician_mix(g[0], g[1], params.rician.alpha_aP, L)
    h = los_part + nlos_part
    if size is None:
        h, los_part, nlos_part = complex(h), complex(los_part), complex(nlos_part)
    if return_parts:
        return h, los_part, nlos_part
    return h


def draw_channel_set(scene: Scene, params: ChannelParams, rng: np.random.Generator) -> ChannelSet:
    params.validate()
    pl, ric = params.path_loss, params.rician
    N, N_s, K = scene.N, scene.N_s, scene.K
    colour = _Sqrt(scene, params)

    # direct links
    d_ap = np.linalg.norm(scene.bs_positions[:, None, :] - scene.sample_points[None, :, :], axis=-1)
    L_ap = path_loss(d_ap, pl.gamma_aP, pl.C)
    g = standard_cn(rng, (2, 2, N))
    los, nlos = _rician_mix(g[:, 0], g[:, 1], ric.alpha_aP, L_ap)
    h_bs_point = los + nlos

    h_bs_ris = np.empty((2, N_s, K), dtype=complex)
    h_ris_point = np.empty((2, N_s, N, K), dtype=complex)
    for n in range(N_s):
        ris = scene.ris_positions[n]
        for a in range(2):
            h_bs_ris[a, n] = draw_bs_ris_channel(a, n, scene, params, rng, _sqrt=colour)
        d_rp = np.linalg.norm(ris[None, :] - scene.sample_points, axis=-1)
        L_rp = path_loss(d_rp, pl.gamma_RP, pl.C)[:, None]
        los = _steering(scene, ris, scene.sample_points)
        nlos = colour.colour(standard_cn(rng, (2, N, K)))
        # same LoS for both modes, independent NLoS per mode
        for delta in (RE, TR):
            lp, np_ = _rician_mix(los, nlos[delta], ric.alpha_RP, L_rp)
            h_ris_point[delta, n] = lp + np_
    return ChannelSet(h_bs_ris=h_bs_ris, h_ris_point=h_ris_point, h_bs_point=h_bs_point)
