"""Deployment geometry: serving square, sample grid, BSs, STAR-RIS panels and element layout.

Coordinates follow a right-handed frame with the origin at one corner of the
serving square. Both BSs sit on the ``x = R_s`` edge. Every STAR-RIS panel lies
in a plane parallel to y-z, so element offsets have a zero x component.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np


class SingularGeometryError(ValueError):
    """Raised when two points are vertically aligned and the azimuth is undefined."""


@dataclass(frozen=True)
class SceneConfig:
    R_s: float = 100.0
    R_g: float = 10.0
    h_b: float = 25.0
    h_ris: float = 5.0
    N_s: int = 2
    K_H: int = 4
    K_V: int = 2
    M_H: float = 0.05
    M_V: float = 0.05
    wavelength: float = 0.1
    # explicit (x, y) per RIS; None -> uniform random placement from the seed
    ris_positions: tuple[tuple[float, float], ...] | None = None
    max_placement_attempts: int = 10_000

    @property
    def K(self) -> int:
        return self.K_H * self.K_V

    @property
    def grid_side(self) -> int:
        return math.ceil(self.R_s / self.R_g)

    @property
    def N(self) -> int:
        return self.grid_side ** 2

    def validate(self) -> None:
        if not (self.R_s > 0 and self.R_g > 0):
            raise ValueError("R_s and R_g must be positive")
        if self.R_s < self.R_g:
            raise ValueError("R_s must be at least R_g")
        if not (0 < self.h_ris < self.h_b):
            raise ValueError("need 0 < h_ris < h_b")
        if self.N_s < 1:
            raise ValueError("N_s must be >= 1")
        if self.K_H < 1 or self.K_V < 1:
            raise ValueError("K_H and K_V must be >= 1")
        if self.M_H <= 0 or self.M_V <= 0 or self.wavelength <= 0:
            raise ValueError("element size and wavelength must be positive")
        if self.ris_positions is not None:
            if len(self.ris_positions) != self.N_s:
                raise ValueError(
                    f"{len(self.ris_positions)} RIS positions given for N_s={self.N_s}")
            for x, y in self.ris_positions:
                if not (0 <= x <= self.R_s and 0 <= y <= self.R_s):
                    raise ValueError(f"RIS position ({x}, {y}) outside the serving region")
            pts = [tuple(p) for p in self.ris_positions]
            if len(set(pts)) != len(pts):
                raise ValueError("RIS positions overlap")


@dataclass(frozen=True)
class Scene:
    config: SceneConfig
    bs_positions: np.ndarray       # (2, 3)
    ris_positions: np.ndarray      # (N_s, 3)
    sample_points: np.ndarray      # (N, 3)
    element_offsets: np.ndarray    # (K, 3)
    seed: int | None = field(default=None)

    @property
    def N(self) -> int:
        return self.sample_points.shape[0]

    @property
    def N_s(self) -> int:
        return self.ris_positions.shape[0]

    @property
    def K(self) -> int:
        return self.element_offsets.shape[0]

    def to_json(self) -> str:
        cfg = asdict(self.config)
        doc = {
            "config": cfg,
            "seed": self.seed,
            "bs_positions": self.bs_positions.tolist(),
            "ris_positions": self.ris_positions.tolist(),
            "sample_points": self.sample_points.tolist(),
            "element_offsets": self.element_offsets.tolist(),
        }
        return json.dumps(doc, indent=2)


def element_position(k: int, config: SceneConfig) -> np.ndarray:
    """Local offset of element ``k`` (1-based) on its panel: ``[0, x(k) M_H, y(k) M_V]``."""
    if not 1 <= k <= config.K:
        raise IndexError(f"element index {k} outside 1..{config.K}")
    col = (k - 1) % config.K_H
    row = (k - 1) // config.K_H
    return np.array([0.0, col * config.M_H, row * config.M_V])


def element_offsets(config: SceneConfig) -> np.ndarray:
    return np.stack([element_position(k, config) for k in range(1, config.K + 1)])


def wave_vector(psi: float, theta: float, wavelength: float) -> np.ndarray:
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    return (2.0 * np.pi / wavelength) * np.array([
        np.cos(theta) * np.cos(psi),
        np.cos(theta) * np.sin(psi),
        np.sin(theta),
    ])


def array_response(psi: float, theta: float, config: SceneConfig,
                   offsets: np.ndarray | None = None) -> np.ndarray:
    """Unit-modulus steering vector ``exp(j b(psi, theta)^T l_k)`` over the K elements."""
    if offsets is None:
        offsets = element_offsets(config)
    b = wave_vector(psi, theta, config.wavelength)
    return np.exp(1j * (offsets @ b))


def los_angles(src: Sequence[float], dst: Sequence[float]) -> tuple[float, float]:
    """Azimuth/elevation of the LoS ray from ``src`` towards ``dst``.

    ``theta = arcsin(dz / d3)`` and ``psi = arccos(dx / d2)`` with ``d = src - dst``,
    principal branches only.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    d = src - dst
    d2 = math.hypot(d[0], d[1])
    d3 = math.sqrt(d2 * d2 + d[2] * d[2])
    if d3 == 0.0:
        raise SingularGeometryError("coincident points")
    if d2 == 0.0:
        raise SingularGeometryError(f"vertical alignment between {src.tolist()} and {dst.tolist()}")
    theta = math.asin(np.clip(d[2] / d3, -1.0, 1.0))
    psi = math.acos(np.clip(d[0] / d2, -1.0, 1.0))
    return psi, theta


def grid_points(config: SceneConfig) -> np.ndarray:
    """Grid-cell centres at height 0, row-major from the origin (x fastest)."""
    n = config.grid_side
    centres = (np.arange(n) + 0.5) * config.R_g
    ys, xs = np.meshgrid(centres, centres, indexing="ij")
    return np.column_stack([xs.ravel(), ys.ravel(), np.zeros(n * n)])


def _place_ris(config: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    if config.ris_positions is not None:
        return np.array([[x, y] for x, y in config.ris_positions], dtype=float)
    placed: list[np.ndarray] = []
    attempts = 0
    # sequential draws: the first n panels are identical for any N_s >= n
    while len(placed) < config.N_s:
        if attempts >= config.max_placement_attempts:
            raise ValueError(
                f"could not place {config.N_s} non-overlapping STAR-RISs "
                f"with separation {config.R_g} after {attempts} attempts")
        attempts += 1
        cand = rng.uniform(0.0, config.R_s, size=2)
        if all(np.hypot(*(cand - p)) >= config.R_g for p in placed):
            placed.append(cand)
    return np.array(placed)


def build_scene(config: SceneConfig, seed: int = 0) -> Scene:
    config.validate()
    rng = np.random.default_rng(seed)
    xy = _place_ris(config, rng)
    ris = np.column_stack([xy, np.full(len(xy), config.h_ris)])
    bs = np.array([[config.R_s, 0.0, config.h_b],
                   [config.R_s, config.R_s, config.h_b]])
    return Scene(
        config=config,
        bs_positions=bs,
        ris_positions=ris,
        sample_points=grid_points(config),
        element_offsets=element_offsets(config),
        seed=seed,
    )
