"""The control MDP: STAR-RIS state encoding, actions, Poisson traffic weights and the two-component reward."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, ChannelSet, draw_channel_set
from .metrics import (
    Interference,
    LinkMetrics,
    RisConfig,
    WeightField,
    all_coefficients,
    capacity,
    coverage,
    link_metrics,
    mode_map,
)
from .scene import Scene

TWO_PI = 2.0 * np.pi
WEIGHT_FLOOR = 1e-6


class ConstraintViolation(RuntimeError):
    """A reachable state broke a power or energy-split constraint (an encoder bug)."""


@dataclass(frozen=True)
class EnvConfig:
    P_max: float = 1.0
    R_th: float = 1e-10
    sigma2: float = 1e-11
    B: float = 1.0
    z: float = 0.1
    horizon: int = 10
    traffic_rate: float = 5.0
    power_levels: int = 0          # 0 keeps P_t = P_max; L > 0 adds a discrete power action
    interference: Interference = "other_bs"
    redraw_channels: bool = False  # per-step channel redraws instead of block fading
    decouple_weights: bool = False
    freeze_weights: bool = False

    def validate(self) -> None:
        if self.P_max <= 0:
            raise ValueError("P_max must be positive")
        if not 0 < self.z < 0.5:
            raise ValueError("amplitude step z must lie in (0, 0.5)")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.traffic_rate <= 0:
            raise ValueError("traffic_rate must be positive")
        if self.sigma2 <= 0 or self.R_th < 0 or self.B <= 0:
            raise ValueError("sigma2 and B must be positive, R_th non-negative")
        if self.power_levels < 0:
            raise ValueError("power_levels must be >= 0")
        if self.interference not in ("other_bs", "all_nonserving"):
            raise ValueError(f"unknown interference mode {self.interference!r}")

    @property
    def beta_levels(self) -> np.ndarray:
        return beta_levels(self.z)

    @property
    def power_values(self) -> np.ndarray:
        L = self.power_levels
        return self.P_max * np.arange(1, L + 1) / L if L else np.array([self.P_max])


def beta_levels(z: float) -> np.ndarray:
    """Admissible reflection amplitudes ``{z, 2z, ..., 1 - z}``."""
    m = int(np.floor((1.0 - z) / z + 1e-9))
    return z * np.arange(1, m + 1)


@dataclass(frozen=True)
class EnvAction:
    beta_level: np.ndarray        # (N_s,) int indices into beta_levels
    phase_delta: np.ndarray       # (N_s, 2, K) radians
    power_level: int | None = None


@dataclass(frozen=True)
class RewardVec:
    d_cov: float
    d_cap: float

    def as_array(self) -> np.ndarray:
        return np.array([self.d_cov, self.d_cap])


@dataclass(frozen=True)
class EnvState:
    ris: RisConfig
    weights: WeightField
    t: int
    P_t: float
    features: np.ndarray
    coverage: float
    capacity: float
    metrics: LinkMetrics = field(repr=False)


def feature_length(N_s: int, K: int, power_action: bool = False) -> int:
    return N_s * (2 + 4 * K) + int(power_action)


def encode_features(ris: RisConfig, P_t: float | None = None, P_max: float | None = None) -> np.ndarray:
    """Per panel: ``[beta_re, beta_tr]`` then ``(sin, cos)`` for each element and mode."""
    ph = np.transpose(ris.phases, (1, 2, 0))                # (N_s, K, 2)
    trig = np.stack([np.sin(ph), np.cos(ph)], axis=-1)      # (N_s, K, 2, 2)
    blocks = np.concatenate([
        np.column_stack([ris.beta_re, ris.beta_tr]),
        trig.reshape(ris.N_s, -1),
    ], axis=1)
    out = blocks.ravel()
    if P_t is not None:
        out = np.append(out, P_t / P_max)
    return out


def decode_features(features: np.ndarray, N_s: int, K: int) -> RisConfig:
    blocks = np.asarray(features[: N_s * (2 + 4 * K)]).reshape(N_s, 2 + 4 * K)
    trig = blocks[:, 2:].reshape(N_s, K, 2, 2)
    ph = np.arctan2(trig[..., 0], trig[..., 1])            # (N_s, K, 2)
    return RisConfig.create(blocks[:, 0], np.transpose(ph, (2, 0, 1)))


def update_weights(rng: np.random.Generator, traffic_rate: float, N: int) -> np.ndarray:
    """Poisson traffic counts per grid, floored and normalized to sum to one."""
    if traffic_rate <= 0:
        raise ValueError("traffic_rate must be positive")
    counts = rng.poisson(traffic_rate, size=N).astype(float) + WEIGHT_FLOOR
    return counts / counts.sum()


def validate(state: EnvState, config: EnvConfig) -> list[str]:
    """Constraint check; returns human-readable violations (empty when the state is admissible)."""
    problems = []
    if not 0.0 < state.P_t <= config.P_max:
        problems.append(f"[power] transmit power {state.P_t} outside (0, {config.P_max}]")
    energy = np.abs(all_coefficients(state.ris)) ** 2          # (2, N_s, K)
    for name, e in (("Re", energy[0]), ("Tr", energy[1])):
        if np.any(e <= 0.0) or np.any(e >= 1.0):
            problems.append(f"[mode-energy] {name} element energy outside (0, 1)")
    total = energy.sum(axis=0)
    if np.any(total > 1.0 + 1e-12):
        problems.append(f"[energy-split] element energy split exceeds 1 (max {total.max():.15f})")
    if np.any(state.ris.phases < 0.0) or np.any(state.ris.phases >= TWO_PI):
        problems.append("[phase] phase outside [0, 2pi)")
    return problems


class StarRisEnv:
    """One episode-at-a-time environment over a fixed scene.

    ``reset(seed)`` splits the seed into independent streams for channels, the
    initial surface, traffic and per-step redraws, so runs are reproducible and
    scenes that share panels share their random draws.
    """

    def __init__(self, scene: Scene, channel_params: ChannelParams, config: EnvConfig):
        config.validate()
        channel_params.validate()
        self.scene = scene
        self.channel_params = channel_params
        self.config = config
        self.levels = config.beta_levels
        self.modes = mode_map(scene)
        self.state: EnvState | None = None
        self.channels: ChannelSet | None = None
        self.trace: list[tuple] = []

    @property
    def power_action(self) -> bool:
        return self.config.power_levels > 0

    @property
    def n_features(self) -> int:
        return feature_length(self.scene.N_s, self.scene.K, self.power_action)

    def _features(self, ris: RisConfig, P_t: float) -> np.ndarray:
        if self.power_action:
            return encode_features(ris, P_t, self.config.P_max)
        return encode_features(ris)

    def _draw_weights(self) -> WeightField:
        cfg, N = self.config, self.scene.N
        w_cov = update_weights(self._traffic_rng, cfg.traffic_rate, N)
        w_cap = update_weights(self._traffic_rng, cfg.traffic_rate, N) if cfg.decouple_weights else w_cov
        return WeightField(w_cov=w_cov, w_cap=w_cap)

    def _evaluate(self, ris, weights, P_t, t) -> EnvState:
        cfg = self.config
        m = link_metrics(self.scene, self.channels, ris, P_t, cfg.sigma2, cfg.R_th,
                         cfg.interference, self.modes)
        return EnvState(ris=ris, weights=weights, t=t, P_t=P_t,
                        features=self._features(ris, P_t),
                        coverage=coverage(m, weights), capacity=capacity(m, weights, cfg.B),
                        metrics=m)

    def reset(self, seed: int) -> EnvState:
        ch_ss, init_ss, traffic_ss, redraw_ss = np.random.SeedSequence(seed).spawn(4)
        self._redraw_rng = np.random.default_rng(redraw_ss)
        self._traffic_rng = np.random.default_rng(traffic_ss)
        self.channels = draw_channel_set(self.scene, self.channel_params, np.random.default_rng(ch_ss))
        init_rng = np.random.default_rng(init_ss)
        N_s, K = self.scene.N_s, self.scene.K
        # panel-by-panel so that the first n panels match across N_s
        phases = np.stack([init_rng.uniform(0.0, TWO_PI, size=(2, K)) for _ in range(N_s)], axis=1)
        ris = RisConfig.create(np.full(N_s, 0.5), phases)
        self.state = self._evaluate(ris, self._draw_weights(), self.config.P_max, 0)
        self.trace = [(0, self.state.coverage, self.state.capacity, 0.0, 0.0, self.state.P_t)]
        self._check(self.state)
        return self.state

    def _check(self, state: EnvState) -> None:
        problems = validate(state, self.config)
        if problems:
            raise ConstraintViolation("; ".join(problems))

    def apply_action(self, ris: RisConfig, action: EnvAction) -> RisConfig:
        idx = np.asarray(action.beta_level, dtype=int)
        if idx.shape != (self.scene.N_s,) or idx.min() < 0 or idx.max() >= len(self.levels):
            raise ValueError(f"invalid beta level indices {idx}")
        delta = np.asarray(action.phase_delta, dtype=float)
        if delta.shape != (self.scene.N_s, 2, self.scene.K) or not np.all(np.isfinite(delta)):
            raise ValueError("phase_delta must be a finite (N_s, 2, K) array")
        return RisConfig.create(self.levels[idx], ris.phases + np.transpose(delta, (1, 0, 2)))

    def step(self, action: EnvAction) -> tuple[EnvState, RewardVec, bool]:
        state = self.state
        if state is None:
            raise RuntimeError("reset() must be called before step()")
        if state.t >= self.config.horizon:
            raise RuntimeError("episode already finished")
        ris = self.apply_action(state.ris, action)
        P_t = state.P_t
        if self.power_action and action.power_level is not None:
            P_t = float(self.config.power_values[int(action.power_level)])
        if self.config.redraw_channels:
            self.channels = draw_channel_set(self.scene, self.channel_params, self._redraw_rng)
        weights = state.weights if self.config.freeze_weights else self._draw_weights()
        nxt = self._evaluate(ris, weights, P_t, state.t + 1)
        self._check(nxt)
        reward = RewardVec(nxt.coverage - state.coverage, nxt.capacity - state.capacity)
        self.state = nxt
        self.trace.append((nxt.t, nxt.coverage, nxt.capacity, reward.d_cov, reward.d_cap, nxt.P_t))
        return nxt, reward, nxt.t == self.config.horizon

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "coverage", "capacity", "d_cov", "d_cap", "P_t"])
        for row in self.trace:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()
