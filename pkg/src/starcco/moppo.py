"""Multi-objective PPO with per-update min-norm (MGDA) weighting of the coverage and capacity losses.

Sign convention: each task loss is ``-surrogate + value_coef * value_mse`` and
the min-norm weight is computed on the negated (ascent) loss gradients after
dividing each by the magnitude of its first recorded loss.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Literal, Sequence

import numpy as np

from .env import EnvAction, StarRisEnv
from .nn import (
    ActionBatch,
    HeadOutputs,
    PolicyValueNet,
    add_grads,
    kl,
    kl_grad,
    log_prob,
    log_prob_grad,
    sample_action,
    zero_grads,
)

log = logging.getLogger(__name__)

LossVariant = Literal["ncp", "clip", "kl"]
LOSS_FLOOR = 1e-8
STATIONARY_TOL = 1e-8


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, state: dict):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.9
    epsilon: float = 0.2
    beta_kl: float = 1.0
    loss_variant: LossVariant = "clip"
    epochs: int = 4
    minibatch: int = 16
    actors: int = 2
    lr: float = 0.02
    iterations: int = 30
    seed: int = 0
    value_coef: float = 0.5
    momentum: float = 0.0
    max_step_norm: float | None = 1.0
    hidden: tuple[int, ...] = (64, 64)
    init_log_std: float = -0.5
    checkpoint_every: int = 0

    def validate(self) -> None:
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.beta_kl < 0:
            raise ValueError("beta_kl must be non-negative")
        if self.loss_variant not in ("ncp", "clip", "kl"):
            raise ValueError(f"unknown loss variant {self.loss_variant!r}")
        for name in ("epochs", "minibatch", "actors", "iterations"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")


@dataclass
class Batch:
    features: np.ndarray        # (B, F)
    actions: ActionBatch
    old_logp: np.ndarray        # (B,)
    old_heads: HeadOutputs
    adv: np.ndarray             # (B, 2)
    returns: np.ndarray         # (B, 2)

    def __len__(self) -> int:
        return self.features.shape[0]

    def take(self, idx) -> "Batch":
        return Batch(self.features[idx], self.actions.take(idx), self.old_logp[idx],
                     self.old_heads.take(idx), self.adv[idx], self.returns[idx])


@dataclass
class GradientPair:
    g1: np.ndarray
    g2: np.ndarray
    l1_init: float
    l2_init: float
    nu: float = 0.5
    combined: np.ndarray | None = None

    @property
    def stationary(self) -> bool:
        return self.combined is not None and float(np.linalg.norm(self.combined)) <= STATIONARY_TOL


@dataclass(frozen=True)
class ObjectivePoint:
    cov: float
    cap: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.cov, self.cap)


# -- advantages -------------------------------------------------------------

def advantages(rewards: np.ndarray, values: np.ndarray, gamma: float) -> np.ndarray:
    """Bootstrapped discounted return minus baseline, independently per objective.

    ``rewards`` is ``(T, M)``; ``values`` is ``(T + 1, M)`` and ends with the
    bootstrap value of the state reached after the last step.
    """
    rewards = np.atleast_2d(np.asarray(rewards, dtype=float).T).T
    values = np.atleast_2d(np.asarray(values, dtype=float).T).T
    T = rewards.shape[0]
    if values.shape[0] != T + 1 or values.shape[1:] != rewards.shape[1:]:
        raise ValueError(f"values must have shape ({T + 1}, ...) to match {T} rewards")
    ret = np.empty_like(rewards)
    acc = values[T]
    for t in reversed(range(T)):
        acc = rewards[t] + gamma * acc
        ret[t] = acc
    return ret - values[:T]


# -- surrogates ---------------------------------------------------------------

def _surrogate(net: PolicyValueNet, params: np.ndarray, batch: Batch, variant: LossVariant,
               epsilon: float, beta_kl: float, heads: HeadOutputs | None = None):
    """Per-objective surrogate values (to maximize) and their head gradients."""
    if heads is None:
        heads, _ = net.forward(batch.features, params)
    B = len(batch)
    ratio = np.exp(log_prob(heads, batch.actions) - batch.old_logp)
    values, grads = np.zeros(2), []
    kl_term = kl(heads, batch.old_heads) if variant == "kl" else None
    for m in range(2):
        A = batch.adv[:, m]
        if variant == "ncp":
            values[m] = np.mean(ratio * A)
            coef = ratio * A / B
        elif variant == "clip":
            unclipped = ratio * A
            clipped = np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * A
            values[m] = np.mean(np.minimum(unclipped, clipped))
            coef = np.where(unclipped <= clipped, ratio * A, 0.0) / B
        elif variant == "kl":
            values[m] = np.mean(ratio * A - beta_kl * kl_term)
            coef = ratio * A / B
        else:
            raise ValueError(f"unknown loss variant {variant!r}")
        g = log_prob_grad(heads, batch.actions, coef)
        if variant == "kl" and beta_kl:
            g = add_grads(g, kl_grad(heads, batch.old_heads, np.full(B, 1.0 / B)), -beta_kl)
        grads.append(g)
    return values, grads, heads


def surrogate_ncp(net, params, batch) -> np.ndarray:
    return _surrogate(net, params, batch, "ncp", 0.2, 0.0)[0]


def surrogate_clip(net, params, batch, epsilon: float) -> np.ndarray:
    return _surrogate(net, params, batch, "clip", epsilon, 0.0)[0]


def surrogate_kl(net, params, batch, beta_kl: float) -> np.ndarray:
    return _surrogate(net, params, batch, "kl", 0.2, beta_kl)[0]


def task_losses(net: PolicyValueNet, params: np.ndarray, batch: Batch, cfg: TrainConfig):
    """Losses ``(2,)`` and flat parameter gradients ``(2, P)`` for the coverage and capacity tasks."""
    heads, cache = net.forward(batch.features, params)
    surr, sgrads, _ = _surrogate(net, params, batch, cfg.loss_variant, cfg.epsilon, cfg.beta_kl, heads)
    B = len(batch)
    losses = np.zeros(2)
    flat = np.zeros((2, net.n_params))
    for m in range(2):
        err = heads.values[:, m] - batch.returns[:, m]
        losses[m] = -surr[m] + cfg.value_coef * np.mean(err ** 2)
        g = zero_grads(heads)
        g = add_grads(g, sgrads[m], -1.0)
        g.values[:, m] = 2.0 * cfg.value_coef * err / B
        flat[m] = net.backward(cache, g)
    return losses, flat


# -- min-norm solver ----------------------------------------------------------

def normalize_gradient(g: np.ndarray, l_init: float) -> np.ndarray:
    scale = abs(l_init)
    if scale < LOSS_FLOOR:
        log.warning("initial loss magnitude %.3e below floor; dividing by %.0e", scale, LOSS_FLOOR)
        scale = LOSS_FLOOR
    return np.asarray(g) / scale


def min_norm_nu(g1: np.ndarray, g2: np.ndarray) -> float:
    """Weight on ``g1`` of the minimum-norm point of the segment between ``g1`` and ``g2``."""
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    diff = g1 - g2
    denom = float(diff @ diff)
    if denom < 1e-24:
        return 0.5
    return float(np.clip(float((g2 - g1) @ g2) / denom, 0.0, 1.0))


def combined_step(g1: np.ndarray, g2: np.ndarray, lr: float, nu: float | None = None):
    """Parameter delta along ``nu g1 + (1 - nu) g2`` (ascent directions), the weight and stationarity."""
    if nu is None:
        nu = min_norm_nu(g1, g2)
    d = nu * np.asarray(g1) + (1.0 - nu) * np.asarray(g2)
    return lr * d, nu, bool(np.linalg.norm(d) <= STATIONARY_TOL)


# -- Pareto utilities -----------------------------------------------------------

def dominates(p1: Sequence[float], p2: Sequence[float], maximize: bool = False) -> bool:
    a, b = np.asarray(_coords(p1), float), np.asarray(_coords(p2), float)
    if maximize:
        a, b = -a, -b
    return bool(np.all(a <= b) and np.any(a < b))


def _coords(p):
    return p.as_tuple() if isinstance(p, ObjectivePoint) else p


def pareto_filter(points: Sequence, maximize: bool = False) -> list:
    return [p for i, p in enumerate(points)
            if not any(dominates(q, p, maximize) for j, q in enumerate(points) if j != i)]


def select_solution(front: Sequence):
    """Max-min pick over a maximization front after per-objective min/max scaling."""
    if not len(front):
        raise ValueError("empty front")
    arr = np.array([_coords(p) for p in front], dtype=float)
    lo, hi = arr.min(axis=0), arr.max(axis=0)
    span = hi - lo
    scaled = np.where(span > 0, (arr - lo) / np.where(span > 0, span, 1.0), 1.0)
    worst = scaled.min(axis=1)
    return front[int(np.argmax(worst))]


# -- rollouts and training ------------------------------------------------------

def to_env_action(actions: ActionBatch, row: int, n_ris: int, K: int) -> EnvAction:
    return EnvAction(
        beta_level=actions.beta_idx[row].astype(int),
        phase_delta=actions.phase_delta[row].reshape(n_ris, 2, K),
        power_level=None if actions.power_idx is None else int(actions.power_idx[row]),
    )


def make_net(env: StarRisEnv, cfg: TrainConfig) -> PolicyValueNet:
    scene = env.scene
    return PolicyValueNet(
        n_features=env.n_features, n_ris=scene.N_s, n_levels=len(env.levels),
        n_phase=scene.N_s * 2 * scene.K, power_levels=env.config.power_levels,
        hidden=cfg.hidden, init_log_std=cfg.init_log_std,
        seed=_derive(cfg.seed, 0),
    )


def _derive(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


@dataclass
class Rollout:
    features: np.ndarray
    actions: ActionBatch
    rewards: np.ndarray        # (T, 2)
    values: np.ndarray         # (T + 1, 2)
    coverage: np.ndarray       # (T,) metrics of states 1..T
    capacity: np.ndarray


def collect_rollout(env: StarRisEnv, net: PolicyValueNet, params: np.ndarray, seed: int,
                    rng: np.random.Generator, deterministic: bool = False) -> Rollout:
    state = env.reset(seed)
    T = env.config.horizon
    feats, acts, rewards, values, cov, cap = [], [], [], [], [], []
    for _ in range(T):
        heads, _ = net.forward(state.features, params)
        a, _ = sample_action(heads, rng, deterministic)
        feats.append(state.features)
        acts.append(a)
        values.append(heads.values[0])
        state, reward, done = env.step(to_env_action(a, 0, env.scene.N_s, env.scene.K))
        rewards.append(reward.as_array())
        cov.append(state.coverage)
        cap.append(state.capacity)
        if done:
            break
    heads, _ = net.forward(state.features, params)
    values.append(heads.values[0])
    return Rollout(np.array(feats), ActionBatch.stack(acts), np.array(rewards),
                   np.array(values), np.array(cov), np.array(cap))


def build_batch(net: PolicyValueNet, params: np.ndarray, rollouts: list[Rollout], gamma: float) -> Batch:
    feats = np.concatenate([r.features for r in rollouts])
    actions = ActionBatch.stack([r.actions for r in rollouts])
    adv = np.concatenate([advantages(r.rewards, r.values, gamma) for r in rollouts])
    base = np.concatenate([r.values[:-1] for r in rollouts])
    old_heads, _ = net.forward(feats, params)
    return Batch(feats, actions, log_prob(old_heads, actions), old_heads, adv, adv + base)


def evaluate(env: StarRisEnv, net: PolicyValueNet, params: np.ndarray, seed: int) -> ObjectivePoint:
    """Mean coverage/capacity over one episode with the greedy policy."""
    r = collect_rollout(env, net, params, seed, np.random.default_rng(0), deterministic=True)
    return ObjectivePoint(float(r.coverage.mean()), float(r.capacity.mean()))


@dataclass
class TrainResult:
    params: np.ndarray
    log: list[dict] = field(default_factory=list)
    l_init: tuple[float, float] | None = None


LOG_FIELDS = ("iteration", "seed", "coverage", "capacity", "nu_mean", "loss_cov", "loss_cap",
              "grad_norm_combined", "stationary_flag")


def train(env_factory: Callable[[], StarRisEnv], net: PolicyValueNet, cfg: TrainConfig,
          fixed_weights: tuple[float, float] | None = None,
          out_dir: str | Path | None = None) -> TrainResult:
    """Collect rollouts, then run epochs of minibatch updates along the min-norm (or fixed) direction."""
    cfg.validate()
    if fixed_weights is not None:
        w_cov, w_cap = fixed_weights
        if min(w_cov, w_cap) < 0 or abs(w_cov + w_cap - 1.0) > 1e-12:
            raise ValueError("fixed weights must be non-negative and sum to 1")
    env = env_factory()
    params = net.params.copy()
    velocity = np.zeros_like(params)
    policy_rng = np.random.default_rng(_derive(cfg.seed, 1))
    shuffle_rng = np.random.default_rng(_derive(cfg.seed, 2))
    result = TrainResult(params)
    l_init = None

    for it in range(1, cfg.iterations + 1):
        rollouts = [collect_rollout(env, net, params, _derive(cfg.seed, 3, it, k), policy_rng)
                    for k in range(cfg.actors)]
        batch = build_batch(net, params, rollouts, cfg.gamma)
        nus, norms, l1s, l2s = [], [], [], []
        stationary = False
        for _ in range(cfg.epochs):
            perm = shuffle_rng.permutation(len(batch))
            for start in range(0, len(batch), cfg.minibatch):
                mb = batch.take(perm[start: start + cfg.minibatch])
                losses, grads = task_losses(net, params, mb, cfg)
                if not (np.all(np.isfinite(losses)) and np.all(np.isfinite(grads))):
                    _diverged(it, params, losses, out_dir)
                if l_init is None:
                    l_init = (float(abs(losses[0])), float(abs(losses[1])))
                    result.l_init = l_init
                a1 = -normalize_gradient(grads[0], l_init[0])
                a2 = -normalize_gradient(grads[1], l_init[1])
                nu = None if fixed_weights is None else fixed_weights[0]
                d, nu, stationary = combined_step(a1, a2, 1.0, nu)
                norm = float(np.linalg.norm(d))
                if cfg.max_step_norm is not None and norm > cfg.max_step_norm:
                    d = d * (cfg.max_step_norm / norm)
                velocity = cfg.momentum * velocity + d
                params = params + cfg.lr * velocity
                nus.append(nu)
                norms.append(norm)
                l1s.append(losses[0])
                l2s.append(losses[1])
        if not np.all(np.isfinite(params)):
            _diverged(it, params, np.array([np.mean(l1s), np.mean(l2s)]), out_dir)
        result.log.append({
            "iteration": it,
            "seed": cfg.seed,
            "coverage": float(np.mean([r.coverage.mean() for r in rollouts])),
            "capacity": float(np.mean([r.capacity.mean() for r in rollouts])),
            "nu_mean": float(np.mean(nus)),
            "loss_cov": float(np.mean(l1s)),
            "loss_cap": float(np.mean(l2s)),
            "grad_norm_combined": float(np.mean(norms)),
            "stationary_flag": bool(stationary),
        })
        if out_dir is not None and cfg.checkpoint_every and it % cfg.checkpoint_every == 0:
            net.save(Path(out_dir) / f"checkpoint_{it:05d}.npz", params)
    result.params = params
    return result


def train_fixed(env_factory: Callable[[], StarRisEnv], net: PolicyValueNet, cfg: TrainConfig,
                w_cov: float, w_cap: float, out_dir: str | Path | None = None) -> TrainResult:
    return train(env_factory, net, cfg, fixed_weights=(w_cov, w_cap), out_dir=out_dir)


def _diverged(it: int, params: np.ndarray, losses: np.ndarray, out_dir) -> None:
    state = {
        "iteration": it,
        "losses": [float(x) for x in np.ravel(losses)],
        "n_nonfinite_params": int(np.sum(~np.isfinite(params))),
        "param_abs_max": float(np.nanmax(np.abs(params))) if np.any(np.isfinite(params)) else None,
    }
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "diverged_state.json").write_text(json.dumps(state, indent=2))
    raise TrainingDiverged(f"non-finite loss or gradient at iteration {it}", state)


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
