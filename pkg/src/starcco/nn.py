"""Shared-trunk policy/value MLP in plain numpy with hand-written reverse mode.

The policy factorizes over one categorical per panel (amplitude level), an
optional categorical over transmit-power levels and a diagonal Gaussian over
the phase increments with a state-independent log standard deviation. The
critic has one output per objective (coverage, capacity).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LOG_STD_MIN, LOG_STD_MAX = -5.0, 1.0
LOG_2PI = float(np.log(2.0 * np.pi))
CHECKPOINT_VERSION = 1


@dataclass
class HeadOutputs:
    beta_logits: np.ndarray            # (B, N_s, L)
    power_logits: np.ndarray | None    # (B, Lp)
    phase_mean: np.ndarray             # (B, D)
    log_std: np.ndarray                # (D,)
    values: np.ndarray                 # (B, 2)

    def take(self, idx) -> "HeadOutputs":
        return HeadOutputs(
            beta_logits=self.beta_logits[idx],
            power_logits=None if self.power_logits is None else self.power_logits[idx],
            phase_mean=self.phase_mean[idx],
            log_std=self.log_std,
            values=self.values[idx],
        )


@dataclass
class ActionBatch:
    beta_idx: np.ndarray               # (B, N_s) int
    power_idx: np.ndarray | None       # (B,) int
    phase_delta: np.ndarray            # (B, D)

    def take(self, idx) -> "ActionBatch":
        return ActionBatch(self.beta_idx[idx],
                           None if self.power_idx is None else self.power_idx[idx],
                           self.phase_delta[idx])

    @staticmethod
    def stack(rows: list["ActionBatch"]) -> "ActionBatch":
        return ActionBatch(
            np.concatenate([r.beta_idx for r in rows]),
            None if rows[0].power_idx is None else np.concatenate([r.power_idx for r in rows]),
            np.concatenate([r.phase_delta for r in rows]),
        )


def zero_grads(heads: HeadOutputs) -> HeadOutputs:
    return HeadOutputs(
        beta_logits=np.zeros_like(heads.beta_logits),
        power_logits=None if heads.power_logits is None else np.zeros_like(heads.power_logits),
        phase_mean=np.zeros_like(heads.phase_mean),
        log_std=np.zeros_like(heads.log_std),
        values=np.zeros_like(heads.values),
    )


def add_grads(a: HeadOutputs, b: HeadOutputs, scale: float = 1.0) -> HeadOutputs:
    return HeadOutputs(
        beta_logits=a.beta_logits + scale * b.beta_logits,
        power_logits=None if a.power_logits is None else a.power_logits + scale * b.power_logits,
        phase_mean=a.phase_mean + scale * b.phase_mean,
        log_std=a.log_std + scale * b.log_std,
        values=a.values + scale * b.values,
    )


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


class PolicyValueNet:
    """MLP with tanh hidden layers and one linear output layer feeding every head."""

    def __init__(self, n_features: int, n_ris: int, n_levels: int, n_phase: int,
                 power_levels: int = 0, hidden: tuple[int, ...] = (64, 64),
                 init_log_std: float = -0.5, seed: int = 0, policy_init_scale: float = 0.01):
        self.n_features = n_features
        self.n_ris = n_ris
        self.n_levels = n_levels
        self.n_phase = n_phase
        self.power_levels = power_levels
        self.hidden = tuple(hidden)
        self.n_out = n_ris * n_levels + power_levels + n_phase + 2

        sizes = (n_features,) + self.hidden + (self.n_out,)
        self.layout: list[tuple[str, tuple[int, ...]]] = []
        for j, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            self.layout += [(f"W{j}", (fan_in, fan_out)), (f"b{j}", (fan_out,))]
        self.layout.append(("log_std", (n_phase,)))
        self.n_params = sum(int(np.prod(s)) for _, s in self.layout)

        rng = np.random.default_rng(seed)
        params = np.zeros(self.n_params)
        views = self.unflatten(params)
        n_layers = len(sizes) - 1
        for j in range(n_layers):
            W = views[f"W{j}"]
            W[...] = rng.standard_normal(W.shape) / np.sqrt(W.shape[0])
        # small policy outputs so the initial policy is near-uniform with near-zero mean steps
        views[f"W{n_layers - 1}"][:, : self.n_out - 2] *= policy_init_scale
        views["log_std"][...] = init_log_std
        self.params = params

    # -- parameter vector -------------------------------------------------
    def unflatten(self, params: np.ndarray) -> dict[str, np.ndarray]:
        out, off = {}, 0
        for name, shape in self.layout:
            size = int(np.prod(shape))
            out[name] = params[off: off + size].reshape(shape)
            off += size
        return out

    def flatten(self, views: dict[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([np.asarray(views[name], dtype=float).ravel() for name, _ in self.layout])

    @property
    def n_layers(self) -> int:
        return len(self.hidden) + 1

    # -- forward / backward -----------------------------------------------
    def forward(self, features: np.ndarray, params: np.ndarray | None = None):
        p = self.unflatten(self.params if params is None else params)
        x = np.atleast_2d(np.asarray(features, dtype=float))
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        acts = [x]
        h = x
        for j in range(self.n_layers - 1):
            h = np.tanh(h @ p[f"W{j}"] + p[f"b{j}"])
            acts.append(h)
        last = self.n_layers - 1
        out = h @ p[f"W{last}"] + p[f"b{last}"]
        raw_log_std = p["log_std"]
        heads = self._split(out, np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX))
        cache = {"acts": acts, "raw_log_std": raw_log_std.copy(), "params": p}
        return heads, cache

    def _split(self, out: np.ndarray, log_std: np.ndarray) -> HeadOutputs:
        B = out.shape[0]
        o = 0
        beta = out[:, o: o + self.n_ris * self.n_levels].reshape(B, self.n_ris, self.n_levels)
        o += self.n_ris * self.n_levels
        power = None
        if self.power_levels:
            power = out[:, o: o + self.power_levels]
            o += self.power_levels
        mean = out[:, o: o + self.n_phase]
        o += self.n_phase
        return HeadOutputs(beta, power, mean, log_std.copy(), out[:, o: o + 2])

    def _join(self, g: HeadOutputs) -> np.ndarray:
        B = g.phase_mean.shape[0]
        parts = [g.beta_logits.reshape(B, -1)]
        if self.power_levels:
            parts.append(g.power_logits)
        parts += [g.phase_mean, g.values]
        return np.concatenate(parts, axis=1)

    def backward(self, cache: dict, grads: HeadOutputs) -> np.ndarray:
        """Gradient of a scalar loss w.r.t. the flat parameters, given its gradient w.r.t. the heads."""
        p, acts = cache["params"], cache["acts"]
        out_grads: dict[str, np.ndarray] = {}
        d = self._join(grads)
        for j in reversed(range(self.n_layers)):
            h_in = acts[j]
            out_grads[f"W{j}"] = h_in.T @ d
            out_grads[f"b{j}"] = d.sum(axis=0)
            if j:
                d = (d @ p[f"W{j}"].T) * (1.0 - h_in ** 2)
        raw = cache["raw_log_std"]
        inside = (raw >= LOG_STD_MIN) & (raw <= LOG_STD_MAX)
        out_grads["log_std"] = grads.log_std * inside
        return self.flatten(out_grads)

    # -- checkpoints ------------------------------------------------------
    def save(self, path: str | Path, params: np.ndarray | None = None) -> None:
        header = {
            "version": CHECKPOINT_VERSION,
            "n_features": self.n_features, "n_ris": self.n_ris, "n_levels": self.n_levels,
            "n_phase": self.n_phase, "power_levels": self.power_levels, "hidden": list(self.hidden),
        }
        with open(path, "wb") as fh:
            np.savez(fh, header=np.array(json.dumps(header)),
                     params=self.params if params is None else params)

    @classmethod
    def load(cls, path: str | Path) -> "PolicyValueNet":
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            if header.pop("version") != CHECKPOINT_VERSION:
                raise ValueError("unsupported checkpoint version")
            hidden = tuple(header.pop("hidden"))
            net = cls(hidden=hidden, **header)
            net.params = data["params"].copy()
        return net


# -- distributions ---------------------------------------------------------

def log_prob(heads: HeadOutputs, actions: ActionBatch) -> np.ndarray:
    """Joint log-density of each action row; the Gaussian part is evaluated before wrapping."""
    B = heads.phase_mean.shape[0]
    rows = np.arange(B)[:, None]
    ls = log_softmax(heads.beta_logits)
    lp = ls[rows, np.arange(ls.shape[1])[None, :], actions.beta_idx].sum(axis=1)
    if heads.power_logits is not None:
        lp = lp + log_softmax(heads.power_logits)[np.arange(B), actions.power_idx]
    z = (actions.phase_delta - heads.phase_mean) * np.exp(-heads.log_std)
    lp = lp + (-0.5 * z ** 2 - heads.log_std - 0.5 * LOG_2PI).sum(axis=1)
    return lp


def log_prob_grad(heads: HeadOutputs, actions: ActionBatch, weight: np.ndarray) -> HeadOutputs:
    """Head gradients of ``sum_b weight[b] * log_prob[b]``."""
    B = heads.phase_mean.shape[0]
    w = weight[:, None]
    probs = np.exp(log_softmax(heads.beta_logits))
    onehot = np.zeros_like(probs)
    np.put_along_axis(onehot, actions.beta_idx[..., None], 1.0, axis=-1)
    g_beta = (onehot - probs) * weight[:, None, None]
    g_power = None
    if heads.power_logits is not None:
        pp = np.exp(log_softmax(heads.power_logits))
        oh = np.zeros_like(pp)
        oh[np.arange(B), actions.power_idx] = 1.0
        g_power = (oh - pp) * w
    inv_var = np.exp(-2.0 * heads.log_std)
    diff = actions.phase_delta - heads.phase_mean
    g_mean = diff * inv_var * w
    g_log_std = ((diff ** 2 * inv_var - 1.0) * w).sum(axis=0)
    return HeadOutputs(g_beta, g_power, g_mean, g_log_std, np.zeros_like(heads.values))


def kl(new: HeadOutputs, old: HeadOutputs) -> np.ndarray:
    """Per-state ``KL(new || old)`` summed over the independent action heads."""
    ln, lo = log_softmax(new.beta_logits), log_softmax(old.beta_logits)
    out = (np.exp(ln) * (ln - lo)).sum(axis=(1, 2))
    if new.power_logits is not None:
        pn, po = log_softmax(new.power_logits), log_softmax(old.power_logits)
        out = out + (np.exp(pn) * (pn - po)).sum(axis=1)
    var_n, var_o = np.exp(2 * new.log_std), np.exp(2 * old.log_std)
    gauss = (old.log_std - new.log_std
             + (var_n + (new.phase_mean - old.phase_mean) ** 2) / (2.0 * var_o) - 0.5)
    return out + gauss.sum(axis=1)


def kl_grad(new: HeadOutputs, old: HeadOutputs, weight: np.ndarray) -> HeadOutputs:
    """Head gradients (w.r.t. ``new``) of ``sum_b weight[b] * kl[b]``."""
    ln, lo = log_softmax(new.beta_logits), log_softmax(old.beta_logits)
    p = np.exp(ln)
    per = (p * (ln - lo)).sum(axis=-1, keepdims=True)
    g_beta = p * (ln - lo - per) * weight[:, None, None]
    g_power = None
    if new.power_logits is not None:
        pn, po = log_softmax(new.power_logits), log_softmax(old.power_logits)
        q = np.exp(pn)
        g_power = q * (pn - po - (q * (pn - po)).sum(axis=1, keepdims=True)) * weight[:, None]
    inv_var_o = np.exp(-2.0 * old.log_std)
    g_mean = (new.phase_mean - old.phase_mean) * inv_var_o * weight[:, None]
    g_log_std = (-1.0 + np.exp(2 * new.log_std) * inv_var_o) * weight.sum()
    return HeadOutputs(g_beta, g_power, g_mean, g_log_std, np.zeros_like(new.values))


def sample_action(heads: HeadOutputs, rng: np.random.Generator,
                  deterministic: bool = False) -> tuple[ActionBatch, np.ndarray]:
    """Draw one action per row (argmax / mean when ``deterministic``) and its log-probability."""
    B = heads.phase_mean.shape[0]
    probs = np.exp(log_softmax(heads.beta_logits))
    if deterministic:
        beta_idx = probs.argmax(axis=-1)
    else:
        u = rng.random(probs.shape[:-1] + (1,))
        beta_idx = np.minimum((probs.cumsum(axis=-1) < u).sum(axis=-1), probs.shape[-1] - 1)
    power_idx = None
    if heads.power_logits is not None:
        pp = np.exp(log_softmax(heads.power_logits))
        if deterministic:
            power_idx = pp.argmax(axis=-1)
        else:
            u = rng.random((B, 1))
            power_idx = np.minimum((pp.cumsum(axis=-1) < u).sum(axis=-1), pp.shape[-1] - 1)
    if deterministic:
        phase = heads.phase_mean.copy()
    else:
        phase = heads.phase_mean + np.exp(heads.log_std) * rng.standard_normal(heads.phase_mean.shape)
    actions = ActionBatch(beta_idx, power_idx, phase)
    return actions, log_prob(heads, actions)
