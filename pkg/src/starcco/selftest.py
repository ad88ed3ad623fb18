"""Oracle checks shared by ``starcco selftest`` (small sizes) and the acceptance suite (full sizes).

Every check returns a :class:`CheckResult`; none of them raise on failure.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import oracles
from .channel import (
    ChannelParams,
    PathLossParams,
    RicianParams,
    draw_bs_point_channel,
    draw_bs_ris_channel,
    draw_channel_set,
    draw_ris_point_channel,
    path_loss,
)
from .env import EnvAction, EnvConfig, StarRisEnv, validate
from .metrics import RisConfig, WeightField, all_coefficients, capacity, coverage, link_metrics
from .moppo import Batch, TrainConfig, dominates, min_norm_nu, pareto_filter, task_losses
from .nn import PolicyValueNet, sample_action
from .scene import SceneConfig, build_scene


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _timed(name, fn, *args, **kw) -> CheckResult:
    t0 = time.perf_counter()
    ok, detail = fn(*args, **kw)
    return CheckResult(name, bool(ok), detail, time.perf_counter() - t0)


# -- min-norm solver ----------------------------------------------------------

def _min_norm(n_pairs: int, seed: int):
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n_pairs):
        dim = int(rng.integers(2, 65))
        g1, g2 = rng.standard_normal(dim), rng.standard_normal(dim)
        if rng.random() < 0.2:                      # nearly parallel pairs exercise the clipping
            g2 = g1 * rng.uniform(-2, 2) + 1e-3 * rng.standard_normal(dim)
        nu = min_norm_nu(g1, g2)
        d = nu * g1 + (1 - nu) * g2
        worst = max(worst, float(d @ d) - oracles.grid_min_norm(g1, g2))
    return worst <= 1e-9, f"{n_pairs} pairs, max excess over grid {worst:.2e}"


def check_min_norm(n_pairs: int = 1000, seed: int = 0) -> CheckResult:
    return _timed("min-norm vs 1001-point grid", _min_norm, n_pairs, seed)


# -- Pareto utilities ---------------------------------------------------------

def _pareto(n_instances: int, seed: int):
    rng = np.random.default_rng(seed)
    mismatches = order_faults = 0
    for _ in range(n_instances):
        n = int(rng.integers(1, 51))
        # a coarse lattice produces ties and duplicates, not just generic points
        pts = [tuple(map(float, p)) for p in rng.integers(0, 8, size=(n, 2))]
        maximize = bool(rng.integers(2))
        got = pareto_filter(pts, maximize=maximize)
        want = [pts[i] for i in oracles.brute_pareto(pts, maximize=maximize)]
        mismatches += got != want
        for p in pts:
            order_faults += dominates(p, p, maximize)
            for q in pts:
                order_faults += dominates(p, q, maximize) and dominates(q, p, maximize)
    ok = mismatches == 0 and order_faults == 0
    return ok, f"{n_instances} instances, {mismatches} mismatches, {order_faults} order violations"


def check_pareto(n_instances: int = 200, seed: int = 0) -> CheckResult:
    return _timed("pareto_filter vs brute force", _pareto, n_instances, seed)


# -- gradient exactness -----------------------------------------------------------

def random_batch(net: PolicyValueNet, rng: np.random.Generator, B: int = 6) -> Batch:
    """Batch whose behaviour policy differs from ``net.params`` so ratios are not all 1."""
    feats = rng.standard_normal((B, net.n_features))
    old_params = net.params + 0.3 * rng.standard_normal(net.n_params)
    old_heads, _ = net.forward(feats, old_params)
    actions, old_logp = sample_action(old_heads, rng)
    adv = rng.standard_normal((B, 2))
    returns = rng.standard_normal((B, 2))
    return Batch(feats, actions, old_logp, old_heads, adv, returns)


def random_small_net(rng: np.random.Generator) -> PolicyValueNet:
    n_ris = int(rng.integers(1, 3))
    return PolicyValueNet(
        n_features=int(rng.integers(2, 4)), n_ris=n_ris, n_levels=int(rng.integers(2, 4)),
        n_phase=int(rng.integers(1, 3)), power_levels=int(rng.choice([0, 2])),
        hidden=(int(rng.integers(2, 4)),), init_log_std=float(rng.uniform(-1.0, 0.0)),
        seed=int(rng.integers(1 << 31)), policy_init_scale=1.0,
    )


def _gradients(n_nets: int, seed: int, h: float):
    rng = np.random.default_rng(seed)
    worst = 0.0
    sizes = []
    for _ in range(n_nets):
        net = random_small_net(rng)
        sizes.append(net.n_params)
        batch = random_batch(net, rng)
        value_only = Batch(batch.features, batch.actions, batch.old_logp, batch.old_heads,
                           np.zeros_like(batch.adv), batch.returns)
        cases = [("ncp", batch), ("clip", batch), ("kl", batch), ("ncp", value_only)]
        for variant, b in cases:
            cfg = TrainConfig(loss_variant=variant, epsilon=0.2, beta_kl=0.7, value_coef=0.5)
            _, grads = task_losses(net, net.params, b, cfg)
            for m in range(2):
                fd = oracles.central_difference(
                    lambda p, m=m: float(task_losses(net, p, b, cfg)[0][m]), net.params, h)
                worst = max(worst, oracles.relative_error(grads[m], fd))
    return worst <= 1e-4, (f"{n_nets} nets ({min(sizes)}-{max(sizes)} params), 3 surrogates + value loss x 2 tasks, "
                           f"max rel err {worst:.2e}")


def check_gradients(n_nets: int = 20, seed: int = 0, h: float = 1e-5) -> CheckResult:
    return _timed("surrogate + value gradients vs central differences", _gradients, n_nets, seed, h)


# -- channel statistics -------------------------------------------------------------

def _channel_stats(n_draws: int, seed: int):
    scene = build_scene(SceneConfig(R_s=20.0, R_g=10.0, N_s=1, K_H=2, K_V=2,
                                    ris_positions=((7.0, 12.0),)), seed=0)
    rng = np.random.default_rng(seed)
    worst_power = worst_frac = 0.0
    for alpha in (0.0, 1.0, 10.0):
        params = ChannelParams(PathLossParams(), RicianParams(alpha, alpha, alpha), "sinc")
        pl = params.path_loss
        links = {
            "bs-ris": (draw_bs_ris_channel(0, 0, scene, params, rng, size=n_draws, return_parts=True),
                       path_loss(np.linalg.norm(scene.bs_positions[0] - scene.ris_positions[0]),
                                 pl.gamma_aR, pl.C)),
            "ris-point": (draw_ris_point_channel(1, 0, 0, scene, params, rng, size=n_draws,
                                                 return_parts=True),
                          path_loss(np.linalg.norm(scene.ris_positions[0] - scene.sample_points[0]),
                                    pl.gamma_RP, pl.C)),
            "bs-point": (draw_bs_point_channel(1, 2, scene, params, rng, size=n_draws, return_parts=True),
                         path_loss(np.linalg.norm(scene.bs_positions[1] - scene.sample_points[2]),
                                   pl.gamma_aP, pl.C)),
        }
        for (h, los, _), L in links.values():
            mean_power, frac = oracles.power_statistics(h, los)
            worst_power = max(worst_power, abs(mean_power / L - 1.0))
            worst_frac = max(worst_frac, abs(frac - alpha / (1.0 + alpha)))
    ok = worst_power <= 0.02 and worst_frac <= 0.02
    return ok, (f"{n_draws} draws x 3 links x 3 alphas, max |power/L - 1| {worst_power:.4f}, "
                f"max LoS-fraction error {worst_frac:.4f}")


def check_channel_statistics(n_draws: int = 100_000, seed: int = 0) -> CheckResult:
    return _timed("channel mean power and LoS fraction", _channel_stats, n_draws, seed)


# -- metric oracle ------------------------------------------------------------------

def _metric_oracle(n_scenes: int, seed: int):
    rng = np.random.default_rng(seed)
    worst = 0.0
    serving_faults = skipped = checked = 0
    for s in range(100 * n_scenes):
        if checked == n_scenes:
            break
        side = int(rng.integers(1, 4))                       # N = side^2 <= 9
        N_s = int(rng.integers(1, 3))
        K_H, K_V = (int(x) for x in rng.integers(1, 3, size=2))
        if K_H * K_V > 2:
            K_V = 1
        cfg = SceneConfig(R_s=10.0 * side, R_g=10.0, N_s=N_s, K_H=K_H, K_V=K_V, h_ris=5.0, h_b=25.0)
        params = ChannelParams(PathLossParams(C=1e-2, gamma_aP=3.0),
                               RicianParams(*rng.uniform(0, 10, size=3)),
                               str(rng.choice(["sinc", "iid"])))
        try:
            scene = build_scene(cfg, seed=s)
            ch = draw_channel_set(scene, params, rng)
        except ValueError:          # panels that cannot be separated, or a point right under a panel
            skipped += 1
            continue
        checked += 1
        ris = RisConfig.create(rng.uniform(0.05, 0.95, size=N_s),
                               rng.uniform(0, 2 * np.pi, size=(2, N_s, scene.K)))
        w = rng.random(scene.N) + 1e-3
        weights = WeightField(w / w.sum(), w[::-1] / w.sum())
        P_t, sigma2 = float(rng.uniform(0.1, 1.0)), float(10 ** rng.uniform(-12, -8))
        interference = str(rng.choice(["other_bs", "all_nonserving"]))
        pipe = link_metrics(scene, ch, ris, P_t, sigma2, 0.0, interference)
        # threshold strictly between two RSRP values so no point sits on it
        ordered = np.sort(pipe.rsrp)
        R_th = float(np.sqrt(ordered[len(ordered) // 2] * ordered[(len(ordered) - 1) // 2])) \
            if len(ordered) > 1 else float(ordered[0]) * 0.5
        if len(ordered) > 1 and ordered[len(ordered) // 2] == ordered[(len(ordered) - 1) // 2]:
            R_th = float(np.sqrt(ordered[len(ordered) // 2] * ordered[-1]))
        pipe = link_metrics(scene, ch, ris, P_t, sigma2, R_th, interference)
        ref = oracles.brute_link_metrics(
            scene.ris_positions[:, :2].tolist(), scene.sample_points[:, :2].tolist(),
            ch.h_bs_ris.tolist(), ch.h_ris_point.tolist(), ch.h_bs_point.tolist(),
            ris.beta_re.tolist(), ris.phases.tolist(), P_t, sigma2, R_th,
            weights.w_cov.tolist(), weights.w_cap.tolist(), 1.0, interference)
        for got, want in ((pipe.rsrp, ref["rsrp"]), (pipe.sinr, ref["sinr"]),
                          ([coverage(pipe, weights)], [ref["coverage"]]),
                          ([capacity(pipe, weights)], [ref["capacity"]])):
            got, want = np.asarray(got, float), np.asarray(want, float)
            worst = max(worst, float(np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-300))))
        serving_faults += [tuple(p) for p in pipe.serving.tolist()] != ref["serving"]
        serving_faults += pipe.covered.tolist() != ref["covered"]
    ok = worst <= 1e-12 and serving_faults == 0 and checked == n_scenes
    return ok, f"{checked} scenes ({skipped} degenerate draws replaced), max rel err {worst:.2e}, {serving_faults} serving/coverage mismatches"


def check_metric_oracle(n_scenes: int = 50, seed: int = 0) -> CheckResult:
    return _timed("metrics vs brute-force loops", _metric_oracle, n_scenes, seed)


# -- environment invariants ----------------------------------------------------------

def _random_episode_env(horizon: int, seed: int) -> StarRisEnv:
    scene = build_scene(SceneConfig(R_s=40.0, R_g=10.0, N_s=2, K_H=2, K_V=2), seed=seed)
    cfg = EnvConfig(horizon=horizon, power_levels=4, R_th=1e-9, sigma2=1e-10)
    return StarRisEnv(scene, ChannelParams(PathLossParams(C=1e-2)), cfg)


def _random_action(env: StarRisEnv, rng: np.random.Generator) -> EnvAction:
    N_s, K = env.scene.N_s, env.scene.K
    return EnvAction(rng.integers(0, len(env.levels), size=N_s),
                     rng.normal(0.0, 3.0, size=(N_s, 2, K)),
                     int(rng.integers(0, env.config.power_levels)))


def _energy(n_steps: int, seed: int):
    env = _random_episode_env(n_steps, seed)
    rng = np.random.default_rng(seed)
    states = [env.reset(seed)]
    for _ in range(n_steps):
        states.append(env.step(_random_action(env, rng))[0])
    problems = sum(len(validate(s, env.config)) for s in states)
    energy_err = max(float(np.max(np.abs((np.abs(all_coefficients(s.ris)) ** 2).sum(axis=0) - 1.0)))
                     for s in states)
    return problems == 0 and energy_err <= 1e-12, \
        f"{len(states)} states, {problems} violations, max |energy - 1| {energy_err:.1e}"


def check_energy(n_steps: int = 100, seed: int = 0) -> CheckResult:
    return _timed("constraints and per-element energy along a random episode", _energy, n_steps, seed)


def _telescoping(n_episodes: int, seed: int):
    worst = 0.0
    for e in range(n_episodes):
        env = _random_episode_env(25, seed + e)
        rng = np.random.default_rng(seed + e)
        first = env.reset(seed + e)
        total = np.zeros(2)
        done = False
        while not done:
            state, reward, done = env.step(_random_action(env, rng))
            total += reward.as_array()
        want = np.array([state.coverage - first.coverage, state.capacity - first.capacity])
        worst = max(worst, float(np.max(np.abs(total - want))))
    return worst <= 1e-10, f"{n_episodes} episodes, max |sum reward - (final - initial)| {worst:.1e}"


def check_telescoping(n_episodes: int = 10, seed: int = 0) -> CheckResult:
    return _timed("telescoping reward", _telescoping, n_episodes, seed)


def run_all(verbose: bool = True) -> bool:
    """Reduced-size versions of the oracle suites; returns True when every check passes."""
    results = [
        check_min_norm(200),
        check_pareto(50),
        check_gradients(4),
        check_channel_statistics(20_000),
        check_metric_oracle(10),
        check_energy(30),
        check_telescoping(3),
    ]
    if verbose:
        for r in results:
            print(r.line())
    return all(r.ok for r in results)
