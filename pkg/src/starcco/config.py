"""INI experiment configuration (``[scene]``, ``[channel]``, ``[env]``, ``[train]``, ``[experiment]``).

See ``docs/config.md`` for every key. Unknown keys are rejected so typos do not
silently fall back to defaults.
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass
from pathlib import Path

from .channel import ChannelParams, PathLossParams, RicianParams
from .env import EnvConfig
from .moppo import TrainConfig
from .scene import SceneConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Strategy:
    name: str
    weights: tuple[float, float] | None = None   # None -> min-norm weighting

    @property
    def label(self) -> str:
        if self.weights is None:
            return self.name
        return f"fixed_{self.weights[0]:g}_{self.weights[1]:g}"

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        text = text.strip()
        if text.lower() == "mgda":
            return cls("mgda")
        m = re.fullmatch(r"fixed\(\s*([0-9.eE+-]+)\s*,\s*([0-9.eE+-]+)\s*\)", text)
        if m is None:
            m = re.fullmatch(r"fixed_([0-9.eE+-]+)_([0-9.eE+-]+)", text)
        if m is None:
            raise ConfigError(f"cannot parse strategy {text!r}")
        w = (float(m.group(1)), float(m.group(2)))
        if min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise ConfigError(f"fixed strategy weights must be non-negative and sum to 1: {text}")
        return cls("fixed", w)


DEFAULT_STRATEGIES = (Strategy("mgda"), Strategy("fixed", (0.3, 0.7)), Strategy("fixed", (0.6, 0.4)))


@dataclass(frozen=True)
class ExperimentConfig:
    scene: SceneConfig = SceneConfig()
    channel: ChannelParams = ChannelParams()
    env: EnvConfig = EnvConfig()
    train: TrainConfig = TrainConfig()
    sweep_variable: str | None = None
    sweep_values: tuple[int, ...] = ()
    strategies: tuple[Strategy, ...] = DEFAULT_STRATEGIES
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs"
    workers: int = 1

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        if self.sweep_variable not in (None, "ns", "k"):
            raise ConfigError(f"sweep variable must be 'ns' or 'k', got {self.sweep_variable!r}")
        if self.sweep_variable and not self.sweep_values:
            raise ConfigError("sweep values must not be empty")
        if any(int(v) != v or v < 1 for v in self.sweep_values):
            raise ConfigError("sweep values must be positive integers")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            self.scene.validate()
            self.channel.validate()
            self.env.validate()
            self.train.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def with_seeds(self, seeds) -> "ExperimentConfig":
        return dataclasses.replace(self, seeds=tuple(int(s) for s in seeds))


def split_elements(K: int) -> tuple[int, int]:
    """``(K_H, K_V)`` with ``K_V`` the largest divisor of ``K`` not exceeding ``sqrt(K)``."""
    if K < 1:
        raise ConfigError("K must be >= 1")
    k_v = max(d for d in range(1, K + 1) if K % d == 0 and d * d <= K)
    return K // k_v, k_v


def scene_for(cfg: ExperimentConfig, value: int | None) -> SceneConfig:
    if cfg.sweep_variable is None or value is None:
        return cfg.scene
    if cfg.sweep_variable == "ns":
        return dataclasses.replace(cfg.scene, N_s=int(value), ris_positions=None
                                   if cfg.scene.ris_positions is None
                                   else cfg.scene.ris_positions[: int(value)])
    k_h, k_v = split_elements(int(value))
    return dataclasses.replace(cfg.scene, K_H=k_h, K_V=k_v)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in re.split(r"[,\s]+", text.strip()) if x)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _coerce(cls, section: configparser.SectionProxy, skip=()) -> dict:
    fields = {f.name: f for f in dataclasses.fields(cls)}
    out = {}
    for key, raw in section.items():
        if key in skip:
            continue
        if key not in fields:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]")
        default = getattr(cls(), key)
        if raw.strip().lower() == "none":
            out[key] = None
            continue
        try:
            if isinstance(default, bool):
                out[key] = _bool(raw)
            elif isinstance(default, int):
                out[key] = int(raw)
            elif isinstance(default, float):
                out[key] = float(raw)
            elif isinstance(default, tuple):
                out[key] = _ints(raw)
            elif default is None or isinstance(default, str):
                out[key] = _maybe_float(raw.strip())
            else:
                raise ConfigError(f"unsupported key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"[{section.name}] {key}: {exc}") from exc
    return out


def _maybe_float(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def _float(section: configparser.SectionProxy, key: str) -> float:
    try:
        return float(section[key])
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key}: {exc}") from exc


def _parse_positions(text: str):
    text = text.strip()
    if text.lower() in ("random", "none", ""):
        return None
    pts = []
    for chunk in text.split(";"):
        try:
            x, y = (float(v) for v in chunk.split(","))
        except ValueError as exc:
            raise ConfigError(f"ris_positions entry {chunk.strip()!r} is not 'x, y'") from exc
        pts.append((x, y))
    return tuple(pts)


def load_config(path: str | Path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str    # keys are case-sensitive (R_s, K_H, ...)
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_parser(parser)


def loads_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_parser(parser)


def config_from_parser(parser: configparser.ConfigParser) -> ExperimentConfig:
    known = {"scene", "channel", "env", "train", "experiment"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")

    scene_kw = {}
    if parser.has_section("scene"):
        sec = parser["scene"]
        scene_kw = _coerce(SceneConfig, sec, skip=("K", "ris_positions"))
        if "K" in sec:
            if "K_H" in sec or "K_V" in sec:
                raise ConfigError("give either K or K_H/K_V, not both")
            scene_kw["K_H"], scene_kw["K_V"] = split_elements(int(sec["K"]))
        if "ris_positions" in sec:
            scene_kw["ris_positions"] = _parse_positions(sec["ris_positions"])
    scene = SceneConfig(**scene_kw)

    pl_kw, ric_kw, corr = {}, {}, "sinc"
    if parser.has_section("channel"):
        sec = parser["channel"]
        for key, raw in sec.items():
            if key in {f.name for f in dataclasses.fields(PathLossParams)}:
                pl_kw[key] = _float(sec, key)
            elif key in {f.name for f in dataclasses.fields(RicianParams)}:
                ric_kw[key] = _float(sec, key)
            elif key == "nlos_correlation":
                corr = raw.strip()
            else:
                raise ConfigError(f"unknown key {key!r} in [channel]")
    channel = ChannelParams(PathLossParams(**pl_kw), RicianParams(**ric_kw), corr)

    env = EnvConfig(**_coerce(EnvConfig, parser["env"])) if parser.has_section("env") else EnvConfig()

    train_kw = _coerce(TrainConfig, parser["train"]) if parser.has_section("train") else {}
    train = TrainConfig(**train_kw)

    exp_kw: dict = {}
    if parser.has_section("experiment"):
        sec = parser["experiment"]
        for key, raw in sec.items():
            if key == "sweep":
                v = raw.strip().lower()
                exp_kw["sweep_variable"] = None if v in ("", "none") else v
            elif key == "values":
                exp_kw["sweep_values"] = _ints(raw)
            elif key == "strategies":
                exp_kw["strategies"] = tuple(Strategy.parse(s) for s in _split_strategies(raw))
            elif key == "seeds":
                exp_kw["seeds"] = _ints(raw)
            elif key == "output_dir":
                exp_kw["output_dir"] = raw.strip()
            elif key == "workers":
                exp_kw["workers"] = int(raw)
            else:
                raise ConfigError(f"unknown key {key!r} in [experiment]")
    cfg = ExperimentConfig(scene=scene, channel=channel, env=env, train=train, **exp_kw)
    cfg.validate()
    return cfg


def _split_strategies(text: str) -> list[str]:
    # commas separate strategies except inside fixed(...)
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    return [p for p in (s.strip() for s in parts) if p]
