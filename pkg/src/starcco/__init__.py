"""Coverage and capacity optimization for STAR-RIS assisted downlink networks."""
from .channel import ChannelParams, ChannelSet, PathLossParams, RicianParams, draw_channel_set
from .env import EnvAction, EnvConfig, EnvState, RewardVec, StarRisEnv
from .metrics import LinkMetrics, RisConfig, WeightField, capacity, coverage, link_metrics
from .moppo import TrainConfig, min_norm_nu, pareto_filter, select_solution, train, train_fixed
from .scene import Scene, SceneConfig, build_scene

__version__ = "0.1.0"

__all__ = [
    "ChannelParams", "ChannelSet", "PathLossParams", "RicianParams", "draw_channel_set",
    "EnvAction", "EnvConfig", "EnvState", "RewardVec", "StarRisEnv",
    "LinkMetrics", "RisConfig", "WeightField", "capacity", "coverage", "link_metrics",
    "TrainConfig", "min_norm_nu", "pareto_filter", "select_solution", "train", "train_fixed",
    "Scene", "SceneConfig", "build_scene",
]
