import numpy as np
import pytest

from starcco.channel import ChannelParams, ChannelSet, PathLossParams
from starcco.env import EnvConfig, StarRisEnv
from starcco.scene import SceneConfig, build_scene

# Pass/fail lines recorded by tests/test_acceptance.py, echoed after the run.
ACCEPTANCE_LINES: list[str] = []

# Smallest complete experiment config: one 20 m scene, one training iteration.
TINY = """
[scene]
R_s = 20
R_g = 10
N_s = 1
K = 2

[env]
horizon = 2
R_th = 2e-10
sigma2 = 1e-9

[channel]
C = 1e-2
gamma_aR = 2.0
gamma_RP = 2.0
gamma_aP = 4.5

[train]
iterations = 1
actors = 1
epochs = 1
minibatch = 4
hidden = 8

[experiment]
sweep = ns
values = 1
strategies = mgda, fixed(0.3, 0.7)
seeds = 0
"""

STRONG_CHANNEL = ChannelParams(PathLossParams(C=1e-2, gamma_aR=2.0, gamma_RP=2.0, gamma_aP=4.5))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_scene():
    """16 sample points, two panels of 2 x 2 elements."""
    return build_scene(SceneConfig(R_s=40.0, R_g=10.0, N_s=2, K_H=2, K_V=2), seed=3)


@pytest.fixture
def small_env(small_scene):
    return StarRisEnv(small_scene, STRONG_CHANNEL, EnvConfig(R_th=2e-10, sigma2=1e-9, horizon=4))


def unit_scene(K_H=1, K_V=1, N_s=1, ris_positions=((2.0, 8.0),)):
    """One sample point at (5, 5, 0) and panels at fixed positions."""
    return build_scene(SceneConfig(R_s=10.0, R_g=10.0, N_s=N_s, K_H=K_H, K_V=K_V,
                                   ris_positions=ris_positions), seed=0)


def constant_channels(scene, bs_ris=1.0, ris_point=1.0, bs_point=1.0) -> ChannelSet:
    N, N_s, K = scene.N, scene.N_s, scene.K
    return ChannelSet(
        h_bs_ris=np.full((2, N_s, K), bs_ris, dtype=complex),
        h_ris_point=np.full((2, N_s, N, K), ris_point, dtype=complex),
        h_bs_point=np.full((2, N), bs_point, dtype=complex),
    )
