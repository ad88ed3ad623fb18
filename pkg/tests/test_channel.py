import numpy as np
import pytest

from starcco.channel import (
    ChannelParams,
    PathLossParams,
    RicianParams,
    covariance_sqrt,
    draw_bs_point_channel,
    draw_bs_ris_channel,
    draw_channel_set,
    draw_ris_point_channel,
    nlos_covariance,
    path_loss,
)
from starcco.scene import SceneConfig, SingularGeometryError, array_response, build_scene, los_angles

N_DRAWS = 100_000


@pytest.fixture(scope="module")
def scene():
    return build_scene(SceneConfig(R_s=20, R_g=10, N_s=1, K_H=2, K_V=2, ris_positions=((7.0, 12.0),)))


def params(alpha, corr="sinc", **pl):
    return ChannelParams(PathLossParams(**pl), RicianParams(alpha, alpha, alpha), corr)


def gain(scene, src, dst, gamma, C=1e-3):
    return path_loss(float(np.linalg.norm(src - dst)), gamma, C)


def test_path_loss_examples():
    assert path_loss(1.0, 2.2, 1e-3) == 1e-3
    assert path_loss(10.0, 2.0, 1e-3) == pytest.approx(1e-5, rel=1e-12)
    with pytest.raises(ValueError):
        path_loss(0.5, 2.0, 1e-3)


def test_pure_los_limit_has_constant_magnitude(scene):
    h = draw_bs_ris_channel(0, 0, scene, params(1e12), np.random.default_rng(0))
    L = gain(scene, scene.bs_positions[0], scene.ris_positions[0], 2.2)
    np.testing.assert_allclose(np.abs(h), np.sqrt(L), rtol=1e-5)
    psi, theta = los_angles(scene.bs_positions[0], scene.ris_positions[0])
    np.testing.assert_allclose(h, np.sqrt(L) * array_response(psi, theta, scene.config), rtol=1e-5)


def test_pure_nlos_mean_power(scene):
    h = draw_bs_ris_channel(1, 0, scene, params(0.0), np.random.default_rng(1), size=N_DRAWS)
    L = gain(scene, scene.bs_positions[1], scene.ris_positions[0], 2.2)
    assert np.mean(np.abs(h) ** 2) / L == pytest.approx(1.0, abs=0.02)


def test_unit_gain_single_element_power():
    sc = build_scene(SceneConfig(R_s=20, R_g=10, N_s=1, K_H=1, K_V=1, ris_positions=((7.0, 12.0),)))
    p = ChannelParams(PathLossParams(C=1.0, gamma_aR=0.0), RicianParams(1.0, 1.0, 1.0))
    h = draw_bs_ris_channel(0, 0, sc, p, np.random.default_rng(2), size=N_DRAWS)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.02)


def test_both_modes_share_los(scene):
    ch = draw_channel_set(scene, params(1e12), np.random.default_rng(3))
    np.testing.assert_allclose(ch.h_ris_point[0], ch.h_ris_point[1], rtol=1e-5)
    L = gain(scene, scene.ris_positions[0], scene.sample_points[2], 2.2)
    psi, theta = los_angles(scene.ris_positions[0], scene.sample_points[2])
    np.testing.assert_allclose(ch.h_ris_point[1, 0, 2], np.sqrt(L) * array_response(psi, theta, scene.config),
                               rtol=1e-5)


def test_modes_are_uncorrelated_without_los():
    sc = build_scene(SceneConfig(R_s=10, R_g=10, N_s=1, K_H=1, K_V=1, ris_positions=((2.0, 9.0),)))
    p = params(0.0, "iid")
    rng = np.random.default_rng(4)
    draws = np.array([draw_channel_set(sc, p, rng).h_ris_point[:, 0, 0, 0] for _ in range(20_000)])
    re, tr = draws[:, 0], draws[:, 1]
    corr = abs(np.mean(re * tr.conj())) / np.sqrt(np.mean(abs(re) ** 2) * np.mean(abs(tr) ** 2))
    assert corr < 0.02


def test_point_under_panel_is_singular():
    sc = build_scene(SceneConfig(R_s=10, R_g=10, N_s=1, K_H=1, K_V=1, ris_positions=((5.0, 5.0),)))
    with pytest.raises(SingularGeometryError):
        draw_ris_point_channel(0, 0, 0, sc, params(1.0), np.random.default_rng(0))
    with pytest.raises(SingularGeometryError):
        draw_channel_set(sc, params(1.0), np.random.default_rng(0))


@pytest.mark.parametrize("alpha", [0.0, 1.0, 10.0])
def test_direct_link_mean_power(scene, alpha):
    h = draw_bs_point_channel(0, 3, scene, params(alpha), np.random.default_rng(5), size=N_DRAWS)
    L = gain(scene, scene.bs_positions[0], scene.sample_points[3], 3.5)
    assert np.mean(np.abs(h) ** 2) / L == pytest.approx(1.0, abs=0.02)


def test_direct_link_is_reproducible(scene):
    a = draw_bs_point_channel(1, 0, scene, params(1.0), np.random.default_rng(9))
    b = draw_bs_point_channel(1, 0, scene, params(1.0), np.random.default_rng(9))
    assert isinstance(a, complex) and a == b


def test_channel_set_shapes():
    sc = build_scene(SceneConfig(R_s=20, R_g=10, N_s=1, K_H=2, K_V=1), seed=0)
    ch = draw_channel_set(sc, params(10.0), np.random.default_rng(0))
    assert ch.h_bs_ris.shape == (2, 1, 2)
    assert ch.h_ris_point.shape == (2, 1, 4, 2)
    assert ch.h_bs_point.shape == (2, 4)
    assert all(np.all(np.isfinite(x)) for x in (ch.h_bs_ris, ch.h_ris_point, ch.h_bs_point))


def test_channel_set_determinism(scene):
    p = params(10.0)
    a = draw_channel_set(scene, p, np.random.default_rng(7))
    b = draw_channel_set(scene, p, np.random.default_rng(7))
    c = draw_channel_set(scene, p, np.random.default_rng(8))
    assert a == b
    assert np.max(np.abs(a.h_ris_point - c.h_ris_point)) > 0


def test_los_part_scaling(scene):
    alpha = 4.0
    _, los, _ = draw_ris_point_channel(0, 0, 1, scene, params(alpha), np.random.default_rng(0),
                                       size=3, return_parts=True)
    L = gain(scene, scene.ris_positions[0], scene.sample_points[1], 2.2)
    np.testing.assert_allclose(np.abs(los), np.sqrt(L * alpha / (1 + alpha)), rtol=1e-12)


def test_correlated_nlos_covariance_converges():
    sc = build_scene(SceneConfig(R_s=20, R_g=10, N_s=1, K_H=4, K_V=2, ris_positions=((7.0, 12.0),)))
    _, _, nlos = draw_bs_ris_channel(0, 0, sc, params(0.0), np.random.default_rng(11), size=N_DRAWS,
                                     return_parts=True)
    L = gain(sc, sc.bs_positions[0], sc.ris_positions[0], 2.2)
    emp = nlos.T @ nlos.conj() / N_DRAWS / L
    sigma = nlos_covariance(sc, "sinc")
    assert np.linalg.norm(emp - sigma) / np.linalg.norm(sigma) < 0.05


def test_sinc_covariance_properties():
    sc = build_scene(SceneConfig(K_H=4, K_V=4))
    sigma = nlos_covariance(sc, "sinc")
    np.testing.assert_allclose(np.diag(sigma), 1.0)
    np.testing.assert_allclose(sigma, sigma.T)
    root = covariance_sqrt(sigma)
    np.testing.assert_allclose(root @ root, sigma, atol=1e-10)
    np.testing.assert_array_equal(nlos_covariance(sc, "iid"), np.eye(16))


def test_covariance_sqrt_rejects_indefinite():
    with pytest.raises(ValueError):
        covariance_sqrt(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        ChannelParams(PathLossParams(C=0.0)).validate()
    with pytest.raises(ValueError):
        ChannelParams(rician=RicianParams(-1.0)).validate()
    with pytest.raises(ValueError):
        ChannelParams(nlos_correlation="exp").validate()


def test_channel_csv_dump(scene):
    ch = draw_channel_set(scene, params(1.0), np.random.default_rng(0))
    lines = ch.to_csv().splitlines()
    assert lines[0] == "link,index,re,im"
    assert len(lines) == 1 + ch.h_bs_ris.size + ch.h_ris_point.size + ch.h_bs_point.size
