import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from starcco.scene import (
    SceneConfig,
    SingularGeometryError,
    array_response,
    build_scene,
    element_offsets,
    element_position,
    grid_points,
    los_angles,
    wave_vector,
)


def test_four_point_grid_centres():
    pts = grid_points(SceneConfig(R_s=100, R_g=50))
    np.testing.assert_array_equal(pts, [[25, 25, 0], [75, 25, 0], [25, 75, 0], [75, 75, 0]])


def test_bs_positions_on_far_edge():
    scene = build_scene(SceneConfig(R_s=100, h_b=25))
    np.testing.assert_array_equal(scene.bs_positions, [[100, 0, 25], [100, 100, 25]])


def test_coincident_fixed_panels_rejected():
    with pytest.raises(ValueError, match="overlap"):
        build_scene(SceneConfig(N_s=2, ris_positions=((10, 10), (10, 10))))


@pytest.mark.parametrize("cfg", [
    SceneConfig(R_s=5, R_g=10), SceneConfig(h_ris=30), SceneConfig(N_s=0), SceneConfig(K_H=0),
    SceneConfig(N_s=1, ris_positions=((150, 10),)), SceneConfig(N_s=2, ris_positions=((1, 1),)),
])
def test_invalid_configs_rejected(cfg):
    with pytest.raises(ValueError):
        cfg.validate()


def test_placement_gives_up_after_bounded_attempts():
    with pytest.raises(ValueError, match="could not place"):
        build_scene(SceneConfig(R_s=10, R_g=10, N_s=5, max_placement_attempts=200))


@pytest.mark.parametrize("k, expected", [(1, [0, 0, 0]), (5, [0, 0, 0.05]), (4, [0, 0.15, 0])])
def test_element_position_examples(k, expected):
    cfg = SceneConfig(K_H=4, K_V=2, M_H=0.05, M_V=0.05)
    np.testing.assert_allclose(element_position(k, cfg), expected, atol=1e-15)


@pytest.mark.parametrize("k", [0, 9, -1])
def test_element_position_out_of_range(k):
    with pytest.raises(IndexError):
        element_position(k, SceneConfig(K_H=4, K_V=2))


@pytest.mark.parametrize("psi, theta, lam, expected", [
    (0.3, math.pi / 2, 1.0, [0, 0, 2 * math.pi]),
    (0.0, 0.0, 1.0, [2 * math.pi, 0, 0]),
    (math.pi / 2, 0.0, 0.1, [0, 20 * math.pi, 0]),
])
def test_wave_vector_examples(psi, theta, lam, expected):
    np.testing.assert_allclose(wave_vector(psi, theta, lam), expected, atol=1e-12)


def test_wave_vector_rejects_non_positive_wavelength():
    with pytest.raises(ValueError):
        wave_vector(0.0, 0.0, 0.0)


def test_array_response_broadside_is_all_ones():
    np.testing.assert_allclose(array_response(0.0, 0.0, SceneConfig()), np.ones(8), atol=1e-15)


def test_array_response_single_element():
    np.testing.assert_allclose(array_response(1.1, 0.4, SceneConfig(K_H=1, K_V=1)), [1.0])


def test_array_response_half_wavelength_pair():
    cfg = SceneConfig(K_H=2, K_V=1, M_H=0.05, wavelength=0.1)
    np.testing.assert_allclose(array_response(math.pi / 2, 0.0, cfg), [1.0, -1.0], atol=1e-12)


def test_los_angles_bs_to_panel():
    psi, theta = los_angles((100, 0, 25), (50, 0, 5))
    d3 = math.sqrt(50 ** 2 + 20 ** 2)
    assert theta == pytest.approx(math.asin(20 / d3), abs=1e-15)
    assert psi == pytest.approx(math.acos(50 / 50), abs=1e-15)


def test_los_angles_equal_heights():
    assert los_angles((0, 0, 5), (3, 4, 5))[1] == 0.0


def test_los_angles_vertical_alignment():
    with pytest.raises(SingularGeometryError):
        los_angles((10, 10, 25), (10, 10, 0))


@settings(max_examples=50, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-math.pi / 2, math.pi / 2),
       st.integers(1, 6), st.integers(1, 6))
def test_array_response_unit_modulus(psi, theta, K_H, K_V):
    a = array_response(psi, theta, SceneConfig(K_H=K_H, K_V=K_V))
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7))
def test_element_offsets_form_the_grid(K_H, K_V):
    cfg = SceneConfig(K_H=K_H, K_V=K_V)
    off = element_offsets(cfg)
    assert len({tuple(o) for o in off}) == K_H * K_V
    assert len(set(off[:, 1])) == K_H and len(set(off[:, 2])) == K_V
    assert np.all(off[:, 0] == 0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(1.0, 500.0), st.floats(1.0, 500.0))
def test_sample_count_formula(R_s, R_g):
    if R_s < R_g:
        R_s, R_g = R_g, R_s
    cfg = SceneConfig(R_s=R_s, R_g=R_g, N_s=1, ris_positions=((0.0, 0.0),))
    assert grid_points(cfg).shape[0] == math.ceil(R_s / R_g) ** 2 == cfg.N


def test_build_scene_is_deterministic():
    a = build_scene(SceneConfig(N_s=3), seed=11)
    b = build_scene(SceneConfig(N_s=3), seed=11)
    assert a.to_json() == b.to_json()
    c = build_scene(SceneConfig(N_s=3), seed=12)
    assert not np.array_equal(a.ris_positions, c.ris_positions)


def test_random_panels_respect_separation_and_region():
    scene = build_scene(SceneConfig(N_s=6), seed=2)
    xy = scene.ris_positions[:, :2]
    assert np.all((xy >= 0) & (xy <= 100))
    d = np.linalg.norm(xy[:, None] - xy[None], axis=-1)
    assert np.all(d[~np.eye(6, dtype=bool)] >= 10.0)
    assert np.all(scene.ris_positions[:, 2] == 5.0)


def test_larger_scenes_extend_smaller_ones():
    small = build_scene(SceneConfig(N_s=2), seed=5)
    large = build_scene(SceneConfig(N_s=4), seed=5)
    np.testing.assert_array_equal(large.ris_positions[:2], small.ris_positions)


def test_scene_json_round_trip_fields():
    scene = build_scene(SceneConfig(R_s=40, N_s=1), seed=1)
    doc = json.loads(scene.to_json())
    assert doc["config"]["R_s"] == 40
    assert np.array_equal(np.array(doc["sample_points"]), scene.sample_points)
