"""Proximity metric semantics and blob segmentation."""

import math

import numpy as np
import pytest

from trajguide.geometry import DistanceField, Trajectory, expand_trajectory_to_mask
from trajguide.metrics import (
    InstanceMask,
    dtl,
    image_distance_field,
    proximity_score,
    score_scene,
    segment_blobs,
)
from trajguide.model import RenderedScene


def test_mask_on_the_trajectory_scores_exactly_one():
    traj = Trajectory(0, (((2.0, 2.0), (2.0, 13.0)),))
    field = image_distance_field(traj, (16, 16), 8)
    mask = field.values == 0.0
    assert mask.any()
    assert proximity_score(mask, field) == 1.0


def test_two_pixel_mask_averages_known_distances():
    traj = Trajectory(0, (((8.0, 8.0),),))
    field = image_distance_field(traj, (16, 16), 8)
    zr, zc = map(int, np.argwhere(field.values == 0.0)[0])
    assert field.values[zr, zc + 8] == 1.0
    mask = np.zeros_like(field.values, dtype=bool)
    mask[zr, zc] = True
    mask[zr, zc + 8] = True
    expected = (1.0 + math.exp(-1.0)) / 2.0
    assert abs(proximity_score(mask, field) - expected) < 1e-12


def test_image_distances_are_reported_in_cell_units():
    traj = Trajectory(0, (((8.0, 8.0),),))
    field = image_distance_field(traj, (16, 16), 8)
    assert field.values.shape == (128, 128)
    # one latent cell of separation reads as distance 1 regardless of scale
    coarse = image_distance_field(traj, (16, 16), 1)
    assert coarse.values.max() == pytest.approx(field.values.max(), abs=1.0)


def test_empty_mask_scores_zero():
    traj = Trajectory(0, (((8.0, 8.0),),))
    field = image_distance_field(traj, (16, 16), 8)
    assert proximity_score(np.zeros_like(field.values, dtype=bool), field) == 0.0


def test_mismatched_mask_shape_is_rejected():
    field = DistanceField((4, 4), np.zeros((4, 4)))
    with pytest.raises(ValueError, match="shapes differ"):
        proximity_score(np.zeros((3, 4), dtype=bool), field)


def test_moving_a_mask_away_lowers_its_score():
    traj = Trajectory(0, (((8.0, 2.0), (8.0, 13.0)),))
    field = image_distance_field(traj, (16, 16), 8)
    near = np.zeros_like(field.values, dtype=bool)
    far = np.zeros_like(near)
    near[60:76, 30:90] = True
    far[20:36, 30:90] = True
    assert proximity_score(near, field) > proximity_score(far, field)


def test_aggregate_ignores_unconstrained_and_charges_missing_tokens():
    traj = Trajectory(0, (((2.0, 2.0), (2.0, 13.0)),))
    field = image_distance_field(traj, (16, 16), 8)
    on = InstanceMask(0, field.values == 0.0)
    stray = InstanceMask(1, np.ones_like(field.values, dtype=bool))
    assert dtl([on, stray], [traj], (16, 16), 8) == 1.0
    assert dtl([stray], [traj], (16, 16), 8) == 0.0
    assert dtl([], [traj], (16, 16), 8) == 0.0
    assert dtl([], [], (16, 16), 8) == 0.0


def test_aggregate_averages_over_constrained_tokens():
    t0 = Trajectory(0, (((2.0, 2.0), (2.0, 13.0)),))
    t1 = Trajectory(1, (((12.0, 2.0), (12.0, 13.0)),))
    f0 = image_distance_field(t0, (16, 16), 8)
    on = InstanceMask(0, f0.values == 0.0)
    assert dtl([on], [t0, t1], (16, 16), 8) == pytest.approx(0.5)


def test_scores_are_stable_across_render_resolutions():
    traj = Trajectory(0, (((2.0, 2.0), (13.0, 13.0)),))
    mask16 = expand_trajectory_to_mask(traj, 2.0, (16, 16)).to_mask()
    coarse = proximity_score(mask16, image_distance_field(traj, (16, 16), 1))
    mask128 = np.kron(mask16, np.ones((8, 8), dtype=bool))
    fine = proximity_score(mask128, image_distance_field(traj, (16, 16), 8))
    assert abs(coarse - fine) < 0.05


def _toy_scene():
    intensity = np.zeros((12, 12))
    labels = np.full((12, 12), -1)
    intensity[1:4, 1:4] = 1.0
    labels[1:4, 1:4] = 0
    intensity[7:10, 6:11] = 0.6
    labels[7:10, 6:11] = 1
    masks = {0: labels == 0, 1: labels == 1}
    centers = {0: (2.0, 2.0), 1: (8.0, 8.0)}
    sigmas = {0: 1.0, 1: 1.0}
    return RenderedScene(intensity, labels, centers, sigmas, masks, None, 1)


def test_threshold_segmentation_recovers_separated_blobs():
    scene = _toy_scene()
    found = segment_blobs(scene, mode="threshold", threshold=0.5)
    assert [b.token_index for b in found] == [0, 1]
    np.testing.assert_array_equal(found[0].mask, scene.masks[0])
    np.testing.assert_array_equal(found[1].mask, scene.masks[1])


def test_threshold_segmentation_attributes_by_majority_label():
    scene = _toy_scene()
    scene.labels[7, 6] = 0
    found = segment_blobs(scene, mode="threshold", threshold=0.5)
    assert [b.token_index for b in found] == [0, 1]


def test_ground_truth_segmentation_copies_the_renderer_footprints():
    scene = _toy_scene()
    found = segment_blobs(scene)
    assert [b.token_index for b in found] == [0, 1]
    found[0].mask[:] = False
    assert scene.masks[0].any()


def test_unknown_segmentation_mode_is_rejected():
    with pytest.raises(ValueError, match="segmentation mode"):
        segment_blobs(_toy_scene(), mode="watershed")


def test_scene_scoring_reports_per_token_values():
    scene = _toy_scene()
    trajs = [Trajectory(0, (((2.0, 2.0),),)), Trajectory(1, (((8.0, 8.0),),))]
    out = score_scene(scene, trajs, (12, 12), 1)
    assert set(out) == {"dtl", "per_token", "centroid_distance"}
    assert set(out["per_token"]) == {0, 1}
    assert out["centroid_distance"][0] == 0.0
    assert out["dtl"] == pytest.approx(np.mean(list(out["per_token"].values())))
