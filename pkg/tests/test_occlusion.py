import numpy as np
import pytest

from labelsplat import DepthMap, LabelMap
from labelsplat.occlusion import analyze_occlusion

from layered import layered_scene
from oracles import brute_occlusion


def two_rect_maps(front_depth=2.0, back_depth=5.0):
    # Label 2 (front) overlaps label 1 (back) along a 12 px vertical frontier.
    ids = np.zeros((24, 24), dtype=np.int32)
    ids[4:16, 2:14] = 1
    ids[4:16, 10:22] = 2
    depth = np.full((24, 24), 50.0)
    depth[ids == 1] = back_depth
    depth[ids == 2] = front_depth
    return LabelMap(ids=ids), DepthMap(values=depth.astype(np.float32))


def test_front_rect_occludes_back_rect():
    lm, dm = two_rect_maps()
    res = analyze_occlusion(lm, dm)
    assert res.labels == [1, 2]
    assert res.occluders[1] == [2]
    assert res.occluders[2] == []
    assert np.array_equal(res.unocclusion[1], lm.ids != 2)
    assert np.all(res.unocclusion[2])
    assert res.boundary_edges[(1, 2)] == 12


def test_pair_below_min_boundary_is_ignored():
    lm, dm = two_rect_maps()
    res = analyze_occlusion(lm, dm, min_boundary=13)
    assert res.occluders[1] == [] and res.occluders[2] == []
    assert np.all(res.unocclusion[1]) and np.all(res.unocclusion[2])
    assert res.boundary_edges[(1, 2)] == 12  # still reported


def test_equal_depths_occlude_neither():
    lm, dm = two_rect_maps(front_depth=3.0, back_depth=3.0)
    res = analyze_occlusion(lm, dm)
    assert res.occluders[1] == [] and res.occluders[2] == []


def test_depth_tolerance_creates_dead_zone():
    lm, dm = two_rect_maps(front_depth=4.75, back_depth=5.0)
    assert analyze_occlusion(lm, dm).occluders[1] == [2]
    # 4.75 is not below 5.0 * (1 - 0.1) = 4.5.
    assert analyze_occlusion(lm, dm, depth_tol=0.1).occluders[1] == []


def test_unlabeled_pixels_never_participate():
    ids = np.zeros((16, 16), dtype=np.int32)
    ids[:, :8] = 1  # label 1 only touches background/unlabeled
    lm = LabelMap(ids=ids)
    dm = DepthMap(values=np.full((16, 16), 2.0, dtype=np.float32))
    res = analyze_occlusion(lm, dm)
    assert res.labels == [1]
    assert res.occluders[1] == []
    assert np.all(res.unocclusion[1])
    assert res.boundary_edges == {}


def test_no_transitive_closure():
    # 1 behind 2 behind 3, but 1 and 3 never touch.
    ids = np.zeros((12, 40), dtype=np.int32)
    ids[:, 0:12] = 1
    ids[:, 12:26] = 2
    ids[:, 26:40] = 3
    depth = np.zeros((12, 40))
    depth[ids == 1] = 6.0
    depth[ids == 2] = 4.0
    depth[ids == 3] = 2.0
    res = analyze_occlusion(LabelMap(ids=ids), DepthMap(values=depth.astype(np.float32)))
    assert res.occluders[1] == [2]  # not [2, 3]
    assert res.occluders[2] == [3]
    assert res.occluders[3] == []


def test_mask_is_union_complement():
    ids = np.zeros((20, 20), dtype=np.int32)
    ids[0:20, 0:8] = 1
    ids[0:20, 8:14] = 2
    ids[0:20, 14:20] = 3
    depth = np.zeros((20, 20))
    depth[ids == 1] = 9.0
    depth[ids == 2] = 1.0
    depth[ids == 3] = 9.0
    # 2 touches both and is in front of both.
    res = analyze_occlusion(LabelMap(ids=ids), DepthMap(values=depth.astype(np.float32)))
    assert res.occluders[1] == [2] and res.occluders[3] == [2]
    assert np.array_equal(res.unocclusion[1], ids != 2)


def test_matches_brute_force_on_layered_scenes():
    rng = np.random.default_rng(20)
    for _ in range(25):
        lm, dm, _, _ = layered_scene(rng)
        res = analyze_occlusion(lm, dm)
        ref_occ, ref_masks = brute_occlusion(lm, dm)
        assert res.occluders == ref_occ
        for k in ref_masks:
            assert np.array_equal(res.unocclusion[k], ref_masks[k])


def test_matches_brute_force_on_noise_maps():
    # Speckle labels stress tiny regions and sub-threshold boundaries.
    rng = np.random.default_rng(21)
    for _ in range(10):
        ids = rng.integers(0, 5, size=(24, 24)).astype(np.int32)
        depth = rng.uniform(1.0, 9.0, size=(24, 24)).astype(np.float32)
        lm, dm = LabelMap(ids=ids), DepthMap(values=depth)
        for mb in (1, 8):
            res = analyze_occlusion(lm, dm, min_boundary=mb)
            ref_occ, ref_masks = brute_occlusion(lm, dm, min_boundary=mb)
            assert res.occluders == ref_occ
            for k in ref_masks:
                assert np.array_equal(res.unocclusion[k], ref_masks[k])


def test_layered_ground_truth_agrees_with_analysis():
    rng = np.random.default_rng(22)
    for _ in range(25):
        lm, dm, gt_occ, gt_masks = layered_scene(rng)
        res = analyze_occlusion(lm, dm)
        assert res.occluders == gt_occ
        for k in gt_masks:
            assert np.array_equal(res.unocclusion[k], gt_masks[k])


def test_rejects_mismatched_shapes_and_bad_params():
    lm, dm = two_rect_maps()
    with pytest.raises(ValueError):
        analyze_occlusion(lm, DepthMap(values=np.zeros((8, 8), dtype=np.float32)))
    with pytest.raises(ValueError):
        analyze_occlusion(lm, dm, min_boundary=0)
    with pytest.raises(ValueError):
        analyze_occlusion(lm, dm, depth_tol=1.0)
