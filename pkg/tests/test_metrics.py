"""Metric formula tests: semantic scores, completeness, depth, pose,
zero-shot classification, segmentation mIoU."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from maploc.errors import DimensionMismatch, EmptyCloud, NoValidPixels
from maploc.geometry import LabeledCloud, RigidTransform, apply_transform
from maploc.metrics import (
    ClassEmbeddings,
    classify_pixels,
    depth_scores,
    pose_scores,
    relative_pose_pairs,
    resize_labels_nearest,
    segmentation_miou,
    semantic_scores,
)

from synthbundle import make_embeddings, oracle_semantic


def cloud(points, labels):
    return LabeledCloud(np.asarray(points, dtype=float), labels)


class TestSemanticScores:
    def test_identity_perfect(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(200, 3))
        labs = rng.integers(1, 5, size=200)
        s = semantic_scores(cloud(pts, labs), cloud(pts, labs))
        assert (s.miou, s.acc, s.mcomp, s.mdcomp) == (1.0, 1.0, 1.0, 1.0)
        assert s.raw_mean_nn_distance == 0.0
        assert s.raw_median_nn_distance == 0.0
        assert not s.no_shared_classes

    def test_swapped_labels_zero(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
        gt = cloud(pts, [1, 1, 2, 2])
        pred = cloud(pts, [2, 2, 1, 1])
        s = semantic_scores(pred, gt)
        assert s.acc == 0.0 and s.miou == 0.0

    def test_four_point_example(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
        gt = cloud(pts, [1, 1, 2, 2])
        pred = cloud(pts, [1, 2, 2, 2])
        s = semantic_scores(pred, gt)
        assert s.acc == 0.75
        assert s.per_class_iou[1] == pytest.approx(1 / 2, abs=1e-15)
        assert s.per_class_iou[2] == pytest.approx(2 / 3, abs=1e-15)
        assert s.miou == pytest.approx(7 / 12, abs=1e-15)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(11)
        for trial in range(8):
            n_gt, n_pred = rng.integers(20, 120, size=2)
            gt_pts = np.round(rng.normal(size=(n_gt, 3)), 1)
            pred_pts = np.round(rng.normal(size=(n_pred, 3)), 1)
            gt_labs = rng.integers(1, 5, size=n_gt)
            pred_labs = rng.integers(0, 5, size=n_pred)  # some void
            if not np.any(pred_labs != 0):
                pred_labs[0] = 1
            got = semantic_scores(cloud(pred_pts, pred_labs), cloud(gt_pts, gt_labs))
            want = oracle_semantic(pred_pts, pred_labs, gt_pts, gt_labs)
            assert abs(got.acc - want["acc"]) < 1e-12
            assert abs(got.miou - want["miou"]) < 1e-12
            assert abs(got.mcomp - want["mcomp"]) < 1e-12
            assert abs(got.mdcomp - want["mdcomp"]) < 1e-12

    def test_pred_void_excluded_from_index(self):
        gt = cloud([[0, 0, 0]], [3])
        # nearest pred is void and must not transfer its label
        pred = cloud([[0.01, 0, 0], [5, 0, 0]], [0, 3])
        s = semantic_scores(pred, gt, tau=10.0)
        assert s.acc == 1.0

    def test_gt_void_filtered(self):
        pts = np.array([[0, 0, 0], [1, 0, 0]], dtype=float)
        s = semantic_scores(cloud(pts, [1, 1]), cloud(pts, [1, 0]))
        assert s.acc == 1.0 and s.miou == 1.0

    def test_completeness_counts_missing_class_as_zero(self):
        gt = cloud([[0, 0, 0], [1, 0, 0]], [1, 2])
        pred = cloud([[0, 0, 0]], [1])  # class 2 never predicted
        s = semantic_scores(pred, gt)
        assert s.mcomp == 0.5 and s.mdcomp == 0.5

    def test_no_shared_classes_flag(self):
        gt = cloud([[0, 0, 0]], [1])
        pred = cloud([[0, 0, 0]], [2])
        s = semantic_scores(pred, gt)
        assert s.no_shared_classes
        assert s.mcomp == 0.0 and s.mdcomp == 0.0
        assert np.isnan(s.raw_mean_nn_distance)

    def test_direction_switch(self):
        # one pred point within tau of GT, plus a distant extra GT point
        gt = cloud([[0, 0, 0], [10, 0, 0]], [1, 1])
        pred = cloud([[0.05, 0, 0]], [1])
        forward = semantic_scores(pred, gt, tau=0.1)
        assert forward.mcomp == 1.0  # every pred point is near GT
        backward = semantic_scores(pred, gt, tau=0.1,
                                   completeness_direction="gt_to_pred")
        assert backward.mcomp == 0.5  # the distant GT point is uncovered

    def test_tau_monotonicity(self):
        rng = np.random.default_rng(5)
        gt_pts = rng.normal(size=(80, 3))
        pred_pts = gt_pts + rng.normal(scale=0.08, size=(80, 3))
        labs = rng.integers(1, 4, size=80)
        taus = [0.5, 0.2, 0.1, 0.05, 0.01]
        prev_mc, prev_md = 2.0, 2.0
        for tau in taus:
            s = semantic_scores(cloud(pred_pts, labs), cloud(gt_pts, labs), tau=tau)
            assert s.mcomp <= prev_mc + 1e-15
            assert s.mdcomp <= prev_md + 1e-15
            prev_mc, prev_md = s.mcomp, s.mdcomp

    def test_rigid_invariance(self):
        rng = np.random.default_rng(9)
        gt_pts = rng.normal(size=(60, 3))
        pred_pts = gt_pts + rng.normal(scale=0.05, size=(60, 3))
        labs_gt = rng.integers(1, 4, size=60)
        labs_pred = rng.integers(1, 4, size=60)
        base = semantic_scores(cloud(pred_pts, labs_pred), cloud(gt_pts, labs_gt))
        T = RigidTransform(Rotation.random(random_state=3).as_matrix(), rng.normal(size=3))
        moved = semantic_scores(
            apply_transform(T, cloud(pred_pts, labs_pred)),
            apply_transform(T, cloud(gt_pts, labs_gt)),
        )
        assert moved.acc == base.acc
        assert moved.miou == base.miou
        assert abs(moved.mcomp - base.mcomp) < 1e-9
        assert abs(moved.mdcomp - base.mdcomp) < 1e-9

    def test_permutation_invariance(self):
        rng = np.random.default_rng(13)
        gt_pts = rng.normal(size=(50, 3))
        pred_pts = rng.normal(size=(40, 3))
        gt_labs = rng.integers(1, 4, size=50)
        pred_labs = rng.integers(1, 4, size=40)
        base = semantic_scores(cloud(pred_pts, pred_labs), cloud(gt_pts, gt_labs))
        perm = rng.permutation(50)
        shuffled = semantic_scores(cloud(pred_pts, pred_labs),
                                   cloud(gt_pts[perm], gt_labs[perm]))
        assert shuffled.acc == base.acc and shuffled.miou == base.miou

    def test_empty_clouds_rejected(self):
        ok = cloud([[0, 0, 0]], [1])
        with pytest.raises(EmptyCloud):
            semantic_scores(cloud(np.empty((0, 3)), []), ok)
        with pytest.raises(EmptyCloud):
            semantic_scores(ok, cloud([[0, 0, 0]], [0]))  # all-void GT
        with pytest.raises(EmptyCloud):
            semantic_scores(cloud([[0, 0, 0]], [0]), ok)  # all-void pred


class TestDepthScores:
    def test_exact(self):
        d = np.random.default_rng(0).uniform(1, 5, size=(10, 10))
        s = depth_scores(d, d)
        assert s.absrel == 0.0 and s.delta_125 == 1.0

    def test_half_depth_no_scaling(self):
        gt = np.full((4, 4), 2.0)
        s = depth_scores(gt / 2, gt, scale_mode="none")
        assert s.absrel == 0.5 and s.delta_125 == 0.0

    def test_half_depth_median_scaling(self):
        gt = np.full((4, 4), 2.0)
        s = depth_scores(gt / 2, gt, scale_mode="median")
        assert s.absrel == 0.0 and s.delta_125 == 1.0

    def test_invalid_pixels_excluded(self):
        gt = np.array([[2.0, 0.0], [2.0, 2.0]])
        pred = np.array([[2.0, 9.0], [0.0, 2.0]])
        s = depth_scores(pred, gt, scale_mode="none")
        assert s.absrel == 0.0  # only the two jointly valid pixels count

    def test_no_valid(self):
        with pytest.raises(NoValidPixels):
            depth_scores(np.zeros((3, 3)), np.ones((3, 3)))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            depth_scores(np.ones((2, 2)), np.ones((3, 3)))

    def test_delta_strictness(self):
        gt = np.full((2, 2), 1.0)
        s = depth_scores(gt * 1.25, gt, scale_mode="none")
        assert s.delta_125 == 0.0  # ratio exactly 1.25 is not under the bar


def _offset_pair(rot_deg, trans_deg):
    gt = RigidTransform(np.eye(3), [1.0, 0.0, 0.0])
    Rr = Rotation.from_euler("z", rot_deg, degrees=True).as_matrix()
    t = Rotation.from_euler("z", trans_deg, degrees=True).apply([1.0, 0.0, 0.0])
    return gt, RigidTransform(Rr, t)


class TestPoseScores:
    def test_exact_predictions(self):
        pairs = [_offset_pair(0, 0)] * 5
        s = pose_scores(pairs)
        assert s.rra_at[15] == 1.0 and s.rta_at[15] == 1.0 and s.maa30 == 1.0

    def test_ten_degree_offset(self):
        pairs = [_offset_pair(10.000001, 10.000001)] * 3
        s = pose_scores(pairs, thresholds=(5, 10, 11, 15, 30))
        for theta in (5, 10):
            assert s.rra_at[theta] == 0.0 and s.rta_at[theta] == 0.0
        for theta in (11, 15, 30):
            assert s.rra_at[theta] == 1.0 and s.rta_at[theta] == 1.0
        assert abs(s.maa30 - 20 / 30) < 1e-12

    def test_half_corrupted(self):
        pairs = [_offset_pair(0, 0), _offset_pair(20, 20)] * 2
        s = pose_scores(pairs)
        assert s.rra_at[15] == 0.5 and s.rta_at[15] == 0.5

    def test_monotone_thresholds(self):
        rng = np.random.default_rng(3)
        pairs = [_offset_pair(float(rng.uniform(0, 40)), float(rng.uniform(0, 40)))
                 for _ in range(30)]
        s = pose_scores(pairs, thresholds=tuple(range(1, 31)))
        rra = [s.rra_at[t] for t in range(1, 31)]
        rta = [s.rta_at[t] for t in range(1, 31)]
        assert all(a <= b for a, b in zip(rra, rra[1:]))
        assert all(a <= b for a, b in zip(rta, rta[1:]))
        assert s.maa30 <= min(s.rra_at[30], s.rta_at[30]) + 1e-15

    def test_degenerate_translation_counts_as_pi(self):
        gt = RigidTransform(np.eye(3), [1.0, 0.0, 0.0])
        pred = RigidTransform(np.eye(3), [0.0, 0.0, 0.0])  # no direction
        s = pose_scores([(gt, pred)])
        assert s.rta_at[30] == 0.0
        assert s.rra_at[30] == 1.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyCloud):
            pose_scores([])

    def test_relative_pose_pairs_count(self):
        poses = [RigidTransform(np.eye(3), [k, 0, 0]) for k in range(4)]
        pairs = relative_pose_pairs(poses, poses)
        assert len(pairs) == 6
        s = pose_scores(pairs)
        assert s.maa30 == 1.0


class TestClassifyPixels:
    def setup_method(self):
        self.emb = ClassEmbeddings(names=("a", "b", "c", "d"),
                                   vectors=make_embeddings(4, 8))

    def test_exact_embedding_row(self):
        feats = np.stack([self.emb.vectors[k].reshape(1, -1) for k in range(4)], axis=0)
        labels = classify_pixels(feats, self.emb)
        assert labels.reshape(-1).tolist() == [1, 2, 3, 4]

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        feats = rng.normal(size=(6, 7, 8))
        base = classify_pixels(feats, self.emb)
        scaled = classify_pixels(feats * 1000.0, self.emb)
        assert np.array_equal(base, scaled)

    def test_mixture_goes_to_dominant(self):
        e = np.eye(8)
        emb = ClassEmbeddings(names=("x", "y", "z"), vectors=e[:3])
        feat = (0.9 * e[0] + 0.1 * e[1]).reshape(1, 1, 8)
        assert classify_pixels(feat, emb)[0, 0] == 1

    def test_zero_norm_is_void(self):
        feats = np.zeros((2, 2, 8))
        assert np.all(classify_pixels(feats, self.emb) == 0)

    def test_tie_smallest_class(self):
        e = np.eye(8)
        emb = ClassEmbeddings(names=("x", "y"), vectors=e[:2])
        feat = (e[0] + e[1]).reshape(1, 1, 8)  # equal cosine to both
        assert classify_pixels(feat, emb)[0, 0] == 1

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            classify_pixels(np.zeros((2, 2, 5)), self.emb)

    def test_embedding_norm_validated(self):
        with pytest.raises(ValueError):
            ClassEmbeddings(names=("a",), vectors=np.array([[2.0, 0, 0]]))


class TestSegmentationMiou:
    def test_identity(self):
        gt = np.array([[1, 1], [2, 2]])
        miou, per_class = segmentation_miou(gt, gt, num_classes=4)
        assert miou == 1.0 and per_class == {1: 1.0, 2: 1.0}

    def test_all_void_rejected(self):
        with pytest.raises(NoValidPixels):
            segmentation_miou(np.ones((2, 2), int), np.zeros((2, 2), int), num_classes=4)

    def test_two_by_two_example(self):
        gt = np.array([[1, 1], [2, 2]])
        pred = np.array([[1, 2], [2, 2]])
        miou, per_class = segmentation_miou(pred, gt, num_classes=4)
        assert per_class[1] == pytest.approx(1 / 2)
        assert per_class[2] == pytest.approx(2 / 3)
        assert miou == pytest.approx(7 / 12)

    def test_void_gt_pixels_excluded(self):
        gt = np.array([[1, 0], [0, 1]])
        pred = np.array([[1, 2], [2, 1]])  # pred over void GT is ignored
        miou, _ = segmentation_miou(pred, gt, num_classes=4)
        assert miou == 1.0

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            segmentation_miou(np.ones((2, 2), int), np.ones((2, 3), int), 4)


class TestResize:
    def test_identity_resize(self):
        lab = np.arange(12).reshape(3, 4)
        assert np.array_equal(resize_labels_nearest(lab, (3, 4)), lab)

    def test_upsample_preserves_values(self):
        lab = np.array([[1, 2], [3, 4]])
        out = resize_labels_nearest(lab, (4, 4))
        assert set(np.unique(out)) == {1, 2, 3, 4}
        assert out[0, 0] == 1 and out[3, 3] == 4

    def test_downsample(self):
        lab = np.repeat(np.repeat(np.array([[5, 7], [9, 11]]), 3, axis=0), 3, axis=1)
        out = resize_labels_nearest(lab, (2, 2))
        assert np.array_equal(out, [[5, 7], [9, 11]])
