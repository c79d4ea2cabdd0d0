import math
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drmanifold.dataset import (
    AugmentationCapacityError,
    AugmentationPlan,
    DesignMatrix,
    LabeledSample,
    SourceImage,
    augmented_design_matrix,
    build_augmented_set,
    make_folds,
    plan_augmentation,
    read_manifest,
    standardize_apply,
    standardize_fit,
    unroll,
)
from drmanifold.imaging import ROTATION_ANGLES, rotate


def _sources(counts, side=4, seed=0):
    rng = np.random.default_rng(seed)
    out, gid = [], 0
    for label, n in enumerate(counts):
        for _ in range(n):
            out.append(SourceImage(rng.integers(0, 256, (side, side), dtype=np.uint8), label, gid))
            gid += 1
    return out


# -- unroll ------------------------------------------------------------------

def test_unroll_canvas_length():
    assert unroll(np.zeros((256, 388), np.uint8)).shape == (256 * 388,) == (99328,)


def test_unroll_row_major():
    np.testing.assert_array_equal(unroll(np.array([[1, 2], [3, 4]], np.uint8)), [1.0, 2.0, 3.0, 4.0])


def test_unroll_constant():
    v = unroll(np.full((3, 7), 5, np.uint8))
    assert v.dtype == np.float64 and (v == 5).all()


def test_labeled_sample_rejects_bad_label():
    with pytest.raises(ValueError):
        LabeledSample(np.zeros(3), 5, 0)


def test_design_matrix_shape_checks():
    with pytest.raises(ValueError):
        DesignMatrix(np.zeros((0, 3)), [], [])
    with pytest.raises(ValueError):
        DesignMatrix(np.zeros((2, 3)), [0], [0, 1])


# -- augmentation ------------------------------------------------------------

def test_reference_plan_counts():
    # originals per class as in the reference sample set
    sizes = [60, 59, 148, 28, 26]
    labels = np.repeat(np.arange(5), sizes)
    picks = plan_augmentation(labels, AugmentationPlan.reference())
    added = Counter(int(labels[i]) for i, _ in picks)
    assert dict(added) == {1: 100, 2: 20, 3: 100, 4: 100}
    assert added[0] == 0


def test_empty_plan_is_identity():
    src = _sources([6, 6, 6, 6, 6])
    out = build_augmented_set(src, AugmentationPlan())
    assert len(out) == len(src)
    for s, o in zip(src, out):
        np.testing.assert_array_equal(o.features, unroll(s.image))
        assert (o.label, o.group_id, o.is_augmented) == (s.label, s.group_id, False)


def test_one_source_six_rotations():
    src = [SourceImage(np.arange(25, dtype=np.uint8).reshape(5, 5), 1, 42)]
    out = build_augmented_set(src, AugmentationPlan({1: 6}))
    copies = out[1:]
    assert len(copies) == 6
    assert all(c.group_id == 42 and c.label == 1 and c.is_augmented for c in copies)
    expected = [unroll(rotate(src[0].image, a)) for a in ROTATION_ANGLES]
    for c, e in zip(copies, expected):
        np.testing.assert_array_equal(c.features, e)


def test_capacity_error():
    with pytest.raises(AugmentationCapacityError):
        plan_augmentation([1, 1], AugmentationPlan({1: 13}))


@pytest.mark.parametrize("additions", [{0: 1}, {1: -1}, {7: 1}])
def test_plan_validation(additions):
    with pytest.raises(ValueError):
        AugmentationPlan(additions)


def test_plan_rejects_unknown_angle():
    with pytest.raises(ValueError):
        AugmentationPlan({1: 1}, angles=(30,))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=5, max_size=5), st.data(), st.integers(0, 2**32 - 1))
def test_plan_properties(sizes, data, seed):
    labels = np.repeat(np.arange(5), sizes)
    adds = {c: data.draw(st.integers(0, 6 * sizes[c])) for c in range(1, 5)}
    picks = plan_augmentation(labels, AugmentationPlan(adds, seed=seed))
    assert len(set(picks)) == len(picks)
    got = Counter(int(labels[i]) for i, _ in picks)
    assert all(got[c] == adds[c] for c in range(1, 5))
    assert got[0] == 0
    assert picks == plan_augmentation(labels, AugmentationPlan(adds, seed=seed))


def test_array_and_sample_paths_agree():
    src = _sources([5, 5, 5, 5, 5], side=6, seed=3)
    plan = AugmentationPlan({1: 7, 2: 3, 3: 30, 4: 1}, seed=9)
    samples = build_augmented_set(src, plan)
    dm = augmented_design_matrix(np.stack([s.image for s in src]), [s.label for s in src],
                                 [s.group_id for s in src], plan)
    ref = DesignMatrix.from_samples(samples)
    np.testing.assert_array_equal(dm.values, ref.values)
    np.testing.assert_array_equal(dm.labels, ref.labels)
    np.testing.assert_array_equal(dm.groups, ref.groups)
    np.testing.assert_array_equal(dm.augmented, ref.augmented)


# -- standardization ---------------------------------------------------------

def test_standardize_one_two_three():
    s = standardize_fit(np.array([[1.0], [2.0], [3.0]]))
    assert s.mean[0] == 2.0
    assert s.std[0] == pytest.approx(math.sqrt(2 / 3), abs=1e-12)
    out = standardize_apply(s, np.array([[1.0], [2.0], [3.0]]))
    np.testing.assert_allclose(out.ravel(), [-1.2247, 0.0, 1.2247], atol=1e-4)


def test_standardize_constant_column():
    x = np.array([[4.0, 1.0], [4.0, 2.0], [4.0, 6.0]])
    s = standardize_fit(x)
    assert s.mean[0] == 4.0 and s.std[0] == 1.0
    assert (standardize_apply(s, x)[:, 0] == 0).all()


def test_standardize_already_standard():
    x = np.array([[-1.0], [1.0]])
    s = standardize_fit(x)
    assert abs(s.mean[0]) < 1e-12 and s.std[0] == pytest.approx(1.0)


def test_standardize_errors():
    with pytest.raises(ValueError):
        standardize_fit(np.ones((1, 3)))
    with pytest.raises(ValueError):
        standardize_apply(standardize_fit(np.eye(3)), np.ones((2, 4)))


def test_standardize_passes_labels_and_groups():
    dm = DesignMatrix(np.arange(12.0).reshape(4, 3), [0, 1, 2, 3], [7, 7, 8, 9])
    out = standardize_apply(standardize_fit(dm), dm)
    np.testing.assert_array_equal(out.labels, dm.labels)
    np.testing.assert_array_equal(out.groups, dm.groups)


def test_global_scale_keeps_variance_ratios():
    x = np.random.default_rng(0).normal(size=(50, 3)) * [1.0, 5.0, 0.1]
    s = standardize_fit(x, per_column=False)
    z = standardize_apply(s, x)
    assert np.mean(z ** 2) == pytest.approx(1.0)
    np.testing.assert_allclose(z.std(axis=0) / z.std(axis=0)[0], x.std(axis=0) / x.std(axis=0)[0])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 30), st.integers(1, 6), st.floats(-1e3, 1e3), st.floats(1e-3, 1e3), st.integers(0, 999))
def test_standardized_training_means_vanish(n, k, shift, scale, seed):
    x = shift + scale * np.random.default_rng(seed).normal(size=(n, k))
    z = standardize_apply(standardize_fit(x), x)
    assert np.abs(z.mean(axis=0)).max() < 1e-9


# -- folds -------------------------------------------------------------------

def test_hundred_singletons_balanced():
    f = make_folds((np.zeros(100, int), np.arange(100)), 5, seed=0)
    assert sorted(Counter(f.fold_of_group.values()).values()) == [20] * 5


def test_source_and_copies_share_fold():
    labels = np.array([0] * 5 + [1] * 5 + [1, 1, 1])
    groups = np.array(list(range(10)) + [6, 6, 6])
    f = make_folds((labels, groups), 5, seed=1)
    folds = f.sample_folds(groups)
    assert len(set(folds[groups == 6])) == 1


def test_folds_deterministic():
    m = (np.repeat(np.arange(5), 20), np.arange(100))
    a, b = make_folds(m, 5, seed=4), make_folds(m, 5, seed=4)
    assert a.fold_of_group == b.fold_of_group
    assert make_folds(m, 5, seed=5).fold_of_group != a.fold_of_group


def test_folds_need_enough_groups():
    with pytest.raises(ValueError):
        make_folds((np.array([0, 0, 0, 1, 1, 1, 1, 1]), np.arange(8)), 5)


def test_group_with_two_labels_rejected():
    with pytest.raises(ValueError):
        make_folds((np.array([0, 1] + [0] * 5 + [1] * 5), np.array([0, 0] + list(range(1, 11)))), 5)


def test_split_masks_partition():
    m = (np.repeat(np.arange(2), 10), np.arange(20))
    f = make_folds(m, 5)
    for k in range(5):
        tr, te = f.split(m[1], k)
        assert not (tr & te).any() and (tr | te).all() and te.sum() == 4


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(5, 25), min_size=5, max_size=5), st.data(), st.integers(0, 2**32 - 1))
def test_folds_leak_free_and_stratified(sizes, data, seed):
    labels0 = np.repeat(np.arange(5), sizes)
    adds = {c: data.draw(st.integers(0, 6 * sizes[c])) for c in range(1, 5)}
    picks = plan_augmentation(labels0, AugmentationPlan(adds, seed=seed))
    src = np.concatenate([np.arange(len(labels0)), np.array([p[0] for p in picks], dtype=int)])
    labels, groups = labels0[src], src
    f = make_folds((labels, groups), 5, seed=seed)
    folds = f.sample_folds(groups)
    for g in np.unique(groups):
        assert len(set(folds[groups == g])) == 1
    for c in range(5):
        per_fold = Counter(f.fold_of_group[g] for g in np.unique(groups[labels == c]))
        counts = [per_fold.get(k, 0) for k in range(5)]
        assert max(counts) - min(counts) <= 1
    assert set(f.fold_of_group.values()) <= set(range(5))


# -- manifest ----------------------------------------------------------------

def test_manifest_relative_paths(tmp_path):
    (tmp_path / "m.csv").write_text("path,label\na.png,0\n/abs/b.png,4\n")
    rows = read_manifest(tmp_path / "m.csv")
    assert rows == [(tmp_path / "a.png", 0), (Path("/abs/b.png"), 4)]


@pytest.mark.parametrize("text", ["file,grade\na.png,0\n", "path,label\na.png,5\n", "path,label\na.png,x\n"])
def test_manifest_errors(tmp_path, text):
    (tmp_path / "m.csv").write_text(text)
    with pytest.raises(ValueError):
        read_manifest(tmp_path / "m.csv")
