import numpy as np
import pytest

from sarchange.imagery import DifferenceImage, Raster, log_ratio
from sarchange.preclassify import (
    CHANGED,
    INTERMEDIATE,
    UNCHANGED,
    PreclassifyError,
    draw_samples,
    fcm,
    hierarchical_trimap,
    trimap_from_raster,
    trimap_to_raster,
    TriMap,
)
from sarchange.rng import Rng
from sarchange.synthgen import default_scene, generate


def fcm_reference(x, c, m, iters):
    """Scalar-loop reimplementation of the update equations (one membership
    refresh after the last center update, clusters sorted at the end)."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    centers = [float(np.quantile(x, (k + 0.5) / c)) for k in range(c)]

    def memberships(v):
        u = np.zeros((n, c))
        for i in range(n):
            d = [(x[i] - v[k]) ** 2 for k in range(c)]
            if min(d) == 0.0:
                u[i, int(np.argmin(d))] = 1.0
                continue
            for k in range(c):
                u[i, k] = 1.0 / sum((d[k] / d[j]) ** (1.0 / (m - 1.0)) for j in range(c))
        return u

    for _ in range(iters):
        u = memberships(centers)
        for k in range(c):
            um = u[:, k] ** m
            centers[k] = float((um * x).sum() / um.sum())
    u = memberships(centers)
    order = np.argsort(centers)
    return np.asarray(centers)[order], u[:, order]


# ---------------------------------------------------------------- fcm

def test_fcm_matches_scalar_reference():
    rng = np.random.default_rng(0)
    for trial in range(4):
        x = rng.uniform(0, 1, size=60)
        want_v, want_u = fcm_reference(x, c=3, m=2.0, iters=7)
        got = fcm(x, c=3, m=2.0, max_iter=7, tol=0.0)
        assert np.allclose(got.centers, want_v, atol=1e-10, rtol=0)
        assert np.allclose(got.memberships, want_u, atol=1e-10, rtol=0)


def test_fcm_respects_other_fuzzifiers():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 5, size=40)
    want_v, want_u = fcm_reference(x, c=2, m=3.0, iters=5)
    got = fcm(x, c=2, m=3.0, max_iter=5, tol=0.0)
    assert np.allclose(got.centers, want_v, atol=1e-10, rtol=0)
    assert np.allclose(got.memberships, want_u, atol=1e-10, rtol=0)


def test_fcm_membership_rows_sum_to_one():
    rng = np.random.default_rng(2)
    res = fcm(rng.uniform(0, 1, size=500), c=3)
    assert np.allclose(res.memberships.sum(axis=1), 1.0, atol=1e-12, rtol=0)
    assert (res.memberships >= 0).all()


def test_fcm_centers_ascending_and_within_data_range():
    rng = np.random.default_rng(3)
    x = rng.uniform(2, 9, size=300)
    res = fcm(x, c=3)
    assert np.all(np.diff(res.centers) >= 0)
    assert res.centers.min() >= x.min() and res.centers.max() <= x.max()


def test_fcm_objective_trace_non_increasing():
    rng = np.random.default_rng(4)
    for trial in range(10):
        x = rng.uniform(0, 1, size=rng.integers(20, 400))
        trace = fcm(x, c=3).objective_trace
        slack = 1e-12 * max(1.0, float(trace[0]))
        assert np.all(np.diff(trace) <= slack)


def test_fcm_converged_pair_is_a_fixed_point():
    rng = np.random.default_rng(5)
    for trial in range(10):
        x = rng.uniform(0, 1, size=200)
        res = fcm(x, c=3)
        d2 = (x[:, None] - res.centers[None, :]) ** 2
        w = d2 ** -1.0
        want_u = w / w.sum(axis=1, keepdims=True)
        assert np.abs(res.memberships - want_u).max() < 1e-6
        um = res.memberships ** 2
        want_v = (um * x[:, None]).sum(axis=0) / um.sum(axis=0)
        assert np.abs(res.centers - want_v).max() < 1e-6


def test_fcm_separated_blobs_recovered():
    rng = np.random.default_rng(6)
    x = np.concatenate([
        rng.normal(0.1, 0.01, 100),
        rng.normal(0.5, 0.01, 80),
        rng.normal(0.9, 0.01, 120),
    ])
    res = fcm(x, c=3)
    assert np.abs(res.centers - [0.1, 0.5, 0.9]).max() < 0.02
    hard = res.memberships.argmax(axis=1)
    assert (hard[:100] == 0).all() and (hard[100:180] == 1).all() and (hard[180:] == 2).all()


def test_fcm_point_on_center_is_hard_assigned():
    # Two exact value blocks: centers land on the values themselves.
    x = np.array([2.0, 2.0, 2.0, 9.0, 9.0])
    res = fcm(x, c=2)
    assert np.allclose(res.centers, [2.0, 9.0], atol=1e-9, rtol=0)
    assert np.allclose(res.memberships[0], [1.0, 0.0], atol=1e-9, rtol=0)
    assert np.allclose(res.memberships[4], [0.0, 1.0], atol=1e-9, rtol=0)
    assert np.isfinite(res.memberships).all()


def test_fcm_constant_input_flagged_degenerate():
    res = fcm(np.full(50, 0.7), c=3)
    assert res.degenerate
    assert np.allclose(res.centers, 0.7)
    assert (res.memberships[:, 0] == 1.0).all()
    assert np.isfinite(res.objective_trace).all()


def test_fcm_label_assignment_ignores_ordering_of_inputs():
    rng = np.random.default_rng(7)
    x = np.concatenate([rng.normal(0.1, 0.02, 150), rng.normal(0.8, 0.02, 150)])
    base = fcm(x, c=3).memberships.argmax(axis=1)
    perm = rng.permutation(x.size)
    permuted = fcm(x[perm], c=3).memberships.argmax(axis=1)
    assert np.array_equal(permuted, base[perm])


def test_fcm_argument_validation():
    with pytest.raises(ValueError, match="clusters"):
        fcm(np.arange(10.0), c=1)
    with pytest.raises(ValueError, match="fuzzifier"):
        fcm(np.arange(10.0), m=1.0)
    with pytest.raises(ValueError, match="cannot support"):
        fcm(np.array([1.0, 2.0]), c=3)
    with pytest.raises(ValueError, match="max_iter"):
        fcm(np.arange(10.0), max_iter=0)


# ---------------------------------------------------------------- trimap

def test_trimap_identical_images_all_unchanged():
    img = Raster(np.arange(64.0).reshape(8, 8))
    tm = hierarchical_trimap(log_ratio(img, img))
    assert (tm.labels == UNCHANGED).all()


def test_trimap_is_a_partition():
    rng = np.random.default_rng(8)
    di = DifferenceImage(rng.uniform(0, 1, size=(40, 40)))
    tm = hierarchical_trimap(di)
    assert tm.labels.shape == (40, 40)
    assert set(np.unique(tm.labels)) <= {UNCHANGED, INTERMEDIATE, CHANGED}
    assert tm.count(UNCHANGED) + tm.count(INTERMEDIATE) + tm.count(CHANGED) == 1600


def test_trimap_orders_bands_by_value():
    rng = np.random.default_rng(9)
    di = DifferenceImage(rng.uniform(0, 1, size=(30, 30)))
    tm = hierarchical_trimap(di)
    changed_vals = di.values[tm.labels == CHANGED]
    mid_vals = di.values[tm.labels == INTERMEDIATE]
    unchanged_vals = di.values[tm.labels == UNCHANGED]
    assert changed_vals.min() > mid_vals.max() - 0.2
    assert unchanged_vals.max() < mid_vals.min() + 0.2
    assert changed_vals.mean() > unchanged_vals.mean()


def test_trimap_deterministic():
    rng = np.random.default_rng(10)
    di = DifferenceImage(rng.uniform(0, 1, size=(25, 25)))
    a = hierarchical_trimap(di).labels
    b = hierarchical_trimap(di).labels
    assert np.array_equal(a, b)


def test_trimap_confident_changed_pixels_are_precise_on_stock_scene():
    i1, i2, truth = generate(default_scene(seed=42))
    tm = hierarchical_trimap(log_ratio(i1, i2))
    picked = tm.labels == CHANGED
    assert picked.sum() > 0
    precision = truth.bits[picked].mean()
    assert precision >= 0.95


def test_trimap_raster_round_trip():
    labels = np.array([[0, 1], [2, 0]], dtype=np.uint8)
    tm = TriMap(labels)
    raster = trimap_to_raster(tm)
    assert set(np.unique(raster.pixels)) <= {0.0, 128.0, 255.0}
    back = trimap_from_raster(raster)
    assert np.array_equal(back.labels, labels)


def test_trimap_raster_rejects_other_values():
    with pytest.raises(ValueError, match="128"):
        trimap_from_raster(Raster(np.array([[7.0]])))


# ---------------------------------------------------------------- sampling

def _images(h=30, w=30, seed=0):
    rng = np.random.default_rng(seed)
    return (Raster(rng.uniform(1, 255, size=(h, w))),
            Raster(rng.uniform(1, 255, size=(h, w))))


def _trimap_with(n_changed, n_unchanged, h=30, w=30):
    labels = np.full((h, w), INTERMEDIATE, dtype=np.uint8)
    flat = labels.reshape(-1)
    flat[:n_changed] = CHANGED
    flat[n_changed:n_changed + n_unchanged] = UNCHANGED
    return TriMap(labels)


def test_draw_samples_balanced_floor_rule():
    # floor(0.10 * min(100, 500)) = 10 per class.
    tm = _trimap_with(100, 500)
    i1, i2 = _images()
    s = draw_samples(tm, i1, i2, r=5, rng=Rng(3))
    assert len(s.patches) == 20
    assert s.labels.sum() == 10 and len(s.labels) == 20
    assert (s.labels[:10] == 1).all() and (s.labels[10:] == 0).all()


def test_draw_samples_positions_match_classes_and_are_unique():
    tm = _trimap_with(64, 300)
    i1, i2 = _images(seed=1)
    s = draw_samples(tm, i1, i2, r=7, rng=Rng(4))
    assert len({(int(r), int(c)) for r, c in s.positions}) == len(s.positions)
    for (row, col), label in zip(s.positions, s.labels):
        want = CHANGED if label == 1 else UNCHANGED
        assert tm.labels[row, col] == want
    assert all(p.r == 7 and p.data.data.shape == (2, 7, 7) for p in s.patches)


def test_draw_samples_deterministic_by_seed():
    tm = _trimap_with(80, 200)
    i1, i2 = _images(seed=2)
    a = draw_samples(tm, i1, i2, r=5, rng=Rng(9))
    b = draw_samples(tm, i1, i2, r=5, rng=Rng(9))
    assert np.array_equal(a.positions, b.positions)
    c = draw_samples(tm, i1, i2, r=5, rng=Rng(10))
    assert not np.array_equal(a.positions, c.positions)


def test_draw_samples_empty_class_raises():
    i1, i2 = _images(seed=3)
    with pytest.raises(PreclassifyError, match="changed"):
        draw_samples(_trimap_with(0, 400), i1, i2, r=5, rng=Rng(0))
    with pytest.raises(PreclassifyError, match="unchanged"):
        draw_samples(_trimap_with(400, 0), i1, i2, r=5, rng=Rng(0))


def test_draw_samples_zero_floor_raises():
    # floor(0.10 * min(5, 800)) = 0.
    tm = _trimap_with(5, 800)
    i1, i2 = _images(seed=4)
    with pytest.raises(PreclassifyError, match="empty"):
        draw_samples(tm, i1, i2, r=5, rng=Rng(0))


def test_draw_samples_fraction_validation():
    tm = _trimap_with(50, 50)
    i1, i2 = _images(seed=5)
    with pytest.raises(ValueError, match="fraction"):
        draw_samples(tm, i1, i2, r=5, rng=Rng(0), fraction=0.0)
