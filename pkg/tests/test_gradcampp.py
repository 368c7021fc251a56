import numpy as np
import pytest

from slicelab.gradcampp import (
    EPSILON,
    FeatureMapBundle,
    Heatmap,
    alpha,
    channel_weights,
    colormap,
    gradcam_baseline,
    heatmap,
    load_bundle,
    render_overlay,
    save_bundle,
    threshold_boundary,
)


def bundle_from(a, g, score=1.0, class_index=1):
    return FeatureMapBundle(np.asarray(a, dtype=np.float64),
                            np.asarray(g, dtype=np.float64), score, class_index)


def random_bundle(g, k=3, h=4, w=5):
    return bundle_from(g.normal(size=(k, h, w)), g.normal(size=(k, h, w)),
                       score=float(g.normal()), class_index=int(g.integers(0, 2)))


# ---------------------------------------------------------------------------
# alpha (position weights)


def test_alpha_zero_gradient_gives_zero():
    b = bundle_from(np.ones((2, 3, 3)), np.zeros((2, 3, 3)))
    assert (alpha(b) == 0).all()
    assert (channel_weights(b) == 0).all()
    assert (heatmap(b).values == 0).all()


def test_alpha_running_example_one_third():
    b = bundle_from([[[2.0]]], [[[0.5]]])
    a = alpha(b)
    assert a.shape == (1, 1, 1)
    # hand evaluation: 0.25 / (0.5 + 2 * 0.125) = 1/3 (epsilon-perturbed)
    assert a[0, 0, 0] == pytest.approx(1.0 / 3.0, abs=1e-7)
    w = channel_weights(b)
    assert w[0] == pytest.approx(1.0 / 6.0, abs=1e-7)
    hm = heatmap(b)
    assert hm.values[0, 0] == 1.0
    assert hm.normalized


def test_alpha_constant_gradient_closed_form():
    g = np.random.default_rng(0)
    a_maps = g.normal(size=(2, 3, 4))
    const = 0.7
    b = bundle_from(a_maps, np.full((2, 3, 4), const))
    expected = np.empty((2, 3, 4))
    for k in range(2):
        expected[k] = 1.0 / (2.0 + const * a_maps[k].sum() + EPSILON / const**2)
    assert alpha(b) == pytest.approx(expected, rel=1e-12)


def test_alpha_zero_only_where_gradient_zero():
    g_arr = np.array([[[0.0, 0.3], [-0.2, 0.0]]])
    b = bundle_from(np.ones_like(g_arr), g_arr)
    a = alpha(b)
    assert a[0, 0, 0] == 0.0 and a[0, 1, 1] == 0.0
    assert a[0, 0, 1] != 0.0 and a[0, 1, 0] != 0.0


def test_channel_weights_relu_kills_negative_gradients():
    b = bundle_from(np.ones((2, 2, 2)), -np.ones((2, 2, 2)))
    assert (channel_weights(b) == 0).all()


# ---------------------------------------------------------------------------
# heatmap assembly


def test_heatmap_relu_and_normalization():
    a_maps = np.array([[[1.0, -5.0], [2.0, 0.5]]])
    b = bundle_from(a_maps, np.full((1, 2, 2), 0.4))
    hm = heatmap(b)
    assert hm.values.min() >= 0.0
    assert hm.values.max() == 1.0
    assert hm.values[0, 1] == 0.0  # negative combined response clamps


def test_heatmap_non_negative_and_unit_peak_on_random_bundles():
    g = np.random.default_rng(5)
    for _ in range(50):
        hm = heatmap(random_bundle(g))
        assert (hm.values >= 0.0).all()
        assert (hm.values <= 1.0).all()
        if hm.normalized:
            assert hm.values.max() == 1.0


def test_gradcam_reduction_identity():
    """Uniform alpha = 1/(H*W) with the relu dropped reduces the channel
    weights to the gradient mean, i.e. plain Grad-CAM, exactly."""
    g = np.random.default_rng(7)
    for _ in range(100):
        b = random_bundle(g, k=int(g.integers(1, 5)),
                          h=int(g.integers(1, 7)), w=int(g.integers(1, 7)))
        k, h, w = b.gradients.shape
        uniform_alpha = 1.0 / (h * w)
        reduced_w = (uniform_alpha * b.gradients).sum(axis=(1, 2))
        raw = np.maximum((reduced_w[:, None, None] * b.feature_maps).sum(axis=0), 0.0)
        peak = raw.max()
        expected = raw / peak if peak > 0 else raw
        assert gradcam_baseline(b).values == pytest.approx(expected, abs=1e-12)


def test_gradcam_baseline_constant_positive_gradient():
    a_maps = np.random.default_rng(1).normal(size=(2, 3, 3))
    b = bundle_from(a_maps, np.full((2, 3, 3), 0.25))
    weights = b.gradients.mean(axis=(1, 2))
    assert weights == pytest.approx([0.25, 0.25])
    raw = np.maximum((weights[:, None, None] * a_maps).sum(axis=0), 0.0)
    expected = raw / raw.max() if raw.max() > 0 else raw
    assert gradcam_baseline(b).values == pytest.approx(expected, abs=1e-12)


def test_gradient_scaling_preserves_argmax():
    """For a single-channel bundle with post-relu (non-negative) feature
    maps the channel weight stays non-negative under any positive scaling
    of G, so the normalized heatmap is relu(A)/max(A) regardless of the
    scale: the argmax pixel (indeed the whole map) cannot move.  With
    several channels the third-derivative term rescales differently from
    the second-derivative term and the channel-weight ratios shift, so
    invariance is only guaranteed channel-wise."""
    g = np.random.default_rng(9)
    checked = 0
    for _ in range(60):
        a_map = np.maximum(g.normal(size=(1, 5, 6)), 0.0)
        grad = g.normal(size=(1, 5, 6))
        b = bundle_from(a_map, grad)
        h1 = heatmap(b).values
        for scale in (0.1, 3.7, 250.0):
            h2 = heatmap(bundle_from(a_map, scale * grad)).values
            if h1.max() > 0 and h2.max() > 0:
                checked += 1
                assert np.unravel_index(h1.argmax(), h1.shape) == \
                    np.unravel_index(h2.argmax(), h2.shape)
                assert h2 == pytest.approx(h1, abs=1e-9)
    assert checked > 100


def test_bundle_validation():
    with pytest.raises(ValueError):
        bundle_from(np.ones((2, 2)), np.ones((2, 2)))          # not 3-D
    with pytest.raises(ValueError):
        bundle_from(np.ones((1, 2, 2)), np.ones((1, 2, 3)))    # shape mismatch
    with pytest.raises(ValueError):
        bundle_from(np.full((1, 2, 2), np.nan), np.ones((1, 2, 2)))


# ---------------------------------------------------------------------------
# rendering


def test_overlay_zero_heatmap_dark_blue_tint():
    base = np.full((4, 4, 3), 100, dtype=np.uint8)
    hm = Heatmap(np.zeros((4, 4)), normalized=False)
    out = render_overlay(base, hm, alpha_blend=0.5)
    # blend of 100 with colormap(0) = (0, 0, 128)
    assert (out == np.array([50, 50, 114], dtype=np.uint8)).all()


def test_overlay_full_heatmap_red_tint():
    base = np.zeros((4, 4, 3), dtype=np.uint8)
    hm = Heatmap(np.ones((4, 4)), normalized=True)
    out = render_overlay(base, hm, alpha_blend=0.5)
    assert (out == np.array([128, 0, 0], dtype=np.uint8)).all()


def test_overlay_alpha_zero_is_identity(np_rng):
    base = np_rng.integers(0, 256, (6, 7, 3), dtype=np.uint8)
    hm = Heatmap(np_rng.uniform(0, 1, (3, 3)), normalized=True)
    assert np.array_equal(render_overlay(base, hm, alpha_blend=0.0), base)


def test_overlay_upsamples_heatmap(np_rng):
    base = np_rng.integers(0, 256, (8, 10, 3), dtype=np.uint8)
    hm = Heatmap(np_rng.uniform(0, 1, (2, 2)), normalized=True)
    assert render_overlay(base, hm).shape == (8, 10, 3)


def test_colormap_stops():
    v = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    rgb = colormap(v)
    assert rgb.tolist() == [
        [0, 0, 128], [0, 0, 255], [0, 255, 0], [255, 255, 0], [255, 0, 0]]


def test_threshold_boundary_outlines_hot_region():
    values = np.zeros((5, 5))
    values[1:4, 1:4] = 1.0
    edge = threshold_boundary(Heatmap(values, normalized=True), 0.75)
    assert edge[1, 1] and edge[1, 3] and edge[3, 2]
    assert not edge[2, 2]       # interior
    assert not edge[0, 0]       # cold


# ---------------------------------------------------------------------------
# bundle I/O


def test_bundle_directory_roundtrip(tmp_path):
    g = np.random.default_rng(3)
    b = random_bundle(g)
    save_bundle(b, tmp_path / "bundle")
    back = load_bundle(tmp_path / "bundle")
    assert back.feature_maps == pytest.approx(b.feature_maps, abs=1e-6)
    assert back.gradients == pytest.approx(b.gradients, abs=1e-6)
    assert back.class_index == b.class_index
    assert back.score == pytest.approx(b.score, abs=1e-6)
