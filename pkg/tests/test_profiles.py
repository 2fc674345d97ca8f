import numpy as np
import pytest

import oracles
from attriprof import (
    FeatureStack,
    LayerMeta,
    ProfileSpec,
    Raster,
    ValidationError,
    attribute_thinning,
    build_profile,
    build_sdap,
    local_feature_post,
    local_histogram_post,
    profile_depth,
    quantize_band,
)

REY_AREA = (25, 100, 500, 1000, 5000, 10000, 20000, 50000, 100000, 150000)
PAV_AREA = (770, 1538, 2307, 3076, 3846, 4615, 5384, 6153, 6923, 7692,
            8461, 9230, 10000, 10769)
INERTIA = (0.2, 0.3, 0.4, 0.5)


def _spec(variant, area=REY_AREA):
    return ProfileSpec(attributes=(("area", area), ("inertia", INERTIA)), variant=variant)


@pytest.fixture(scope="module")
def small_raster():
    rng = np.random.default_rng(11)
    return Raster(values=rng.integers(0, 256, (1, 16, 16)).astype(np.uint8))


@pytest.fixture(scope="module")
def four_band_raster():
    rng = np.random.default_rng(13)
    return Raster(values=rng.standard_normal((4, 12, 12)))


# ---------------------------------------------------------------------------
# depth arithmetic (the published dimension columns)
# ---------------------------------------------------------------------------

def test_depths_single_band(small_raster):
    assert build_profile(small_raster, _spec("minmax")).depth == 30
    assert build_profile(small_raster, _spec("maxtree")).depth == 16
    assert build_profile(small_raster, _spec("mintree")).depth == 16
    assert build_profile(small_raster, _spec("shapes")).depth == 16
    assert build_profile(small_raster, _spec("alpha")).depth == 16
    assert build_profile(small_raster, _spec("omega")).depth == 16


def test_depths_postprocessing(small_raster):
    ap = build_profile(small_raster, _spec("minmax"))
    sdap = build_profile(small_raster, _spec("shapes"))
    assert local_feature_post(ap, 7).depth == 60
    assert local_feature_post(sdap, 7).depth == 32
    assert local_histogram_post(ap, 7, 6).depth == 180
    assert local_histogram_post(sdap, 7, 6).depth == 96


def test_depths_four_bands(four_band_raster):
    ap = build_profile(four_band_raster, _spec("minmax", PAV_AREA))
    assert ap.depth == 152
    for variant in ("shapes", "alpha", "omega"):
        assert build_profile(four_band_raster, _spec(variant, PAV_AREA)).depth == 80
    assert local_feature_post(ap, 7).depth == 304
    assert local_histogram_post(ap, 7, 6).depth == 912
    sdap = build_profile(four_band_raster, _spec("shapes", PAV_AREA))
    assert local_feature_post(sdap, 7).depth == 160
    assert local_histogram_post(sdap, 7, 6).depth == 480


def test_depth_formula_matches_actual(small_raster, four_band_raster):
    for raster in (small_raster, four_band_raster):
        for variant in ("minmax", "maxtree", "shapes", "alpha", "none"):
            spec = _spec(variant)
            assert profile_depth(spec, raster.bands) == build_profile(raster, spec).depth


def test_minimal_minmax_block():
    img = Raster(values=np.arange(16, dtype=np.uint8).reshape(1, 4, 4))
    spec = ProfileSpec(attributes=(("area", (4,)),), variant="minmax")
    stack = build_profile(img, spec)
    assert stack.depth == 3
    ops = [m.operator for m in stack.layer_meta]
    assert ops == ["thick", "orig", "thin"]


# ---------------------------------------------------------------------------
# layer semantics
# ---------------------------------------------------------------------------

def test_middle_layer_is_quantized_band(four_band_raster):
    spec = _spec("minmax")
    stack = build_profile(four_band_raster, spec)
    for i, m in enumerate(stack.layer_meta):
        if m.operator == "orig":
            q = quantize_band(four_band_raster.band(m.source_band), 256)
            assert np.array_equal(stack.layers[i], q.astype(np.float64))


def test_layer_order_and_meta(small_raster):
    spec = ProfileSpec(attributes=(("area", (2, 8)), ("inertia", (0.2,))), variant="minmax")
    stack = build_profile(small_raster, spec)
    got = [(m.attribute, m.threshold, m.operator) for m in stack.layer_meta]
    assert got == [
        ("area", 8.0, "thick"), ("area", 2.0, "thick"), ("area", None, "orig"),
        ("area", 2.0, "thin"), ("area", 8.0, "thin"),
        ("inertia", 0.2, "thick"), ("inertia", None, "orig"), ("inertia", 0.2, "thin"),
    ]


def test_thinning_half_profile_monotone(small_raster):
    spec = ProfileSpec(attributes=(("area", (4, 16, 64)),), variant="minmax")
    stack = build_profile(small_raster, spec)
    thin = [stack.layers[i] for i, m in enumerate(stack.layer_meta) if m.operator == "thin"]
    for a, b in zip(thin, thin[1:]):
        assert (b <= a).all()
    thick = [stack.layers[i] for i, m in enumerate(stack.layer_meta) if m.operator == "thick"]
    for a, b in zip(thick, thick[1:]):  # stored at descending thresholds
        assert (b <= a).all()


def test_layers_match_direct_filtering(small_raster):
    spec = ProfileSpec(attributes=(("area", (4, 16)),), variant="maxtree")
    stack = build_profile(small_raster, spec)
    band = small_raster.band(0).astype(np.int64)
    for i, m in enumerate(stack.layer_meta):
        if m.operator == "thin":
            assert np.array_equal(stack.layers[i], attribute_thinning(band, "area", m.threshold))


def test_serial_equals_concurrent(small_raster):
    spec = _spec("minmax")
    a = build_profile(small_raster, spec, threads=1)
    b = build_profile(small_raster, spec, threads=4)
    assert np.array_equal(a.layers, b.layers)
    assert a.layer_meta == b.layer_meta


def test_constant_image_every_layer_equals_original():
    img = Raster(values=np.full((1, 6, 6), 3, dtype=np.uint8))
    for variant in ("minmax", "shapes", "alpha", "omega"):
        spec = ProfileSpec(attributes=(("area", (2, 5)),), variant=variant)
        stack = build_profile(img, spec)
        for i in range(stack.depth):
            assert np.array_equal(stack.layers[i], stack.layers[0])


def test_variant_none_is_raw_bands(four_band_raster):
    stack = build_profile(four_band_raster, ProfileSpec(variant="none"))
    assert stack.depth == 4
    assert np.array_equal(stack.layers, four_band_raster.values)


def test_spec_validation():
    with pytest.raises(ValidationError, match="strictly increasing"):
        ProfileSpec(attributes=(("area", (5, 5)),))
    with pytest.raises(ValidationError, match="empty threshold"):
        ProfileSpec(attributes=(("area", ()),))
    with pytest.raises(ValidationError, match="at least one attribute"):
        ProfileSpec(attributes=())
    with pytest.raises(ValidationError, match="unknown variant"):
        ProfileSpec(attributes=(("area", (1,)),), variant="vap")
    with pytest.raises(ValidationError, match="direct"):
        ProfileSpec(attributes=(("area", (1,)),), variant="alpha", rule="min")


def test_sdap_helper_sets_variant(small_raster):
    spec = _spec("minmax")
    stack = build_sdap(small_raster, spec)
    assert stack.depth == 16
    assert all(m.operator in ("orig", "sdap") for m in stack.layer_meta)


# ---------------------------------------------------------------------------
# local post-processing vs direct oracles
# ---------------------------------------------------------------------------

def _toy_stack():
    rng = np.random.default_rng(21)
    layers = np.stack([
        rng.standard_normal((9, 11)),
        rng.integers(0, 5, (9, 11)).astype(np.float64),
        np.full((9, 11), 2.5),
    ])
    meta = tuple(LayerMeta(0, "area", float(i), "thin") for i in range(3))
    return FeatureStack(layers=layers, layer_meta=meta)


def test_local_features_match_oracle():
    stack = _toy_stack()
    out = local_feature_post(stack, window=5)
    assert out.depth == 6
    for i in range(stack.depth):
        mean, std = oracles.window_stats(stack.layers[i], 5)
        assert np.allclose(out.layers[2 * i], mean, atol=1e-10)
        assert np.allclose(out.layers[2 * i + 1], std, atol=1e-10)
    # constant layer: mean constant, std zero
    assert np.allclose(out.layers[4], 2.5)
    assert np.allclose(out.layers[5], 0.0)


def test_local_histograms_match_oracle():
    stack = _toy_stack()
    bins = 4
    out = local_histogram_post(stack, window=3, bins=bins)
    assert out.depth == stack.depth * bins
    for i in range(stack.depth):
        exp = oracles.window_hist(stack.layers[i], 3, bins)
        got = out.layers[i * bins:(i + 1) * bins]
        assert np.allclose(got, exp, atol=1e-10)
    sums = out.layers.reshape(stack.depth, bins, 9, 11).sum(axis=1)
    assert np.max(np.abs(sums - 1.0)) < 1e-9
    # degenerate layer: all mass in bin 0
    assert np.allclose(out.layers[2 * bins], 1.0)
    assert np.allclose(out.layers[2 * bins + 1:3 * bins], 0.0)


def test_window_validation(small_raster):
    stack = build_profile(small_raster, ProfileSpec(variant="none"))
    with pytest.raises(ValidationError, match="odd"):
        local_feature_post(stack, 4)
    with pytest.raises(ValidationError, match="larger than image"):
        local_feature_post(stack, 17)
    with pytest.raises(ValidationError, match="bins"):
        local_histogram_post(stack, 3, 1)
