"""Profile assembly: stacks of attribute-filtered images, plus local
post-processing (patch statistics and local histograms).

Layer order is deterministic and band-major, then attribute-major:

* ``minmax``: thickenings at descending thresholds, the original band, then
  thinnings at ascending thresholds (2K+1 layers per attribute);
* single-tree variants (``maxtree``, ``mintree``, ``shapes``, ``alpha``,
  ``omega``): the original band, then filtered layers at ascending
  thresholds (K+1 layers per attribute);
* ``none``: the original bands only (raw-pixel baseline).

Real-valued bands are linearly quantized (min-max, per band) before any tree
is built; the "original" layer of each attribute block is that quantized
band, bit-exact. Per-threshold layer computations only read the shared tree
and attributes, so they are order-independent and may run concurrently.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attributes import INCREASING_KINDS, ATTRIBUTE_KINDS, compute_attributes
from .errors import ValidationError
from .filtering import Criterion, filter_tree, reconstruct_array
from .hierarchy import (
    PartitionTree,
    build_alpha_tree,
    build_max_tree,
    build_min_tree,
    build_omega_tree,
    build_tree_of_shapes,
    quantize_band,
)
from .raster import FeatureStack, LayerMeta, Raster

VARIANTS = ("minmax", "maxtree", "mintree", "shapes", "alpha", "omega", "none")


@dataclass(frozen=True)
class ProfileSpec:
    """What to filter and how: attribute threshold ladders, the tree variant,
    the decision rule, and the quantization depth for real bands.

    ``rule='auto'`` resolves to min for increasing criteria, subtractive for
    the others, and direct on partition trees.
    """

    attributes: tuple = field(default_factory=tuple)  # ((kind, (l1, l2, ...)), ...)
    variant: str = "minmax"
    rule: str = "auto"
    quantization_levels: int = 256
    connectivity: int = 4

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r} (choose from {VARIANTS})")
        norm = []
        for kind, thresholds in self.attributes:
            if kind not in ATTRIBUTE_KINDS:
                raise ValidationError(f"unknown attribute kind {kind!r}")
            ts = tuple(float(t) for t in thresholds)
            if not ts:
                raise ValidationError(f"empty threshold list for attribute {kind!r}")
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValidationError(f"thresholds for {kind!r} must be strictly increasing")
            norm.append((kind, ts))
        object.__setattr__(self, "attributes", tuple(norm))
        if self.variant != "none" and not self.attributes:
            raise ValidationError("profile spec needs at least one attribute")
        if self.rule != "auto" and self.rule not in ("min", "max", "direct", "subtractive"):
            raise ValidationError(f"unknown rule {self.rule!r}")
        if self.variant in ("alpha", "omega") and self.rule not in ("auto", "direct"):
            raise ValidationError("partition trees offer only the direct rule")

    def resolved_rule(self, kind: str, partition: bool) -> str:
        if partition:
            return "direct"
        if self.rule != "auto":
            return self.rule
        return "min" if kind in INCREASING_KINDS else "subtractive"


def profile_depth(spec: ProfileSpec, bands: int) -> int:
    """Layer count of the stack build_profile would produce."""
    if spec.variant == "none":
        return bands
    if spec.variant == "minmax":
        per_band = sum(2 * len(ts) + 1 for _, ts in spec.attributes)
    else:
        per_band = sum(len(ts) + 1 for _, ts in spec.attributes)
    return bands * per_band


def _single_tree(variant: str, band, spec: ProfileSpec):
    if variant == "maxtree":
        return build_max_tree(band, spec.connectivity), "thin"
    if variant == "mintree":
        return build_min_tree(band, spec.connectivity), "thick"
    if variant == "shapes":
        return build_tree_of_shapes(band), "sdap"
    if variant == "alpha":
        return build_alpha_tree(band), "alpha"
    if variant == "omega":
        return build_omega_tree(band), "omega"
    raise ValidationError(f"not a single-tree variant: {variant!r}")


def build_profile(raster: Raster, spec: ProfileSpec, threads: int = 1) -> FeatureStack:
    """Assemble the feature stack for all bands of ``raster`` under ``spec``."""
    layers: list[np.ndarray | None] = []
    meta: list[LayerMeta | None] = []
    tasks = []  # (layer_index, tree, attrs, kind, threshold, rule)

    for bi in range(raster.bands):
        raw = raster.band(bi)
        if spec.variant == "none":
            layers.append(np.asarray(raw, dtype=np.float64))
            meta.append(LayerMeta(bi, None, None, "orig"))
            continue
        band = quantize_band(raw, spec.quantization_levels)
        band_f = band.astype(np.float64)

        if spec.variant == "minmax":
            tmax = build_max_tree(band, spec.connectivity)
            tmin = build_min_tree(band, spec.connectivity)
            amax = compute_attributes(tmax, band)
            amin = compute_attributes(tmin, band)
            for kind, ts in spec.attributes:
                rule = spec.resolved_rule(kind, partition=False)
                for t in reversed(ts):
                    meta.append(LayerMeta(bi, kind, t, "thick"))
                    layers.append(None)
                    tasks.append((len(layers) - 1, tmin, amin, kind, t, rule))
                meta.append(LayerMeta(bi, kind, None, "orig"))
                layers.append(band_f)
                for t in ts:
                    meta.append(LayerMeta(bi, kind, t, "thin"))
                    layers.append(None)
                    tasks.append((len(layers) - 1, tmax, amax, kind, t, rule))
        else:
            tree, op = _single_tree(spec.variant, band, spec)
            attrs = compute_attributes(tree, band)
            partition = isinstance(tree, PartitionTree)
            for kind, ts in spec.attributes:
                rule = spec.resolved_rule(kind, partition)
                meta.append(LayerMeta(bi, kind, None, "orig"))
                layers.append(band_f)
                for t in ts:
                    meta.append(LayerMeta(bi, kind, t, op))
                    layers.append(None)
                    tasks.append((len(layers) - 1, tree, attrs, kind, t, rule))

    def run(task):
        i, tree, attrs, kind, t, rule = task
        dec = filter_tree(tree, attrs, Criterion(kind, t), rule)
        return i, reconstruct_array(tree, dec).astype(np.float64)

    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for i, layer in pool.map(run, tasks):
                layers[i] = layer
    else:
        for task in tasks:
            i, layer = run(task)
            layers[i] = layer

    return FeatureStack(layers=np.stack(layers), layer_meta=tuple(meta))


def build_sdap(raster: Raster, spec: ProfileSpec, threads: int = 1) -> FeatureStack:
    """Self-dual profile (tree of shapes), K+1 layers per attribute block."""
    return build_profile(raster, _with_variant(spec, "shapes"), threads)


def build_alpha_ap(raster: Raster, spec: ProfileSpec, threads: int = 1) -> FeatureStack:
    return build_profile(raster, _with_variant(spec, "alpha"), threads)


def build_omega_ap(raster: Raster, spec: ProfileSpec, threads: int = 1) -> FeatureStack:
    return build_profile(raster, _with_variant(spec, "omega"), threads)


def _with_variant(spec: ProfileSpec, variant: str) -> ProfileSpec:
    return ProfileSpec(
        attributes=spec.attributes,
        variant=variant,
        rule=spec.rule,
        quantization_levels=spec.quantization_levels,
        connectivity=spec.connectivity,
    )


# ---------------------------------------------------------------------------
# local post-processing
# ---------------------------------------------------------------------------

def _check_window(stack: FeatureStack, window: int):
    if window < 3 or window % 2 == 0:
        raise ValidationError(f"window must be odd and >= 3, got {window}")
    if window > min(stack.height, stack.width):
        raise ValidationError(
            f"window {window} larger than image {stack.height}x{stack.width}"
        )


def _window_sum(padded: np.ndarray, w: int) -> np.ndarray:
    H2, W2 = padded.shape
    s = np.zeros((H2 + 1, W2 + 1), dtype=np.float64)
    s[1:, 1:] = padded.cumsum(0).cumsum(1)
    return s[w:, w:] - s[:-w, w:] - s[w:, :-w] + s[:-w, :-w]


def local_feature_post(stack: FeatureStack, window: int = 7) -> FeatureStack:
    """Replace each layer by its windowed mean and population std (edge
    replicated); depth doubles."""
    _check_window(stack, window)
    r = window // 2
    area = float(window * window)
    layers = []
    meta = []
    for li in range(stack.depth):
        lay = stack.layers[li]
        p = np.pad(lay, r, mode="edge")
        mean = _window_sum(p, window) / area
        meansq = _window_sum(p * p, window) / area
        std = np.sqrt(np.maximum(meansq - mean * mean, 0.0))
        m = stack.layer_meta[li]
        layers.append(mean)
        meta.append(LayerMeta(m.source_band, m.attribute, m.threshold, m.operator + "+mean"))
        layers.append(std)
        meta.append(LayerMeta(m.source_band, m.attribute, m.threshold, m.operator + "+std"))
    return FeatureStack(layers=np.stack(layers), layer_meta=tuple(meta))


def local_histogram_post(stack: FeatureStack, window: int = 7, bins: int = 6) -> FeatureStack:
    """Replace each layer by ``bins`` layers of normalized local histogram
    counts (each window's histogram sums to 1); depth multiplies by bins.

    Bins are uniform over the layer's global min..max; a degenerate layer
    (min == max) puts all mass in bin 0.
    """
    _check_window(stack, window)
    if bins < 2:
        raise ValidationError(f"bins must be >= 2, got {bins}")
    r = window // 2
    area = float(window * window)
    layers = []
    meta = []
    for li in range(stack.depth):
        lay = stack.layers[li]
        lo = float(lay.min())
        hi = float(lay.max())
        if hi <= lo:
            binidx = np.zeros(lay.shape, dtype=np.int64)
        else:
            binidx = np.floor((lay - lo) / (hi - lo) * bins).astype(np.int64)
            np.clip(binidx, 0, bins - 1, out=binidx)
        m = stack.layer_meta[li]
        for b in range(bins):
            ind = np.pad((binidx == b).astype(np.float64), r, mode="edge")
            layers.append(_window_sum(ind, window) / area)
            meta.append(
                LayerMeta(m.source_band, m.attribute, m.threshold, f"{m.operator}+hist{b}")
            )
    return FeatureStack(layers=np.stack(layers), layer_meta=tuple(meta))
