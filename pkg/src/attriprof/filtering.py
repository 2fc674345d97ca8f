"""Criterion evaluation, decision rules, and image reconstruction.

A criterion passes a node iff its attribute value is >= the threshold; the
root is exempt and never removed, so reconstruction is always total. Four
decision rules resolve keep/remove:

* ``min``: removed iff the node or any ancestor fails (pruning);
* ``max``: removed iff the node and all of its descendants fail (pruning);
* ``direct``: removed iff the node itself fails;
* ``subtractive``: as direct, and every surviving descendant's output level
  is shifted by the total level contrast of its removed ancestors.

For increasing criteria (area, bbox_diag) the four rules agree. Partition
trees support the direct rule only (level shifting is ill-defined on region
means); removed regions take the value of their nearest surviving ancestor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attributes import ATTRIBUTE_KINDS, NodeAttributes, attribute_values, compute_attributes
from .errors import ValidationError
from .hierarchy import (
    PartitionTree,
    _depth_groups,
    build_max_tree,
    build_min_tree,
    build_tree_of_shapes,
    topdown_map,
)
from .raster import Raster

RULES = ("min", "max", "direct", "subtractive")


@dataclass(frozen=True)
class Criterion:
    """Pass iff attribute_value(kind) >= threshold."""

    kind: str
    threshold: float

    def __post_init__(self):
        if self.kind not in ATTRIBUTE_KINDS:
            raise ValidationError(f"unknown attribute kind {self.kind!r}")
        if not math.isfinite(self.threshold):
            raise ValidationError("criterion threshold must be finite")

    def passes(self, attrs: NodeAttributes) -> np.ndarray:
        return attribute_values(attrs, self.kind) >= self.threshold


@dataclass(frozen=True)
class FilterDecisions:
    """Per-node keep/remove plus resolved output values.

    ``out_value`` holds gray levels for component trees (integral; may be
    negative under the subtractive rule on a tree of shapes) and region mean
    values for partition trees.
    """

    removed: np.ndarray
    out_value: np.ndarray
    is_partition: bool


def _check_rule(tree, rule: str):
    if rule not in RULES:
        raise ValidationError(f"unknown decision rule {rule!r} (choose from {RULES})")
    if isinstance(tree, PartitionTree) and rule != "direct":
        raise ValidationError(
            f"partition trees support only the direct rule, got {rule!r}"
        )


def filter_tree(tree, attrs: NodeAttributes, criterion: Criterion, rule: str) -> FilterDecisions:
    """Evaluate the criterion on every node and resolve decisions."""
    _check_rule(tree, rule)
    if attrs.node_count != tree.node_count:
        raise ValidationError("attributes were not computed from this tree")
    passes = criterion.passes(attrs)
    passes[0] = True  # root exemption
    parent = tree.parent

    if rule == "min":
        def update(ids, parent_removed):
            if parent_removed is None:
                return ~passes[ids]
            return parent_removed | ~passes[ids]

        removed = topdown_map(parent, update)
    elif rule == "max":
        keep = passes.copy()
        _, order, bounds = _depth_groups(parent)
        for d in range(len(bounds) - 2, 0, -1):
            ids = order[bounds[d]:bounds[d + 1]]
            if ids.size:
                np.logical_or.at(keep, parent[ids], keep[ids])
        removed = ~keep
    else:  # direct, subtractive
        removed = ~passes

    if isinstance(tree, PartitionTree):
        def update(ids, parent_out):
            if parent_out is None:
                return tree.region_value[ids]
            return np.where(removed[ids], parent_out, tree.region_value[ids])

        out = topdown_map(parent, update)
        return FilterDecisions(removed=removed, out_value=out, is_partition=True)

    level = tree.level
    if rule == "subtractive":
        def update(ids, parent_state):
            # state rows: (output level, accumulated shift)
            if parent_state is None:
                return np.stack([level[ids], np.zeros(ids.size, np.int64)], axis=1)
            p_out, p_shift = parent_state[:, 0], parent_state[:, 1]
            contrast = level[ids] - level[parent[ids]]
            shift = np.where(removed[ids], p_shift + contrast, p_shift)
            out = np.where(removed[ids], p_out, level[ids] - p_shift)
            return np.stack([out, shift], axis=1)

        state = topdown_map(parent, update)
        out = state[:, 0]
    else:
        def update(ids, parent_out):
            if parent_out is None:
                return level[ids].astype(np.int64)
            return np.where(removed[ids], parent_out, level[ids])

        out = topdown_map(parent, update)
    return FilterDecisions(removed=removed, out_value=out.astype(np.int64), is_partition=False)


def reconstruct(tree, decisions: FilterDecisions) -> Raster:
    """Image whose pixels carry the resolved output value of their node."""
    if decisions.removed.size != tree.node_count:
        raise ValidationError("decisions were not computed from this tree")
    band = reconstruct_array(tree, decisions)
    return Raster(values=band[np.newaxis])


def reconstruct_array(tree, decisions: FilterDecisions) -> np.ndarray:
    out = decisions.out_value[tree.pixel_node]
    if not decisions.is_partition:
        out = out.astype(np.int64)
    return out.reshape(tree.height, tree.width)


def _filter_band(tree, band, kind, threshold, rule) -> np.ndarray:
    attrs = compute_attributes(tree, band)
    dec = filter_tree(tree, attrs, Criterion(kind, threshold), rule)
    return reconstruct_array(tree, dec)


def attribute_thinning(band, kind: str, threshold: float, rule: str = "min",
                       connectivity: int = 4) -> np.ndarray:
    """Max-tree attribute filter; output <= input pointwise."""
    tree = build_max_tree(band, connectivity)
    return _filter_band(tree, _band_array(band), kind, threshold, rule)


def attribute_thickening(band, kind: str, threshold: float, rule: str = "min",
                         connectivity: int = 4) -> np.ndarray:
    """Min-tree attribute filter; output >= input pointwise."""
    tree = build_min_tree(band, connectivity)
    return _filter_band(tree, _band_array(band), kind, threshold, rule)


def self_dual_filter(band, kind: str, threshold: float, rule: str = "min",
                     interior_point=(0, 0)) -> np.ndarray:
    """Tree-of-shapes attribute filter; satisfies psi(C - X) = C - psi(X)."""
    tree = build_tree_of_shapes(band, interior_point)
    return _filter_band(tree, _band_array(band), kind, threshold, rule)


def _band_array(band) -> np.ndarray:
    if isinstance(band, Raster):
        return band.band(0)
    return np.asarray(band)
