"""Per-node statistics for filtering criteria.

One pass scatters each pixel's contribution onto its smallest containing
node, a bottom-up pass accumulates into parents, so every node's accumulators
cover its full (subtree-inclusive) pixel set. Gray statistics of
tree-of-shapes nodes therefore include the filled holes, consistent with the
shape's pixel set.

Derived attributes:

* ``area``: pixel count.
* ``std_dev``: population standard deviation of gray values.
* ``inertia``: sum((r - rbar)^2 + (c - cbar)^2) / area^2 — the
  area-normalized (scale-invariant) central moment, dimensionless so that
  thresholds like 0.2..0.5 make sense.
* ``bbox_diag``: sqrt(h^2 + w^2) of the inclusive bounding box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ExtentError, ValidationError
from .hierarchy import accumulate_add, accumulate_extreme
from .raster import Raster

ATTRIBUTE_KINDS = ("area", "std_dev", "inertia", "bbox_diag")
INCREASING_KINDS = ("area", "bbox_diag")


@dataclass(frozen=True)
class NodeAttributes:
    """Accumulated statistics per tree node (int64 to stay exact at 16-bit
    levels and megapixel areas)."""

    area: np.ndarray
    min_row: np.ndarray
    min_col: np.ndarray
    max_row: np.ndarray
    max_col: np.ndarray
    sum_r: np.ndarray
    sum_c: np.ndarray
    sum_rr: np.ndarray
    sum_cc: np.ndarray
    gray_sum: np.ndarray
    gray_sum_sq: np.ndarray

    @property
    def node_count(self) -> int:
        return self.area.size

    def std_dev(self) -> np.ndarray:
        # numerator a*gss - gs^2 in exact integers: it is algebraically
        # invariant under gray complement, keeping dual filters bit-exact
        a = self.area
        gs = self.gray_sum
        gss = self.gray_sum_sq
        if a.size == 0:
            return np.zeros(0)
        if int(a.max()) * int(max(gss.max(), 1)) < 2**62:
            num = a * gss - gs * gs
        else:
            num = a.astype(object) * gss.astype(object) - gs.astype(object) ** 2
        num_f = np.maximum(np.asarray(num, dtype=np.float64), 0.0)
        return np.sqrt(num_f) / a

    def inertia(self) -> np.ndarray:
        a = self.area.astype(np.float64)
        central = (self.sum_rr - self.sum_r.astype(np.float64) ** 2 / a) + (
            self.sum_cc - self.sum_c.astype(np.float64) ** 2 / a
        )
        return np.maximum(central, 0.0) / (a * a)

    def bbox_diag(self) -> np.ndarray:
        h = (self.max_row - self.min_row + 1).astype(np.float64)
        w = (self.max_col - self.min_col + 1).astype(np.float64)
        return np.hypot(h, w)


def compute_attributes(tree, band) -> NodeAttributes:
    """Accumulate node statistics for a tree built from ``band``."""
    if isinstance(band, Raster):
        if band.bands != 1:
            raise ValidationError("attributes take a single band")
        arr = band.band(0)
    else:
        arr = np.asarray(band)
    if arr.shape != (tree.height, tree.width):
        raise ExtentError(
            f"band extent {arr.shape} does not match tree {tree.height}x{tree.width}"
        )
    n_nodes = tree.node_count
    pn = tree.pixel_node
    gray = arr.ravel().astype(np.int64)
    rows = (np.arange(tree.height, dtype=np.int64)[:, None]
            + np.zeros(tree.width, dtype=np.int64)).ravel()
    cols = (np.zeros(tree.height, dtype=np.int64)[:, None]
            + np.arange(tree.width, dtype=np.int64)).ravel()

    def scatter_add(vals):
        out = np.zeros(n_nodes, dtype=np.int64)
        np.add.at(out, pn, vals)
        return out

    area = scatter_add(np.ones(pn.size, dtype=np.int64))
    sum_r = scatter_add(rows)
    sum_c = scatter_add(cols)
    sum_rr = scatter_add(rows * rows)
    sum_cc = scatter_add(cols * cols)
    gray_sum = scatter_add(gray)
    gray_sum_sq = scatter_add(gray * gray)

    big = np.int64(np.iinfo(np.int64).max)
    min_row = np.full(n_nodes, big, dtype=np.int64)
    min_col = np.full(n_nodes, big, dtype=np.int64)
    max_row = np.full(n_nodes, -1, dtype=np.int64)
    max_col = np.full(n_nodes, -1, dtype=np.int64)
    np.minimum.at(min_row, pn, rows)
    np.minimum.at(min_col, pn, cols)
    np.maximum.at(max_row, pn, rows)
    np.maximum.at(max_col, pn, cols)

    parent = tree.parent
    stacked = np.stack([area, sum_r, sum_c, sum_rr, sum_cc, gray_sum, gray_sum_sq], axis=1)
    stacked = accumulate_add(parent, stacked)
    min_row = accumulate_extreme(parent, min_row, np.minimum)
    min_col = accumulate_extreme(parent, min_col, np.minimum)
    max_row = accumulate_extreme(parent, max_row, np.maximum)
    max_col = accumulate_extreme(parent, max_col, np.maximum)

    attrs = NodeAttributes(
        area=stacked[:, 0],
        min_row=min_row,
        min_col=min_col,
        max_row=max_row,
        max_col=max_col,
        sum_r=stacked[:, 1],
        sum_c=stacked[:, 2],
        sum_rr=stacked[:, 3],
        sum_cc=stacked[:, 4],
        gray_sum=stacked[:, 5],
        gray_sum_sq=stacked[:, 6],
    )
    assert attrs.area[0] == tree.height * tree.width
    assert (attrs.area > 0).all()
    return attrs


def attribute_values(attrs: NodeAttributes, kind: str) -> np.ndarray:
    """Vector of one derived attribute over all nodes."""
    if kind == "area":
        return attrs.area.astype(np.float64)
    if kind == "std_dev":
        return attrs.std_dev()
    if kind == "inertia":
        return attrs.inertia()
    if kind == "bbox_diag":
        return attrs.bbox_diag()
    raise ValidationError(f"unknown attribute kind {kind!r} (choose from {ATTRIBUTE_KINDS})")


def attribute_value(attrs: NodeAttributes, node: int, kind: str) -> float:
    """One derived attribute of one node."""
    if not 0 <= node < attrs.node_count:
        raise ValidationError(f"node {node} out of range 0..{attrs.node_count - 1}")
    return float(attribute_values(attrs, kind)[node])
