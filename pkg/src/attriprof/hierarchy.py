"""Hierarchical image representations.

Five hierarchies drive all attribute filtering:

* max-tree / min-tree: component trees of upper / lower level sets, built by
  union-find over pixels sorted by gray level (the min-tree is realized
  through its duality with the max-tree of the complemented image);
* tree of shapes: inclusion hierarchy of hole-filled level-set components,
  built by saturation on a self-dual 2x interpolation of the image (the
  interpolation is digitally well-composed, which makes the construction
  exactly self-dual);
* alpha-tree / omega-tree: partition hierarchies of dissimilarity-connected
  components (omega additionally constrains the global gray range).

Node arrays are parent-first: node 0 is the root, ``parent[i] < i`` for every
other node, so a single forward pass is top-down and a reverse pass is
bottom-up. Trees are immutable and safe to share across threads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ._kernels import backend
from .errors import ValidationError
from .raster import Raster

MAX_GRAY = 65535  # tree inputs are <= 16-bit integers


# ---------------------------------------------------------------------------
# tree types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComponentTree:
    """Rooted hierarchy of nested pixel sets (max/min tree, tree of shapes).

    ``pixel_node`` maps each flat pixel index to the smallest node containing
    it; a node's full pixel set is the union over its subtree.
    """

    kind: str          # 'max' | 'min' | 'shapes'
    connectivity: int  # 4 | 8
    height: int
    width: int
    parent: np.ndarray      # (node_count,) int64, parent[0] == 0
    level: np.ndarray       # (node_count,) int64 gray level
    pixel_node: np.ndarray  # (height*width,) int64

    @property
    def node_count(self) -> int:
        return self.parent.size

    def depths(self) -> np.ndarray:
        return backend.tree_depths(self.parent)

    def node_areas(self) -> np.ndarray:
        """Subtree-inclusive pixel count of every node."""
        direct = np.bincount(self.pixel_node, minlength=self.node_count).astype(np.int64)
        return accumulate_add(self.parent, direct)


@dataclass(frozen=True)
class PartitionTree:
    """Rooted hierarchy of nested flat-zone partitions (alpha/omega tree)."""

    kind: str  # 'alpha' | 'omega'
    height: int
    width: int
    parent: np.ndarray        # (node_count,) int64, parent[0] == 0
    merge_index: np.ndarray   # (node_count,) float64
    pixel_node: np.ndarray    # (height*width,) int64 — the pixel's leaf
    region_value: np.ndarray  # (node_count,) float64 mean gray
    region_range: np.ndarray  # (node_count,) int64 max-min gray

    @property
    def node_count(self) -> int:
        return self.parent.size

    def depths(self) -> np.ndarray:
        return backend.tree_depths(self.parent)

    def node_areas(self) -> np.ndarray:
        direct = np.bincount(self.pixel_node, minlength=self.node_count).astype(np.int64)
        return accumulate_add(self.parent, direct)

    def leaf_mask(self) -> np.ndarray:
        is_parent = np.zeros(self.node_count, dtype=bool)
        is_parent[self.parent[1:]] = True
        return ~is_parent


# ---------------------------------------------------------------------------
# shared tree array helpers
# ---------------------------------------------------------------------------

def tree_depths(parent: np.ndarray) -> np.ndarray:
    return backend.tree_depths(parent)


def _depth_groups(parent: np.ndarray):
    depth = backend.tree_depths(parent)
    order = np.argsort(depth, kind="stable")
    boundaries = np.searchsorted(depth[order], np.arange(depth.max() + 2))
    return depth, order, boundaries


def accumulate_add(parent: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Bottom-up sum over subtrees (values may be 1-D or 2-D node-major)."""
    acc = np.array(values, copy=True)
    _, order, bounds = _depth_groups(parent)
    for d in range(len(bounds) - 2, 0, -1):
        ids = order[bounds[d]:bounds[d + 1]]
        if ids.size:
            np.add.at(acc, parent[ids], acc[ids])
    return acc


def accumulate_extreme(parent: np.ndarray, values: np.ndarray, op) -> np.ndarray:
    """Bottom-up min/max over subtrees (op = np.minimum or np.maximum)."""
    acc = np.array(values, copy=True)
    _, order, bounds = _depth_groups(parent)
    for d in range(len(bounds) - 2, 0, -1):
        ids = order[bounds[d]:bounds[d + 1]]
        if ids.size:
            op.at(acc, parent[ids], acc[ids])
    return acc


def topdown_map(parent: np.ndarray, update) -> np.ndarray:
    """Root-to-leaf propagation: update(ids, parent_values) -> node values."""
    n = parent.size
    out = None
    _, order, bounds = _depth_groups(parent)
    root = order[bounds[0]:bounds[1]]
    first = update(root, None)
    out = np.empty((n,) + first.shape[1:], dtype=first.dtype)
    out[root] = first
    for d in range(1, len(bounds) - 1):
        ids = order[bounds[d]:bounds[d + 1]]
        if ids.size:
            out[ids] = update(ids, out[parent[ids]])
    return out


# ---------------------------------------------------------------------------
# input validation / quantization
# ---------------------------------------------------------------------------

def _as_int_band(band) -> np.ndarray:
    """Validate a tree-input band: 2-D, finite, integer-valued, <= 16-bit."""
    if isinstance(band, Raster):
        if band.bands != 1:
            raise ValidationError(f"tree construction takes a single band, got {band.bands}")
        arr = band.band(0)
    else:
        arr = np.asarray(band)
    if arr.ndim != 2:
        raise ValidationError(f"band must be 2-D, got shape {arr.shape}")
    if np.issubdtype(arr.dtype, np.integer):
        out = arr.astype(np.int64)
    elif np.issubdtype(arr.dtype, np.floating):
        if not np.isfinite(arr).all():
            raise TypeError("band contains non-finite values")
        r = np.rint(arr)
        if not np.array_equal(r, arr):
            raise TypeError("real-valued band must be quantized before tree construction")
        out = r.astype(np.int64)
    else:
        raise TypeError(f"band dtype {arr.dtype} is not integer-valued")
    if out.size and (out.min() < 0 or out.max() > MAX_GRAY):
        raise ValidationError(f"gray levels must lie in 0..{MAX_GRAY}")
    return out


def quantize_band(band: np.ndarray, levels: int = 256) -> np.ndarray:
    """Linear min-max quantization of a real band to 0..levels-1 integers.

    Integer bands pass through unchanged; constant bands map to all zeros.
    """
    arr = np.asarray(band)
    if np.issubdtype(arr.dtype, np.integer):
        return _as_int_band(arr)
    if not np.isfinite(arr).all():
        raise TypeError("band contains non-finite values")
    if levels < 2 or levels > MAX_GRAY + 1:
        raise ValidationError(f"quantization levels must lie in 2..{MAX_GRAY + 1}")
    lo = float(arr.min())
    hi = float(arr.max())
    if hi <= lo:
        return np.zeros(arr.shape, dtype=np.int64)
    scaled = (arr.astype(np.float64) - lo) / (hi - lo) * (levels - 1)
    return np.rint(scaled).astype(np.int64)


def _check_connectivity(connectivity: int):
    if connectivity not in (4, 8):
        raise ValidationError(f"connectivity must be 4 or 8, got {connectivity}")


# ---------------------------------------------------------------------------
# max / min trees
# ---------------------------------------------------------------------------

def _component_tree_from_pixel_parent(parent_px, work_vals, true_levels, H, W,
                                      kind, connectivity) -> ComponentTree:
    n = parent_px.size
    idx = np.arange(n)
    canon = (parent_px == idx) | (work_vals[parent_px] != work_vals)
    cpix = np.flatnonzero(canon)
    order = np.lexsort((cpix, work_vals[cpix]))
    cpix = cpix[order]
    node_of = np.full(n, -1, dtype=np.int64)
    node_of[cpix] = np.arange(cpix.size)
    canon_of = np.where(canon, idx, parent_px)
    assert np.all(canon[canon_of]) and np.all(canon[parent_px[cpix]])
    pixel_node = node_of[canon_of]
    parent_node = node_of[parent_px[cpix]]
    parent_node[0] = 0
    level = true_levels[cpix]

    if parent_node.size > 1:
        if kind == "max":
            assert np.all(level[1:] > level[parent_node[1:]])
        else:
            assert np.all(level[1:] < level[parent_node[1:]])
        assert np.all(parent_node[1:] < np.arange(1, parent_node.size))
    return ComponentTree(
        kind=kind,
        connectivity=connectivity,
        height=H,
        width=W,
        parent=parent_node.astype(np.int64),
        level=level.astype(np.int64),
        pixel_node=pixel_node,
    )


def build_max_tree(band, connectivity: int = 4) -> ComponentTree:
    """Component tree of the upper level sets {p : X(p) >= h}."""
    _check_connectivity(connectivity)
    b = _as_int_band(band)
    H, W = b.shape
    flat = b.ravel()
    order = np.argsort(flat, kind="stable")
    parent_px = backend.max_tree_parent(flat, order, H, W, connectivity)
    return _component_tree_from_pixel_parent(parent_px, flat, flat, H, W, "max", connectivity)


def build_min_tree(band, connectivity: int = 4) -> ComponentTree:
    """Component tree of the lower level sets, via max-tree duality."""
    _check_connectivity(connectivity)
    b = _as_int_band(band)
    H, W = b.shape
    top = int(b.max()) if b.size else 0
    dual = (top - b).ravel()
    order = np.argsort(dual, kind="stable")
    parent_px = backend.max_tree_parent(dual, order, H, W, connectivity)
    return _component_tree_from_pixel_parent(parent_px, dual, top - dual, H, W, "min", connectivity)


# ---------------------------------------------------------------------------
# tree of shapes
# ---------------------------------------------------------------------------

def selfdual_interpolate(band: np.ndarray) -> np.ndarray:
    """2x interpolation at doubled value scale: corners 2a, edges a+b, faces
    the sum of the two middle corner values. Self-dual and digitally
    well-composed, so 4- and 8-connectivity agree on every level set."""
    b = np.asarray(band, dtype=np.int64)
    H, W = b.shape
    Y = np.empty((2 * H - 1, 2 * W - 1), dtype=np.int64)
    Y[::2, ::2] = 2 * b
    Y[::2, 1::2] = b[:, :-1] + b[:, 1:]
    Y[1::2, ::2] = b[:-1, :] + b[1:, :]
    if H > 1 and W > 1:
        quad = np.stack([b[:-1, :-1], b[:-1, 1:], b[1:, :-1], b[1:, 1:]])
        quad = np.sort(quad, axis=0)
        Y[1::2, 1::2] = quad[1] + quad[2]
    return Y


def build_tree_of_shapes(band, interior_point: tuple[int, int] = (0, 0)) -> ComponentTree:
    """Inclusion tree of hole-filled level-set components.

    ``interior_point`` supplies the gray value of the outer region (reached
    through the image border); the default top-left corner matches the usual
    convention of treating the border as the outside.

    Shapes mix upper and lower level-set components, so node pixel sets are
    connected under 8-connectivity (a bright and a dark structure may touch
    diagonally); the tree declares connectivity=8 accordingly.
    """
    b = _as_int_band(band)
    H, W = b.shape
    n = H * W
    ipr, ipc = interior_point
    if not (0 <= ipr < H and 0 <= ipc < W):
        raise ValidationError(f"interior point {interior_point} outside {H}x{W} image")
    pad_val = 2 * int(b[ipr, ipc])
    ypad = np.pad(selfdual_interpolate(b), 1, constant_values=pad_val)
    levels = np.unique(ypad)

    best: dict[bytes, tuple] = {}
    for upper in (True, False):
        hs = levels[1:] if upper else levels[:-1]
        for h in hs:
            pix, offs, yareas = backend.shapes_at_level(ypad, int(h), upper, H, W)
            pref = -int(h) if upper else int(h)
            for i in range(yareas.size):
                px = pix[offs[i]:offs[i + 1]]
                if px.size == n:
                    continue  # only the explicit root covers the full domain
                key = hashlib.blake2b(px.tobytes(), digest_size=16).digest()
                old = best.get(key)
                cand = (int(yareas[i]), pref)
                if old is None or cand < old[0]:
                    best[key] = (cand, int(h), px)

    shapes = [(np.arange(n, dtype=np.int64), pad_val)]
    shapes.extend((px, h) for (_, h, px) in best.values())
    shapes.sort(key=lambda s: (-s[0].size, int(s[0][0])))

    m = len(shapes)
    parent = np.zeros(m, dtype=np.int64)
    level2 = np.empty(m, dtype=np.int64)
    owner = np.zeros(n, dtype=np.int64)
    for i, (px, h) in enumerate(shapes):
        if i:
            parent[i] = owner[px[0]]
        level2[i] = h
        owner[px] = i

    # canonical form: a node must own at least one pixel directly (grouping
    # shapes arising at interpolated half-levels splice away), and no node
    # keeps its parent's level
    owned = np.zeros(m, dtype=bool)
    owned[owner] = True
    owned[0] = True
    alias = np.arange(m, dtype=np.int64)
    new_parent = np.zeros(m, dtype=np.int64)
    for i in range(1, m):
        p = alias[parent[i]]
        if not owned[i] or level2[i] == level2[p]:
            alias[i] = p
        else:
            new_parent[i] = p
    keep = alias == np.arange(m)
    assert np.all(level2[keep] % 2 == 0)
    compact = np.cumsum(keep) - 1
    parent_f = compact[new_parent[keep]]
    level_f = level2[keep] // 2
    pixel_node = compact[alias[owner]]

    if parent_f.size > 1:
        assert np.all(level_f[1:] != level_f[parent_f[1:]])
        assert np.all(parent_f[1:] < np.arange(1, parent_f.size))
    assert np.array_equal(level_f[pixel_node], b.ravel())
    return ComponentTree(
        kind="shapes",
        connectivity=8,
        height=H,
        width=W,
        parent=parent_f.astype(np.int64),
        level=level_f.astype(np.int64),
        pixel_node=pixel_node.astype(np.int64),
    )


# ---------------------------------------------------------------------------
# alpha / omega partition trees
# ---------------------------------------------------------------------------

def _resolve_alive(par: np.ndarray, alive: np.ndarray) -> np.ndarray:
    """First alive ancestor (including self) in a raw forest."""
    m = par.size
    res = np.full(m, -1, dtype=np.int64)
    parl = par.tolist()
    alivel = alive.tolist()
    resl = res.tolist()
    for x in range(m):
        if resl[x] != -1:
            continue
        chain = []
        y = x
        while resl[y] == -1 and not alivel[y]:
            chain.append(y)
            y = parl[y]
        target = resl[y] if resl[y] != -1 else y
        resl[x] = target
        for c in chain:
            resl[c] = target
    return np.asarray(resl, dtype=np.int64)


def _canonical_partition(par, merge, alive, minv, maxv, band) -> PartitionTree:
    H, W = band.shape
    n = H * W
    res = _resolve_alive(par, alive)
    alive_ids = np.flatnonzero(alive)
    raw_parent = res[par[alive_ids]]

    # subtree-minimum pixel index orders nodes deterministically; merge
    # indices strictly increase toward the root, so ascending merge order is
    # a valid bottom-up schedule (groups of equal merge are never nested)
    old_to_live = np.full(par.size, -1, dtype=np.int64)
    old_to_live[alive_ids] = np.arange(alive_ids.size)
    live_parent = old_to_live[raw_parent]
    min_pixel = np.full(alive_ids.size, n, dtype=np.int64)
    leaf_of_pixel = old_to_live[res[np.arange(n)]]
    np.minimum.at(min_pixel, leaf_of_pixel, np.arange(n))
    merge_live = merge[alive_ids].astype(np.float64)
    up_order = np.argsort(merge_live, kind="stable")
    sorted_merge = merge_live[up_order]
    bounds = np.searchsorted(sorted_merge, np.unique(sorted_merge))
    bounds = np.append(bounds, up_order.size)
    for g in range(bounds.size - 1):
        ids = up_order[bounds[g]:bounds[g + 1]]
        np.minimum.at(min_pixel, live_parent[ids], min_pixel[ids])
    order = np.lexsort((min_pixel, -merge_live))
    rank = np.empty(alive_ids.size, dtype=np.int64)
    rank[order] = np.arange(alive_ids.size)

    parent_f = rank[live_parent[order]]
    merge_f = merge_live[order]
    pixel_node = rank[leaf_of_pixel]
    minv_f = minv[alive_ids][order]
    maxv_f = maxv[alive_ids][order]

    assert parent_f[0] == 0
    if parent_f.size > 1:
        assert np.all(parent_f[1:] < np.arange(1, parent_f.size))
        assert np.all(merge_f[1:] <= merge_f[parent_f[1:]])

    flat = band.ravel().astype(np.float64)
    direct_sum = np.bincount(pixel_node, weights=flat, minlength=parent_f.size)
    direct_cnt = np.bincount(pixel_node, minlength=parent_f.size).astype(np.float64)
    total_sum = accumulate_add(parent_f, direct_sum)
    total_cnt = accumulate_add(parent_f, direct_cnt)
    region_value = total_sum / total_cnt

    return PartitionTree(
        kind="alpha",
        height=H,
        width=W,
        parent=parent_f,
        merge_index=merge_f,
        pixel_node=pixel_node,
        region_value=region_value,
        region_range=(maxv_f - minv_f).astype(np.int64),
    )


def build_alpha_tree(band, dissimilarity: str = "absolute-difference") -> PartitionTree:
    """Partition tree of alpha-connected components (4-adjacency edges
    weighted by absolute gray difference)."""
    if dissimilarity != "absolute-difference":
        raise ValidationError(f"unsupported dissimilarity {dissimilarity!r}")
    b = _as_int_band(band)
    par, alpha, minv, maxv, alive = backend.alpha_tree_build(b)
    return _canonical_partition(par, alpha, alive, minv, maxv, b)


def build_omega_tree(band) -> PartitionTree:
    """Partition tree of range-constrained connected components.

    The node for (pixel, omega) is the largest alpha-CC with alpha <= omega
    whose global gray range is <= omega; both quantities are non-decreasing
    toward the root, so the tree is the alpha-tree re-indexed by
    max(alpha, range) with equal-index chains collapsed.
    """
    at = build_alpha_tree(band)
    omega = np.maximum(at.merge_index, at.region_range.astype(np.float64))
    m = at.node_count

    # collapse equal-omega chains by pointer doubling (equality is
    # transitive, so composing one-step aliases reaches the first ancestor
    # with a distinct omega)
    alias = np.where(omega == omega[at.parent], at.parent, np.arange(m))
    alias[0] = 0
    while True:
        nxt = alias[alias]
        if np.array_equal(nxt, alias):
            break
        alias = nxt
    new_parent = np.zeros(m, dtype=np.int64)
    keep = alias == np.arange(m)
    new_parent[keep] = alias[at.parent[keep]]
    kept_ids = np.flatnonzero(keep)
    # reorder survivors by (omega desc, min subtree pixel) for parent-first ids
    min_pixel = np.full(m, at.height * at.width, dtype=np.int64)
    np.minimum.at(min_pixel, at.pixel_node, np.arange(at.height * at.width))
    min_pixel = accumulate_extreme(at.parent, min_pixel, np.minimum)
    order = np.lexsort((min_pixel[kept_ids], -omega[kept_ids]))
    kept_sorted = kept_ids[order]
    rank = np.full(m, -1, dtype=np.int64)
    rank[kept_sorted] = np.arange(kept_sorted.size)

    parent_f = rank[new_parent[kept_sorted]]
    parent_f[0] = 0
    pixel_node = rank[alias[at.pixel_node]]

    tree = PartitionTree(
        kind="omega",
        height=at.height,
        width=at.width,
        parent=parent_f,
        merge_index=omega[kept_sorted],
        pixel_node=pixel_node,
        region_value=at.region_value[kept_sorted],
        region_range=at.region_range[kept_sorted],
    )
    if tree.node_count > 1:
        assert np.all(tree.parent[1:] < np.arange(1, tree.node_count))
        assert np.all(tree.merge_index[1:] <= tree.merge_index[tree.parent[1:]])
    return tree


def partition_cut(tree: PartitionTree, value: float) -> np.ndarray:
    """Label image of the partition at a given merge-index cut.

    Each pixel gets the id of its highest ancestor with merge_index <= value.
    """
    def update(ids, parent_vals):
        if parent_vals is None:
            return np.where(tree.merge_index[ids] <= value, ids, -1)
        own = np.where(tree.merge_index[ids] <= value, ids, -1)
        return np.where(parent_vals >= 0, parent_vals, own)

    rep = topdown_map(tree.parent, update)
    labels = rep[tree.pixel_node]
    assert (labels >= 0).all()  # leaves always satisfy merge_index 0 <= value
    return labels.reshape(tree.height, tree.width)


# ---------------------------------------------------------------------------
# debug dump
# ---------------------------------------------------------------------------

def dump_tree(tree, attrs=None) -> str:
    """Line-oriented text dump (node id, parent, level/merge index, area),
    with attribute columns appended when given. Intended for golden-file
    tests and debugging."""
    areas = tree.node_areas()
    lines = []
    if isinstance(tree, ComponentTree):
        header = "id\tparent\tlevel\tarea"
        key = tree.level
    else:
        header = "id\tparent\tmerge\tarea"
        key = tree.merge_index
    cols = []
    if attrs is not None:
        from .attributes import ATTRIBUTE_KINDS, attribute_values

        header += "\t" + "\t".join(ATTRIBUTE_KINDS)
        cols = [attribute_values(attrs, k) for k in ATTRIBUTE_KINDS]
    lines.append(header)
    for i in range(tree.node_count):
        row = f"{i}\t{tree.parent[i]}\t{key[i]:g}\t{areas[i]}"
        if cols:
            row += "\t" + "\t".join(f"{c[i]:.6g}" for c in cols)
        lines.append(row)
    return "\n".join(lines) + "\n"
