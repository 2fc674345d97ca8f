"""Pure-Python/numpy implementations of the hot kernels.

This module mirrors the compiled extension (``_native``) function by
function; the package selects one of the two at import time. Everything here
favors clarity and exactness over speed — both lanes must produce identical
arrays for identical inputs.
"""

from __future__ import annotations

import numpy as np

NAME = "fallback"


# ---------------------------------------------------------------------------
# connected-component labeling (run-based union-find)
# ---------------------------------------------------------------------------

def label_components(mask: np.ndarray, connectivity: int = 4):
    """Label connected components of a boolean mask.

    Returns (labels, count): labels is int32 with -1 outside the mask and
    component ids 0..count-1 ordered by each component's first pixel in
    raster order.
    """
    m = np.ascontiguousarray(mask, dtype=bool)
    H, W = m.shape
    mp = np.zeros((H, W + 2), dtype=np.int8)
    mp[:, 1:-1] = m
    d = np.diff(mp, axis=1)
    sr, sc = np.nonzero(d == 1)
    _, ec = np.nonzero(d == -1)
    nruns = sr.size
    labels = np.full((H, W), -1, dtype=np.int32)
    if nruns == 0:
        return labels, 0

    parent = list(range(nruns))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    row_first = np.searchsorted(sr, np.arange(H + 1)).tolist()
    pad = 1 if connectivity == 8 else 0
    ss = sc.tolist()
    ee = ec.tolist()
    for r in range(1, H):
        a, aend = row_first[r - 1], row_first[r]
        b, bend = row_first[r], row_first[r + 1]
        while a < aend and b < bend:
            if ss[a] < ee[b] + pad and ss[b] < ee[a] + pad:
                ra, rb = find(a), find(b)
                if ra != rb:
                    if ra < rb:
                        parent[rb] = ra
                    else:
                        parent[ra] = rb
            if ee[a] <= ee[b]:
                a += 1
            else:
                b += 1

    comp_of_root: dict[int, int] = {}
    comp_ids = np.empty(nruns, dtype=np.int32)
    next_id = 0
    for i in range(nruns):
        r = find(i)
        cid = comp_of_root.get(r)
        if cid is None:
            cid = next_id
            comp_of_root[r] = cid
            next_id += 1
        comp_ids[i] = cid

    lengths = (np.asarray(ee) - np.asarray(ss)).astype(np.int64)
    starts_flat = sr.astype(np.int64) * W + np.asarray(ss)
    total = int(lengths.sum())
    reps = np.repeat(starts_flat, lengths)
    offs = np.arange(total) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    labels.ravel()[reps + offs] = np.repeat(comp_ids, lengths)
    return labels, next_id


# ---------------------------------------------------------------------------
# max-tree (union-find over pixels sorted by gray level)
# ---------------------------------------------------------------------------

def max_tree_parent(values: np.ndarray, order: np.ndarray, H: int, W: int,
                    connectivity: int = 4) -> np.ndarray:
    """Canonical pixel-parent relation of the max-tree.

    ``values`` is the flat image, ``order`` an ascending stable argsort of it.
    Pixels are processed from brightest to darkest; each processed neighbor
    set is merged union-find style. A final pass canonicalizes parents so
    that every pixel points to the canonical pixel of its node.
    """
    n = H * W
    vals = values.tolist()
    seq = order.tolist()
    parent = [-1] * n
    zpar = [0] * n
    eight = connectivity == 8
    for k in range(n - 1, -1, -1):
        p = seq[k]
        parent[p] = p
        zpar[p] = p
        r0 = p // W
        c0 = p - r0 * W
        for dr in (-1, 0, 1):
            r1 = r0 + dr
            if r1 < 0 or r1 >= H:
                continue
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                if not eight and dr != 0 and dc != 0:
                    continue
                c1 = c0 + dc
                if c1 < 0 or c1 >= W:
                    continue
                q = r1 * W + c1
                if parent[q] == -1:
                    continue
                root = q
                while zpar[root] != root:
                    root = zpar[root]
                while zpar[q] != root:
                    zpar[q], q = root, zpar[q]
                if root != p:
                    parent[root] = p
                    zpar[root] = p
    for k in range(n):
        p = seq[k]
        q = parent[p]
        if vals[parent[q]] == vals[q]:
            parent[p] = parent[q]
    return np.asarray(parent, dtype=np.int64)


# ---------------------------------------------------------------------------
# alpha-tree (Kruskal-style union-find over 4-adjacency edges)
# ---------------------------------------------------------------------------

def alpha_tree_build(band: np.ndarray):
    """Raw alpha-tree forest of a 2-D integer band.

    Returns (parent, alpha, minv, maxv, alive, n_nodes) over node ids where
    ids 0..n-1 are the per-pixel singletons. Nodes absorbed into an
    equal-alpha survivor are marked dead; their parent points at the
    absorber. Canonicalization happens in the caller.
    """
    b = np.ascontiguousarray(band, dtype=np.int64)
    H, W = b.shape
    n = H * W
    v = b.ravel()

    idx = np.arange(n, dtype=np.int64).reshape(H, W)
    ea = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    eb = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    ew = np.abs(v[ea] - v[eb])
    order = np.argsort(ew, kind="stable")

    cap = 2 * n
    par = list(range(cap))
    alpha = [0] * cap
    zpar = list(range(cap))
    alive = [True] * cap
    minv = v.tolist() + [0] * n
    maxv = v.tolist() + [0] * n
    nnodes = n

    eal = ea.tolist()
    ebl = eb.tolist()
    ewl = ew.tolist()

    def find(x):
        root = x
        while zpar[root] != root:
            root = zpar[root]
        while zpar[x] != root:
            zpar[x], x = root, zpar[x]
        return root

    for ei in order.tolist():
        a, bb, w = eal[ei], ebl[ei], ewl[ei]
        ra, rb = find(a), find(bb)
        if ra == rb:
            continue
        wa, wb = alpha[ra], alpha[rb]
        if wa == w and wb == w:
            par[rb] = ra
            alive[rb] = False
            zpar[rb] = ra
            winner = ra
        elif wa == w:
            par[rb] = ra
            zpar[rb] = ra
            winner = ra
        elif wb == w:
            par[ra] = rb
            zpar[ra] = rb
            winner = rb
        else:
            c = nnodes
            nnodes += 1
            alpha[c] = w
            par[ra] = c
            par[rb] = c
            zpar[ra] = c
            zpar[rb] = c
            winner = c
        lo = minv[ra] if minv[ra] < minv[rb] else minv[rb]
        hi = maxv[ra] if maxv[ra] > maxv[rb] else maxv[rb]
        minv[winner] = lo
        maxv[winner] = hi

    return (
        np.asarray(par[:nnodes], dtype=np.int64),
        np.asarray(alpha[:nnodes], dtype=np.int64),
        np.asarray(minv[:nnodes], dtype=np.int64),
        np.asarray(maxv[:nnodes], dtype=np.int64),
        np.asarray(alive[:nnodes], dtype=bool),
    )


# ---------------------------------------------------------------------------
# depth of every node in a parent-first tree (parent[i] < i, root 0)
# ---------------------------------------------------------------------------

def tree_depths(parent: np.ndarray) -> np.ndarray:
    par = parent.tolist()
    depth = [0] * len(par)
    for i in range(1, len(par)):
        depth[i] = depth[par[i]] + 1
    return np.asarray(depth, dtype=np.int64)


# ---------------------------------------------------------------------------
# level-set shapes for the tree of shapes (one threshold, one family)
# ---------------------------------------------------------------------------

def shapes_at_level(ypad: np.ndarray, h: int, upper: bool, Hx: int, Wx: int):
    """Saturated components of one threshold of the padded interpolated grid.

    Masks use 4-connectivity, complements 8-connectivity (equivalent to any
    dual pairing on the well-composed interpolation). Components containing
    the frame are skipped (they restrict to the explicit root). Returns
    (pix, offsets, yareas): per shape, the sorted original-grid flat indices
    of its restriction, plus the shape's area on the padded grid.
    """
    mask = (ypad >= h) if upper else (ypad <= h)
    Hp, Wp = mask.shape
    empty = (np.empty(0, np.int64), np.zeros(1, np.int64), np.empty(0, np.int64))
    if not mask.any():
        return empty
    lm, nm = label_components(mask, 4)
    lc, _ = label_components(~mask, 8)
    comb = np.where(mask, lm, lc + nm).ravel()
    K = int(comb.max()) + 1
    uids, fidx = np.unique(comb, return_index=True)
    first_idx = np.zeros(K, np.int64)
    first_idx[uids] = fidx
    frame_comp = int(comb[0])
    parent_comp = np.full(K, -1, np.int64)
    inner = first_idx >= Wp
    parent_comp[inner] = comb[first_idx[inner] - Wp]
    parent_comp[frame_comp] = frame_comp

    chains: list[tuple | None] = [None] * K
    chains[frame_comp] = ()
    for k0 in range(K):
        stack = []
        cur = k0
        while chains[cur] is None:
            stack.append(cur)
            cur = int(parent_comp[cur])
        for c in reversed(stack):
            pc = chains[int(parent_comp[c])]
            chains[c] = ((c,) + pc) if c < nm else pc

    counts = np.bincount(comb, minlength=K)
    order = np.argsort(comb, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(counts)])

    shape_ids = [k for k in range(nm) if k != frame_comp]
    if not shape_ids:
        return empty
    sid_index = {k: i for i, k in enumerate(shape_ids)}
    pix_parts: list[list] = [[] for _ in shape_ids]
    yareas = [0] * len(shape_ids)
    for k in range(K):
        ch = chains[k]
        if not ch:
            continue
        seg = order[bounds[k]:bounds[k + 1]]
        r = seg // Wp
        c = seg - r * Wp
        sel = (r & 1).astype(bool) & (c & 1).astype(bool)
        xf = ((r[sel] - 1) >> 1) * Wx + ((c[sel] - 1) >> 1)
        cnt = int(seg.size)
        for mcomp in ch:
            i = sid_index[mcomp]
            yareas[i] += cnt
            if xf.size:
                pix_parts[i].append(xf)

    out_pix = []
    offsets = [0]
    out_area = []
    for i, parts in enumerate(pix_parts):
        if not parts:
            continue
        px = np.sort(np.concatenate(parts))
        out_pix.append(px)
        offsets.append(offsets[-1] + px.size)
        out_area.append(yareas[i])
    if not out_pix:
        return empty
    return (
        np.concatenate(out_pix),
        np.asarray(offsets, dtype=np.int64),
        np.asarray(out_area, dtype=np.int64),
    )
