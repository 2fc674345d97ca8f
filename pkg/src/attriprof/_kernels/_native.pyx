# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Mirrors ``fallback`` function by function; both lanes must return identical
arrays for identical inputs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "native"


def label_components(mask, int connectivity=4):
    """Label connected components of a boolean mask (ids in raster order)."""
    cdef cnp.ndarray m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t H = m.shape[0], W = m.shape[1]
    labels_arr = np.full((H, W), -1, dtype=np.int32)
    stack_arr = np.empty(H * W, dtype=np.int64)
    cdef cnp.int32_t[:, ::1] lab = labels_arr
    cdef cnp.uint8_t[:, ::1] mm = m
    cdef cnp.int64_t[::1] st = stack_arr
    cdef Py_ssize_t r, c, sp, p, pr, pc, rr, cc
    cdef int dr, dc
    cdef int count = 0
    cdef bint eight = connectivity == 8
    for r in range(H):
        for c in range(W):
            if mm[r, c] and lab[r, c] == -1:
                lab[r, c] = count
                st[0] = r * W + c
                sp = 1
                while sp > 0:
                    sp -= 1
                    p = st[sp]
                    pr = p // W
                    pc = p - pr * W
                    for dr in range(-1, 2):
                        rr = pr + dr
                        if rr < 0 or rr >= H:
                            continue
                        for dc in range(-1, 2):
                            if dr == 0 and dc == 0:
                                continue
                            if (not eight) and dr != 0 and dc != 0:
                                continue
                            cc = pc + dc
                            if cc < 0 or cc >= W:
                                continue
                            if mm[rr, cc] and lab[rr, cc] == -1:
                                lab[rr, cc] = count
                                st[sp] = rr * W + cc
                                sp += 1
                count += 1
    return labels_arr, count


def max_tree_parent(values, order, int H, int W, int connectivity=4):
    """Canonical pixel-parent relation of the max-tree (union-find)."""
    cdef cnp.ndarray v_arr = np.ascontiguousarray(values, dtype=np.int64)
    cdef cnp.ndarray o_arr = np.ascontiguousarray(order, dtype=np.int64)
    cdef Py_ssize_t n = H * W
    parent_arr = np.full(n, -1, dtype=np.int64)
    zpar_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] vals = v_arr
    cdef cnp.int64_t[::1] seq = o_arr
    cdef cnp.int64_t[::1] parent = parent_arr
    cdef cnp.int64_t[::1] zpar = zpar_arr
    cdef Py_ssize_t k, p, q, root, r0, c0, r1, c1, nxt
    cdef int dr, dc
    cdef bint eight = connectivity == 8
    for k in range(n - 1, -1, -1):
        p = seq[k]
        parent[p] = p
        zpar[p] = p
        r0 = p // W
        c0 = p - r0 * W
        for dr in range(-1, 2):
            r1 = r0 + dr
            if r1 < 0 or r1 >= H:
                continue
            for dc in range(-1, 2):
                if dr == 0 and dc == 0:
                    continue
                if (not eight) and dr != 0 and dc != 0:
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
                    nxt = zpar[q]
                    zpar[q] = root
                    q = nxt
                if root != p:
                    parent[root] = p
                    zpar[root] = p
    for k in range(n):
        p = seq[k]
        q = parent[p]
        if vals[parent[q]] == vals[q]:
            parent[p] = parent[q]
    return parent_arr


def alpha_tree_build(band):
    """Raw alpha-tree forest (see fallback.alpha_tree_build)."""
    b = np.ascontiguousarray(band, dtype=np.int64)
    cdef Py_ssize_t H = b.shape[0], W = b.shape[1]
    cdef Py_ssize_t n = H * W
    v = b.ravel()
    idx = np.arange(n, dtype=np.int64).reshape(H, W)
    ea_arr = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    eb_arr = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    ew = np.abs(v[ea_arr] - v[eb_arr])
    order_arr = np.argsort(ew, kind="stable").astype(np.int64)

    cdef Py_ssize_t cap = 2 * n
    par_arr = np.arange(cap, dtype=np.int64)
    alpha_arr = np.zeros(cap, dtype=np.int64)
    zpar_arr = np.arange(cap, dtype=np.int64)
    alive_arr = np.ones(cap, dtype=np.uint8)
    minv_arr = np.empty(cap, dtype=np.int64)
    maxv_arr = np.empty(cap, dtype=np.int64)
    minv_arr[:n] = v
    maxv_arr[:n] = v
    minv_arr[n:] = 0
    maxv_arr[n:] = 0

    cdef cnp.int64_t[::1] par = par_arr
    cdef cnp.int64_t[::1] alpha = alpha_arr
    cdef cnp.int64_t[::1] zpar = zpar_arr
    cdef cnp.uint8_t[::1] alive = alive_arr
    cdef cnp.int64_t[::1] minv = minv_arr
    cdef cnp.int64_t[::1] maxv = maxv_arr
    cdef cnp.int64_t[::1] ea = ea_arr
    cdef cnp.int64_t[::1] eb = eb_arr
    cdef cnp.int64_t[::1] ew_v = np.ascontiguousarray(ew, dtype=np.int64)
    cdef cnp.int64_t[::1] order = order_arr

    cdef Py_ssize_t nnodes = n
    cdef Py_ssize_t i, ei, a, bb, ra, rb, root, nxt, winner, c
    cdef cnp.int64_t w, wa, wb, lo, hi
    cdef Py_ssize_t nedges = order.shape[0]

    for i in range(nedges):
        ei = order[i]
        a = ea[ei]
        bb = eb[ei]
        w = ew_v[ei]
        root = a
        while zpar[root] != root:
            root = zpar[root]
        while zpar[a] != root:
            nxt = zpar[a]
            zpar[a] = root
            a = nxt
        ra = root
        root = bb
        while zpar[root] != root:
            root = zpar[root]
        while zpar[bb] != root:
            nxt = zpar[bb]
            zpar[bb] = root
            bb = nxt
        rb = root
        if ra == rb:
            continue
        wa = alpha[ra]
        wb = alpha[rb]
        if wa == w and wb == w:
            par[rb] = ra
            alive[rb] = 0
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
        par_arr[:nnodes].copy(),
        alpha_arr[:nnodes].copy(),
        minv_arr[:nnodes].copy(),
        maxv_arr[:nnodes].copy(),
        alive_arr[:nnodes].astype(bool),
    )


def tree_depths(parent):
    """Depth of every node for a parent-first tree (parent[i] < i, root 0)."""
    cdef cnp.ndarray p_arr = np.ascontiguousarray(parent, dtype=np.int64)
    cdef Py_ssize_t n = p_arr.shape[0]
    depth_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] par = p_arr
    cdef cnp.int64_t[::1] depth = depth_arr
    cdef Py_ssize_t i
    for i in range(1, n):
        depth[i] = depth[par[i]] + 1
    return depth_arr


def shapes_at_level(ypad, long h, bint upper, long Hx, long Wx):
    """Saturated components of one threshold (see fallback.shapes_at_level)."""
    yp = np.ascontiguousarray(ypad, dtype=np.int64)
    mask = (yp >= h) if upper else (yp <= h)
    empty = (np.empty(0, np.int64), np.zeros(1, np.int64), np.empty(0, np.int64))
    if not mask.any():
        return empty
    lm_arr, nm_py = label_components(mask, 4)
    lc_arr, _ = label_components(~mask, 8)
    cdef Py_ssize_t Hp = yp.shape[0], Wp = yp.shape[1]
    cdef Py_ssize_t nm = nm_py
    comb_arr = np.where(mask, lm_arr, lc_arr + nm).astype(np.int64).ravel()
    cdef cnp.int64_t[::1] comb = comb_arr
    cdef Py_ssize_t npix = Hp * Wp
    cdef Py_ssize_t K = int(comb_arr.max()) + 1

    first_arr = np.full(K, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] first_idx = first_arr
    cdef Py_ssize_t p, k
    for p in range(npix):
        k = comb[p]
        if first_idx[k] == -1:
            first_idx[k] = p

    cdef Py_ssize_t frame_comp = comb[0]
    parent_arr = np.empty(K, dtype=np.int64)
    cdef cnp.int64_t[::1] parent_comp = parent_arr
    for k in range(K):
        if k == frame_comp:
            parent_comp[k] = k
        else:
            parent_comp[k] = comb[first_idx[k] - Wp]

    # next mask component above each mask component (-1 terminates)
    next_up_arr = np.full(K, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] next_up = next_up_arr
    cdef Py_ssize_t d
    for k in range(nm):
        if k == frame_comp:
            continue
        d = parent_comp[k]
        if d == frame_comp:
            next_up[k] = -1
        else:
            next_up[k] = parent_comp[d]
            if next_up[k] == frame_comp:
                next_up[k] = -1

    # full component pixel counts
    counts_arr = np.bincount(comb_arr, minlength=K).astype(np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr

    # restricted pixels grouped by component (ascending within each group)
    rcount_arr = np.zeros(K, dtype=np.int64)
    cdef cnp.int64_t[::1] rcount = rcount_arr
    cdef Py_ssize_t a, bcol, pp
    for a in range(Hx):
        for bcol in range(Wx):
            pp = (2 * a + 1) * Wp + (2 * bcol + 1)
            rcount[comb[pp]] += 1
    roff_arr = np.zeros(K + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] roff = roff_arr
    for k in range(K):
        roff[k + 1] = roff[k] + rcount[k]
    rpix_arr = np.empty(roff[K], dtype=np.int64)
    cdef cnp.int64_t[::1] rpix = rpix_arr
    fill_arr = roff_arr[:K].copy()
    cdef cnp.int64_t[::1] fill = fill_arr
    for a in range(Hx):
        for bcol in range(Wx):
            pp = (2 * a + 1) * Wp + (2 * bcol + 1)
            k = comb[pp]
            rpix[fill[k]] = a * Wx + bcol
            fill[k] += 1

    # first owning mask component of every component (-1 = none)
    own_arr = np.full(K, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] own = own_arr
    for k in range(K):
        if k == frame_comp:
            own[k] = -1
        elif k < nm:
            own[k] = k
        else:
            d = parent_comp[k]
            own[k] = -1 if d == frame_comp else d

    # accumulate per-shape restricted sizes and padded-grid areas
    shape_rn_arr = np.zeros(nm, dtype=np.int64)
    shape_yarea_arr = np.zeros(nm, dtype=np.int64)
    cdef cnp.int64_t[::1] shape_rn = shape_rn_arr
    cdef cnp.int64_t[::1] shape_yarea = shape_yarea_arr
    cdef Py_ssize_t m
    for k in range(K):
        m = own[k]
        while m != -1:
            shape_rn[m] += rcount[k]
            shape_yarea[m] += counts[k]
            m = next_up[m]

    # shapes with at least one restricted pixel, in mask-component order
    keep = [m for m in range(nm) if m != frame_comp and shape_rn_arr[m] > 0]
    cdef Py_ssize_t nshapes = len(keep)
    if nshapes == 0:
        return empty
    sidx_arr = np.full(nm, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] sidx = sidx_arr
    offsets_arr = np.zeros(nshapes + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] offsets = offsets_arr
    cdef Py_ssize_t si
    for si in range(nshapes):
        m = keep[si]
        sidx[m] = si
        offsets[si + 1] = offsets[si] + shape_rn[m]
    pix_arr = np.empty(offsets[nshapes], dtype=np.int64)
    cdef cnp.int64_t[::1] pix = pix_arr
    sfill_arr = offsets_arr[:nshapes].copy()
    cdef cnp.int64_t[::1] sfill = sfill_arr
    cdef Py_ssize_t j, s
    for k in range(K):
        if rcount[k] == 0:
            continue
        m = own[k]
        while m != -1:
            s = sidx[m]
            if s != -1:
                for j in range(roff[k], roff[k + 1]):
                    pix[sfill[s]] = rpix[j]
                    sfill[s] += 1
            m = next_up[m]
    areas_out = shape_yarea_arr[np.asarray(keep, dtype=np.int64)]
    for si in range(nshapes):
        pix_arr[offsets_arr[si]:offsets_arr[si + 1]].sort()
    return pix_arr, offsets_arr, areas_out
