"""Random-forest classifier over per-pixel feature vectors.

Each tree trains on a bootstrap sample (N draws with replacement); splits
minimize Gini impurity over mtry uniformly drawn candidate features, with
thresholds at midpoints between consecutive distinct sorted values. Per-tree
RNG streams are spawned from the seed, so serial and concurrent training
produce the same model. Ties — in leaf votes and in the forest majority —
break toward the smallest class id.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError

_MAGIC = b"APRF\x01"


@dataclass(frozen=True)
class ForestParams:
    tree_count: int = 100
    mtry: int | None = None  # None -> floor(sqrt(D)), at least 1
    max_depth: int | None = None
    min_leaf: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValidationError("tree_count must be >= 1")
        if self.min_leaf < 1:
            raise ValidationError("min_leaf must be >= 1")

    def resolve_mtry(self, d: int) -> int:
        m = self.mtry if self.mtry is not None else max(1, int(np.sqrt(d)))
        if not 1 <= m <= d:
            raise ValidationError(f"mtry={m} must lie in 1..{d}")
        return m


@dataclass(frozen=True)
class DecisionTree:
    """Flat binary tree: feature < 0 marks a leaf; hist rows are class
    histograms (index 0 unused so hist[:, c] is class c)."""

    feature: np.ndarray    # (nodes,) int32
    threshold: np.ndarray  # (nodes,) float64
    left: np.ndarray       # (nodes,) int32
    right: np.ndarray      # (nodes,) int32
    hist: np.ndarray       # (nodes, class_count+1) int64


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    class_count: int
    feature_count: int
    params: ForestParams
    oob_error: float | None = field(default=None)


def _best_split(x, y, feat_ids, class_count, min_leaf):
    """(impurity_proxy, feature, threshold) of the best candidate split.

    The proxy maximized is sum(l_c^2)/n_l + sum(r_c^2)/n_r, equivalent to
    minimizing the weighted Gini impurity.
    """
    n = y.size
    onehot = np.zeros((n, class_count), dtype=np.int64)
    onehot[np.arange(n), y - 1] = 1
    best = (-np.inf, -1, 0.0)
    for f in feat_ids:
        vals = x[:, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        distinct = sv[:-1] < sv[1:]
        if not distinct.any():
            continue
        cum = np.cumsum(onehot[order], axis=0)
        nl = np.arange(1, n)
        valid = distinct & (nl >= min_leaf) & ((n - nl) >= min_leaf)
        if not valid.any():
            continue
        left = cum[:-1][valid].astype(np.float64)
        nlv = nl[valid].astype(np.float64)
        total = cum[-1].astype(np.float64)
        right = total - left
        proxy = (left * left).sum(axis=1) / nlv + (right * right).sum(axis=1) / (n - nlv)
        i = int(np.argmax(proxy))
        if proxy[i] > best[0]:
            pos = np.nonzero(valid)[0][i]
            thr = 0.5 * (sv[pos] + sv[pos + 1])
            if thr >= sv[pos + 1]:  # float midpoint collapse guard
                thr = sv[pos]
            best = (float(proxy[i]), int(f), float(thr))
    return best


def _grow_tree(x, y, class_count, mtry, max_depth, min_leaf, rng):
    feature, threshold, left, right, hist = [], [], [], [], []

    def leaf(idx):
        h = np.bincount(y[idx], minlength=class_count + 1)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        hist.append(h)
        return len(feature) - 1

    # explicit preorder stack (left subtree first); trees with min_leaf=1 can
    # legitimately grow deeper than the interpreter recursion limit
    stack = [(np.arange(x.shape[0]), 0, -1, False)]
    while stack:
        idx, depth, pnode, is_right = stack.pop()
        ys = y[idx]
        node = None
        if (
            idx.size < 2 * min_leaf
            or (max_depth is not None and depth >= max_depth)
            or (ys == ys[0]).all()
        ):
            node = leaf(idx)
        else:
            cand = rng.choice(x.shape[1], size=mtry, replace=False)
            proxy, f, thr = _best_split(x[idx], ys, cand, class_count, min_leaf)
            if f < 0:
                node = leaf(idx)
            else:
                mask = x[idx, f] <= thr
                node = len(feature)
                feature.append(f)
                threshold.append(thr)
                left.append(-1)
                right.append(-1)
                hist.append(np.bincount(ys, minlength=class_count + 1))
                stack.append((idx[~mask], depth + 1, node, True))
                stack.append((idx[mask], depth + 1, node, False))
        if pnode >= 0:
            if is_right:
                right[pnode] = node
            else:
                left[pnode] = node
    return DecisionTree(
        feature=np.asarray(feature, np.int32),
        threshold=np.asarray(threshold, np.float64),
        left=np.asarray(left, np.int32),
        right=np.asarray(right, np.int32),
        hist=np.asarray(hist, np.int64),
    )


def _tree_votes(tree: DecisionTree, x: np.ndarray) -> np.ndarray:
    node = np.zeros(x.shape[0], dtype=np.int64)
    while True:
        internal = tree.feature[node] >= 0
        if not internal.any():
            break
        ids = np.nonzero(internal)[0]
        nd = node[ids]
        goes_left = x[ids, tree.feature[nd]] <= tree.threshold[nd]
        node[ids] = np.where(goes_left, tree.left[nd], tree.right[nd])
    h = tree.hist[node]
    return np.argmax(h[:, 1:], axis=1).astype(np.int32) + 1


def train_forest(features: np.ndarray, labels: np.ndarray, params: ForestParams) -> ForestModel:
    """Fit the forest; deterministic given (features, labels, params)."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(labels, dtype=np.int32)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ValidationError(f"features {x.shape} do not match {y.size} labels")
    n, d = x.shape
    if d == 0:
        raise ValidationError("features have zero dimensions")
    if n < 2:
        raise ValidationError("training needs at least 2 samples")
    if not np.isfinite(x).all():
        raise ValidationError("features must be finite")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValidationError("training needs at least 2 classes")
    if classes.min() < 1:
        raise ValidationError("class ids must be >= 1")
    class_count = int(classes.max())
    mtry = params.resolve_mtry(d)

    streams = np.random.SeedSequence(params.rng_seed).spawn(params.tree_count)
    trees = []
    oob_votes = np.zeros((n, class_count + 1), dtype=np.int64)
    for t in range(params.tree_count):
        rng = np.random.default_rng(streams[t])
        boot = rng.integers(0, n, size=n)
        tree = _grow_tree(
            x[boot], y[boot], class_count, mtry, params.max_depth, params.min_leaf, rng
        )
        trees.append(tree)
        inbag = np.zeros(n, dtype=bool)
        inbag[boot] = True
        oob = ~inbag
        if oob.any():
            votes = _tree_votes(tree, x[oob])
            oob_votes[np.nonzero(oob)[0], votes] += 1

    if all(t.feature.size == 1 for t in trees):
        warnings.warn("no valid split exists; forest predicts the majority class")

    voted = oob_votes[:, 1:].sum(axis=1) > 0
    if voted.any():
        pred = np.argmax(oob_votes[voted, 1:], axis=1) + 1
        oob_error = float(np.mean(pred != y[voted]))
    else:
        oob_error = None
    return ForestModel(
        trees=tuple(trees),
        class_count=class_count,
        feature_count=d,
        params=params,
        oob_error=oob_error,
    )


def predict(model: ForestModel, features: np.ndarray) -> np.ndarray:
    """Majority vote over trees; ties break toward the smallest class id."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        x = x.reshape(-1, model.feature_count) if x.size else x.reshape(0, model.feature_count)
    if x.shape[0] == 0:
        return np.zeros(0, dtype=np.int32)
    if x.shape[1] != model.feature_count:
        raise ValidationError(
            f"features have {x.shape[1]} dimensions, model expects {model.feature_count}"
        )
    counts = np.zeros((x.shape[0], model.class_count + 1), dtype=np.int64)
    for tree in model.trees:
        votes = _tree_votes(tree, x)
        counts[np.arange(x.shape[0]), votes] += 1
    return (np.argmax(counts[:, 1:], axis=1) + 1).astype(np.int32)


# ---------------------------------------------------------------------------
# versioned binary container
# ---------------------------------------------------------------------------

def save_model(model: ForestModel, path):
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(
            struct.pack(
                "<qqqqqqd",
                len(model.trees),
                model.class_count,
                model.feature_count,
                model.params.tree_count,
                -1 if model.params.mtry is None else model.params.mtry,
                model.params.rng_seed,
                -1.0 if model.oob_error is None else model.oob_error,
            )
        )
        for tree in model.trees:
            f.write(struct.pack("<q", tree.feature.size))
            f.write(tree.feature.astype("<i4").tobytes())
            f.write(tree.threshold.astype("<f8").tobytes())
            f.write(tree.left.astype("<i4").tobytes())
            f.write(tree.right.astype("<i4").tobytes())
            f.write(tree.hist.astype("<i8").tobytes())


def load_model(path) -> ForestModel:
    with open(path, "rb") as f:
        data = f.read()
    if data[: len(_MAGIC)] != _MAGIC:
        raise FormatError("not a forest model file", path, 0)
    off = len(_MAGIC)
    try:
        ntrees, class_count, feat_count, tc, mtry, seed, oob = struct.unpack_from(
            "<qqqqqqd", data, off
        )
        off += struct.calcsize("<qqqqqqd")
        trees = []
        for _ in range(ntrees):
            (nn,) = struct.unpack_from("<q", data, off)
            off += 8

            def take(dt, count):
                nonlocal off
                arr = np.frombuffer(data, dtype=dt, count=count, offset=off)
                off += arr.nbytes
                return arr

            feature = take("<i4", nn)
            threshold = take("<f8", nn)
            left = take("<i4", nn)
            right = take("<i4", nn)
            hist = take("<i8", nn * (class_count + 1)).reshape(nn, class_count + 1)
            trees.append(
                DecisionTree(
                    feature=feature, threshold=threshold, left=left, right=right, hist=hist
                )
            )
    except struct.error as exc:
        raise FormatError(f"truncated forest model: {exc}", path, off) from exc
    params = ForestParams(
        tree_count=tc, mtry=None if mtry == -1 else int(mtry), rng_seed=int(seed)
    )
    return ForestModel(
        trees=tuple(trees),
        class_count=int(class_count),
        feature_count=int(feat_count),
        params=params,
        oob_error=None if oob < 0 else float(oob),
    )
