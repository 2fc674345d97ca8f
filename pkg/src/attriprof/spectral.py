"""PCA reduction of multiband rasters.

Covariance PCA (mean-centered, no per-band standardization): pixels are
samples, bands are variables. Components are orthonormal with a
deterministic sign convention (the largest-magnitude coefficient of each
component is positive) and sorted by non-increasing explained variance, so
fits are reproducible bit-for-bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ValidationError
from .raster import Raster

_RANK_TOL = 1e-10


@dataclass(frozen=True)
class PCAModel:
    mean: np.ndarray                # (bands,)
    components: np.ndarray          # (rank, bands), orthonormal rows
    explained_variance: np.ndarray  # (rank,), non-increasing

    @property
    def bands(self) -> int:
        return self.mean.size

    @property
    def rank(self) -> int:
        return self.components.shape[0]

    def cumulative_fraction(self) -> np.ndarray:
        total = self.explained_variance.sum()
        if total <= 0:
            return np.zeros(self.rank)
        return np.cumsum(self.explained_variance) / total


def fit_pca(raster: Raster) -> PCAModel:
    """Fit by eigendecomposition of the band covariance matrix."""
    if raster.bands < 2:
        raise ValidationError("PCA requires >= 2 bands")
    x = raster.values.reshape(raster.bands, -1).T.astype(np.float64)
    n, b = x.shape
    mean = x.mean(axis=0)
    xc = x - mean
    if n < 2:
        warnings.warn("degenerate covariance: a single pixel has no variance")
        return PCAModel(mean=mean, components=np.zeros((0, b)), explained_variance=np.zeros(0))
    cov = (xc.T @ xc) / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals = np.maximum(evals[order], 0.0)
    evecs = evecs[:, order].T  # rows are components

    # deterministic sign: largest-magnitude coefficient positive
    for i in range(evecs.shape[0]):
        j = int(np.argmax(np.abs(evecs[i])))
        if evecs[i, j] < 0:
            evecs[i] = -evecs[i]

    tol = float(evals[0]) * _RANK_TOL if evals.size else 0.0
    rank = int(np.sum(evals > tol))
    if rank == 0:
        warnings.warn("all band variances are zero")
    elif n <= b or rank < b:
        warnings.warn(
            f"degenerate covariance: rank {rank} of {b} bands; model truncated"
        )
    return PCAModel(
        mean=mean,
        components=np.ascontiguousarray(evecs[:rank]),
        explained_variance=evals[:rank],
    )


def components_for_fraction(model: PCAModel, fraction: float) -> int:
    """Smallest k whose cumulative explained-variance fraction >= fraction."""
    if not 0 < fraction <= 1:
        raise ValidationError(f"variance fraction must lie in (0, 1], got {fraction}")
    cum = model.cumulative_fraction()
    hits = np.nonzero(cum >= fraction)[0]
    if hits.size == 0:
        raise ValidationError(
            f"model rank {model.rank} cannot reach variance fraction {fraction}"
        )
    return int(hits[0]) + 1


def project(model: PCAModel, raster: Raster, k: int | None = None,
            variance_fraction: float | None = None) -> Raster:
    """Component-score raster with k bands (or enough bands to cover the
    requested variance fraction)."""
    if raster.bands != model.bands:
        raise ValidationError(
            f"model was fit on {model.bands} bands, raster has {raster.bands}"
        )
    if (k is None) == (variance_fraction is None):
        raise ValidationError("give exactly one of k or variance_fraction")
    if variance_fraction is not None:
        k = components_for_fraction(model, variance_fraction)
    if not 1 <= k <= model.rank:
        raise ValidationError(f"k={k} exceeds model rank {model.rank}")
    x = raster.values.reshape(raster.bands, -1).T.astype(np.float64)
    scores = (x - model.mean) @ model.components[:k].T
    values = scores.T.reshape(k, raster.height, raster.width)
    meta = tuple(f"pc{i + 1}" for i in range(k))
    return Raster(values=values, band_meta=meta)


def inverse_project(model: PCAModel, scores: Raster) -> Raster:
    """Back-projection from component scores to band space."""
    k = scores.bands
    if k > model.rank:
        raise ValidationError(f"score raster has {k} bands, model rank is {model.rank}")
    s = scores.values.reshape(k, -1).T
    x = s @ model.components[:k] + model.mean
    return Raster(values=x.T.reshape(model.bands, scores.height, scores.width))


def save_pca(model: PCAModel, path):
    """Plain-text serialization (one line per vector, repr-exact floats)."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"bands={model.bands}\nrank={model.rank}\n")
        f.write("mean=" + " ".join(repr(float(v)) for v in model.mean) + "\n")
        f.write("variance=" + " ".join(repr(float(v)) for v in model.explained_variance) + "\n")
        for i in range(model.rank):
            f.write(f"component.{i}=" + " ".join(repr(float(v)) for v in model.components[i]) + "\n")


def load_pca(path) -> PCAModel:
    fields = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"malformed model line {line!r}", path)
            key, val = line.split("=", 1)
            fields[key] = val
    try:
        bands = int(fields["bands"])
        rank = int(fields["rank"])
        mean = np.array([float(v) for v in fields["mean"].split()])
        variance = np.array([float(v) for v in fields["variance"].split()])
        comps = np.array(
            [[float(v) for v in fields[f"component.{i}"].split()] for i in range(rank)]
        ).reshape(rank, bands)
    except (KeyError, ValueError) as exc:
        raise FormatError(f"malformed PCA model: {exc}", path) from exc
    if mean.size != bands or variance.size != rank:
        raise FormatError("inconsistent PCA model dimensions", path)
    return PCAModel(mean=mean, components=comps, explained_variance=variance)
