import numpy as np
import pytest

from attriprof import (
    Raster,
    ValidationError,
    components_for_fraction,
    fit_pca,
    inverse_project,
    load_pca,
    project,
    save_pca,
)


def _raster_from_samples(x, h, w):
    return Raster(values=x.T.reshape(-1, h, w))


def make_mixture_raster(n_pixels=(40, 40), bands=103, k=4, seed=99, noise=0.01):
    """k orthogonal spectral signatures with controlled variances + noise."""
    h, w = n_pixels
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((bands, k)))
    scales = np.array([1.0, 0.7, 0.5, 0.35])[:k]
    scores = rng.standard_normal((h * w, k)) * scales
    x = scores @ basis.T + rng.standard_normal((h * w, bands)) * noise
    return _raster_from_samples(x, h, w)


def test_perfectly_correlated_bands():
    rng = np.random.default_rng(1)
    b1 = rng.standard_normal(200)
    x = np.stack([b1, 2 * b1], axis=1)
    with pytest.warns(UserWarning, match="degenerate"):
        model = fit_pca(_raster_from_samples(x, 10, 20))
    frac = model.cumulative_fraction()
    assert frac[0] > 1 - 1e-9  # PC1 explains everything
    assert components_for_fraction(model, 0.99) == 1


def test_uncorrelated_bands_variances():
    rng = np.random.default_rng(2)
    n = 4000
    a = rng.standard_normal(n)
    b = rng.standard_normal(n)
    a -= a.mean()
    b -= b.mean()
    b -= (b @ a) / (a @ a) * a  # exactly decorrelate
    x = np.stack([a / a.std(ddof=1) * 2.0, b / b.std(ddof=1) * 1.0], axis=1)
    r = _raster_from_samples(x, 50, 80)
    model = fit_pca(r)
    cov = np.cov(x.T)  # independent route
    assert np.allclose(np.sort(model.explained_variance)[::-1],
                       np.sort(np.linalg.eigvalsh(cov))[::-1], atol=1e-9)
    assert abs(model.explained_variance[0] - 4.0) < 1e-6
    assert abs(model.explained_variance[1] - 1.0) < 1e-6


def test_constant_raster_warns_rank_zero():
    r = Raster(values=np.full((3, 4, 4), 7.0))
    with pytest.warns(UserWarning):
        model = fit_pca(r)
    assert model.rank == 0


def test_single_band_rejected():
    with pytest.raises(ValidationError, match=">= 2 bands"):
        fit_pca(Raster(values=np.zeros((1, 4, 4))))


def test_orthonormal_components_and_uncorrelated_scores():
    r = make_mixture_raster()
    model = fit_pca(r)
    gram = model.components @ model.components.T
    assert np.max(np.abs(gram - np.eye(model.rank))) < 1e-9
    assert (np.diff(model.explained_variance) <= 1e-12).all()
    total = r.values.reshape(r.bands, -1).var(axis=1, ddof=1).sum()
    assert abs(model.explained_variance.sum() - total) / total < 1e-6

    scores = project(model, r, k=6)
    s = scores.values.reshape(6, -1)
    cov = np.cov(s)
    off = cov - np.diag(np.diag(cov))
    assert np.max(np.abs(off)) < 1e-6 * cov.max()


def test_mixture_raster_needs_exactly_4_components():
    model = fit_pca(make_mixture_raster())
    assert components_for_fraction(model, 0.99) == 4
    reduced = project(model, make_mixture_raster(), variance_fraction=0.99)
    assert reduced.bands == 4


def test_full_rank_round_trip():
    rng = np.random.default_rng(3)
    r = Raster(values=rng.standard_normal((5, 8, 8)))
    model = fit_pca(r)
    scores = project(model, r, k=model.rank)
    back = inverse_project(model, scores)
    assert np.max(np.abs(back.values - r.values)) < 1e-6


def test_projection_validation():
    r = make_mixture_raster(n_pixels=(10, 10), bands=8, k=2)
    model = fit_pca(r)
    with pytest.raises(ValidationError):
        project(model, r, k=9)
    with pytest.raises(ValidationError):
        project(model, r)
    with pytest.raises(ValidationError):
        project(model, r, k=2, variance_fraction=0.9)
    with pytest.raises(ValidationError, match="fit on"):
        project(model, Raster(values=np.zeros((3, 2, 2))), k=1)


def test_fit_is_deterministic():
    r = make_mixture_raster(n_pixels=(12, 12), bands=20, k=3)
    a = fit_pca(r)
    b = fit_pca(r)
    assert np.array_equal(a.components, b.components)
    assert np.array_equal(a.explained_variance, b.explained_variance)
    # sign convention: dominant coefficient positive
    for row in a.components:
        assert row[np.argmax(np.abs(row))] > 0


def test_model_text_round_trip(tmp_path):
    r = make_mixture_raster(n_pixels=(10, 10), bands=12, k=3)
    model = fit_pca(r)
    p = tmp_path / "model.txt"
    save_pca(model, p)
    back = load_pca(p)
    assert np.array_equal(back.mean, model.mean)
    assert np.array_equal(back.components, model.components)
    assert np.array_equal(back.explained_variance, model.explained_variance)
