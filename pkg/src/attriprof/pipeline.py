"""End-to-end orchestration: reduce -> extract -> classify -> evaluate.

Every artifact gets a ``<name>.provenance.json`` sidecar recording the
resolved config section, content hashes of the inputs, library versions and
the kernel lane — enough to re-run the exact pipeline. When an artifact with
a matching provenance already exists the stage is skipped (content-hash
caching); ``force=True`` recomputes. Outputs carry no timestamps, so a rerun
with the same config and seed is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os

import numpy as np

from . import __version__
from ._kernels import active_backend
from .config import PipelineConfig
from .errors import ValidationError
from .forest import predict, save_model, train_forest
from .metrics import evaluate, format_metrics, metrics_to_csv
from .profiles import build_profile, local_feature_post, local_histogram_post
from .raster import (
    Raster,
    load_labels,
    load_raster,
    load_stack,
    require_same_extent,
    save_raster,
    save_stack,
)
from .spectral import fit_pca, project, save_pca

log = logging.getLogger(__name__)

# 20 distinguishable colors; class 0 stays black, ids beyond the palette cycle
PALETTE = (
    (0, 0, 0),
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 212), (0, 128, 128), (220, 190, 255),
    (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
    (128, 128, 0), (255, 215, 180), (0, 0, 128), (128, 128, 128),
)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _provenance(artifact: str, cfg_section: dict, inputs: dict[str, str]) -> dict:
    return {
        "artifact": artifact,
        "config": cfg_section,
        "inputs": {k: _sha256(v) for k, v in inputs.items()},
        "versions": {"attriprof": __version__, "numpy": np.__version__},
        "backend": active_backend(),
    }


def _prov_path(path) -> str:
    return str(path) + ".provenance.json"


def _cache_hit(out_path, prov: dict) -> bool:
    pp = _prov_path(out_path)
    if not (os.path.exists(out_path) and os.path.exists(pp)):
        return False
    try:
        with open(pp, "r", encoding="utf-8") as f:
            return json.load(f) == prov
    except (OSError, json.JSONDecodeError):
        return False


def _write_prov(out_path, prov: dict):
    with open(_prov_path(out_path), "w", encoding="utf-8") as f:
        json.dump(prov, f, indent=2, sort_keys=True)
        f.write("\n")


class _Outputs:
    """Tracks files created by a stage so failures leave no partial output."""

    def __init__(self):
        self.paths = []

    def add(self, path):
        self.paths.append(str(path))
        return path

    def discard_all(self):
        for p in self.paths:
            for target in (p, _prov_path(p)):
                try:
                    os.unlink(target)
                except OSError:
                    pass


def _out(cfg: PipelineConfig, name: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


def cmd_reduce(cfg: PipelineConfig, force: bool = False) -> str:
    """PCA-reduce the input image; writes reduced.bsq."""
    cfg.validate_stage("reduce")
    out_path = _out(cfg, "reduced.bsq")
    prov = _provenance("reduced", cfg.describe()["spectral"], {"image": cfg.image})
    if not force and _cache_hit(out_path, prov):
        log.info("reduce: cache hit, skipping")
        return out_path
    outputs = _Outputs()
    try:
        raster = load_raster(cfg.image)
        reduced, model = _reduce_raster(cfg, raster)
        save_raster(reduced, outputs.add(out_path), "bsq")
        save_pca(model, outputs.add(_out(cfg, "pca_model.txt")))
        _write_prov(out_path, prov)
        return out_path
    except Exception:
        outputs.discard_all()
        raise


def _reduce_raster(cfg: PipelineConfig, raster: Raster):
    model = fit_pca(raster)
    cum = model.cumulative_fraction()
    for i, c in enumerate(cum):
        log.info("reduce: PC%d cumulative variance %.6f", i + 1, c)
    reduced = project(model, raster, k=cfg.pca_components,
                      variance_fraction=cfg.pca_variance)
    log.info("reduce: kept %d of %d bands", reduced.bands, raster.bands)
    return reduced, model


def cmd_extract(cfg: PipelineConfig, threads: int = 1, force: bool = False) -> str:
    """Build the feature stack (spectral reduction included when configured);
    writes features.bsq."""
    cfg.validate_stage("extract")
    out_path = _out(cfg, "features.bsq")
    section = {k: cfg.describe()[k] for k in ("spectral", "profile")}
    prov = _provenance("features", section, {"image": cfg.image})
    if not force and _cache_hit(out_path, prov):
        log.info("extract: cache hit, skipping")
        return out_path
    outputs = _Outputs()
    try:
        raster = load_raster(cfg.image)
        if cfg.spectral_method == "pca":
            raster, _ = _reduce_raster(cfg, raster)
        stack = build_profile(raster, cfg.profile, threads=threads)
        if cfg.post[0] == "lf":
            stack = local_feature_post(stack, window=cfg.post[1])
        elif cfg.post[0] == "hist":
            stack = local_histogram_post(stack, window=cfg.post[1], bins=cfg.post[2])
        partition = cfg.profile.variant in ("alpha", "omega")
        rules = {k: cfg.profile.resolved_rule(k, partition)
                 for k, _ in cfg.profile.attributes}
        log.info(
            "extract: %d bands -> depth %d (%s, rule=%s -> %s, quantization=%d, backend=%s)",
            raster.bands, stack.depth, cfg.profile.variant, cfg.profile.rule,
            rules, cfg.profile.quantization_levels, active_backend(),
        )
        save_stack(stack, outputs.add(out_path))
        _write_prov(out_path, prov)
        return out_path
    except Exception:
        outputs.discard_all()
        raise


def _predict_map(model, stack) -> np.ndarray:
    samples = stack.as_samples()
    out = np.empty(samples.shape[0], dtype=np.int32)
    step = 1 << 16
    for start in range(0, samples.shape[0], step):
        out[start:start + step] = predict(model, samples[start:start + step])
    return out.reshape(stack.height, stack.width)


def class_map_to_rgb(labels: np.ndarray) -> Raster:
    pal = np.array(PALETTE, dtype=np.uint8)
    ids = np.where(labels == 0, 0, (labels - 1) % (len(PALETTE) - 1) + 1)
    rgb = pal[ids]
    return Raster(values=np.moveaxis(rgb, 2, 0))


def cmd_classify(cfg: PipelineConfig, force: bool = False) -> tuple[str, str]:
    """Train on train labels, predict the full map, evaluate on test labels.

    Writes predicted.bsq (class ids), predicted.ppm (fixed palette),
    model.bin and metrics.csv; returns (map path, metrics path).
    """
    cfg.validate_stage("classify")
    stack_path = _out(cfg, "features.bsq")
    if not os.path.exists(stack_path):
        raise ValidationError(f"classify: feature stack not found: {stack_path}")
    map_path = _out(cfg, "predicted.bsq")
    metrics_path = _out(cfg, "metrics.csv")
    prov = _provenance(
        "classification",
        cfg.describe()["classifier"],
        {
            "features": stack_path,
            "train_labels": cfg.train_labels,
            "test_labels": cfg.test_labels,
        },
    )
    if not force and _cache_hit(map_path, prov):
        log.info("classify: cache hit, skipping")
        return map_path, metrics_path

    outputs = _Outputs()
    try:
        stack = load_stack(stack_path)
        train = load_labels(cfg.train_labels)
        test = load_labels(cfg.test_labels)
        require_same_extent(stack, train, "feature stack and train labels")
        require_same_extent(stack, test, "feature stack and test labels")

        samples = stack.as_samples()
        train_flat = train.labels.ravel()
        sel = train_flat > 0
        model = train_forest(samples[sel], train_flat[sel], cfg.forest)
        if model.oob_error is not None:
            log.info("classify: out-of-bag error %.4f", model.oob_error)

        labels = _predict_map(model, stack)
        m = evaluate(labels, test)
        log.info("classify: OA=%.4f AA=%.4f kappa=%.4f", m.oa, m.aa, m.kappa)

        save_model(model, outputs.add(_out(cfg, "model.bin")))
        save_raster(Raster(values=labels.astype(np.uint16)[np.newaxis]),
                    outputs.add(map_path), "bsq")
        save_raster(class_map_to_rgb(labels), outputs.add(_out(cfg, "predicted.ppm")), "ppm")
        with open(outputs.add(metrics_path), "w", encoding="utf-8") as f:
            f.write(metrics_to_csv(m))
        _write_prov(map_path, prov)
        return map_path, metrics_path
    except Exception:
        outputs.discard_all()
        raise


def cmd_eval(pred_path, truth_path, out_csv=None):
    """Evaluate a predicted class map file against a truth label file."""
    pred = load_raster(pred_path)
    if pred.bands != 1:
        raise ValidationError("predicted map must be single-band")
    truth = load_labels(truth_path)
    m = evaluate(pred.band(0).astype(np.int64), truth)
    if out_csv:
        with open(out_csv, "w", encoding="utf-8") as f:
            f.write(metrics_to_csv(m))
    return m


def cmd_info(path) -> str:
    """Human-readable summary of a raster / stack / label file."""
    try:
        stack = load_stack(path)
    except Exception:
        stack = None
    if stack is not None:
        lines = [
            f"feature stack: depth {stack.depth}, {stack.height}x{stack.width}",
        ]
        ops = {}
        for m in stack.layer_meta:
            ops[m.operator] = ops.get(m.operator, 0) + 1
        for op in sorted(ops):
            lines.append(f"  {op}: {ops[op]} layer(s)")
        return "\n".join(lines) + "\n"
    r = load_raster(path)
    lines = [
        f"raster: {r.bands} band(s), {r.height}x{r.width}, dtype {r.values.dtype}",
        f"values in [{r.values.min()}, {r.values.max()}]",
    ]
    if r.band_meta:
        lines.extend(f"  band {i}: {m}" for i, m in enumerate(r.band_meta))
    if r.bands == 1 and np.issubdtype(r.values.dtype, np.integer) and r.values.max() <= 4096:
        vals = r.band(0)
        uniq = np.unique(vals)
        if uniq.size <= 64 and uniq.min() >= 0:
            counts = {int(u): int((vals == u).sum()) for u in uniq}
            lines.append(f"label-like counts: {counts}")
    return "\n".join(lines) + "\n"


def run_full(cfg: PipelineConfig, threads: int = 1, force: bool = False):
    """extract + classify in one call; returns the Metrics."""
    cmd_extract(cfg, threads=threads, force=force)
    _, metrics_path = cmd_classify(cfg, force=force)
    return metrics_path


__all__ = [
    "PALETTE",
    "class_map_to_rgb",
    "cmd_classify",
    "cmd_eval",
    "cmd_extract",
    "cmd_info",
    "cmd_reduce",
    "run_full",
    "format_metrics",
]
