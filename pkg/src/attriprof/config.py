"""Pipeline configuration: sectioned key=value files, schema validation,
and built-in presets.

The file format is INI-style (configparser): ``[section]`` headers and
``key = value`` lines. Unknown sections or keys are rejected before any
computation. CLI flags override config keys after parsing.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace

from .errors import ValidationError
from .forest import ForestParams
from .profiles import ProfileSpec, VARIANTS

_SCHEMA = {
    "input": {"image", "train_labels", "test_labels"},
    "spectral": {"method", "components", "variance"},
    "profile": {"variant", "attributes", "rule", "quantization", "connectivity", "post"},
    "classifier": {"trees", "mtry", "seed"},
    "output": {"dir"},
}

# threshold ladders matching the published evaluation protocol
_AREA_REYKJAVIK = (25, 100, 500, 1000, 5000, 10000, 20000, 50000, 100000, 150000)
_AREA_PAVIA = (770, 1538, 2307, 3076, 3846, 4615, 5384, 6153, 6923, 7692,
               8461, 9230, 10000, 10769)
_INERTIA = (0.2, 0.3, 0.4, 0.5)

PRESETS = {
    "reykjavik": {
        "spectral": {"method": "none"},
        "profile": {
            "variant": "minmax",
            "attributes": "area:" + ",".join(str(v) for v in _AREA_REYKJAVIK)
            + "; inertia:" + ",".join(str(v) for v in _INERTIA),
            "rule": "auto",
            "quantization": "256",
            "post": "none",
        },
        "classifier": {"trees": "100", "mtry": "auto", "seed": "0"},
    },
    "pavia": {
        "spectral": {"method": "pca", "components": "4"},
        "profile": {
            "variant": "minmax",
            "attributes": "area:" + ",".join(str(v) for v in _AREA_PAVIA)
            + "; inertia:" + ",".join(str(v) for v in _INERTIA),
            "rule": "auto",
            "quantization": "256",
            "post": "none",
        },
        "classifier": {"trees": "100", "mtry": "auto", "seed": "0"},
    },
}


@dataclass(frozen=True)
class PipelineConfig:
    image: str | None = None
    train_labels: str | None = None
    test_labels: str | None = None
    spectral_method: str = "none"        # none | pca
    pca_components: int | None = None
    pca_variance: float | None = None
    profile: ProfileSpec = field(default_factory=lambda: ProfileSpec(
        attributes=(("area", (25.0, 100.0, 500.0)),)))
    post: tuple = ("none",)              # ('none',) | ('lf', w) | ('hist', w, bins)
    forest: ForestParams = field(default_factory=ForestParams)
    out_dir: str = "out"

    def describe(self) -> dict:
        """JSON-serializable resolved view (used for provenance)."""
        return {
            "input": {
                "image": self.image,
                "train_labels": self.train_labels,
                "test_labels": self.test_labels,
            },
            "spectral": {
                "method": self.spectral_method,
                "components": self.pca_components,
                "variance": self.pca_variance,
            },
            "profile": {
                "variant": self.profile.variant,
                "attributes": [[k, list(ts)] for k, ts in self.profile.attributes],
                "rule": self.profile.rule,
                "quantization": self.profile.quantization_levels,
                "connectivity": self.profile.connectivity,
                "post": list(self.post),
            },
            "classifier": {
                "trees": self.forest.tree_count,
                "mtry": self.forest.mtry,
                "seed": self.forest.rng_seed,
            },
            "output": {"dir": self.out_dir},
        }

    def validate_stage(self, stage: str):
        """Check referenced files exist for the given stage."""
        need = {"reduce": ["image"], "extract": ["image"],
                "classify": ["train_labels", "test_labels"]}[stage]
        for key in need:
            path = getattr(self, key)
            if not path:
                raise ValidationError(f"{stage}: config is missing input.{key}")
            if not os.path.exists(path):
                raise ValidationError(f"{stage}: input.{key} file not found: {path}")
        if stage in ("reduce",) and self.spectral_method != "pca":
            raise ValidationError("reduce: spectral.method must be 'pca'")
        if self.spectral_method == "pca":
            if (self.pca_components is None) == (self.pca_variance is None):
                raise ValidationError(
                    "spectral: give exactly one of components or variance"
                )


def parse_attributes(text: str):
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ValidationError(f"bad attribute spec {part!r} (want kind:v1,v2,...)")
        kind, vals = part.split(":", 1)
        try:
            ts = tuple(float(v) for v in vals.split(",") if v.strip())
        except ValueError as exc:
            raise ValidationError(f"bad threshold list in {part!r}: {exc}") from exc
        out.append((kind.strip(), ts))
    if not out:
        raise ValidationError("empty attribute list")
    return tuple(out)


def parse_post(text: str) -> tuple:
    parts = [p.strip() for p in text.split(":")]
    if parts[0] == "none":
        return ("none",)
    try:
        if parts[0] == "lf":
            return ("lf", int(parts[1])) if len(parts) == 2 else ("lf", 7)
        if parts[0] == "hist":
            w = int(parts[1]) if len(parts) > 1 else 7
            b = int(parts[2]) if len(parts) > 2 else 6
            return ("hist", w, b)
    except ValueError as exc:
        raise ValidationError(f"bad post spec {text!r}: {exc}") from exc
    raise ValidationError(f"unknown post spec {text!r} (none | lf:W | hist:W:B)")


def _config_from_mapping(mapping: dict[str, dict[str, str]]) -> PipelineConfig:
    for section, keys in mapping.items():
        if section not in _SCHEMA:
            raise ValidationError(f"unknown config section [{section}]")
        unknown = set(keys) - _SCHEMA[section]
        if unknown:
            raise ValidationError(
                f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
            )

    def get(section, key, default=None):
        return mapping.get(section, {}).get(key, default)

    def get_int(section, key, default):
        raw = get(section, key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ValidationError(f"[{section}] {key} must be an integer: {raw!r}") from exc

    method = get("spectral", "method", "none")
    if method not in ("none", "pca"):
        raise ValidationError(f"spectral.method must be none or pca, got {method!r}")
    variance = get("spectral", "variance")
    if variance is not None:
        try:
            variance = float(variance)
        except ValueError as exc:
            raise ValidationError(f"spectral.variance must be a float: {variance!r}") from exc

    variant = get("profile", "variant", "minmax")
    if variant not in VARIANTS:
        raise ValidationError(f"profile.variant must be one of {VARIANTS}, got {variant!r}")
    attr_text = get("profile", "attributes")
    if variant != "none" and not attr_text:
        raise ValidationError("profile.attributes is required unless variant = none")
    profile = ProfileSpec(
        attributes=parse_attributes(attr_text) if attr_text else (),
        variant=variant,
        rule=get("profile", "rule", "auto"),
        quantization_levels=get_int("profile", "quantization", 256),
        connectivity=get_int("profile", "connectivity", 4),
    )

    mtry_raw = get("classifier", "mtry", "auto")
    mtry = None if mtry_raw in (None, "auto") else int(mtry_raw)
    forest = ForestParams(
        tree_count=get_int("classifier", "trees", 100),
        mtry=mtry,
        rng_seed=get_int("classifier", "seed", 0),
    )

    return PipelineConfig(
        image=get("input", "image"),
        train_labels=get("input", "train_labels"),
        test_labels=get("input", "test_labels"),
        spectral_method=method,
        pca_components=get_int("spectral", "components", None),
        pca_variance=variance,
        profile=profile,
        post=parse_post(get("profile", "post", "none")),
        forest=forest,
        out_dir=get("output", "dir", "out"),
    )


def load_config(path) -> PipelineConfig:
    cp = configparser.ConfigParser(interpolation=None)
    read = cp.read(path)
    if not read:
        raise ValidationError(f"config file not found: {path}")
    mapping = {s: dict(cp.items(s)) for s in cp.sections()}
    return _config_from_mapping(mapping)


def preset_config(name: str) -> PipelineConfig:
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r} (choose from {sorted(PRESETS)})")
    return _config_from_mapping({k: dict(v) for k, v in PRESETS[name].items()})


def apply_overrides(cfg: PipelineConfig, *, image=None, train_labels=None,
                    test_labels=None, out_dir=None, seed=None) -> PipelineConfig:
    updates = {}
    if image is not None:
        updates["image"] = image
    if train_labels is not None:
        updates["train_labels"] = train_labels
    if test_labels is not None:
        updates["test_labels"] = test_labels
    if out_dir is not None:
        updates["out_dir"] = out_dir
    if seed is not None:
        updates["forest"] = replace(cfg.forest, rng_seed=seed)
    return replace(cfg, **updates) if updates else cfg
