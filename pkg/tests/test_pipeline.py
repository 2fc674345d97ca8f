import json
import os

import numpy as np
import pytest

import scenes
from attriprof import ValidationError, load_stack, profile_depth
from attriprof.cli import main
from attriprof.config import (
    PRESETS,
    apply_overrides,
    load_config,
    parse_attributes,
    parse_post,
    preset_config,
)
from attriprof.pipeline import cmd_classify, cmd_eval, cmd_extract, cmd_info, cmd_reduce
from attriprof.raster import Raster, save_labels, save_raster


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    root = tmp_path_factory.mktemp("scene")
    img, train, test = scenes.make_scene()
    paths = {
        "image": str(root / "scene.pgm"),
        "train": str(root / "train.bsq"),
        "test": str(root / "test.bsq"),
    }
    save_raster(img, paths["image"])
    save_labels(train, paths["train"])
    save_labels(test, paths["test"])
    return paths


def write_config(path, scene, out_dir, variant="minmax", trees=30,
                 attributes="area:2,8,32,128", extra=""):
    path.write_text(f"""
[input]
image = {scene['image']}
train_labels = {scene['train']}
test_labels = {scene['test']}

[profile]
variant = {variant}
attributes = {attributes}
{extra}
[classifier]
trees = {trees}
seed = 7

[output]
dir = {out_dir}
""")
    return str(path)


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def test_presets_encode_published_dimensions():
    rey = preset_config("reykjavik")
    assert profile_depth(rey.profile, 1) == 30
    assert len(dict(rey.profile.attributes)["area"]) == 10
    assert dict(rey.profile.attributes)["inertia"] == (0.2, 0.3, 0.4, 0.5)
    pav = preset_config("pavia")
    assert pav.spectral_method == "pca" and pav.pca_components == 4
    assert profile_depth(pav.profile, 4) == 152
    assert len(dict(pav.profile.attributes)["area"]) == 14
    assert rey.forest.tree_count == 100 and pav.forest.tree_count == 100
    assert rey.forest.mtry is None  # sqrt(D) rule
    assert set(PRESETS) == {"reykjavik", "pavia"}


def test_parse_helpers():
    attrs = parse_attributes("area:1,2 ; inertia:0.2,0.3")
    assert attrs == (("area", (1.0, 2.0)), ("inertia", (0.2, 0.3)))
    assert parse_post("none") == ("none",)
    assert parse_post("lf:5") == ("lf", 5)
    assert parse_post("hist:7:6") == ("hist", 7, 6)
    with pytest.raises(ValidationError):
        parse_post("blur:3")


def test_config_file_and_schema(tmp_path, scene):
    cfg_path = write_config(tmp_path / "c.cfg", scene, tmp_path / "out")
    cfg = load_config(cfg_path)
    assert cfg.profile.variant == "minmax"
    assert cfg.forest.tree_count == 30 and cfg.forest.rng_seed == 7
    cfg2 = apply_overrides(cfg, seed=99)
    assert cfg2.forest.rng_seed == 99

    bad = tmp_path / "bad.cfg"
    bad.write_text("[profile]\nvariant = minmax\nattributes = area:2\nsmoothing = 3\n")
    with pytest.raises(ValidationError, match="unknown key"):
        load_config(bad)
    empty = tmp_path / "empty.cfg"
    empty.write_text("[profile]\nvariant = minmax\nattributes = area:\n")
    with pytest.raises(ValidationError):  # before any computation
        load_config(empty)


def test_validate_stage_missing_files(tmp_path):
    cfg = preset_config("reykjavik")
    with pytest.raises(ValidationError, match="missing input.image"):
        cfg.validate_stage("extract")
    cfg = apply_overrides(cfg, image=str(tmp_path / "absent.pgm"))
    with pytest.raises(ValidationError, match="not found"):
        cfg.validate_stage("extract")


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def test_extract_writes_stack_and_provenance(tmp_path, scene):
    cfg = load_config(write_config(tmp_path / "c.cfg", scene, tmp_path / "out"))
    path = cmd_extract(cfg)
    stack = load_stack(path)
    assert stack.depth == 9  # 2*4+1
    prov = json.loads(open(path + ".provenance.json").read())
    assert prov["artifact"] == "features"
    assert "image" in prov["inputs"]
    # cache hit: second call leaves the file untouched
    before = os.stat(path).st_mtime_ns
    assert cmd_extract(cfg) == path
    assert os.stat(path).st_mtime_ns == before
    # force recomputes
    cmd_extract(cfg, force=True)
    assert os.stat(path).st_mtime_ns >= before


def test_classify_end_to_end(tmp_path, scene):
    cfg = load_config(write_config(tmp_path / "c.cfg", scene, tmp_path / "out"))
    cmd_extract(cfg)
    map_path, metrics_path = cmd_classify(cfg)
    assert os.path.exists(map_path) and os.path.exists(metrics_path)
    assert os.path.exists(os.path.join(cfg.out_dir, "predicted.ppm"))
    assert os.path.exists(os.path.join(cfg.out_dir, "model.bin"))
    rows = dict(
        line.split(",", 1) for line in open(metrics_path).read().splitlines()[1:]
    )
    assert float(rows["oa"]) >= 0.9


def test_extract_with_post_processing(tmp_path, scene):
    cfg = load_config(write_config(
        tmp_path / "c.cfg", scene, tmp_path / "out",
        extra="post = lf:5\n"))
    stack = load_stack(cmd_extract(cfg))
    assert stack.depth == 18  # (2*4+1) * 2
    assert stack.layer_meta[0].operator.endswith("+mean")
    cfg2 = load_config(write_config(
        tmp_path / "h.cfg", scene, tmp_path / "out_h",
        extra="post = hist:5:4\n"))
    assert load_stack(cmd_extract(cfg2)).depth == 36  # 9 * 4


def test_classify_requires_stack(tmp_path, scene):
    cfg = load_config(write_config(tmp_path / "c.cfg", scene, tmp_path / "none"))
    with pytest.raises(ValidationError, match="features.bsq"):
        cmd_classify(cfg)


def test_classify_raw_pixels_is_weak(tmp_path, scene):
    cfg = load_config(
        write_config(tmp_path / "c.cfg", scene, tmp_path / "raw", variant="none",
                     attributes="area:2")
    )
    cmd_extract(cfg)
    _, metrics_path = cmd_classify(cfg)
    rows = dict(
        line.split(",", 1) for line in open(metrics_path).read().splitlines()[1:]
    )
    assert float(rows["oa"]) <= 0.75


def test_reduce_requires_multiband(tmp_path, scene):
    cfg_text = f"""
[input]
image = {scene['image']}
[spectral]
method = pca
components = 1
[profile]
variant = none
[output]
dir = {tmp_path / 'out'}
"""
    p = tmp_path / "r.cfg"
    p.write_text(cfg_text)
    cfg = load_config(str(p))
    with pytest.raises(ValidationError, match=">= 2 bands"):
        cmd_reduce(cfg)
    assert not os.path.exists(os.path.join(cfg.out_dir, "reduced.bsq"))


def test_reduce_multiband(tmp_path):
    rng = np.random.default_rng(4)
    img_path = tmp_path / "mb.bsq"
    base = rng.standard_normal((2, 10, 10))
    bands = np.concatenate([base, base * 2 + 1, base * 0.5], axis=0)
    save_raster(Raster(values=bands), img_path, "bsq")
    p = tmp_path / "r.cfg"
    p.write_text(f"""
[input]
image = {img_path}
[spectral]
method = pca
variance = 0.99
[profile]
variant = none
[output]
dir = {tmp_path / 'out'}
""")
    cfg = load_config(str(p))
    out = cmd_reduce(cfg)
    reduced = np.fromfile(out, dtype="<f8")
    assert reduced.size == 2 * 100  # rank-2 mixture at tau=0.99


def test_failed_stage_removes_partial_outputs(tmp_path, scene, monkeypatch):
    cfg = load_config(write_config(tmp_path / "c.cfg", scene, tmp_path / "out"))
    import attriprof.pipeline as pl

    def boom(*a, **k):
        raise RuntimeError("disk full")

    monkeypatch.setattr(pl, "save_stack", boom)
    with pytest.raises(RuntimeError):
        cmd_extract(cfg)
    assert not os.path.exists(os.path.join(cfg.out_dir, "features.bsq"))


def test_determinism_byte_identical(tmp_path, scene):
    outs = []
    for name in ("a", "b"):
        cfg = load_config(
            write_config(tmp_path / f"{name}.cfg", scene, tmp_path / name, trees=15)
        )
        cmd_extract(cfg)
        cmd_classify(cfg)
        outs.append(cfg.out_dir)
    for fname in ("features.bsq", "features.bsq.hdr", "predicted.bsq", "predicted.ppm",
                  "model.bin", "metrics.csv"):
        a = open(os.path.join(outs[0], fname), "rb").read()
        b = open(os.path.join(outs[1], fname), "rb").read()
        assert a == b, fname


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_extract_classify_eval_info(tmp_path, scene, capsys):
    cfg_path = write_config(tmp_path / "c.cfg", scene, tmp_path / "cli_out")
    assert main(["extract", "--config", cfg_path]) == 0
    assert main(["classify", "--config", cfg_path]) == 0
    out = capsys.readouterr().out
    assert "features.bsq" in out and "metrics.csv" in out
    pred = os.path.join(str(tmp_path / "cli_out"), "predicted.bsq")
    assert main(["eval", pred, scene["test"]]) == 0
    assert "OA" in capsys.readouterr().out
    assert main(["info", scene["image"]]) == 0
    assert "1 band(s), 64x64" in capsys.readouterr().out
    assert main(["info", os.path.join(str(tmp_path / "cli_out"), "features.bsq")]) == 0
    assert "depth 9" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, scene, capsys, monkeypatch):
    # 1: validation errors (bad config / missing flags)
    assert main(["extract"]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("[profile]\nvariant = warp\nattributes = area:2\n")
    assert main(["extract", "--config", str(bad)]) == 1
    assert main(["extract", "--preset", "nope"]) == 1
    # 2: runtime failure inside a stage
    import attriprof.cli as cli

    def boom(cfg, threads=1, force=False):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "cmd_extract", boom)
    cfg_path = write_config(tmp_path / "c.cfg", scene, tmp_path / "out")
    assert main(["extract", "--config", cfg_path]) == 2
    capsys.readouterr()


def test_cli_preset_requires_inputs(capsys):
    assert main(["extract", "--preset", "reykjavik"]) == 1
    err = capsys.readouterr().err
    assert "image" in err


def test_cli_preset_extract_depth(tmp_path, scene, capsys):
    rc = main([
        "--threads", "2", "extract", "--preset", "reykjavik",
        "--image", scene["image"], "--out-dir", str(tmp_path / "rey"),
    ])
    assert rc == 0
    capsys.readouterr()
    stack = load_stack(os.path.join(str(tmp_path / "rey"), "features.bsq"))
    assert stack.depth == 30


def test_cmd_eval_csv(tmp_path, scene):
    img, train, test = scenes.make_scene()
    pred_path = tmp_path / "pred.bsq"
    save_labels(test, pred_path)  # predict == truth
    m = cmd_eval(str(pred_path), scene["test"], out_csv=str(tmp_path / "m.csv"))
    assert m.oa == 1.0
    assert "oa,1.0" in open(tmp_path / "m.csv").read()


def test_cmd_info_label_counts(scene):
    text = cmd_info(scene["train"])
    assert "label-like counts" in text
