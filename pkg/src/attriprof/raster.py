"""Raster data model and bit-exact file I/O.

Three on-disk formats are supported:

* PGM (P2 plain / P5 raw), single band.
* PPM (P3 plain / P6 raw), three bands.
* BSQ: flat band-sequential binary with a line-oriented ``key=value`` sidecar
  header (``<path>.hdr``) giving width/height/bands/dtype. All multi-byte
  binary data is little-endian. Feature stacks persist as BSQ with their layer
  metadata serialized into the header.

Pixel coordinates are (row, col), row-major, origin top-left, everywhere in
the package. All loaded objects are immutable (arrays are marked read-only)
and safe to share across concurrent readers.
"""

from __future__ import annotations

import logging
import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ExtentError, FormatError, RangeError, ValidationError

_log = logging.getLogger(__name__)

_BSQ_DTYPES = {
    "u8": np.dtype("<u1"),
    "u16": np.dtype("<u2"),
    "f32": np.dtype("<f4"),
    "f64": np.dtype("<f8"),
}
_DTYPE_NAMES = {v: k for k, v in _BSQ_DTYPES.items()}


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Raster:
    """Multi-band 2-D grid of scalar pixel values.

    ``values`` has shape (bands, height, width). Integer-valued bands feed
    tree construction; real-valued bands come from spectral reduction or
    filtering and must be quantized before a tree is built on them.
    """

    values: np.ndarray
    band_meta: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 2:
            v = v[np.newaxis, :, :]
        if v.ndim != 3:
            raise ValidationError(f"raster values must be 2-D or 3-D, got shape {v.shape}")
        if v.shape[1] < 1 or v.shape[2] < 1:
            raise ValidationError(f"raster extent must be >= 1x1, got {v.shape[1]}x{v.shape[2]}")
        object.__setattr__(self, "values", _freeze(v))
        if self.band_meta is not None:
            meta = tuple(str(m) for m in self.band_meta)
            if len(meta) != v.shape[0]:
                raise ValidationError(
                    f"band_meta has {len(meta)} entries for {v.shape[0]} bands"
                )
            object.__setattr__(self, "band_meta", meta)

    @property
    def bands(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    def band(self, i: int) -> np.ndarray:
        """Read-only (height, width) view of band ``i``."""
        return self.values[i]

    def same_extent(self, other) -> bool:
        return self.height == other.height and self.width == other.width


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class ids: 0 = unlabeled, 1..C = thematic classes."""

    labels: np.ndarray
    class_count: int = field(default=0)

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValidationError(f"label map must be 2-D, got shape {lab.shape}")
        if not np.issubdtype(lab.dtype, np.integer):
            raise ValidationError("label map must hold integers")
        if lab.size and lab.min() < 0:
            raise ValidationError("negative class ids are not allowed")
        lab = lab.astype(np.int32, copy=False)
        object.__setattr__(self, "labels", _freeze(lab))
        present = np.unique(lab[lab > 0])
        c = int(present.max()) if present.size else 0
        missing = sorted(set(range(1, c + 1)) - set(int(x) for x in present))
        if missing:
            raise ValidationError(
                "class ids must form a contiguous range 1..C; "
                + ", ".join(f"class {m} missing" for m in missing)
            )
        object.__setattr__(self, "class_count", c)
        if c == 0:
            warnings.warn("no labeled pixels", stacklevel=2)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def class_pixel_counts(self) -> dict[int, int]:
        counts = np.bincount(self.labels.ravel(), minlength=self.class_count + 1)
        return {c: int(counts[c]) for c in range(1, self.class_count + 1)}

    def same_extent(self, other) -> bool:
        return self.height == other.height and self.width == other.width


@dataclass(frozen=True)
class LayerMeta:
    """Provenance of one feature-stack layer."""

    source_band: int
    attribute: str | None
    threshold: float | None
    operator: str

    def encode(self) -> str:
        attr = self.attribute if self.attribute is not None else "-"
        thr = repr(float(self.threshold)) if self.threshold is not None else "-"
        return f"{self.source_band}|{attr}|{thr}|{self.operator}"

    @classmethod
    def decode(cls, text: str) -> "LayerMeta":
        parts = text.split("|")
        if len(parts) != 4:
            raise FormatError(f"bad layer meta entry {text!r}")
        band, attr, thr, op = parts
        return cls(
            source_band=int(band),
            attribute=None if attr == "-" else attr,
            threshold=None if thr == "-" else float(thr),
            operator=op,
        )


@dataclass(frozen=True)
class FeatureStack:
    """Ordered set of feature layers with per-layer provenance.

    ``layers`` has shape (depth, height, width), float64. Layer order is
    deterministic: band-major, then attribute-major, then operator order as
    documented in the profiles module.
    """

    layers: np.ndarray
    layer_meta: tuple[LayerMeta, ...]

    def __post_init__(self):
        v = np.asarray(self.layers, dtype=np.float64)
        if v.ndim != 3:
            raise ValidationError(f"feature stack must be 3-D, got shape {v.shape}")
        if len(self.layer_meta) != v.shape[0]:
            raise ValidationError(
                f"layer_meta has {len(self.layer_meta)} entries for depth {v.shape[0]}"
            )
        object.__setattr__(self, "layers", _freeze(v))
        object.__setattr__(self, "layer_meta", tuple(self.layer_meta))

    @property
    def depth(self) -> int:
        return self.layers.shape[0]

    @property
    def height(self) -> int:
        return self.layers.shape[1]

    @property
    def width(self) -> int:
        return self.layers.shape[2]

    def same_extent(self, other) -> bool:
        return self.height == other.height and self.width == other.width

    def as_samples(self) -> np.ndarray:
        """(height*width, depth) feature matrix, row-major pixel order."""
        d = self.depth
        return np.ascontiguousarray(self.layers.reshape(d, -1).T)


# ---------------------------------------------------------------------------
# netpbm (PGM/PPM)
# ---------------------------------------------------------------------------

_MAGIC_TO_KIND = {b"P2": ("pgm", False), b"P5": ("pgm", True), b"P3": ("ppm", False), b"P6": ("ppm", True)}


class _TokenReader:
    """Whitespace/comment-aware tokenizer that tracks byte offsets."""

    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def _skip_space(self, comments=True):
        d, n = self.data, len(self.data)
        while self.pos < n:
            c = d[self.pos]
            if c in b" \t\r\n\x0b\x0c":
                self.pos += 1
            elif comments and c == ord("#"):
                while self.pos < n and d[self.pos] not in b"\r\n":
                    self.pos += 1
            else:
                return

    def token(self) -> bytes:
        self._skip_space()
        if self.pos >= len(self.data):
            raise FormatError("unexpected end of file", self.path, self.pos)
        start = self.pos
        d, n = self.data, len(self.data)
        while self.pos < n and d[self.pos] not in b" \t\r\n\x0b\x0c#":
            self.pos += 1
        return d[start:self.pos]

    def int_token(self) -> int:
        start_after_space = None
        self._skip_space()
        start_after_space = self.pos
        t = self.token()
        if not re.fullmatch(rb"[0-9]+", t):
            raise FormatError(f"expected integer, got {t!r}", self.path, start_after_space)
        return int(t)

    def at_end(self) -> bool:
        self._skip_space()
        return self.pos >= len(self.data)


def _load_netpbm(data: bytes, path) -> Raster:
    if len(data) < 2 or data[:2] not in _MAGIC_TO_KIND:
        raise FormatError(f"not a PGM/PPM file (magic {data[:2]!r})", path, 0)
    magic = data[:2]
    kind, raw = _MAGIC_TO_KIND[magic]
    rd = _TokenReader(data, path)
    rd.pos = 2
    width = rd.int_token()
    height = rd.int_token()
    maxval_at = None
    rd._skip_space()
    maxval_at = rd.pos
    maxval = rd.int_token()
    if width < 1 or height < 1:
        raise FormatError(f"bad extent {width}x{height}", path, 2)
    if not 1 <= maxval <= 65535:
        raise FormatError(f"unsupported max-value {maxval}", path, maxval_at)
    channels = 3 if kind == "ppm" else 1
    count = width * height * channels
    dtype = np.dtype("<u2") if maxval > 255 else np.dtype("u1")

    if raw:
        # exactly one whitespace byte separates the header from the payload
        if rd.pos >= len(data) or data[rd.pos] not in b" \t\r\n":
            raise FormatError("missing whitespace before raw payload", path, rd.pos)
        payload_start = rd.pos + 1
        payload = data[payload_start:]
        need = count * dtype.itemsize
        if len(payload) < need:
            raise FormatError(
                f"truncated payload: need {need} bytes, have {len(payload)}",
                path,
                payload_start + len(payload),
            )
        if len(payload) > need:
            raise FormatError("trailing bytes after payload", path, payload_start + need)
        flat = np.frombuffer(payload, dtype=dtype, count=count)
    else:
        vals = np.empty(count, dtype=np.int64)
        for i in range(count):
            if rd.at_end():
                raise FormatError(
                    f"truncated payload: expected {count} samples, found {i}", path, rd.pos
                )
            vals[i] = rd.int_token()
        if not rd.at_end():
            raise FormatError("trailing samples after payload", path, rd.pos)
        flat = vals.astype(dtype)
    if flat.max(initial=0) > maxval:
        raise FormatError(f"sample exceeds declared max-value {maxval}", path)
    if channels == 1:
        values = flat.reshape(1, height, width)
    else:
        values = np.moveaxis(flat.reshape(height, width, 3), 2, 0)
    return Raster(values=values.astype(dtype))


def _save_netpbm(r: Raster, path, fmt: str, raw: bool = True):
    channels = 3 if fmt == "ppm" else 1
    if r.bands != channels:
        raise RangeError(f"{fmt} requires {channels} band(s), raster has {r.bands}")
    v = r.values
    if not np.issubdtype(v.dtype, np.integer):
        bad = np.unravel_index(0, v.shape)
        raise RangeError(f"{fmt} requires integer values, got dtype {v.dtype} (band {bad[0]})")
    if v.min() < 0 or v.max() > 255:
        band, row, col = np.unravel_index(
            int(np.argmax((v < 0) | (v > 255))), v.shape
        )
        raise RangeError(
            f"{fmt} requires values in 0..255; band {band} pixel ({row},{col}) = {v[band, row, col]}"
        )
    magic = {"pgm": (b"P2", b"P5"), "ppm": (b"P3", b"P6")}[fmt][1 if raw else 0]
    header = b"%s\n%d %d\n255\n" % (magic, r.width, r.height)
    if channels == 1:
        flat = v[0].astype("u1").ravel()
    else:
        flat = np.moveaxis(v, 0, 2).astype("u1").ravel()
    with open(path, "wb") as f:
        f.write(header)
        if raw:
            f.write(flat.tobytes())
        else:
            tokens = [b"%d" % x for x in flat]
            line: list[bytes] = []
            length = 0
            for t in tokens:
                if length + len(t) + (1 if line else 0) > 70:
                    f.write(b" ".join(line) + b"\n")
                    line, length = [], 0
                line.append(t)
                length += len(t) + (1 if length else 0)
            if line:
                f.write(b" ".join(line) + b"\n")


# ---------------------------------------------------------------------------
# BSQ + sidecar header
# ---------------------------------------------------------------------------

def _header_path(path) -> str:
    return str(path) + ".hdr"


def _write_header(path, fields: dict[str, str]):
    lines = [f"{k}={v}" for k, v in fields.items()]
    with open(_header_path(path), "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def _read_header(path) -> dict[str, str]:
    hp = _header_path(path)
    fields: dict[str, str] = {}
    try:
        with open(hp, "r", encoding="utf-8") as f:
            for ln, line in enumerate(f):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise FormatError(f"malformed header line {ln + 1}: {line!r}", hp)
                k, v = line.split("=", 1)
                fields[k.strip()] = v.strip()
    except OSError as exc:
        raise FormatError(f"cannot read sidecar header: {exc}", hp) from exc
    return fields


def _bsq_core_load(path):
    fields = _read_header(path)
    try:
        width = int(fields["width"])
        height = int(fields["height"])
        bands = int(fields["bands"])
        dtype_name = fields["dtype"]
    except KeyError as exc:
        raise FormatError(f"header missing key {exc}", _header_path(path)) from exc
    if fields.get("byteorder", "little") != "little":
        raise FormatError(f"unsupported byte order {fields.get('byteorder')!r}", _header_path(path))
    if dtype_name not in _BSQ_DTYPES:
        raise FormatError(f"unsupported dtype {dtype_name!r}", _header_path(path))
    if width < 1 or height < 1 or bands < 1:
        raise FormatError(f"bad extent {bands}x{height}x{width}", _header_path(path))
    dtype = _BSQ_DTYPES[dtype_name]
    need = width * height * bands * dtype.itemsize
    with open(path, "rb") as f:
        payload = f.read()
    if len(payload) < need:
        raise FormatError(
            f"truncated payload: need {need} bytes, have {len(payload)}", path, len(payload)
        )
    if len(payload) > need:
        raise FormatError("trailing bytes after payload", path, need)
    values = np.frombuffer(payload, dtype=dtype).reshape(bands, height, width)
    return values, fields


def _load_bsq(path) -> Raster:
    values, fields = _bsq_core_load(path)
    meta = None
    band_keys = [k for k in fields if k.startswith("band.")]
    if band_keys:
        meta = tuple(fields.get(f"band.{i}", "") for i in range(values.shape[0]))
    return Raster(values=values, band_meta=meta)


def _save_bsq(r: Raster, path, extra_fields: dict[str, str] | None = None):
    if r.values.dtype not in _DTYPE_NAMES:
        # Preserve integer data exactly where a BSQ dtype can represent it.
        v = r.values
        if np.issubdtype(v.dtype, np.integer):
            if v.size and (v.min() < 0 or v.max() > 65535):
                raise RangeError(
                    f"BSQ integer dtypes cover 0..65535; data spans {v.min()}..{v.max()}"
                )
            dtype = _BSQ_DTYPES["u8"] if (not v.size or v.max() <= 255) else _BSQ_DTYPES["u16"]
            values = v.astype(dtype)
        else:
            values = v.astype(_BSQ_DTYPES["f64"])
    else:
        values = r.values.astype(r.values.dtype.newbyteorder("<"), copy=False)
    fields = {
        "width": str(r.width),
        "height": str(r.height),
        "bands": str(r.bands),
        "dtype": _DTYPE_NAMES[np.dtype(values.dtype.newbyteorder("<"))],
        "byteorder": "little",
    }
    if r.band_meta is not None:
        for i, m in enumerate(r.band_meta):
            fields[f"band.{i}"] = m
    if extra_fields:
        fields.update(extra_fields)
    with open(path, "wb") as f:
        f.write(np.ascontiguousarray(values).tobytes())
    _write_header(path, fields)


# ---------------------------------------------------------------------------
# public I/O entry points
# ---------------------------------------------------------------------------

def detect_format(path) -> str:
    """Guess the format from the file extension, falling back to magic bytes."""
    p = str(path).lower()
    for ext, fmt in ((".pgm", "pgm"), (".ppm", "ppm"), (".bsq", "bsq")):
        if p.endswith(ext):
            return fmt
    try:
        with open(path, "rb") as f:
            magic = f.read(2)
        if magic in _MAGIC_TO_KIND:
            return _MAGIC_TO_KIND[magic][0]
    except OSError:
        pass
    return "bsq"


def load_raster(path, format: str | None = None) -> Raster:
    """Load a raster; ``format`` is one of pgm/ppm/bsq (auto-detected if None)."""
    fmt = format or detect_format(path)
    if fmt in ("pgm", "ppm"):
        try:
            with open(path, "rb") as f:
                data = f.read()
        except OSError as exc:
            raise FormatError(f"cannot read file: {exc}", path) from exc
        r = _load_netpbm(data, path)
        expected = 3 if fmt == "ppm" else 1
        if r.bands != expected:
            raise FormatError(f"expected {fmt} ({expected} band(s)), file has {r.bands}", path)
        return r
    if fmt == "bsq":
        return _load_bsq(path)
    raise ValidationError(f"unknown raster format {fmt!r}")


def save_raster(r: Raster, path, format: str | None = None, plain: bool = False):
    """Save a raster; round-trips bit-exactly for in-range data."""
    fmt = format or detect_format(path)
    if fmt in ("pgm", "ppm"):
        _save_netpbm(r, path, fmt, raw=not plain)
    elif fmt == "bsq":
        _save_bsq(r, path)
    else:
        raise ValidationError(f"unknown raster format {fmt!r}")


def load_labels(path, format: str | None = None) -> LabelMap:
    """Load a single-band integer raster as a label map (0 = unlabeled)."""
    r = load_raster(path, format)
    if r.bands != 1:
        raise ValidationError(f"label maps are single-band, file has {r.bands} bands")
    if not np.issubdtype(r.values.dtype, np.integer):
        raise ValidationError("label maps must hold integers")
    m = LabelMap(labels=r.values[0].astype(np.int32))
    _log.info("labels %s: per-class pixel counts %s", path, m.class_pixel_counts())
    return m


def save_labels(m: LabelMap, path, format: str | None = None):
    save_raster(Raster(values=m.labels.astype(np.uint16)[np.newaxis]), path, format)


def save_stack(s: FeatureStack, path):
    """Persist a feature stack as BSQ(f64) with layer metadata in the header."""
    extra = {"layers": str(s.depth)}
    for i, m in enumerate(s.layer_meta):
        extra[f"layer.{i}"] = m.encode()
    _save_bsq(Raster(values=s.layers), path, extra_fields=extra)


def load_stack(path) -> FeatureStack:
    values, fields = _bsq_core_load(path)
    if "layers" not in fields:
        raise FormatError("not a feature stack (no layer metadata)", _header_path(path))
    depth = int(fields["layers"])
    if depth != values.shape[0]:
        raise FormatError(
            f"layer count {depth} does not match band count {values.shape[0]}",
            _header_path(path),
        )
    meta = []
    for i in range(depth):
        key = f"layer.{i}"
        if key not in fields:
            raise FormatError(f"header missing {key}", _header_path(path))
        meta.append(LayerMeta.decode(fields[key]))
    return FeatureStack(layers=values.astype(np.float64), layer_meta=tuple(meta))


def require_same_extent(a, b, what: str = "inputs"):
    """Reject extent mismatches; downstream code never truncates."""
    if not a.same_extent(b):
        raise ExtentError(
            f"{what} disagree on extent: {a.height}x{a.width} vs {b.height}x{b.width}"
        )
