"""Image containers, PGM/PNG I/O, noise models and synthetic objects.

Arrays are indexed ``[y, x]`` (row, column). Continuous coordinates put the
centre of pixel ``(x, y)`` at ``(x + 0.5, y + 0.5)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ImageFormatError(ValueError):
    """Malformed or unsupported image file."""


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """Binary image; ``mask[y, x]`` is True on foreground pixels."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 2:
            raise ValueError(f"expected a 2D mask, got shape {m.shape}")
        object.__setattr__(self, "mask", _frozen(m.astype(bool)))

    @classmethod
    def from_points(cls, points, width: int, height: int) -> "BinaryImage":
        mask = np.zeros((height, width), bool)
        for x, y in points:
            if not (0 <= x < width and 0 <= y < height):
                raise ValueError(f"point {(x, y)} outside {width}x{height} domain")
            mask[y, x] = True
        return cls(mask)

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryImage":
        return cls(np.zeros((height, width), bool))

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def foreground(self) -> set[tuple[int, int]]:
        ys, xs = np.nonzero(self.mask)
        return set(zip(xs.tolist(), ys.tolist()))

    def complement(self) -> "BinaryImage":
        return BinaryImage(~self.mask)

    def __eq__(self, other):
        return isinstance(other, BinaryImage) and np.array_equal(self.mask, other.mask)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Grey-scale image with intensities in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"expected a 2D array, got shape {v.shape}")
        object.__setattr__(self, "values", _frozen(np.clip(v, 0.0, 1.0)))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(self.values, other.values)

    __hash__ = None


def as_mask(img) -> np.ndarray:
    if isinstance(img, BinaryImage):
        return img.mask
    m = np.asarray(img)
    if m.ndim != 2:
        raise ValueError(f"expected a 2D mask, got shape {m.shape}")
    return m.astype(bool, copy=False)


# ---------------------------------------------------------------- file I/O

def _pnm_tokens(data: bytes, count: int):
    """Parse ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, i, n = [], 0, len(data)
    while len(tokens) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise ImageFormatError("truncated PGM header")
        tokens.append(data[start:i])
    return tokens, i


def read_pgm_array(path) -> tuple[np.ndarray, int]:
    """Return the raw integer samples and maxval of a P2/P5 file."""
    data = Path(path).read_bytes()
    if len(data) < 2 or data[:2] not in (b"P5", b"P2"):
        raise ImageFormatError(f"{path}: malformed PGM header (bad magic)")
    try:
        (magic, w, h, maxval), pos = _pnm_tokens(data, 4)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed PGM header") from exc
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"{path}: unsupported maxval {maxval}")
    if magic == b"P2":
        try:
            samples = np.array(data[pos:].split()[: width * height], dtype=np.int64)
        except ValueError as exc:
            raise ImageFormatError(f"{path}: malformed P2 raster") from exc
    else:
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        nbytes = width * height * dtype.itemsize
        if len(data) - pos < nbytes:
            raise ImageFormatError(f"{path}: truncated raster")
        samples = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    if samples.size != width * height:
        raise ImageFormatError(f"{path}: truncated raster")
    samples = samples.astype(np.int64).reshape(height, width)
    if samples.max(initial=0) > maxval:
        raise ImageFormatError(f"{path}: sample exceeds maxval")
    return samples, maxval


def write_pgm_array(path, samples: np.ndarray, maxval: int = 255) -> None:
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValueError("PGM raster must be 2D")
    if not 0 < maxval < 65536:
        raise ValueError(f"unsupported maxval {maxval}")
    if samples.min(initial=0) < 0 or samples.max(initial=0) > maxval:
        raise ValueError("samples outside [0, maxval]")
    h, w = samples.shape
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        fh.write(samples.astype(dtype).tobytes())


def _read_png(path) -> GrayImage:
    from PIL import Image

    try:
        with Image.open(path) as im:
            mode = im.mode
            if mode not in ("L", "1"):
                raise ImageFormatError(f"{path}: unsupported PNG mode {mode!r}, need 8-bit grey")
            arr = np.asarray(im.convert("L"), dtype=np.float64)
    except ImageFormatError:
        raise
    except (OSError, SyntaxError) as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc
    return GrayImage(arr / 255.0)


def read_image(path, format: str | None = None) -> GrayImage:
    """Read a PGM (P2/P5) or 8-bit grey PNG, normalised to [0, 1]."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    if fmt == "PNG":
        return _read_png(path)
    if fmt not in ("PGM", "PNM", ""):
        raise ImageFormatError(f"unsupported format {fmt!r}")
    samples, maxval = read_pgm_array(path)
    return GrayImage(samples / maxval)


def write_image(path, img: GrayImage) -> None:
    """Write a P5 PGM with maxval 255 (values are rounded to 8 bits)."""
    write_pgm_array(path, np.rint(img.values * 255.0).astype(np.int64), 255)


def read_binary(path, t: float = 0.5) -> BinaryImage:
    return threshold(read_image(path), t)


def write_binary(path, img: BinaryImage) -> None:
    write_pgm_array(path, as_mask(img).astype(np.int64) * 255, 255)


def write_labels(path, labels: np.ndarray) -> None:
    """Label map as PGM; grey value equals the label (16-bit above 255 labels)."""
    labels = np.asarray(labels, dtype=np.int64)
    top = int(labels.max(initial=0))
    if top >= 65536:
        raise ValueError("too many labels for a PGM label image")
    write_pgm_array(path, labels, 255 if top <= 255 else 65535)


# ---------------------------------------------------------------- point ops

def threshold(img: GrayImage, t: float) -> BinaryImage:
    return BinaryImage(img.values >= t)


def add_noise_points(img, p: float, rng) -> BinaryImage:
    """Turn every pixel on independently with probability ``p``."""
    mask = as_mask(img)
    hits = as_rng(rng).random(mask.shape) < p
    return BinaryImage(mask | hits)


def add_gaussian_noise(img: GrayImage, sigma: float, rng) -> GrayImage:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    noise = as_rng(rng).normal(0.0, 1.0, img.shape) * sigma
    return GrayImage(img.values + noise)


# ---------------------------------------------------------------- synthesis

def pixel_centers(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:height, 0:width]
    return xs + 0.5, ys + 0.5


def digitize_disks(c1, c2, r: float, width: int, height: int) -> BinaryImage:
    """Gauss centre-point digitisation of the union of two disks of radius ``r``."""
    for cx, cy in (c1, c2):
        if cx - r < 1 or cy - r < 1 or cx + r > width - 1 or cy + r > height - 1:
            raise ValueError(f"domain {width}x{height} too small for disk at {(cx, cy)} r={r}")
    px, py = pixel_centers(width, height)
    r2 = r * r
    inside = ((px - c1[0]) ** 2 + (py - c1[1]) ** 2 <= r2) | ((px - c2[0]) ** 2 + (py - c2[1]) ** 2 <= r2)
    return BinaryImage(inside)


def _segment_distance(px, py, a, b):
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0)
    return np.hypot(px - ax - t * dx, py - ay - t * dy)


def synth_letter(glyph: str, width: int = 128, height: int = 128) -> BinaryImage:
    """Deterministic test objects.

    ``"A"``: three strokes (two legs meeting at the apex and a crossbar) of
    half-width ``0.045 * min(width, height)``, digitised by pixel centre.

    ``"X-pointcloud"``: isolated pixels every fourth step along both diagonals
    through the central pixel, reaching ``0.15 * min(width, height)`` from it.
    """
    if width < 16 or height < 16:
        raise ValueError("glyph domain must be at least 16x16")
    s = min(width, height)
    if glyph == "A":
        cx, cy = width / 2, height / 2
        apex = (cx, cy - 0.32 * s)
        left = (cx - 0.26 * s, cy + 0.32 * s)
        right = (cx + 0.26 * s, cy + 0.32 * s)
        t = 0.55
        bar_l = (apex[0] + t * (left[0] - apex[0]), apex[1] + t * (left[1] - apex[1]))
        bar_r = (apex[0] + t * (right[0] - apex[0]), apex[1] + t * (right[1] - apex[1]))
        px, py = pixel_centers(width, height)
        half = 0.045 * s
        d = np.minimum.reduce([
            _segment_distance(px, py, apex, left),
            _segment_distance(px, py, apex, right),
            _segment_distance(px, py, bar_l, bar_r),
        ])
        return BinaryImage(d <= half)
    if glyph in ("X", "X-pointcloud"):
        mask = np.zeros((height, width), bool)
        cx, cy = width // 2, height // 2
        reach = int(0.15 * s)
        for step in range(-(reach // 4), reach // 4 + 1):
            o = 4 * step
            mask[cy + o, cx + o] = True
            mask[cy - o, cx + o] = True
        return BinaryImage(mask)
    raise ValueError(f"unknown glyph {glyph!r}")
