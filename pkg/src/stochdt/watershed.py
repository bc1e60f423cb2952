"""Seeded watershed on internal distance maps.

Flooding, maxima detection and h-maxima reconstruction all use
4-connectivity. The heap-driven kernels have no vectorised form, so the
fallback runs the same source uncompiled.
"""
from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._accel import njit, numba_enabled
from .imaging import as_mask, write_labels
from .sdt import SdtParams, distance_map

_CROSS = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    labels: np.ndarray      # 0 = background, 1..segment_count
    segment_count: int

    def areas(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.segment_count + 1)[1:]

    def count(self, min_area: int = 1) -> int:
        """Number of segments covering at least ``min_area`` pixels."""
        return int((self.areas() >= min_area).sum())

    def write_pgm(self, path) -> None:
        write_labels(path, self.labels)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["segment_count", self.segment_count])
            w.writerow(["label", "area"])
            for label, area in enumerate(self.areas(), 1):
                w.writerow([label, int(area)])


def internal_distance(img, params: SdtParams, backend: str = "dt", rng=None) -> np.ndarray:
    """Distance from object pixels to the (possibly thinned) background; 0 outside."""
    mask = as_mask(img)
    d = distance_map(~mask, params, backend, rng)
    return np.where(mask, d, 0.0)


def _reconstruct_py(marker, ceiling, valid, h, w):
    """Grey reconstruction by dilation of ``marker`` under ``ceiling`` (flat arrays)."""
    g = marker.copy()
    heap = [(-g[0], 0)]
    heap.pop()
    for p in range(h * w):
        if valid[p]:
            heapq.heappush(heap, (-g[p], p))
    while heap:
        negv, p = heapq.heappop(heap)
        v = -negv
        if v < g[p]:
            continue
        y, x = divmod(p, w)
        for dy, dx in ((-1, 0), (0, 1), (1, 0), (0, -1)):
            yy, xx = y + dy, x + dx
            if 0 <= yy < h and 0 <= xx < w:
                q = yy * w + xx
                if valid[q]:
                    nv = min(v, ceiling[q])
                    if nv > g[q]:
                        g[q] = nv
                        heapq.heappush(heap, (-nv, q))
    return g


def _regional_maxima_py(values, valid, h, w):
    """Label 4-connected plateaus with no strictly higher neighbour, row-major order."""
    labels = np.zeros(h * w, np.int64)
    seen = np.zeros(h * w, np.bool_)
    stack = np.empty(h * w, np.int64)
    members = np.empty(h * w, np.int64)
    n = 0
    for s in range(h * w):
        if not valid[s] or seen[s]:
            continue
        v = values[s]
        top = 0
        count = 0
        stack[top] = s
        top += 1
        seen[s] = True
        is_max = True
        while top > 0:
            top -= 1
            p = stack[top]
            members[count] = p
            count += 1
            y, x = divmod(p, w)
            for dy, dx in ((-1, 0), (0, 1), (1, 0), (0, -1)):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w:
                    q = yy * w + xx
                    if valid[q]:
                        if values[q] > v:
                            is_max = False
                        elif values[q] == v and not seen[q]:
                            seen[q] = True
                            stack[top] = q
                            top += 1
        if is_max:
            n += 1
            for i in range(count):
                labels[members[i]] = n
    return labels


def _flood_py(dist, labels, valid, h, w):
    """Priority flood: highest distance first, FIFO among equal distances."""
    out = labels.copy()
    heap = [(0.0, 0, 0)]
    heap.pop()
    counter = 0
    for p in range(h * w):
        if out[p] > 0:
            heapq.heappush(heap, (-dist[p], counter, p))
            counter += 1
    while heap:
        _, _, p = heapq.heappop(heap)
        y, x = divmod(p, w)
        for dy, dx in ((-1, 0), (0, 1), (1, 0), (0, -1)):
            yy, xx = y + dy, x + dx
            if 0 <= yy < h and 0 <= xx < w:
                q = yy * w + xx
                if valid[q] and out[q] == 0:
                    out[q] = out[p]
                    heapq.heappush(heap, (-dist[q], counter, q))
                    counter += 1
    return out


_reconstruct_nb = njit(cache=True)(_reconstruct_py)
_regional_maxima_nb = njit(cache=True)(_regional_maxima_py)
_flood_nb = njit(cache=True)(_flood_py)


def _kernel(name):
    return globals()[f"_{name}_{'nb' if numba_enabled() else 'py'}"]


def h_maxima_transform(values: np.ndarray, valid: np.ndarray, h: float) -> np.ndarray:
    """Reconstruction by dilation of ``values - h`` under ``values`` inside ``valid``."""
    hgt, wid = values.shape
    f = np.where(valid, values, -np.inf).astype(np.float64).ravel()
    v = np.ascontiguousarray(valid, dtype=np.bool_).ravel()
    g = _kernel("reconstruct")(f - h, f, v, hgt, wid)
    return g.reshape(hgt, wid)


def regional_maxima(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    hgt, wid = values.shape
    f = np.ascontiguousarray(values, dtype=np.float64).ravel()
    v = np.ascontiguousarray(valid, dtype=np.bool_).ravel()
    return _kernel("regional_maxima")(f, v, hgt, wid).reshape(hgt, wid)


def local_peaks(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Pixels not exceeded by any 8-neighbour, grouped into 4-connected labels."""
    f = np.where(valid, values, -np.inf)
    peaks = valid & (f >= ndimage.maximum_filter(f, size=3, mode="constant", cval=-np.inf))
    return ndimage.label(peaks, structure=_CROSS)[0].astype(np.int64)


SEED_RULES = ("regional", "local")


def extract_seeds(dist: np.ndarray, obj, h: float = 0.5, rule: str = "regional") -> np.ndarray:
    """Seed labels at the maxima of ``dist`` on the object.

    Maxima whose dynamic does not exceed ``h`` are first flattened by
    h-maxima reconstruction. ``rule="regional"`` keeps plateaus with no
    strictly higher 4-neighbour; ``rule="local"`` keeps every pixel that
    no 8-neighbour exceeds, so shoulders of ridges seed too.
    """
    mask = as_mask(obj)
    if h < 0:
        raise ValueError("h must be non-negative")
    if rule not in SEED_RULES:
        raise ValueError(f"unknown seed rule {rule!r}")
    dist = np.asarray(dist, dtype=np.float64)
    if not mask.any():
        return np.zeros(mask.shape, np.int64)
    f = h_maxima_transform(dist, mask, h) if h > 0 else dist
    if rule == "local":
        return local_peaks(f, mask)
    return regional_maxima(f, mask)


def watershed_segment(dist: np.ndarray, seeds: np.ndarray, obj) -> SegmentationResult:
    """Flood ``-dist`` from ``seeds`` over the object pixels.

    Object components that no seed reaches get a fresh label each.
    """
    mask = as_mask(obj)
    seeds = np.asarray(seeds, dtype=np.int64)
    if seeds.shape != mask.shape or np.asarray(dist).shape != mask.shape:
        raise ValueError("dimension mismatch")
    seeds = np.where(mask, seeds, 0)
    if not seeds.any():
        raise ValueError("empty seed set")
    # compact seed labels to 1..L preserving their numeric order
    present = np.unique(seeds[seeds > 0])
    remap = np.zeros(int(present.max()) + 1, np.int64)
    remap[present] = np.arange(1, present.size + 1)
    seeds = remap[seeds]
    hgt, wid = mask.shape
    lab = _kernel("flood")(np.ascontiguousarray(dist, dtype=np.float64).ravel(), seeds.ravel().copy(),
                           np.ascontiguousarray(mask).ravel(), hgt, wid).reshape(hgt, wid)
    orphans, n_orphans = ndimage.label(mask & (lab == 0), structure=_CROSS)
    n = int(present.size)
    if n_orphans:
        lab = np.where(orphans > 0, orphans + n, lab)
    return SegmentationResult(lab, n + int(n_orphans))


def segment(img, params: SdtParams, backend: str = "dt", h: float = 0.5, rng=None,
            rule: str = "regional") -> SegmentationResult:
    """Internal distance, seeding and flooding in one call."""
    mask = as_mask(img)
    dist = internal_distance(mask, params, backend, rng)
    seeds = extract_seeds(dist, mask, h, rule)
    if not seeds.any():
        return SegmentationResult(np.zeros(mask.shape, np.int64), 0)
    return watershed_segment(dist, seeds, mask)
