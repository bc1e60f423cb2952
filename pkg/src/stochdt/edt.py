"""Exact Euclidean distance transform and k-nearest-point distance maps.

Pixels outside the reference set are measured to the nearest reference pixel
(``inf`` when the set is empty). Squared distances are integers held in
float64, so the square roots agree bit-for-bit across the numba and scipy
paths.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from ._accel import njit, numba_enabled, prange
from .imaging import as_mask

INF = np.inf
_BIG = 1e20  # stand-in for "no point in this column" inside the envelope pass


@njit(cache=True)
def _edt_sq_into(mask, out, f, v, z):
    """Squared EDT of ``mask`` into ``out``; scratch ``f, v, z`` of length > max(H, W)."""
    h, w = mask.shape
    # pass 1: exact 1D distance along each column
    for x in range(w):
        d = _BIG
        for y in range(h):
            if mask[y, x]:
                d = 0.0
            elif d < _BIG:
                d += 1.0
            out[y, x] = d
        d = _BIG
        for y in range(h - 1, -1, -1):
            if mask[y, x]:
                d = 0.0
            elif d < _BIG:
                d += 1.0
            if d < out[y, x]:
                out[y, x] = d
        for y in range(h):
            if out[y, x] < _BIG:
                out[y, x] = out[y, x] * out[y, x]
    # pass 2: lower envelope of parabolas along each row
    for y in range(h):
        for x in range(w):
            f[x] = out[y, x]
        k = 0
        v[0] = 0
        z[0] = -np.inf
        z[1] = np.inf
        for q in range(1, w):
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
            while s <= z[k]:
                k -= 1
                s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = np.inf
        k = 0
        for q in range(w):
            while z[k + 1] < q:
                k += 1
            dq = q - v[k]
            out[y, q] = dq * dq + f[v[k]]


@njit(cache=True)
def _edt_nb(mask):
    h, w = mask.shape
    n = max(h, w) + 2
    out = np.empty((h, w), np.float64)
    _edt_sq_into(mask, out, np.empty(n), np.empty(n, np.int64), np.empty(n))
    for y in range(h):
        for x in range(w):
            out[y, x] = math.sqrt(out[y, x])
    return out


def _edt_np(mask):
    return ndimage.distance_transform_edt(~mask)


def edt(img) -> np.ndarray:
    """Exact Euclidean distance from every pixel to the nearest foreground pixel."""
    mask = np.ascontiguousarray(as_mask(img))
    if not mask.any():
        return np.full(mask.shape, INF)
    if numba_enabled():
        return _edt_nb(mask)
    return _edt_np(mask)


def saturated_edt(img, d_max: float) -> np.ndarray:
    return np.minimum(edt(img), d_max)


# ------------------------------------------------------------ Monte Carlo batch

@njit(cache=True, parallel=True)
def _realization_maps_nb(keep, ys, xs, h, w, d_max):
    """Saturated EDT of each realization; row ``r`` of ``keep`` selects points."""
    m = keep.shape[0]
    out = np.empty((m, h, w), np.float64)
    n = max(h, w) + 2
    for r in prange(m):
        mask = np.zeros((h, w), np.bool_)
        any_pt = False
        for j in range(ys.shape[0]):
            if keep[r, j]:
                mask[ys[j], xs[j]] = True
                any_pt = True
        if not any_pt:
            out[r, :, :] = d_max
            continue
        sq = out[r]
        _edt_sq_into(mask, sq, np.empty(n), np.empty(n, np.int64), np.empty(n))
        for y in range(h):
            for x in range(w):
                d = math.sqrt(sq[y, x])
                sq[y, x] = d if d < d_max else d_max
    return out


def _realization_maps_np(keep, ys, xs, h, w, d_max):
    out = np.empty((keep.shape[0], h, w))
    for r in range(keep.shape[0]):
        sel = keep[r]
        if not sel.any():
            out[r] = d_max
            continue
        mask = np.zeros((h, w), bool)
        mask[ys[sel], xs[sel]] = True
        np.minimum(_edt_np(mask), d_max, out=out[r])
    return out


def realization_maps(keep: np.ndarray, ys: np.ndarray, xs: np.ndarray, shape, d_max: float) -> np.ndarray:
    """Stack of saturated EDTs, one per row of the boolean ``keep`` matrix."""
    h, w = shape
    keep = np.ascontiguousarray(keep, dtype=bool)
    if numba_enabled():
        return _realization_maps_nb(keep, ys.astype(np.int64), xs.astype(np.int64), h, w, float(d_max))
    return _realization_maps_np(keep, ys, xs, h, w, float(d_max))


# ------------------------------------------------------------ k nearest points

@njit(cache=True, parallel=True)
def _knn_cells_nb(ys, xs, h, w, k, c):
    """Bucket points into ``c x c`` cells and visit cell rings outward from each pixel.

    The k smallest squared distances are kept sorted in a small buffer; the
    search stops once the next ring cannot hold anything closer.
    """
    gh = (h + c - 1) // c
    gw = (w + c - 1) // c
    n = ys.shape[0]
    start = np.zeros(gh * gw + 1, np.int64)
    for j in range(n):
        start[(ys[j] // c) * gw + xs[j] // c + 1] += 1
    for i in range(gh * gw):
        start[i + 1] += start[i]
    fill = start.copy()
    py = np.empty(n, np.int64)
    px = np.empty(n, np.int64)
    for j in range(n):
        cell = (ys[j] // c) * gw + xs[j] // c
        py[fill[cell]] = ys[j]
        px[fill[cell]] = xs[j]
        fill[cell] += 1
    out = np.empty((k, h, w), np.float64)
    rmax = max(gh, gw)
    for y in prange(h):
        best = np.empty(k, np.int64)
        cy = y // c
        for x in range(w):
            cx = x // c
            filled = 0
            for r in range(rmax):
                if filled == k:
                    # points in ring r are at least (r - 1) * c + 1 away along one axis
                    lim = (r - 1) * c + 1
                    if lim * lim > best[k - 1]:
                        break
                for gy in range(cy - r, cy + r + 1):
                    if gy < 0 or gy >= gh:
                        continue
                    step = 1 if (gy == cy - r or gy == cy + r) else 2 * r
                    for gx in range(cx - r, cx + r + 1, step):
                        if gx < 0 or gx >= gw:
                            continue
                        cell = gy * gw + gx
                        for j in range(start[cell], start[cell + 1]):
                            dy = py[j] - y
                            dx = px[j] - x
                            d2 = dy * dy + dx * dx
                            if filled == k and d2 >= best[k - 1]:
                                continue
                            i = filled if filled < k else k - 1
                            while i > 0 and best[i - 1] > d2:
                                best[i] = best[i - 1]
                                i -= 1
                            best[i] = d2
                            if filled < k:
                                filled += 1
            for i in range(k):
                out[i, y, x] = math.sqrt(best[i])
    return out


@njit(cache=True, parallel=True)
def _knn_rings_nb(mask, oy, ox, od2, k):
    """Scan offsets in order of increasing length until ``k`` hits are found."""
    h, w = mask.shape
    out = np.empty((k, h, w), np.float64)
    n_off = oy.shape[0]
    for y in prange(h):
        for x in range(w):
            found = 0
            for t in range(n_off):
                yy = y + oy[t]
                xx = x + ox[t]
                if 0 <= yy < h and 0 <= xx < w and mask[yy, xx]:
                    out[found, y, x] = math.sqrt(od2[t])
                    found += 1
                    if found == k:
                        break
    return out


_OFFSETS_CACHE: dict = {}


def _sorted_offsets(h, w):
    key = (h, w)
    if key not in _OFFSETS_CACHE:
        oy, ox = np.mgrid[-(h - 1):h, -(w - 1):w]
        oy, ox = oy.ravel(), ox.ravel()
        d2 = oy * oy + ox * ox
        order = np.argsort(d2, kind="stable")
        _OFFSETS_CACHE.clear()
        _OFFSETS_CACHE[key] = (oy[order].astype(np.int64), ox[order].astype(np.int64),
                               d2[order].astype(np.int64))
    return _OFFSETS_CACHE[key]


def _knn_np(mask, k):
    h, w = mask.shape
    ys, xs = np.nonzero(mask)
    tree = cKDTree(np.column_stack([ys, xs]).astype(np.float64))
    gy, gx = np.mgrid[0:h, 0:w]
    d, _ = tree.query(np.column_stack([gy.ravel(), gx.ravel()]).astype(np.float64), k=k)
    d = np.asarray(d).reshape(h * w, k)
    return np.ascontiguousarray(d.T.reshape(k, h, w))


def knn_distance_maps(img, k: int) -> np.ndarray:
    """Distances to the 1st..k-th nearest foreground pixel, shape ``(k, H, W)``.

    Layers beyond the number of foreground pixels are ``inf``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    mask = np.ascontiguousarray(as_mask(img))
    h, w = mask.shape
    n = int(mask.sum())
    out = np.full((k, h, w), INF)
    kk = min(k, n)
    if kk == 0:
        return out
    if numba_enabled():
        # the offset scan wins once the set is dense enough that k hits sit a few pixels away
        if n * n > 8 * kk * h * w:
            oy, ox, od2 = _sorted_offsets(h, w)
            out[:kk] = _knn_rings_nb(mask, oy, ox, od2, kk)
        else:
            ys, xs = np.nonzero(mask)
            cell = max(1, int(round(math.sqrt(4.0 * h * w / n))))  # about four points per cell
            out[:kk] = _knn_cells_nb(ys.astype(np.int64), xs.astype(np.int64), h, w, kk, cell)
    else:
        out[:kk] = _knn_np(mask, kk)
    return out


# ------------------------------------------------------------ serialization

RAW_MAGIC = "STOCHDT-RAW"


def write_distance_csv(path, dmap: np.ndarray) -> None:
    """One CSV row per image row, values printed with round-trip precision."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for row in np.asarray(dmap, dtype=np.float64):
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_distance_csv(path) -> np.ndarray:
    with open(path, encoding="ascii") as fh:
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    return np.array(rows, dtype=np.float64)


def write_distance_raw(path, dmap: np.ndarray) -> None:
    """float32 little-endian raster after a 3-line ASCII header::

        STOCHDT-RAW
        <width> <height>
        float32 little-endian
    """
    dmap = np.asarray(dmap)
    h, w = dmap.shape
    with open(path, "wb") as fh:
        fh.write(f"{RAW_MAGIC}\n{w} {h}\nfloat32 little-endian\n".encode("ascii"))
        fh.write(dmap.astype("<f4").tobytes())


def read_distance_raw(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().decode("ascii").strip()
        dims = fh.readline().decode("ascii").split()
        dtype = fh.readline().decode("ascii").strip()
        if magic != RAW_MAGIC or len(dims) != 2 or dtype != "float32 little-endian":
            raise ValueError(f"{path}: not a {RAW_MAGIC} file")
        w, h = int(dims[0]), int(dims[1])
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != w * h:
        raise ValueError(f"{path}: truncated raster")
    return data.reshape(h, w).astype(np.float64)
