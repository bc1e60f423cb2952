"""Template matching with the sum-of-minimal-distances set distance.

``d(T, X) = sum_{a in T} d(a, X) + sum_{a not in T} d(a, complement X)``,
evaluated for every integer translation that keeps the template inside the
image. Distance maps of the image foreground and background are computed
once and read through a window per translation.
"""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass

import numpy as np

from ._accel import njit, numba_enabled, prange
from .imaging import as_mask, as_rng, write_labels
from .sdt import SdtParams, distance_map

# 8-neighbour scan order used for steepest-descent ties: N, NE, E, SE, S, SW, W, NW
DIRECTIONS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))

RHO_SWEEP = tuple(round(0.025 * i, 3) for i in range(40)) + (0.99,)


@dataclass(frozen=True, eq=False)
class MatchField:
    """``values[oy, ox]`` is the distance with the template's top-left corner at ``(ox, oy)``."""

    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["offset_x", "offset_y", "value"])
            for (oy, ox), v in np.ndenumerate(self.values):
                w.writerow([ox, oy, repr(float(v))])


@dataclass(frozen=True, eq=False)
class MinimaReport:
    minima: list            # (offset_x, offset_y) representative cell per minimum, label order
    global_min: tuple       # ((offset_x, offset_y), value)
    global_label: int
    nom: int
    cb_size: int
    cb_labels: np.ndarray   # 1..nom, basin of each offset
    values: np.ndarray

    @property
    def cb_fraction(self) -> float:
        return self.cb_size / self.cb_labels.size

    def to_csv(self, path) -> None:
        sizes = np.bincount(self.cb_labels.ravel(), minlength=self.nom + 1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label", "offset_x", "offset_y", "value", "cb_size", "is_global"])
            for label, (ox, oy) in enumerate(self.minima, 1):
                w.writerow([label, ox, oy, repr(float(self.values[oy, ox])), int(sizes[label]),
                            int(label == self.global_label)])

    def write_cb_pgm(self, path) -> None:
        write_labels(path, self.cb_labels)


def smd_distance(a, b, maps) -> float:
    """Set distance from ``a`` to ``b`` given ``maps = (dist to b, dist to complement of b)``."""
    a = as_mask(a)
    to_b, to_bc = (np.asarray(m, dtype=np.float64) for m in maps)
    if a.shape != as_mask(b).shape or to_b.shape != a.shape or to_bc.shape != a.shape:
        raise ValueError("dimension mismatch between images and distance maps")
    return float(np.where(a, to_b, to_bc).sum())


@njit(cache=True, parallel=True)
def _correlate_nb(tmask, d_fg, d_bg):
    th, tw = tmask.shape
    fh = d_fg.shape[0] - th + 1
    fw = d_fg.shape[1] - tw + 1
    out = np.zeros((fh, fw), np.float64)
    for oy in prange(fh):
        row = out[oy]
        # same summation order as the numpy path: template pixels in row-major order
        for y in range(th):
            for x in range(tw):
                src = d_fg if tmask[y, x] else d_bg
                for ox in range(fw):
                    row[ox] += src[oy + y, ox + x]
    return out


def _correlate_np(tmask, d_fg, d_bg):
    th, tw = tmask.shape
    fh = d_fg.shape[0] - th + 1
    fw = d_fg.shape[1] - tw + 1
    out = np.zeros((fh, fw))
    for y in range(th):
        for x in range(tw):
            src = d_fg if tmask[y, x] else d_bg
            out += src[y:y + fh, x:x + fw]
    return out


def smd_field(template, d_fg: np.ndarray, d_bg: np.ndarray) -> MatchField:
    tmask = np.ascontiguousarray(as_mask(template))
    if tmask.shape[0] > d_fg.shape[0] or tmask.shape[1] > d_fg.shape[1]:
        raise ValueError("template larger than image")
    d_fg = np.ascontiguousarray(d_fg, dtype=np.float64)
    d_bg = np.ascontiguousarray(d_bg, dtype=np.float64)
    if numba_enabled():
        return MatchField(_correlate_nb(tmask, d_fg, d_bg))
    return MatchField(_correlate_np(tmask, d_fg, d_bg))


def match_template(image, template, params: SdtParams, backend: str = "det-sdt", rng=None) -> MatchField:
    """Distance field over all translations keeping ``template`` inside ``image``."""
    img = as_mask(image)
    tmask = as_mask(template)
    if tmask.shape[0] > img.shape[0] or tmask.shape[1] > img.shape[1]:
        raise ValueError("template larger than image")
    rng = as_rng(rng)
    d_fg = distance_map(img, params, backend, rng)
    d_bg = distance_map(~img, params, backend, rng)
    return smd_field(tmask, d_fg, d_bg)


def _plateaus(values):
    """8-connected equal-value components; returns (labels, count, has_lower)."""
    h, w = values.shape
    labels = -np.ones((h, w), np.int64)
    has_lower = []
    n = 0
    for sy in range(h):
        for sx in range(w):
            if labels[sy, sx] >= 0:
                continue
            v = values[sy, sx]
            labels[sy, sx] = n
            lower = False
            queue = deque([(sy, sx)])
            while queue:
                y, x = queue.popleft()
                for dy, dx in DIRECTIONS:
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w:
                        u = values[yy, xx]
                        if u < v:
                            lower = True
                        elif u == v and labels[yy, xx] < 0:
                            labels[yy, xx] = n
                            queue.append((yy, xx))
            has_lower.append(lower)
            n += 1
    return labels, n, np.array(has_lower, bool)


def descent_step(values, y, x):
    """Strictly lowest 8-neighbour of ``(y, x)`` (first in scan order on ties) or None."""
    h, w = values.shape
    best = values[y, x]
    step = None
    for dy, dx in DIRECTIONS:
        yy, xx = y + dy, x + dx
        if 0 <= yy < h and 0 <= xx < w and values[yy, xx] < best:
            best = values[yy, xx]
            step = (yy, xx)
    return step


def analyze_minima(field) -> MinimaReport:
    """Local minima, their number and the catchment basin of the global minimum.

    A minimum is an 8-connected plateau with no strictly lower neighbour.
    Every offset descends to the strictly lowest neighbour; offsets on a
    non-minimal plateau first walk (breadth-first) to the nearest plateau
    cell that has a lower neighbour. Global-minimum ties go to the first
    offset in row-major order.
    """
    values = np.asarray(field.values if isinstance(field, MatchField) else field, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty field")
    h, w = values.shape
    plab, n_plat, has_lower = _plateaus(values)

    # next cell on the descent path; -1 marks cells on minimal plateaus
    nxt = -np.ones(h * w, np.int64)
    for y in range(h):
        for x in range(w):
            s = descent_step(values, y, x)
            if s is not None:
                nxt[y * w + x] = s[0] * w + s[1]

    # cells of non-minimal plateaus without a lower neighbour: route to the exit
    flat = [(y, x) for y in range(h) for x in range(w)
            if nxt[y * w + x] < 0 and has_lower[plab[y, x]]]
    if flat:
        todo = {p for p in flat}
        dist = {}
        queue = deque()
        for y in range(h):
            for x in range(w):
                if nxt[y * w + x] >= 0 and has_lower[plab[y, x]] and any(
                        (y + dy, x + dx) in todo for dy, dx in DIRECTIONS):
                    dist[(y, x)] = 0
                    queue.append((y, x))
        while queue:
            y, x = queue.popleft()
            for dy, dx in DIRECTIONS:
                q = (y + dy, x + dx)
                if q in todo and q not in dist and plab[q] == plab[y, x]:
                    dist[q] = dist[(y, x)] + 1
                    queue.append(q)
        for y, x in flat:
            d = dist[(y, x)]
            for dy, dx in DIRECTIONS:
                q = (y + dy, x + dx)
                if dist.get(q, -1) == d - 1 and plab[q] == plab[y, x]:
                    nxt[y * w + x] = q[0] * w + q[1]
                    break

    # minimal plateaus get labels 1..nom in row-major order of first cell
    plateau_label = np.zeros(n_plat, np.int64)
    minima = []
    reps = []
    for y in range(h):
        for x in range(w):
            p = plab[y, x]
            if not has_lower[p] and plateau_label[p] == 0:
                minima.append((x, y))
                reps.append(values[y, x])
                plateau_label[p] = len(minima)

    basin = np.zeros(h * w, np.int64)
    for start in range(h * w):
        path = []
        c = start
        while basin[c] == 0 and nxt[c] >= 0:
            path.append(c)
            c = nxt[c]
        lab = basin[c] if basin[c] else plateau_label[plab.flat[c]]
        basin[c] = lab
        for q in path:
            basin[q] = lab

    reps = np.array(reps)
    g = int(np.argmin(reps)) + 1  # argmin returns the first (row-major) on ties
    gx, gy = minima[g - 1]
    cb_labels = basin.reshape(h, w)
    report = MinimaReport(minima=minima, global_min=((gx, gy), float(values[gy, gx])),
                          global_label=g, nom=len(minima), cb_size=int((cb_labels == g).sum()),
                          cb_labels=cb_labels, values=values)
    return report
