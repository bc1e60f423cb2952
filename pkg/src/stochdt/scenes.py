"""Bundled synthetic scenes standing in for photographic test images.

Both scenes are drawn procedurally on a fixed geometry, so they need no
data files and are identical on every platform.
"""
from __future__ import annotations

import numpy as np

from .imaging import GrayImage, pixel_centers

# (centre x, centre y, semi-axis a, semi-axis b, angle) in units of the scene side
BLOBS = (
    (0.27, 0.29, 0.17, 0.12, 0.3),
    (0.71, 0.28, 0.14, 0.19, -0.4),
    (0.29, 0.72, 0.15, 0.16, 0.0),
    (0.70, 0.71, 0.18, 0.13, 0.8),
)


def blob_scene(size: int = 128, fg: float = 0.6, bg: float = 0.0) -> tuple[GrayImage, int]:
    """Separated elliptical blobs on a dark background; returns (image, blob count)."""
    px, py = pixel_centers(size, size)
    v = np.full((size, size), bg)
    for cx, cy, a, b, th in BLOBS:
        x, y = px - cx * size, py - cy * size
        c, s = np.cos(th), np.sin(th)
        u = (c * x + s * y) / (a * size)
        w = (-s * x + c * y) / (b * size)
        v[u * u + w * w <= 1.0] = fg
    return GrayImage(v), len(BLOBS)


def shapes_scene(size: int = 96, fg: float = 0.7, bg: float = 0.3) -> GrayImage:
    """Geometric shapes: bar, disk, ring, triangle, cross and an L."""
    px, py = pixel_centers(size, size)
    u, v = px / size, py / size
    on = np.zeros((size, size), bool)
    on |= (0.08 <= u) & (u <= 0.40) & (0.10 <= v) & (v <= 0.20)                      # bar
    on |= (u - 0.72) ** 2 + (v - 0.22) ** 2 <= 0.12 ** 2                               # disk
    ring = (u - 0.25) ** 2 + (v - 0.55) ** 2
    on |= (0.09 ** 2 <= ring) & (ring <= 0.15 ** 2)                                     # ring
    on |= (v <= 0.92) & (v >= 0.62 + 1.2 * np.abs(u - 0.70))                          # triangle
    on |= ((np.abs(u - 0.52) <= 0.03) & (np.abs(v - 0.45) <= 0.12)) | (
        (np.abs(v - 0.45) <= 0.03) & (np.abs(u - 0.52) <= 0.12))                       # cross
    on |= ((0.10 <= u) & (u <= 0.16) & (0.74 <= v) & (v <= 0.94)) | (
        (0.10 <= u) & (u <= 0.40) & (0.88 <= v) & (v <= 0.94))                         # L
    return GrayImage(np.where(on, fg, bg))


# template window (x, y, width, height) in pixels of the default 96x96 scene
TEMPLATE_BOX = (14, 14, 32, 32)
