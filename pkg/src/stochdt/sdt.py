"""Stochastic distance transform.

The transform of a pixel ``x`` is the expected saturated distance
``E[min(d(x, Y), d_max)]`` where ``Y`` keeps every foreground pixel
independently with probability ``1 - rho``. Two evaluators are provided:
a Monte Carlo mean over sampled subsets (``mc_sdt``) and a closed form over
the k nearest foreground pixels (``det_sdt``). ``exact_sdt_oracle``
enumerates all subsets and is only meant for validation on tiny inputs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .edt import edt, knn_distance_maps, realization_maps
from .imaging import BinaryImage, as_mask, as_rng

BACKENDS = ("dt", "mc-sdt", "det-sdt")

# realizations drawn and reduced per batch; fixed so results never depend on threading
MC_CHUNK = 64


def default_d_max(shape) -> float:
    """Domain diameter rounded up: ``ceil(sqrt(w^2 + h^2))``."""
    h, w = shape
    return float(math.ceil(math.hypot(w, h)))


@dataclass(frozen=True)
class SdtParams:
    rho: float = 0.0
    d_max: float | None = None
    n_realizations: int = 400
    mass: float = 0.999
    k_override: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if self.d_max is not None and not self.d_max > 0:
            raise ValueError(f"d_max must be positive, got {self.d_max}")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if not 0.0 < self.mass < 1.0:
            raise ValueError(f"mass must lie in (0, 1), got {self.mass}")
        if self.k_override is not None and self.k_override < 1:
            raise ValueError("k_override must be >= 1")

    def resolved_d_max(self, shape) -> float:
        return float(self.d_max) if self.d_max is not None else default_d_max(shape)

    def with_(self, **changes) -> "SdtParams":
        return replace(self, **changes)


CONFIG_KEYS = {"rho": ("rho", float), "dmax": ("d_max", float), "n": ("n_realizations", int),
               "mass": ("mass", float), "k": ("k_override", int)}


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines (keys: rho, dmax, n, mass, k; ``#`` comments)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = line.split("=", 1)
        elif ":" in line:
            key, value = line.split(":", 1)
        else:
            raise ValueError(f"line {lineno}: expected key = value")
        key = key.strip().lower()
        if key not in CONFIG_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        field, conv = CONFIG_KEYS[key]
        out[field] = conv(value.strip())
    return out


def load_config(path) -> SdtParams:
    return SdtParams(**parse_config(Path(path).read_text()))


@dataclass(frozen=True)
class RandomSetModel:
    """I.i.d. thinning of ``reference``: each pixel kept with probability ``coverage``."""

    reference: BinaryImage
    coverage: float

    def __post_init__(self):
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")

    @classmethod
    def from_rho(cls, reference, rho: float) -> "RandomSetModel":
        ref = reference if isinstance(reference, BinaryImage) else BinaryImage(reference)
        return cls(ref, 1.0 - rho)


def sample_realization(model: RandomSetModel, rng) -> BinaryImage:
    mask = model.reference.mask
    ys, xs = np.nonzero(mask)
    keep = as_rng(rng).random(ys.size) < model.coverage
    out = np.zeros(mask.shape, bool)
    out[ys[keep], xs[keep]] = True
    return BinaryImage(out)


def kappa(rho: float, mass: float) -> int:
    """Smallest k with ``1 - rho**k >= mass``."""
    if not 0.0 < rho < 1.0:
        raise ValueError("kappa needs 0 < rho < 1")
    if not 0.0 < mass < 1.0:
        raise ValueError("kappa needs 0 < mass < 1")
    q = math.log1p(-mass) / math.log(rho)
    # ratios that are integers in exact arithmetic (rho=0.1, m=0.99) land a few ulps off
    return max(1, math.ceil(q - 1e-9 * max(1.0, q)))


def _saturated(img, d_max):
    return np.minimum(edt(img), d_max)


def mc_sdt_moments(img, params: SdtParams, rng) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel mean and sample variance of the saturated distance over realizations.

    Realization ``i`` uses the i-th block of ``|X|`` uniforms from ``rng``, so
    the samples coincide with successive ``sample_realization`` calls.
    """
    mask = as_mask(img)
    d_max = params.resolved_d_max(mask.shape)
    n = params.n_realizations
    if params.rho == 0.0:
        return _saturated(mask, d_max), np.zeros(mask.shape)
    if params.rho == 1.0 or not mask.any():
        return np.full(mask.shape, d_max), np.zeros(mask.shape)
    rng = as_rng(rng)
    c = 1.0 - params.rho
    ys, xs = np.nonzero(mask)
    total = np.zeros(mask.shape)
    total_sq = np.zeros(mask.shape)
    for start in range(0, n, MC_CHUNK):
        m = min(MC_CHUNK, n - start)
        keep = rng.random((m, ys.size)) < c
        maps = realization_maps(keep, ys, xs, mask.shape, d_max)
        for r in range(m):
            total += maps[r]
            total_sq += maps[r] * maps[r]
    mean = np.minimum(total / n, d_max)  # summation rounding can overshoot by an ulp
    if n > 1:
        var = np.maximum(total_sq - n * mean * mean, 0.0) / (n - 1)
    else:
        var = np.zeros(mask.shape)
    return mean, var


def mc_sdt(img, params: SdtParams, rng) -> np.ndarray:
    """Monte Carlo estimate: mean saturated EDT over ``params.n_realizations`` subsets."""
    return mc_sdt_moments(img, params, rng)[0]


def effective_k(params: SdtParams, n_points: int) -> int:
    k = params.k_override if params.k_override is not None else kappa(params.rho, params.mass)
    return min(k, n_points)


def det_sdt(img, params: SdtParams) -> np.ndarray:
    """Closed-form transform over the k nearest points (k from ``mass`` unless overridden).

    With ``k`` capped at ``|X|`` the head term ``rho**k * d_max`` already holds
    the mass of every missing layer.
    """
    mask = as_mask(img)
    d_max = params.resolved_d_max(mask.shape)
    rho = params.rho
    if rho == 0.0:
        return _saturated(mask, d_max)
    n_pts = int(mask.sum())
    if rho == 1.0 or n_pts == 0:
        return np.full(mask.shape, d_max)
    k = effective_k(params, n_pts)
    layers = knn_distance_maps(mask, k)
    out = np.full(mask.shape, rho ** k * d_max)
    for i in range(k):
        out += (rho ** i * (1.0 - rho)) * np.minimum(layers[i], d_max)
    # the weights sum to 1, rounding may nudge a saturated pixel a hair past d_max
    return np.minimum(out, d_max)


def exact_sdt_oracle(img, rho: float, d_max: float) -> np.ndarray:
    """Expectation by enumerating all ``2**|X|`` subsets (``|X| <= 20``)."""
    mask = as_mask(img)
    ys, xs = np.nonzero(mask)
    m = ys.size
    if m > 20:
        raise ValueError(f"exact oracle limited to 20 points, got {m}")
    h, w = mask.shape
    if m == 0:
        return np.full((h, w), float(d_max))
    gy, gx = np.mgrid[0:h, 0:w]
    dist = np.sqrt((gy.reshape(-1, 1) - ys) ** 2 + (gx.reshape(-1, 1) - xs) ** 2)
    dist = np.minimum(dist, d_max)  # (pixels, m)
    out = np.zeros(h * w)
    subsets = np.array(list(itertools.product([False, True], repeat=m)), dtype=bool).reshape(-1, m)
    for start in range(0, subsets.shape[0], 1024):
        block = subsets[start:start + 1024]
        size = block.sum(axis=1)
        prob = (1.0 - rho) ** size * rho ** (m - size)
        masked = np.where(block[None, :, :], dist[:, None, :], d_max)
        nearest = masked.min(axis=2)
        out += nearest @ prob
    return out.reshape(h, w)


def distance_map(img, params: SdtParams, backend: str, rng=None) -> np.ndarray:
    """Saturated distance to ``img``'s foreground with the chosen backend."""
    mask = as_mask(img)
    if backend == "dt":
        return _saturated(mask, params.resolved_d_max(mask.shape))
    if backend == "mc-sdt":
        return mc_sdt(mask, params, rng)
    if backend == "det-sdt":
        return det_sdt(mask, params)
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
