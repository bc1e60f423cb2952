"""Metrics and desk-scale drivers for the accuracy, matching and watershed studies.

Every driver is a pure function of its config: repetition ``r`` of grid
point ``i`` draws from ``SeedSequence(seed, spawn_key=(i, r))``, so results
do not depend on execution order.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .imaging import add_gaussian_noise, add_noise_points, digitize_disks, synth_letter, threshold
from .matching import RHO_SWEEP, analyze_minima, match_template
from .scenes import TEMPLATE_BOX, blob_scene, shapes_scene
from .sdt import BACKENDS, SdtParams, distance_map
from .watershed import segment

DEFAULT_SEED = 20190513
PRESETS = ("accuracy", "template", "disks", "watershed-demo")
DISK_RADIUS = 3 * math.pi
MAX_COUNT_COLUMN = 6  # disks CSV: freq_1..freq_6 then freq_7plus


@dataclass
class ExperimentConfig:
    name: str
    reps: int
    seed: int = DEFAULT_SEED
    rho: float = 0.75
    d_max: float | None = None
    n_realizations: int = 400
    mass: float = 0.999
    k_override: int | None = None
    backends: tuple = BACKENDS
    noise_p: float = 0.001
    sigma: float = 0.1
    threshold: float = 0.5
    glyphs: tuple = ("A", "X-pointcloud")
    glyph_size: int = 128
    rho_sweep: tuple = RHO_SWEEP
    radius: float = DISK_RADIUS
    delta_steps: int = 40
    delta_step: float = 0.05
    domain: tuple = (48, 32)
    seed_h: float = 0.5
    seed_rule: str = "regional"
    scene_size: int = 128
    min_area: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")

    def params(self, rho: float | None = None) -> SdtParams:
        return SdtParams(rho=self.rho if rho is None else rho, d_max=self.d_max,
                         n_realizations=self.n_realizations, mass=self.mass,
                         k_override=self.k_override)

    def rng(self, *key) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=tuple(key)))


def preset(name: str, **overrides) -> ExperimentConfig:
    """Defaults for each study; keyword overrides replace individual fields."""
    base = {
        "accuracy": dict(reps=100, rho=0.75, noise_p=0.001),
        "template": dict(reps=50, sigma=0.1, threshold=0.5, backends=("det-sdt",), scene_size=96),
        "disks": dict(reps=200, rho=0.75, seed_h=0.0, seed_rule="local"),
        "watershed-demo": dict(reps=1, rho=0.95, d_max=256.0, sigma=0.1, threshold=0.35,
                               seed_h=0.5, seed_rule="regional", scene_size=128,
                               min_area=5),
    }
    if name not in base:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESETS}")
    kw = base[name]
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(name=name, **kw)


@dataclass
class CurveTable:
    x_name: str
    x: list
    series: dict
    counts: list

    def __post_init__(self):
        for k, v in self.series.items():
            if len(v) != len(self.x):
                raise ValueError(f"series {k!r} has {len(v)} points, expected {len(self.x)}")

    def to_csv(self, path) -> None:
        names = list(self.series)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([self.x_name, *names, "reps"])
            for i, x in enumerate(self.x):
                row = [x if isinstance(x, str) else repr(float(x))]
                row += [repr(float(self.series[n][i])) for n in names]
                w.writerow(row + [int(self.counts[i])])


def aade(computed: np.ndarray, reference: np.ndarray) -> float:
    """Mean absolute per-pixel difference."""
    computed = np.asarray(computed, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if computed.shape != reference.shape:
        raise ValueError("dimension mismatch")
    return float(np.abs(computed - reference).mean())


def auc_two_segments(curve: CurveTable) -> float:
    """Mean of the 2-segment frequency over the distance grid."""
    if "freq_2" not in curve.series:
        raise KeyError("curve has no 2-segment frequency series")
    return float(np.mean(curve.series["freq_2"]))


# ---------------------------------------------------------------- drivers

def run_accuracy_experiment(cfg: ExperimentConfig) -> dict:
    """AADE of each backend on noisy glyphs against the clean saturated EDT."""
    per = {b: {g: [] for g in cfg.glyphs} for b in cfg.backends}
    for gi, glyph in enumerate(cfg.glyphs):
        clean = synth_letter(glyph, cfg.glyph_size, cfg.glyph_size)
        params = cfg.params()
        reference = distance_map(clean, params, "dt")
        for r in range(cfg.reps):
            rng = cfg.rng(gi, r)
            noisy = add_noise_points(clean, cfg.noise_p, rng)
            for b in cfg.backends:
                per[b][glyph].append(aade(distance_map(noisy, params, b, rng), reference))
    out = {}
    for b in cfg.backends:
        vals = [np.array(per[b][g]) for g in cfg.glyphs]
        out[b] = CurveTable(
            "glyph", list(cfg.glyphs),
            {"mean_aade": [v.mean() for v in vals],
             "sd_aade": [v.std(ddof=1) if v.size > 1 else 0.0 for v in vals]},
            [v.size for v in vals])
    return out


def template_setup(cfg: ExperimentConfig):
    scene = shapes_scene(cfg.scene_size)
    x, y, w, h = TEMPLATE_BOX
    template = threshold(scene, cfg.threshold).mask[y:y + h, x:x + w]
    return scene, template, (x, y)


def run_template_experiment(cfg: ExperimentConfig) -> dict:
    """NoM, global-minimum catchment basin size and hit rate per rho."""
    scene, template, true_offset = template_setup(cfg)
    noisy = [threshold(add_gaussian_noise(scene, cfg.sigma, cfg.rng(0, r)), cfg.threshold)
             for r in range(cfg.reps)]
    out = {}
    for b in cfg.backends:
        nom, cb, hit = [], [], []
        for ri, rho in enumerate(cfg.rho_sweep):
            params = cfg.params(rho)
            rows = []
            for r, img in enumerate(noisy):
                field_ = match_template(img, template, params, b, cfg.rng(1, ri, r))
                rep = analyze_minima(field_)
                rows.append((rep.nom, 100.0 * rep.cb_fraction, rep.global_min[0] == true_offset))
            rows = np.array(rows, dtype=np.float64)
            nom.append(rows[:, 0].mean())
            cb.append(rows[:, 1].mean())
            hit.append(rows[:, 2].mean())
        out[b] = CurveTable("rho", list(cfg.rho_sweep),
                            {"mean_nom": nom, "mean_cb_pct": cb, "hit_rate": hit},
                            [cfg.reps] * len(cfg.rho_sweep))
    return out


def disk_pair(cfg: ExperimentConfig, delta: float, rng):
    """Two disks at centre distance ``delta``, rigidly jittered by a uniform sub-pixel offset."""
    w, h = cfg.domain
    jx, jy = rng.random(2)
    c1 = (w / 2 - delta / 2 + jx, h / 2 + jy)
    c2 = (c1[0] + delta, c1[1])
    return digitize_disks(c1, c2, cfg.radius, w, h)


def run_disks_experiment(cfg: ExperimentConfig) -> dict:
    """Frequency of each segment count versus disk centre distance."""
    steps = range(1, cfg.delta_steps + 1)
    counts = {b: np.zeros((cfg.delta_steps, MAX_COUNT_COLUMN + 2), np.int64) for b in cfg.backends}
    for i in steps:
        delta = i * cfg.delta_step * cfg.radius
        for r in range(cfg.reps):
            rng = cfg.rng(i, r)
            img = disk_pair(cfg, delta, rng)
            for b in cfg.backends:
                n = segment(img, cfg.params(), b, cfg.seed_h, rng, cfg.seed_rule).segment_count
                counts[b][i - 1, min(n, MAX_COUNT_COLUMN + 1)] += 1
    out = {}
    xs = [round(i * cfg.delta_step, 10) for i in steps]
    for b in cfg.backends:
        freq = counts[b] / cfg.reps
        series = {"delta": [x * cfg.radius for x in xs]}
        series.update({f"freq_{c}": freq[:, c] for c in range(1, MAX_COUNT_COLUMN + 1)})
        series[f"freq_{MAX_COUNT_COLUMN + 1}plus"] = freq[:, MAX_COUNT_COLUMN + 1]
        out[b] = CurveTable("delta_over_r", xs, series, [cfg.reps] * len(xs))
    return out


def watershed_demo_input(cfg: ExperimentConfig, rep: int = 0):
    """Noisy, thresholded blob scene of repetition ``rep`` and its blob count."""
    clean, true_count = blob_scene(cfg.scene_size)
    noisy = add_gaussian_noise(clean, cfg.sigma, cfg.rng(0, rep))
    return threshold(noisy, cfg.threshold), true_count


def run_watershed_demo(cfg: ExperimentConfig) -> dict:
    """Segment counts of the noisy blob scene, one row per repetition.

    ``segment_count`` counts every segment; ``counted_segments`` drops those
    smaller than ``cfg.min_area`` pixels, i.e. isolated noise specks that
    survive thresholding outside the blobs.
    """
    raw = {b: [] for b in cfg.backends}
    kept = {b: [] for b in cfg.backends}
    truth = []
    for r in range(cfg.reps):
        binary, true_count = watershed_demo_input(cfg, r)
        truth.append(true_count)
        for b in cfg.backends:
            res = segment(binary, cfg.params(), b, cfg.seed_h, cfg.rng(1, r), cfg.seed_rule)
            raw[b].append(res.segment_count)
            kept[b].append(res.count(cfg.min_area))
    return {b: CurveTable("rep", list(range(cfg.reps)),
                          {"true_count": truth, "segment_count": raw[b],
                           "counted_segments": kept[b]}, [1] * cfg.reps)
            for b in cfg.backends}


RUNNERS = {
    "accuracy": run_accuracy_experiment,
    "template": run_template_experiment,
    "disks": run_disks_experiment,
    "watershed-demo": run_watershed_demo,
}


def run_preset(cfg: ExperimentConfig) -> dict:
    return RUNNERS[cfg.name](cfg)


def write_results(cfg: ExperimentConfig, tables: dict, outdir, force: bool = False) -> list:
    """One CSV per backend plus a ``key = value`` manifest; refuses to overwrite unless ``force``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = [outdir / f"{cfg.name}_{b}.csv" for b in tables] + [outdir / f"{cfg.name}_manifest.txt"]
    if not force:
        clash = [p for p in paths if p.exists()]
        if clash:
            raise FileExistsError(f"{clash[0]} exists (use --force to overwrite)")
    for b, table in tables.items():
        table.to_csv(outdir / f"{cfg.name}_{b}.csv")
    with open(paths[-1], "w") as fh:
        for k, v in asdict(cfg).items():
            fh.write(f"{k} = {v}\n")
    return paths
