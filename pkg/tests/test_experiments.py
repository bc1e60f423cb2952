import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from stochdt.experiments import (DEFAULT_SEED, MAX_COUNT_COLUMN, CurveTable, aade, auc_two_segments, disk_pair,
                                 preset, run_accuracy_experiment, run_disks_experiment, run_preset,
                                 run_template_experiment, run_watershed_demo, template_setup, write_results)
from stochdt.scenes import blob_scene, shapes_scene

maps = arrays(float, (5, 6), elements=st.floats(0, 50))


def test_aade_examples():
    rng = np.random.default_rng(0)
    a, b = rng.random((7, 9)) * 10, rng.random((7, 9)) * 10
    assert aade(a, a) == 0.0
    assert aade(np.full((3, 3), 2.5), np.zeros((3, 3))) == 2.5
    total = 0.0
    for y in range(7):
        for x in range(9):
            total += abs(a[y, x] - b[y, x])
    assert aade(a, b) == pytest.approx(total / 63, abs=1e-12)
    with pytest.raises(ValueError):
        aade(a, b[:3])


@settings(max_examples=60)
@given(maps, maps, maps)
def test_aade_metric(a, b, c):
    assert aade(a, b) == aade(b, a)
    assert aade(a, c) <= aade(a, b) + aade(b, c) + 1e-9


def test_auc():
    ones = CurveTable("x", [1, 2, 3], {"freq_2": [1, 1, 1]}, [1, 1, 1])
    zeros = CurveTable("x", [1, 2, 3], {"freq_2": [0, 0, 0]}, [1, 1, 1])
    assert auc_two_segments(ones) == 1.0 and auc_two_segments(zeros) == 0.0
    with pytest.raises(KeyError):
        auc_two_segments(CurveTable("x", [1], {"freq_1": [1]}, [1]))
    with pytest.raises(ValueError):
        CurveTable("x", [1, 2], {"freq_2": [1]}, [1, 1])


def test_presets():
    acc = preset("accuracy")
    assert (acc.reps, acc.noise_p, acc.rho, acc.n_realizations, acc.mass) == (100, 0.001, 0.75, 400, 0.999)
    tm = preset("template")
    assert (tm.reps, tm.sigma, tm.threshold, len(tm.rho_sweep)) == (50, 0.1, 0.5, 41)
    dk = preset("disks")
    assert (dk.reps, dk.rho, dk.delta_steps, dk.delta_step) == (200, 0.75, 40, 0.05)
    assert dk.radius == pytest.approx(3 * np.pi)
    demo = preset("watershed-demo")
    assert (demo.rho, demo.d_max, demo.sigma, demo.threshold) == (0.95, 256.0, 0.1, 0.35)
    assert preset("disks", reps=3, rho=None).reps == 3 and acc.seed == DEFAULT_SEED
    with pytest.raises(ValueError):
        preset("pears")
    with pytest.raises(ValueError):
        preset("accuracy", reps=0)


def test_accuracy_clean_input():
    out = run_accuracy_experiment(preset("accuracy", reps=2, noise_p=0.0, glyph_size=64))
    assert out["dt"].series["mean_aade"] == [0.0, 0.0]
    assert all(v > 0 for v in out["det-sdt"].series["mean_aade"])
    assert all(v > 0 for v in out["mc-sdt"].series["mean_aade"])
    assert out["dt"].x == ["A", "X-pointcloud"] and out["dt"].counts == [2, 2]


def test_template_noise_free():
    cfg = preset("template", reps=2, sigma=0.0, rho_sweep=(0.0, 0.9))
    out = run_template_experiment(cfg)["det-sdt"].series
    assert out["mean_nom"][0] >= 1 and out["hit_rate"] == [1.0, 1.0]
    assert all(0 < v <= 100 for v in out["mean_cb_pct"])
    scene, template, (x, y) = template_setup(cfg)
    assert template.shape == (32, 32) and scene.shape == (96, 96)


def test_template_clean_dt_zero_minimum():
    from stochdt.matching import analyze_minima, match_template
    from stochdt.imaging import threshold
    from stochdt.sdt import SdtParams
    cfg = preset("template")
    scene, template, offset = template_setup(cfg)
    rep = analyze_minima(match_template(threshold(scene, 0.5), template, SdtParams(), "dt"))
    assert rep.global_min == (offset, 0.0)


def test_disks_small_run():
    cfg = preset("disks", reps=3)
    out = run_disks_experiment(cfg)
    for b, table in out.items():
        freq = np.array([table.series[f"freq_{c}"] for c in range(1, MAX_COUNT_COLUMN + 1)]
                        + [table.series[f"freq_{MAX_COUNT_COLUMN + 1}plus"]])
        assert freq.shape == (7, 40) and (freq >= 0).all()
        np.testing.assert_allclose(freq.sum(axis=0), 1.0)
        assert table.series["freq_1"][0] == 1.0
        # from tangency on the disks are disjoint or touching: two segments
        assert table.series["freq_2"][-1] == 1.0
    assert out["dt"].x[0] == 0.05 and out["dt"].x[-1] == 2.0


def test_disk_pair_keeps_distance():
    cfg = preset("disks")
    rng = np.random.default_rng(0)
    img = disk_pair(cfg, 10.0, rng)
    assert img.shape == (32, 48) and img.count > 0


def test_scenes():
    g, n = blob_scene()
    assert n == 4 and g.shape == (128, 128)
    from scipy import ndimage
    assert ndimage.label(g.values > 0.3)[1] == 4
    s = shapes_scene()
    assert set(np.unique(s.values)) == {0.3, 0.7}


def test_watershed_demo_small():
    out = run_watershed_demo(preset("watershed-demo", reps=1))
    assert set(out) == {"dt", "mc-sdt", "det-sdt"}
    row = {k: v[0] for k, v in out["det-sdt"].series.items()}
    assert row["true_count"] == 4 and row["counted_segments"] <= row["segment_count"]


def test_results_deterministic_and_guarded(tmp_path):
    cfg = preset("disks", reps=2, delta_steps=4)
    paths = write_results(cfg, run_preset(cfg), tmp_path / "a")
    write_results(cfg, run_preset(cfg), tmp_path / "b")
    for p in paths:
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()
    with pytest.raises(FileExistsError):
        write_results(cfg, run_preset(cfg), tmp_path / "a")
    write_results(cfg, run_preset(cfg), tmp_path / "a", force=True)
    rows = list(csv.reader(open(tmp_path / "a" / "disks_dt.csv")))
    assert rows[0][:3] == ["delta_over_r", "delta", "freq_1"] and rows[0][-1] == "reps" and len(rows) == 5
    manifest = (tmp_path / "a" / "disks_manifest.txt").read_text()
    assert f"seed = {DEFAULT_SEED}" in manifest and "reps = 2" in manifest
