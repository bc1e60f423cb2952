import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_mask
from stochdt import use_numba
from stochdt.imaging import read_pgm_array
from stochdt.matching import DIRECTIONS, RHO_SWEEP, MatchField, analyze_minima, match_template, smd_distance, smd_field
from stochdt.sdt import SdtParams, distance_map


def brute_smd(a, b, d_max):
    """Direct double loop over pixels of ``a`` against the point sets of ``b`` and its complement."""
    h, w = a.shape
    pts_b = list(zip(*np.nonzero(b)))
    pts_bc = list(zip(*np.nonzero(~b)))
    total = 0.0
    for y in range(h):
        for x in range(w):
            pts = pts_b if a[y, x] else pts_bc
            best = min((np.hypot(y - py, x - px) for py, px in pts), default=np.inf)
            total += min(best, d_max)
    return total


def test_smd_examples():
    rng = np.random.default_rng(0)
    p = SdtParams(d_max=20.0)
    b = random_mask(rng, 8, 8)
    maps = (distance_map(b, p, "dt"), distance_map(~b, p, "dt"))
    assert smd_distance(b, b, maps) == 0.0
    full, empty = np.ones((8, 8), bool), np.zeros((8, 8), bool)
    e_maps = (distance_map(empty, p, "dt"), distance_map(full, p, "dt"))
    assert smd_distance(full, empty, e_maps) == 64 * 20.0
    for _ in range(20):
        a, b = random_mask(rng, 8, 8), random_mask(rng, 8, 8)
        maps = (distance_map(b, p, "dt"), distance_map(~b, p, "dt"))
        assert smd_distance(a, b, maps) == pytest.approx(brute_smd(a, b, 20.0), abs=1e-9)
    with pytest.raises(ValueError, match="dimension"):
        smd_distance(np.ones((3, 3)), np.ones((3, 4)), maps)


def test_template_equals_image():
    img = random_mask(np.random.default_rng(1), 10, 12)
    f = match_template(img, img, SdtParams(), "dt")
    assert f.shape == (1, 1) and f.values[0, 0] == 0.0
    with pytest.raises(ValueError, match="larger"):
        match_template(img[:5], img, SdtParams(), "dt")


def test_clean_cutout_found(kernel_path):
    rng = np.random.default_rng(2)
    img = random_mask(rng, 40, 50, density=0.2)
    t = img[13:29, 7:23]
    rep = analyze_minima(match_template(img, t, SdtParams(), "dt"))
    assert rep.global_min == ((7, 13), 0.0)


@pytest.mark.parametrize("backend", ["dt", "mc-sdt", "det-sdt"])
def test_field_equals_per_offset_smd(kernel_path, backend):
    rng = np.random.default_rng(3)
    img = random_mask(rng, 64, 64, density=0.15)
    t = random_mask(rng, 16, 16, density=0.3)
    p = SdtParams(rho=0.6, n_realizations=20)
    field = match_template(img, t, p, backend, np.random.default_rng(4))
    r = np.random.default_rng(4)
    maps = (distance_map(img, p, backend, r), distance_map(~img, p, backend, r))
    assert field.shape == (49, 49)
    for oy, ox in [(0, 0), (48, 48), (17, 30), (5, 41)]:
        win = (slice(oy, oy + 16), slice(ox, ox + 16))
        expect = smd_distance(t, img[win], (maps[0][win], maps[1][win]))
        assert field.values[oy, ox] == pytest.approx(expect, abs=1e-9)


def test_smd_field_paths_agree():
    rng = np.random.default_rng(5)
    t = random_mask(rng, 9, 7)
    a, b = rng.random((30, 25)) * 10, rng.random((30, 25)) * 10
    with use_numba(True):
        x = smd_field(t, a, b).values
    with use_numba(False):
        y = smd_field(t, a, b).values
    assert np.array_equal(x, y)


def test_stochastic_field_reproducible():
    rng = np.random.default_rng(6)
    img, t = random_mask(rng, 30, 30), random_mask(rng, 8, 8)
    p = SdtParams(rho=0.5, n_realizations=16)
    a = match_template(img, t, p, "mc-sdt", 11).values
    assert np.array_equal(a, match_template(img, t, p, "mc-sdt", 11).values)


def test_rho_sweep():
    assert len(RHO_SWEEP) == 41 and RHO_SWEEP[:3] == (0.0, 0.025, 0.05) and RHO_SWEEP[-2:] == (0.975, 0.99)


def test_paraboloid_single_basin():
    y, x = np.mgrid[0:15, 0:20]
    rep = analyze_minima(MatchField((y - 6.3) ** 2 + (x - 11.7) ** 2))
    assert rep.nom == 1 and rep.cb_size == 300 and rep.global_min[0] == (12, 6)
    assert rep.cb_fraction == 1.0


def test_two_equal_basins_tie():
    x = np.arange(21, dtype=float)
    field = np.tile(np.minimum(np.abs(x - 4), np.abs(x - 16)), (5, 1)) + np.abs(np.arange(5) - 2)[:, None]
    rep = analyze_minima(field)
    assert rep.nom == 2
    assert rep.minima == [(4, 2), (16, 2)]
    assert rep.global_min == ((4, 2), 0.0) and rep.global_label == 1


def test_plateau_minimum_counts_once():
    f = np.full((6, 6), 5.0)
    f[2:4, 1:5] = 1.0
    rep = analyze_minima(f)
    assert rep.nom == 1 and rep.cb_size == 36 and rep.minima == [(1, 2)]
    # a flat shelf that drains: cells on it must still reach the minimum
    g = np.full((5, 9), 3.0)
    g[:, 8] = 0.0
    rep = analyze_minima(g)
    assert rep.nom == 1 and rep.cb_size == 45


def greedy_basins(values):
    """Walk from every cell to the strictly lowest neighbour until stuck."""
    h, w = values.shape
    end = np.empty((h, w), object)
    for sy in range(h):
        for sx in range(w):
            y, x = sy, sx
            while True:
                best, step = values[y, x], None
                for dy, dx in DIRECTIONS:
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and values[yy, xx] < best:
                        best, step = values[yy, xx], (yy, xx)
                if step is None:
                    break
                y, x = step
            end[sy, sx] = (x, y)
    return end


def test_basins_match_greedy_descent():
    rng = np.random.default_rng(7)
    for _ in range(20):
        values = rng.random((20, 20))
        rep = analyze_minima(values)
        end = greedy_basins(values)
        for (y, x), lab in np.ndenumerate(rep.cb_labels):
            assert rep.minima[lab - 1] == end[y, x]
        assert rep.global_min[0] == np.unravel_index(values.argmin(), values.shape)[::-1]


@settings(max_examples=60, deadline=None)
@given(arrays(np.int64, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.integers(0, 3)))
def test_minima_invariants(values):
    rep = analyze_minima(values.astype(float))
    sizes = np.bincount(rep.cb_labels.ravel(), minlength=rep.nom + 1)
    assert rep.nom == len(rep.minima) >= 1 and sizes[0] == 0
    assert sizes.sum() == values.size and rep.cb_size == sizes[rep.global_label] >= 1
    assert rep.global_min[0] in rep.minima
    assert rep.global_min[1] == values.min()
    for x, y in rep.minima:
        h, w = values.shape
        nb = [values[y + dy, x + dx] for dy, dx in DIRECTIONS if 0 <= y + dy < h and 0 <= x + dx < w]
        assert all(v >= values[y, x] for v in nb)


def test_report_exports(tmp_path):
    rep = analyze_minima(np.array([[3.0, 1.0, 3.0, 0.5]]))
    rep.to_csv(tmp_path / "m.csv")
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows[0] == ["label", "offset_x", "offset_y", "value", "cb_size", "is_global"]
    assert rows[1:] == [["1", "1", "0", "1.0", "2", "0"], ["2", "3", "0", "0.5", "2", "1"]]
    rep.write_cb_pgm(tmp_path / "cb.pgm")
    assert read_pgm_array(tmp_path / "cb.pgm")[0].tolist() == [[1, 1, 2, 2]]
    MatchField(np.array([[1.5, 2.0]])).to_csv(tmp_path / "f.csv")
    assert open(tmp_path / "f.csv").read() == "offset_x,offset_y,value\n0,0,1.5\n1,0,2.0\n"


def test_empty_field():
    with pytest.raises(ValueError):
        analyze_minima(np.zeros((0, 3)))
