import numpy as np
import pytest

from falconer_lab import fractal_gen as fg
from falconer_lab import measure_core as mc
from falconer_lab.errors import (
    EmptyIntersection,
    ParameterOutOfRange,
    ResolutionTooCoarse,
)


def test_single_track_r16_alpha1_geometry():
    spec = fg.TrainTrackSpec(R=16, alpha=1.0, layout="single")
    assert fg.slat_count(spec) == 4
    assert spec.slat_width == 0.25 and spec.slat_height == 0.0625
    assert spec.slat_spacing == 0.25
    m = fg.train_track(spec, 64)
    # occupied rows: 4 slats of 4 rows each at spacing 16 rows
    rows = np.nonzero(m.values.real.sum(axis=1) > 0)[0]
    assert len(rows) == 16
    assert set(rows) == {r for M in range(4) for r in range(16 * M, 16 * M + 4)}


def test_union_box_count_near_r_alpha():
    spec = fg.TrainTrackSpec(R=256, alpha=1.2, layout="union")
    predicted = fg.predicted_box_count(spec)
    assert abs(predicted - 256**1.2) / 256**1.2 < 0.15


def test_tilted_has_same_box_count():
    n = 256
    straight = fg.train_track(fg.TrainTrackSpec(R=64, alpha=1.2), n)
    tilted = fg.train_track(fg.TrainTrackSpec(R=64, alpha=1.2, tilt=np.pi / 4), n)
    # area-based cell counts agree (mass-weighted support size)
    def area(m):
        return 1.0 / m.values.real.max() * 0 + float(
            (m.values.real > 0.5 * m.values.real.max()).sum()) * m.cell_area
    assert abs(area(tilted) - area(straight)) / area(straight) < 0.1


def test_resolution_too_coarse():
    with pytest.raises(ResolutionTooCoarse):
        fg.train_track(fg.TrainTrackSpec(R=256, alpha=1.2), 512)


def test_spec_validation():
    with pytest.raises(ParameterOutOfRange):
        fg.TrainTrackSpec(R=100, alpha=1.2)
    with pytest.raises(ParameterOutOfRange):
        fg.TrainTrackSpec(R=64, alpha=2.5)


def test_separable_matches_dense_rasterization():
    spec = fg.TrainTrackSpec(R=64, alpha=1.2)
    sep = fg.train_track_separable(spec, 256)
    dense = fg.train_track(spec, 256)
    rebuilt = mc.normalize(sep.to_grid())
    assert np.allclose(rebuilt.values, dense.values)
    assert abs(sep.total_mass() - 1.0) < 1e-12


def test_same_track_distance_intervals():
    # opposite-side pairs land in I_M = [M s - 2/R, M s + 2/R]
    spec = fg.TrainTrackSpec(R=256, alpha=1.2, layout="single")
    s = spec.slat_spacing
    R = spec.R
    n_slats = fg.slat_count(spec)
    rng = np.random.Generator(np.random.Philox(key=5))
    count = 0
    for _ in range(10_000):
        m1 = int(rng.integers(0, n_slats // 4))
        m2 = int(rng.integers(3 * n_slats // 4, n_slats))
        x = (rng.uniform(0, spec.slat_width), m1 * s + rng.uniform(0, spec.slat_height))
        y = (rng.uniform(0, spec.slat_width), m2 * s + rng.uniform(0, spec.slat_height))
        M = m2 - m1
        d = np.hypot(x[0] - y[0], x[1] - y[1])
        assert M * s - 2.0 / R <= d <= M * s + 2.0 / R
        count += 1
    assert count == 10_000


def test_slat_mass_scaling():
    # mass of a single slat ~ R^{-alpha+1/2} within 10%
    spec = fg.TrainTrackSpec(R=256, alpha=1.2, layout="union")
    m = fg.train_track(spec, 1024)
    s = spec.slat_spacing
    _, ys = m.cell_centers_1d()
    rows = (ys >= 0) & (ys <= spec.slat_height)
    # restrict to the first track's column to get one slat
    xs, _ = m.cell_centers_1d()
    cols = (xs >= 0) & (xs <= spec.slat_width)
    slat_mass = float(m.values.real[np.ix_(rows, cols)].sum()) * m.cell_area
    assert abs(slat_mass - 256.0 ** (-1.2 + 0.5)) / 256.0 ** (-0.7) < 0.10


def test_iterated_single_scale_degenerates():
    m1 = fg.iterated_train_track([64], 1.2, 256)
    m2 = fg.train_track(fg.TrainTrackSpec(R=64, alpha=1.2), 256)
    assert np.allclose(m1.values, m2.values)


def test_iterated_two_scales_nonempty_and_frostman():
    m = fg.iterated_train_track([16, 256], 1.2, 1024)
    assert abs(m.total_mass - 1.0) < 1e-9
    radii = [2.0**-k for k in range(1, 8)]
    ratio = mc.frostman_ratio(m, 1.2, radii)
    assert np.isfinite(ratio)


def test_iterated_empty_intersection():
    with pytest.raises(EmptyIntersection):
        fg.iterated_train_track([16, 256], 1.2, 1024,
                                offsets=[(0.0, 0.0), (0.45, 0.0)])


def test_iterated_scale_validation():
    with pytest.raises(ParameterOutOfRange):
        fg.iterated_train_track([64, 96], 1.2, 1024)
    with pytest.raises(ParameterOutOfRange):
        fg.iterated_train_track([64, 32], 1.2, 1024)


# ---------------------------------------------------------------------------
# cantor products
# ---------------------------------------------------------------------------

def test_cantor_first_iterate_corners():
    m = fg.cantor_product(0.25, 1, 64)
    q = m.values.real
    # four corner squares of side 1/4, each mass 1/4
    block = q[:16, :16]
    assert block.min() > 0
    assert abs(block.sum() * m.cell_area - 0.25) < 1e-9
    assert q[20:44, 20:44].max() == 0


def test_cantor_box_dimension():
    target = 2 * np.log(2) / np.log(3)
    m = fg.cantor_product(1 / 3, 3, 512)
    # independent box-count oracle: coarsen and count occupied blocks
    counts = []
    sizes = (8, 16, 32, 64)
    occ = m.values.real > 0
    for b in sizes:
        k = m.n // b
        blocks = occ.reshape(b, k, b, k).any(axis=(1, 3))
        counts.append(blocks.sum())
    slope = np.polyfit(np.log(sizes), np.log(counts), 1)[0]
    assert abs(slope - target) < 0.1


def test_cantor_ratio_validation():
    with pytest.raises(ParameterOutOfRange):
        fg.cantor_product(0.5, 2, 64)
    with pytest.raises(ResolutionTooCoarse):
        fg.cantor_product(0.1, 3, 64)
