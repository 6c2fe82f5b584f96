"""Train-track example measures and generic test measures of prescribed dimension.

A train track is a width R^{-1/2} vertical rectangle filled with evenly
spaced R^{-1/2} x R^{-1} slats at vertical spacing R^{-alpha/2}.  The union
layout spreads R^{(alpha-1)/2} tracks horizontally at spacing
R^{-(alpha-1)/2}.  Fractional track counts are realized by a final partial
track carrying the matching fraction of slats, so box counts and masses
track the real powers smoothly across scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyIntersection, ParameterOutOfRange, ResolutionTooCoarse
from .measure_core import GridMeasure, normalize


@dataclass(frozen=True)
class TrainTrackSpec:
    R: int
    alpha: float
    tilt: float = 0.0
    layout: str = "union"

    def __post_init__(self):
        if self.R < 16 or (self.R & (self.R - 1)) != 0:
            raise ParameterOutOfRange(f"R={self.R} must be a power of two >= 16")
        if not (1.0 <= self.alpha < 2.0):
            raise ParameterOutOfRange(f"alpha={self.alpha} outside [1, 2)")
        if self.layout not in ("single", "union"):
            raise ParameterOutOfRange(f"layout={self.layout!r}")

    @property
    def slat_width(self):
        return self.R**-0.5

    @property
    def slat_height(self):
        return 1.0 / self.R

    @property
    def slat_spacing(self):
        return float(self.R) ** (-self.alpha / 2.0)

    @property
    def track_spacing(self):
        return float(self.R) ** (-(self.alpha - 1.0) / 2.0)


def slat_count(spec: TrainTrackSpec) -> int:
    """Number of slats fitting a unit-height track: M*s + R^{-1} <= 1."""
    s = spec.slat_spacing
    m_max = int(np.floor((1.0 - spec.slat_height) / s + 1e-9))
    return m_max + 1


def track_layout(spec: TrainTrackSpec):
    """Return [(x_offset, slat_indices)] for every track, partial track last.

    The real-valued track count R^{(alpha-1)/2} is realized as full tracks
    plus one partial track holding the fractional share of slats (evenly
    spaced subset), keeping counts close to the real power at every scale.
    """
    n_slats = slat_count(spec)
    if n_slats < 2:
        raise ParameterOutOfRange(f"fewer than 2 slats at R={spec.R}, alpha={spec.alpha}")
    all_slats = tuple(range(n_slats))
    if spec.layout == "single":
        return [(0.0, all_slats)]
    count_real = float(spec.R) ** ((spec.alpha - 1.0) / 2.0)
    full = int(np.floor(count_real + 1e-9))
    frac = count_real - full
    tracks = [(l * spec.track_spacing, all_slats) for l in range(full)]
    m = int(round(frac * n_slats))
    if m >= 1:
        keep = np.unique(np.round(np.linspace(0, n_slats - 1, m)).astype(int))
        tracks.append((full * spec.track_spacing, tuple(int(k) for k in keep)))
    # drop tracks that start outside the unit square
    return [(x, sl) for (x, sl) in tracks if x < 1.0 - 1e-12]


def predicted_box_count(spec: TrainTrackSpec) -> float:
    """Total clipped slat area divided by R^{-2} (the R^{-1}-box count)."""
    area = 0.0
    w = spec.slat_width
    for x_off, slats in track_layout(spec):
        x1 = min(x_off + w, 1.0)
        if x1 <= x_off:
            continue
        area += (x1 - x_off) * spec.slat_height * len(slats)
    return area * spec.R**2


@dataclass(frozen=True)
class SeparableMeasure:
    """Rank-k product representation: density * sum_a X_a(x) Y_a(y).

    Exact for axis-aligned train tracks; the per-axis profiles carry the
    exact cell-overlap fractions, so to_grid() matches the direct
    rasterization bit-for-bit.
    """

    x_profiles: tuple
    y_profiles: tuple
    center: tuple
    side: float
    n: int
    density: float

    @property
    def h(self):
        return self.side / self.n

    def total_mass(self):
        h = self.h
        return self.density * sum(
            float(x.sum()) * float(y.sum()) * h * h
            for x, y in zip(self.x_profiles, self.y_profiles)
        )

    def to_grid(self, label="train_track") -> GridMeasure:
        vals = np.zeros((self.n, self.n))
        for x, y in zip(self.x_profiles, self.y_profiles):
            vals += np.outer(y, x)
        return GridMeasure(vals * self.density + 0j, self.center, self.side, self.n, label)

    def occupied_cells(self):
        """(ix, iy, mass) arrays of all positive-mass cells."""
        h2 = self.h * self.h
        cols = []
        for x, y in zip(self.x_profiles, self.y_profiles):
            jx = np.nonzero(x)[0]
            jy = np.nonzero(y)[0]
            IX, IY = np.meshgrid(jx, jy)
            W = np.outer(y[jy], x[jx]) * self.density * h2
            cols.append((IX.ravel(), IY.ravel(), W.ravel()))
        ix = np.concatenate([c[0] for c in cols])
        iy = np.concatenate([c[1] for c in cols])
        w = np.concatenate([c[2] for c in cols])
        return ix, iy, w


def _interval_profile(n, h, intervals, offset=0.0):
    """Exact overlap fraction of each grid cell [i*h, (i+1)*h) with a union
    of intervals, clipped to [0, 1]."""
    prof = np.zeros(n)
    for (a, b) in intervals:
        a, b = a + offset, b + offset
        a = max(a, 0.0)
        b = min(b, 1.0)
        if b <= a:
            continue
        i0 = int(np.floor(a / h))
        i1 = min(int(np.floor((b - 1e-15) / h)), n - 1)
        for i in range(i0, i1 + 1):
            lo = max(a, i * h)
            hi = min(b, (i + 1) * h)
            if hi > lo:
                prof[i] += (hi - lo) / h
    return np.clip(prof, 0.0, 1.0)


def train_track_separable(spec: TrainTrackSpec, n: int,
                          offset=(0.0, 0.0)) -> SeparableMeasure:
    """Exact separable rasterization (tilt must be zero)."""
    if spec.tilt != 0.0:
        raise ParameterOutOfRange("separable form requires tilt=0")
    if n < 4 * spec.R:
        raise ResolutionTooCoarse(f"n={n} < 4R={4 * spec.R}")
    h = 1.0 / n
    s = spec.slat_spacing
    xs, ys = [], []
    for x_off, slats in track_layout(spec):
        xprof = _interval_profile(n, h, [(x_off, x_off + spec.slat_width)], offset[0])
        yprof = _interval_profile(
            n, h, [(M * s, M * s + spec.slat_height) for M in slats], offset[1])
        if xprof.sum() > 0 and yprof.sum() > 0:
            xs.append(xprof)
            ys.append(yprof)
    if not xs:
        raise EmptyIntersection("no track content inside the unit square")
    area = sum(float(x.sum()) * float(y.sum()) * h * h for x, y in zip(xs, ys))
    return SeparableMeasure(tuple(xs), tuple(ys), (0.5, 0.5), 1.0, n, 1.0 / area)


def _rotated_slat_polygon(cx, cy, w, hgt, tilt):
    c, s = np.cos(tilt), np.sin(tilt)
    corners = []
    for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        dx, dy = sx * w / 2.0, sy * hgt / 2.0
        corners.append((cx + c * dx - s * dy, cy + s * dx + c * dy))
    return corners


def _clip_polygon(poly, axis, value, keep_below):
    """Sutherland-Hodgman clip against an axis-aligned half-plane."""
    out = []
    k = len(poly)
    for i in range(k):
        cur, nxt = poly[i], poly[(i + 1) % k]
        c_in = (cur[axis] <= value) if keep_below else (cur[axis] >= value)
        n_in = (nxt[axis] <= value) if keep_below else (nxt[axis] >= value)
        if c_in:
            out.append(cur)
        if c_in != n_in:
            t = (value - cur[axis]) / (nxt[axis] - cur[axis])
            pt = (cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1]))
            out.append(pt)
    return out


def _poly_area(poly):
    if len(poly) < 3:
        return 0.0
    a = 0.0
    for i in range(len(poly)):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % len(poly)]
        a += x1 * y2 - x2 * y1
    return abs(a) / 2.0


def _clip_to_box(poly, x0, x1, y0, y1):
    for axis, value, below in ((0, x0, False), (0, x1, True), (1, y0, False), (1, y1, True)):
        poly = _clip_polygon(poly, axis, value, below)
        if not poly:
            return []
    return poly


def _rasterize_polygon(vals, poly, n):
    """Add exact coverage fractions of a convex polygon to a grid."""
    h = 1.0 / n
    px = [p[0] for p in poly]
    py = [p[1] for p in poly]
    j0 = max(int(np.floor(min(px) / h)), 0)
    j1 = min(int(np.floor(max(px) / h)), n - 1)
    i0 = max(int(np.floor(min(py) / h)), 0)
    i1 = min(int(np.floor(max(py) / h)), n - 1)
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            cell = _clip_to_box(poly, j * h, (j + 1) * h, i * h, (i + 1) * h)
            a = _poly_area(cell)
            if a > 0:
                vals[i, j] += a / (h * h)


def _rasterize_tilted(spec: TrainTrackSpec, n: int, offset=(0.0, 0.0)) -> np.ndarray:
    """Coverage fractions for tilted slats: rotated rectangles clipped to
    their track column and the unit square."""
    vals = np.zeros((n, n))
    s = spec.slat_spacing
    w = spec.slat_width
    for x_off, slats in track_layout(spec):
        x_off = x_off + offset[0]
        tx0, tx1 = x_off, min(x_off + w, 1.0)
        if tx1 <= max(tx0, 0.0):
            continue
        for M in slats:
            cy = M * s + spec.slat_height / 2.0 + offset[1]
            poly = _rotated_slat_polygon(x_off + w / 2.0, cy, w, spec.slat_height, spec.tilt)
            poly = _clip_to_box(poly, max(tx0, 0.0), tx1, 0.0, 1.0)
            if poly:
                _rasterize_polygon(vals, poly, n)
    return np.clip(vals, 0.0, 1.0)


def train_track(spec: TrainTrackSpec, n: int) -> GridMeasure:
    """Normalized area measure on the (possibly tilted) slat union.

    Cells straddling slat boundaries get mass proportional to the exact
    overlap area.
    """
    if n < 4 * spec.R:
        raise ResolutionTooCoarse(f"n={n} < 4R={4 * spec.R}")
    if spec.tilt == 0.0:
        return normalize(train_track_separable(spec, n).to_grid())
    vals = _rasterize_tilted(spec, n)
    if vals.sum() <= 0:
        raise EmptyIntersection("tilted rasterization produced an empty measure")
    return normalize(GridMeasure(vals + 0j, (0.5, 0.5), 1.0, n, "train_track_tilted"))


def coverage_grid(spec: TrainTrackSpec, n: int, offset=(0.0, 0.0)) -> np.ndarray:
    """Unnormalized coverage fractions in [0,1] per cell."""
    if spec.tilt == 0.0:
        sep = train_track_separable(spec, n, offset)
        vals = np.zeros((n, n))
        for x, y in zip(sep.x_profiles, sep.y_profiles):
            vals += np.outer(y, x)
        return np.clip(vals, 0.0, 1.0)
    return _rasterize_tilted(spec, n, offset)


def iterated_train_track(scales, alpha: float, n: int, offsets=None,
                         tilt: float = 0.0) -> GridMeasure:
    """Measure of the finest scale restricted to the intersection of all
    scales' slat unions, renormalized."""
    scales = list(scales)
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise ParameterOutOfRange("scales must be strictly increasing")
    if any(b % a != 0 for a, b in zip(scales, scales[1:])):
        raise ParameterOutOfRange("each scale must divide the next")
    if scales[-1] > n // 4:
        raise ResolutionTooCoarse(f"max scale {scales[-1]} > n/4={n // 4}")
    if offsets is None:
        offsets = [(0.0, 0.0)] * len(scales)
    cov = None
    for R, off in zip(scales, offsets):
        spec = TrainTrackSpec(R=R, alpha=alpha, tilt=tilt)
        c = coverage_grid(spec, n, off)
        cov = c if cov is None else cov * c
    if cov.sum() * (1.0 / n) ** 2 <= 1e-15:
        raise EmptyIntersection("scales have (numerically) empty intersection")
    return normalize(GridMeasure(cov + 0j, (0.5, 0.5), 1.0, n, "iterated_train_track"))


def cantor_product(ratio: float, depth: int, n: int) -> GridMeasure:
    """Product of two middle-interval Cantor iterates, normalized.

    Dimension target per axis is log2 / log(1/ratio)."""
    if not (0.0 < ratio < 0.5):
        raise ParameterOutOfRange(f"ratio={ratio} outside (0, 1/2)")
    if ratio**depth < 1.0 / n:
        raise ResolutionTooCoarse(
            f"interval length {ratio**depth:.3g} below cell width {1.0 / n:.3g}")
    intervals = [(0.0, 1.0)]
    for _ in range(depth):
        nxt = []
        for a, b in intervals:
            L = b - a
            nxt.append((a, a + ratio * L))
            nxt.append((b - ratio * L, b))
        intervals = nxt
    prof = _interval_profile(n, 1.0 / n, intervals)
    vals = np.outer(prof, prof)
    return normalize(GridMeasure(vals + 0j, (0.5, 0.5), 1.0, n, "cantor_product"))
