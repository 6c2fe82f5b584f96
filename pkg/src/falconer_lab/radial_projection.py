"""Radial projections P_y mu, bad-tube unions, and the associated diagnostics.

P_y pushes a planar measure to the circle of directions seen from y.  The
continuum densities are replaced by angular bins; every L^p value is
reported together with its bin count, and convergence under bin refinement
is part of the test contract (non-atomicity is a continuum property).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterOutOfRange, PointTooClose
from .measure_core import GridMeasure


@dataclass(frozen=True)
class CircleDensity:
    bins: np.ndarray
    total_mass: float

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=np.float64)
        b.setflags(write=False)
        object.__setattr__(self, "bins", b)

    @property
    def bin_width(self):
        return 2 * np.pi / len(self.bins)

    def integral(self):
        return float(self.bins.sum() * self.bin_width)

    def lp_norm_pow(self, p):
        """||density||_p^p with respect to arc length on the circle."""
        return float(np.sum(self.bins**p) * self.bin_width)


def radial_project(mu: GridMeasure, y, b: int = 720,
                   separation: float = 0.05) -> CircleDensity:
    """Angular-bin density of P_y mu; each cell's mass goes to the bin of its
    center's direction from y."""
    if b < 720:
        raise ParameterOutOfRange("bin count must be >= 720")
    masses = mu.values.real * mu.cell_area
    iy, ix = np.nonzero(masses > 0)
    xs, ys = mu.cell_centers_1d()
    dx = xs[ix] - y[0]
    dy = ys[iy] - y[1]
    d = np.hypot(dx, dy)
    if d.size == 0:
        raise PointTooClose("measure has no support")
    if d.min() < separation:
        raise PointTooClose(
            f"pin at distance {d.min():.4f} < separation {separation}")
    ang = np.arctan2(dy, dx) % (2 * np.pi)
    width = 2 * np.pi / b
    idx = np.minimum((ang / width).astype(np.int64), b - 1)
    hist = np.bincount(idx, weights=masses[iy, ix], minlength=b)[:b]
    return CircleDensity(hist / width, float(masses[iy, ix].sum()))


def orponen_functional(mu1: GridMeasure, mu2: GridMeasure, p: float,
                       b: int = 720, separation: float = 0.05,
                       max_pins: int = None, seed: int = 0) -> float:
    """int ||P_y mu2||_p^p dmu1(y), quadrature over positive-mass mu1 cells.

    max_pins switches to a seeded mass-weighted subsample for large grids.
    """
    if p <= 1:
        raise ParameterOutOfRange("p must exceed 1")
    masses = mu1.values.real * mu1.cell_area
    iy, ix = np.nonzero(masses > 0)
    w = masses[iy, ix]
    xs, ys = mu1.cell_centers_1d()
    px, py = xs[ix], ys[iy]
    if max_pins is not None and len(w) > max_pins:
        rng = np.random.Generator(np.random.Philox(key=seed))
        sel = rng.choice(len(w), size=max_pins, replace=False, p=w / w.sum())
        px, py = px[sel], py[sel]
        w = np.full(max_pins, w.sum() / max_pins)
    total = 0.0
    for X, Y, wt in zip(px, py, w):
        dens = radial_project(mu2, (X, Y), b, separation)
        total += wt * dens.lp_norm_pow(p)
    return float(total)


def bad_region(x, dec, j: int) -> np.ndarray:
    """Boolean cell mask of union of 2T over bad tubes T at scale j with x in 2T."""
    plan = dec.plan
    n = plan.n
    h = plan.side / n
    xs = (np.arange(n) + 0.5) * h + (plan.center[0] - plan.side / 2)
    ys = (np.arange(n) + 0.5) * h + (plan.center[1] - plan.side / 2)
    X = np.broadcast_to(xs[None, :], (n, n))
    Y = np.broadcast_to(ys[:, None], (n, n))
    mask = np.zeros((n, n), dtype=bool)
    px = np.array([x[0]])
    py = np.array([x[1]])
    for T in dec.bad_tubes(j):
        if bool(T.contains(px, py, dilate=2.0)[0]):
            mask |= T.contains(X, Y, dilate=2.0)
    return mask


def projected_arc(T, y):
    """(center angle, half width) of the direction arc P_y(2T), from corners."""
    e = np.array(T.direction)
    perp = np.array([-e[1], e[0]])
    c = np.array(T.center)
    pts = [c + sx * e * T.length + sy * perp * T.width
           for sx in (-1, 1) for sy in (-1, 1)]
    angs = np.array([np.arctan2(p[1] - y[1], p[0] - y[0]) for p in pts])
    ref = angs[0]
    rel = (angs - ref + np.pi) % (2 * np.pi) - np.pi
    lo, hi = rel.min(), rel.max()
    return float(ref + (lo + hi) / 2.0), float((hi - lo) / 2.0)


def arcs_union_length(arcs):
    """Total length of a union of circle arcs given as (center, half_width)."""
    if not arcs:
        return 0.0
    iv = []
    for c, hw in arcs:
        lo = (c - hw) % (2 * np.pi)
        hi = lo + 2 * hw
        if hi <= 2 * np.pi:
            iv.append((lo, hi))
        else:
            iv.append((lo, 2 * np.pi))
            iv.append((0.0, hi - 2 * np.pi))
    iv.sort()
    total = 0.0
    cur_lo, cur_hi = iv[0]
    for lo, hi in iv[1:]:
        if lo <= cur_hi:
            cur_hi = max(cur_hi, hi)
        else:
            total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
    total += cur_hi - cur_lo
    return float(total)


def vitali_disjoint_subfamily(arcs):
    """Greedy disjoint subfamily; the 5x dilates cover every input arc.

    Arcs come in (center, half_width) form; the greedy scan takes arcs in
    decreasing size, skipping any that meets an already-chosen one.
    """
    order = sorted(range(len(arcs)), key=lambda i: -arcs[i][1])
    chosen = []
    for i in order:
        c, hw = arcs[i]
        ok = True
        for (c2, hw2) in chosen:
            gap = abs((c - c2 + np.pi) % (2 * np.pi) - np.pi)
            if gap <= hw + hw2:
                ok = False
                break
        if ok:
            chosen.append(arcs[i])
    return chosen


def vitali_cover_check(arcs):
    """Assert-style check: every arc is inside the 5x dilate of some chosen arc."""
    chosen = vitali_disjoint_subfamily(arcs)
    for (c, hw) in arcs:
        covered = False
        for (c2, hw2) in chosen:
            gap = abs((c - c2 + np.pi) % (2 * np.pi) - np.pi)
            if gap + hw <= 5 * hw2:
                covered = True
                break
        if not covered:
            return False, chosen
    return True, chosen


def bad_mass_profile(mu1: GridMeasure, mu2: GridMeasure, dec,
                     arc_sample_pins: int = 12, seed: int = 0):
    """Per-scale records for the bad-tube union.

    Returns a list over j of dicts with keys:
      R_j, bad_mass = mu1 x mu2(Bad_j), max_arc_cover = max over sampled
      pins y of |P_y(Bad_j(y))|, n_bad tubes, vitali_ok.
    """
    plan = dec.plan
    masses2 = mu2.values.real * mu2.cell_area
    iy, ix = np.nonzero(masses2 > 0)
    w2 = masses2[iy, ix]
    xs, ys = mu2.cell_centers_1d()
    px, py = xs[ix], ys[iy]
    n = mu1.n
    gx, gy = mu1.cell_centers_1d()
    X = np.broadcast_to(gx[None, :], (n, n))
    Y = np.broadcast_to(gy[:, None], (n, n))
    m1 = mu1.values.real * mu1.cell_area
    rng = np.random.Generator(np.random.Philox(key=seed))
    out = []
    for j in range(1, plan.J + 1):
        tubes = dec.bad_tubes(j)
        rec = {"j": j, "R_j": plan.R_j(j), "n_bad": len(tubes),
               "bad_mass": 0.0, "max_arc_cover": 0.0, "vitali_ok": True}
        if tubes:
            member = np.stack([T.contains(px, py, dilate=2.0) for T in tubes])
            patterns = {}
            for col in range(member.shape[1]):
                key = member[:, col].tobytes()
                patterns.setdefault(key, []).append(col)
            total = 0.0
            for key, cols in patterns.items():
                flags = np.frombuffer(key, dtype=bool)
                if not flags.any():
                    continue
                mask = np.zeros((n, n), dtype=bool)
                for ti in np.nonzero(flags)[0]:
                    mask |= tubes[ti].contains(X, Y, dilate=2.0)
                mu1_union = float(m1[mask].sum())
                total += mu1_union * float(w2[cols].sum())
            rec["bad_mass"] = total
            # arc covering diagnostic at sampled mu2 pins
            k = min(arc_sample_pins, len(px))
            sel = rng.choice(len(px), size=k, replace=False, p=w2 / w2.sum())
            for c in sel:
                yv = (px[c], py[c])
                arcs = [projected_arc(T, yv) for T in tubes
                        if bool(T.contains(np.array([yv[0]]), np.array([yv[1]]),
                                           dilate=2.0)[0])]
                if arcs:
                    rec["max_arc_cover"] = max(rec["max_arc_cover"],
                                               arcs_union_length(arcs))
                    ok, _ = vitali_cover_check(arcs)
                    rec["vitali_ok"] = rec["vitali_ok"] and ok
        out.append(rec)
    return out
