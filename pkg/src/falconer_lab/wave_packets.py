"""Dyadic frequency decomposition into sector blocks and spatial tubes.

The frequency plane below R_J = 2^J R0 is split by an exact partition of
unity: a radial telescoping of smooth low-pass steps (scale R_j annuli) times
an angular partition into ~2 pi sqrt(R_j) sectors per annulus.  For each
(scale, sector) the plane is tiled by overlapping tubes parallel to the
sector direction (width R_j^{-1/2+delta}, longitudinal spacing 1) carrying a
product partition of unity eta_T, so that

    f  =  M_0 f  +  sum_{j,tau} sum_{T} eta_T (psi_{j,tau} f_hat)_check

holds exactly below R_J.  A tube is bad when mu_2(T) meets the
R_j^{-1/2+100 delta} threshold; the good part subtracts the bad tubes'
contributions from the reconstruction.

In norm mode the tube direction for a sector centered at frequency angle
theta is the contact point direction v(omega) of the body K, i.e. the normal
of the dual boundary, instead of the radial direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .bumps import partition_profile, smooth_step
from .errors import (
    FrequencyLeakage,
    ParameterOutOfRange,
    PointInsideTube,
    ScaleOverflow,
    ThresholdExceedsOne,
)
from .measure_core import GridMeasure

_FFT_WORKERS = 2


def _lowpass_profile(r, R):
    """1 for r <= R, 0 for r >= 1.25 R, smooth between."""
    return smooth_step((1.25 * R - r) / (0.25 * R))


@dataclass
class FrequencyPlan:
    R0: int
    J: int
    n: int
    side: float = 1.0
    delta: float = 0.01
    body: object = None  # NormBody for norm mode, None for Euclidean
    center: tuple = (0.5, 0.5)

    def __post_init__(self):
        if not (0.0 < self.delta <= 0.1):
            raise ParameterOutOfRange(f"delta={self.delta} outside (0, 0.1]")
        if self.R_top > self.n / 4:
            raise ScaleOverflow(f"R_J={self.R_top} > n/4={self.n / 4}")

    @property
    def R_top(self):
        return self.R0 * 2**self.J

    def scales(self):
        """All dyadic scales R_j = 2^j R0, j = 0..J."""
        return [self.R0 * 2**j for j in range(self.J + 1)]

    def R_j(self, j):
        return self.R0 * 2**j

    def sector_count(self, j):
        return max(8, int(round(2 * np.pi * np.sqrt(self.R_j(j)))))

    def sector_angle(self, j, tau):
        return 2 * np.pi * (tau + 0.5) / self.sector_count(j)

    def tube_width(self, j):
        return float(self.R_j(j)) ** (-0.5 + self.delta)

    def tubes_per_sector(self, j):
        """Transverse tube count per unit extent, ~R_j^{1/2-delta}."""
        return int(np.ceil(1.0 / self.tube_width(j)))

    def tube_direction(self, j, tau):
        th = self.sector_angle(j, tau)
        if self.body is None:
            return np.array([np.cos(th), np.sin(th)])
        v = self.body.boundary(np.array([th]))[0]
        return v / np.hypot(v[0], v[1])

    # -- frequency-side windows on a grid's natural FFT layout -------------

    def freq_grids(self):
        f = np.fft.fftfreq(self.n) * self.n / self.side
        FX = np.broadcast_to(f[None, :], (self.n, self.n))
        FY = np.broadcast_to(f[:, None], (self.n, self.n))
        return FX, FY

    def radial_window(self, j, r):
        if j == 0:
            return _lowpass_profile(r, self.R0)
        return _lowpass_profile(r, self.R_j(j)) - _lowpass_profile(r, self.R_j(j - 1))

    def angular_window(self, j, tau, ang):
        N = self.sector_count(j)
        u = ang * (N / (2 * np.pi)) - (tau + 0.5)
        u = (u + N / 2.0) % N - N / 2.0
        return partition_profile(u)

    def psi(self, j, tau, r, ang):
        return self.radial_window(j, r) * self.angular_window(j, tau, ang)


def build_plan(R0: int, J: int, n: int, delta: float = 0.01, side: float = 1.0,
               body=None, center=(0.5, 0.5)) -> FrequencyPlan:
    return FrequencyPlan(R0, J, n, side, delta, body, center)


# ---------------------------------------------------------------------------
# tubes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tube:
    """One (scale, sector, translate): a width x 1 rectangle; the smooth
    weight eta_T is supported on the doubled rectangle 2T."""

    j: int
    tau: int
    k: int          # transverse translate index (offset k * width)
    l: int          # longitudinal translate index (offset l * 1)
    center: tuple
    direction: tuple
    width: float
    length: float
    bad: bool = False
    mu2_mass: float = 0.0

    def local_coords(self, px, py):
        ex, ey = self.direction
        dx = px - self.center[0]
        dy = py - self.center[1]
        s_long = dx * ex + dy * ey
        s_trans = -dx * ey + dy * ex
        return s_long, s_trans

    def contains(self, px, py, dilate=1.0):
        s_long, s_trans = self.local_coords(px, py)
        return (np.abs(s_long) <= dilate * self.length / 2.0) & (
            np.abs(s_trans) <= dilate * self.width / 2.0
        )

    def eta(self, px, py):
        """Smooth product weight; the family over (k, l) sums to one."""
        ex, ey = self.direction
        dx = px - self.center[0]
        dy = py - self.center[1]
        s_long = dx * ex + dy * ey
        s_trans = -dx * ey + dy * ex
        return partition_profile(s_long / self.length) * partition_profile(
            s_trans / self.width)


@dataclass
class SectorTubes:
    """All tubes of one (j, tau), stored columnarly."""

    j: int
    tau: int
    direction: np.ndarray
    origin: np.ndarray    # tiling reference point (domain center)
    width: float
    ks: np.ndarray
    ls: np.ndarray
    mass: np.ndarray
    bad: np.ndarray

    def tube(self, i) -> Tube:
        e = self.direction
        perp = np.array([-e[1], e[0]])
        c = self.origin + e * float(self.ls[i]) + perp * (float(self.ks[i]) * self.width)
        return Tube(self.j, self.tau, int(self.ks[i]), int(self.ls[i]),
                    (float(c[0]), float(c[1])), (float(e[0]), float(e[1])),
                    self.width, 1.0, bool(self.bad[i]), float(self.mass[i]))

    def tubes(self):
        return [self.tube(i) for i in range(len(self.ks))]

    def bad_tubes(self):
        return [self.tube(i) for i in np.nonzero(self.bad)[0]]


@dataclass
class Decomposition:
    plan: FrequencyPlan
    sectors: list
    good_sum: GridMeasure = None
    threshold_factor: float = 100.0

    def sectors_at_scale(self, j):
        return [s for s in self.sectors if s.j == j]

    def bad_tubes(self, j=None):
        out = []
        for s in self.sectors:
            if j is None or s.j == j:
                out.extend(s.bad_tubes())
        return out

    def all_tubes(self):
        out = []
        for s in self.sectors:
            out.extend(s.tubes())
        return out

    def export_csv(self, path):
        with open(path, "w") as fh:
            fh.write("j,tau,k,l,direction_angle,mu2_mass,bad,l1_mass_of_MT\n")
            for s in self.sectors:
                ang = np.arctan2(s.direction[1], s.direction[0])
                for i in range(len(s.ks)):
                    fh.write(
                        f"{s.j},{s.tau},{s.ks[i]},{s.ls[i]},{ang:.8f},"
                        f"{s.mass[i]:.10g},{int(s.bad[i])},\n")


# ---------------------------------------------------------------------------
# spectral pieces
# ---------------------------------------------------------------------------

def _grid_fft(f: GridMeasure):
    return sfft.fft2(f.values, workers=_FFT_WORKERS)


def sector_field(f: GridMeasure, plan: FrequencyPlan, j, tau, F=None) -> np.ndarray:
    """G_{j,tau} = (psi_{j,tau} f_hat)_check on f's grid."""
    if F is None:
        F = _grid_fft(f)
    FX, FY = plan.freq_grids()
    r = np.hypot(FX, FY)
    ang = np.arctan2(FY, FX) % (2 * np.pi)
    psi = plan.psi(j, tau, r, ang)
    return sfft.ifft2(F * psi, workers=_FFT_WORKERS)


def lowpass_field(f: GridMeasure, plan: FrequencyPlan, j=None, F=None) -> np.ndarray:
    """(psi_0 f_hat)_check for j=None/0, or the full reconstruction low-pass
    at R_J (the telescoped sum of all radial windows) for j='top'."""
    if F is None:
        F = _grid_fft(f)
    FX, FY = plan.freq_grids()
    r = np.hypot(FX, FY)
    R = plan.R0 if j in (None, 0) else plan.R_top
    return sfft.ifft2(F * _lowpass_profile(r, R), workers=_FFT_WORKERS)


def apply_M0(f: GridMeasure, plan: FrequencyPlan) -> GridMeasure:
    return f.with_values(lowpass_field(f, plan), label="M0")


def apply_MT(f: GridMeasure, T: Tube, plan: FrequencyPlan, G=None) -> GridMeasure:
    """M_T f = eta_T (psi_{j,tau} f_hat)_check."""
    if G is None:
        G = sector_field(f, plan, T.j, T.tau)
    xs, ys = f.cell_centers_1d()
    X = np.broadcast_to(xs[None, :], f.values.shape)
    Y = np.broadcast_to(ys[:, None], f.values.shape)
    return f.with_values(G * T.eta(X, Y), label=f"MT[{T.j},{T.tau},{T.k},{T.l}]")


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def _tile_index_ranges(plan: FrequencyPlan, j):
    """Transverse/longitudinal index ranges covering the 2.7x domain square."""
    half = 1.35 * plan.side
    w = plan.tube_width(j)
    kmax = int(np.ceil(half / w)) + 1
    lmax = int(np.ceil(half)) + 1
    return kmax, lmax


def classify(plan: FrequencyPlan, mu2: GridMeasure, delta: float = None,
             threshold_factor: float = 100.0) -> Decomposition:
    """Populate all sector tube families with mu2 masses and badness flags.

    mu2(T) is accumulated by cell-overlap integration: each cell's mass is
    split over the tubes its (rotated) footprint meets, with a linear ramp
    of the projected cell width at tube edges.
    """
    if delta is None:
        delta = plan.delta
    masses = mu2.values.real * mu2.cell_area
    iy, ix = np.nonzero(masses > 0)
    w_cells = masses[iy, ix]
    xs, ys = mu2.cell_centers_1d()
    px = xs[ix] - plan.center[0]
    py = ys[iy] - plan.center[1]
    h = mu2.h
    sectors = []
    for j in range(1, plan.J + 1):
        Rj = plan.R_j(j)
        threshold = float(Rj) ** (-0.5 + threshold_factor * delta)
        if threshold >= 1.0:
            raise ThresholdExceedsOne(
                f"R_j^(-1/2+{threshold_factor}*delta) = {threshold:.3f} >= 1 at R_j={Rj}")
        wj = plan.tube_width(j)
        kmax, lmax = _tile_index_ranges(plan, j)
        N = plan.sector_count(j)
        for tau in range(N):
            e = plan.tube_direction(j, tau)
            s_long = px * e[0] + py * e[1]
            s_trans = -px * e[1] + py * e[0]
            h_eff_t = h * (abs(e[1]) + abs(e[0]))
            h_eff_l = h_eff_t
            nk = 2 * kmax + 1
            nl = 2 * lmax + 1
            acc = np.zeros((nk, nl))
            k0 = np.round(s_trans / wj).astype(np.int64)
            l0 = np.round(s_long).astype(np.int64)
            for dk in (-1, 0, 1):
                kk = k0 + dk
                lo_t = kk * wj - wj / 2.0
                hi_t = kk * wj + wj / 2.0
                frac_t = (np.minimum(s_trans + h_eff_t / 2, hi_t)
                          - np.maximum(s_trans - h_eff_t / 2, lo_t))
                frac_t = np.clip(frac_t / h_eff_t, 0.0, 1.0)
                for dl in (-1, 0, 1):
                    ll = l0 + dl
                    lo_l = ll - 0.5
                    hi_l = ll + 0.5
                    frac_l = (np.minimum(s_long + h_eff_l / 2, hi_l)
                              - np.maximum(s_long - h_eff_l / 2, lo_l))
                    frac_l = np.clip(frac_l / h_eff_l, 0.0, 1.0)
                    wgt = w_cells * frac_t * frac_l
                    keep = (wgt > 0) & (np.abs(kk) <= kmax) & (np.abs(ll) <= lmax)
                    if keep.any():
                        np.add.at(acc, (kk[keep] + kmax, ll[keep] + lmax), wgt[keep])
            nz = np.nonzero(acc > 0)
            ks = nz[0] - kmax
            ls = nz[1] - lmax
            mass = acc[nz]
            bad = mass >= threshold
            sectors.append(SectorTubes(j, tau, e, np.asarray(plan.center, dtype=float),
                                       wj, ks, ls, mass, bad))
    return Decomposition(plan, sectors, None, threshold_factor)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _eta_window(T: Tube, m: GridMeasure):
    """(row slice, col slice, eta values) restricted to the tube's bbox."""
    ex, ey = T.direction
    half_x = abs(ex) * T.length + abs(ey) * T.width
    half_y = abs(ey) * T.length + abs(ex) * T.width
    h = m.h
    j0 = max(int((T.center[0] - half_x - m.x0) / h) - 1, 0)
    j1 = min(int((T.center[0] + half_x - m.x0) / h) + 2, m.n)
    i0 = max(int((T.center[1] - half_y - m.y0) / h) - 1, 0)
    i1 = min(int((T.center[1] + half_y - m.y0) / h) + 2, m.n)
    if j1 <= j0 or i1 <= i0:
        return None
    xs, ys = m.cell_centers_1d()
    X = np.broadcast_to(xs[None, j0:j1], (i1 - i0, j1 - j0))
    Y = np.broadcast_to(ys[i0:i1, None], (i1 - i0, j1 - j0))
    return slice(i0, i1), slice(j0, j1), T.eta(X, Y)


def assemble_good(mu1: GridMeasure, dec: Decomposition) -> GridMeasure:
    """mu_good = M_0 mu_1 + sum over good tubes of M_T mu_1.

    Computed as (low-pass reconstruction) minus the bad tubes' fields: the
    tube weights per sector sum to one exactly, so the subtraction equals
    the tube-wise definition to rounding.
    """
    plan = dec.plan
    F = _grid_fft(mu1)
    FX, FY = plan.freq_grids()
    r = np.hypot(FX, FY)
    acc = sfft.ifft2(F * _lowpass_profile(r, plan.R_top), workers=_FFT_WORKERS)
    ang = np.arctan2(FY, FX) % (2 * np.pi)
    for s in dec.sectors:
        if not s.bad.any():
            continue
        psi = plan.psi(s.j, s.tau, r, ang)
        G = sfft.ifft2(F * psi, workers=_FFT_WORKERS)
        bad_w = np.zeros(mu1.values.shape)
        for T in s.bad_tubes():
            win = _eta_window(T, mu1)
            if win is not None:
                bad_w[win[0], win[1]] += win[2]
        acc -= np.minimum(bad_w, 1.0) * G
    out = mu1.with_values(acc, label="mu_good")
    dec.good_sum = out
    return out


def bad_integral(mu1: GridMeasure, dec: Decomposition) -> complex:
    """integral of mu_{1,bad} = sum over bad tubes of int M_T mu_1."""
    good = dec.good_sum if dec.good_sum is not None else assemble_good(mu1, dec)
    plan = dec.plan
    F = _grid_fft(mu1)
    FX, FY = plan.freq_grids()
    r = np.hypot(FX, FY)
    recon = sfft.ifft2(F * _lowpass_profile(r, plan.R_top), workers=_FFT_WORKERS)
    diff = recon - good.values
    return complex(diff.sum() * mu1.cell_area)


def reconstruction_residual(f: GridMeasure, plan: FrequencyPlan) -> float:
    """|| f - M_0 f - sum_T M_T f ||_L1 / ||f||_L1, summed sector by sector."""
    absf = np.abs(f.values)
    l1 = absf.sum() * f.cell_area
    if l1 == 0:
        return 0.0
    F = _grid_fft(f)
    FX, FY = plan.freq_grids()
    r = np.hypot(FX, FY)
    spec_mass = float(np.sum(np.abs(F) ** 2))
    high = float(np.sum(np.abs(F[r > plan.R_top / 2.0]) ** 2))
    if high / spec_mass > 1e-6:
        raise FrequencyLeakage(
            f"fraction {high / spec_mass:.2e} of spectral mass above R_J/2")
    ang = np.arctan2(FY, FX) % (2 * np.pi)
    acc = sfft.ifft2(F * _lowpass_profile(r, plan.R0), workers=_FFT_WORKERS)
    for j in range(1, plan.J + 1):
        rad = plan.radial_window(j, r)
        for tau in range(plan.sector_count(j)):
            psi = rad * plan.angular_window(j, tau, ang)
            acc += sfft.ifft2(F * psi, workers=_FFT_WORKERS)
    resid = np.abs(f.values - acc).sum() * f.cell_area
    return float(resid / l1)


def pushforward_decay_check(mu1: GridMeasure, T: Tube, x, plan: FrequencyPlan,
                            K=None) -> float:
    """||T_{K,x}(M_T mu_1)||_L1 for a pin x outside the doubled tube."""
    if bool(T.contains(np.array([x[0]]), np.array([x[1]]), dilate=2.0)[0]):
        raise PointInsideTube(f"pin {x} lies in 2T of tube ({T.j},{T.tau},{T.k},{T.l})")
    from .distance_transform import tk_pushforward

    mt = apply_MT(mu1, T, plan)
    d = tk_pushforward(mt, x, K, bins=512, separation=0.0)
    return d.l1()


# ---------------------------------------------------------------------------
# orthogonality diagnostic
# ---------------------------------------------------------------------------

def _tube_l1(G, T, X, Y):
    return float(np.abs(G * T.eta(X, Y)).sum())


def orthogonality_ratio(mu1: GridMeasure, plan: FrequencyPlan, r_values,
                        dec: Decomposition = None, n_circle: int = 512):
    """For each r: (sum_T int |M_T mu_1 hat|^2 d sigma_r, r^{-1} int |mu1_hat|^2 psi_r).

    The circle integrals use the normalized arc measure sigma_r in frequency
    space, sampled from zero-padded tube-field transforms.
    """
    from .measure_core import fourier

    field = fourier(mu1, pad=2)
    rr = field.freq_radius()
    F = _grid_fft(mu1)
    FX, FY = plan.freq_grids()
    r_grid = np.hypot(FX, FY)
    ang_grid = np.arctan2(FY, FX) % (2 * np.pi)
    xs, ys = mu1.cell_centers_1d()
    X = np.broadcast_to(xs[None, :], mu1.values.shape)
    Y = np.broadcast_to(ys[:, None], mu1.values.shape)
    n = mu1.n
    results = []
    lhs_acc = {float(rv): 0.0 for rv in r_values}
    for j in range(1, plan.J + 1):
        rad = plan.radial_window(j, r_grid)
        relevant = [float(rv) for rv in r_values
                    if plan.R_j(j - 1) / 1.5 <= rv <= 1.5 * 1.25 * plan.R_j(j)]
        if not relevant:
            continue
        kmax, lmax = _tile_index_ranges(plan, j)
        for tau in range(plan.sector_count(j)):
            psi = rad * plan.angular_window(j, tau, ang_grid)
            G = sfft.ifft2(F * psi, workers=_FFT_WORKERS)
            e = plan.tube_direction(j, tau)
            gl1 = np.abs(G).sum()
            if gl1 == 0:
                continue
            sec = SectorTubes(j, tau, e, np.asarray(plan.center, dtype=float),
                              plan.tube_width(j),
                              *_dense_tiles(kmax, lmax))
            for T in sec.tubes():
                gt = G * T.eta(X, Y)
                l1 = np.abs(gt).sum()
                if l1 < 1e-10 * gl1:
                    continue
                Ft = sfft.fft2(gt, workers=_FFT_WORKERS) * mu1.cell_area
                for rv in relevant:
                    lhs_acc[rv] += _circle_mean_sq(Ft, mu1, rv, n_circle)
    out = []
    for rv in r_values:
        psi_r = (1.0 + np.abs(float(rv) - rr)) ** -100.0
        rhs = float(np.sum(psi_r * np.abs(field.values) ** 2) * field.freq_step**2) / float(rv)
        out.append((lhs_acc[float(rv)], rhs))
    return out


def _dense_tiles(kmax, lmax):
    ks, ls = np.meshgrid(np.arange(-kmax, kmax + 1), np.arange(-lmax, lmax + 1))
    ks = ks.ravel()
    ls = ls.ravel()
    return ks, ls, np.zeros(len(ks)), np.zeros(len(ks), dtype=bool)


def _circle_mean_sq(Ft, m: GridMeasure, rv, n_circle):
    """Normalized arc average of |Ft|^2 over the radius-rv frequency circle."""
    phis = np.arange(n_circle) * (2 * np.pi / n_circle)
    fx = rv * np.cos(phis)
    fy = rv * np.sin(phis)
    step = 1.0 / m.side
    gx = fx / step
    gy = fy / step
    n = m.n
    i0 = np.floor(gy).astype(int)
    j0 = np.floor(gx).astype(int)
    ty = gy - i0
    tx = gx - j0
    P = np.abs(Ft) ** 2
    val = (
        P[i0 % n, j0 % n] * (1 - ty) * (1 - tx)
        + P[i0 % n, (j0 + 1) % n] * (1 - ty) * tx
        + P[(i0 + 1) % n, j0 % n] * ty * (1 - tx)
        + P[(i0 + 1) % n, (j0 + 1) % n] * ty * tx
    )
    return float(val.mean())
