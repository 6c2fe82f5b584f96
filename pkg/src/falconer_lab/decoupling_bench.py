"""Numerical falsification harness for the refined decoupling inequality.

A packet configuration at scale R is a family of wave packets: smooth tube
bumps (width R^{-1/2+delta}, length 1, direction normal to their frequency
cap on the R-dilated surface) modulated by the cap-center plane wave.  The
harness measures

    ratio = ||f||_{L^p(Y)} / [ (M/W)^{1/2-1/p} (sum_T ||f_T||_p^2)^{1/2} ]

with M the maximal number of tubes meeting one R^{-1/2} cell of Y.  Packet
sums are evaluated analytically (each packet is a separable profile times a
plane wave), so sweeps run without materializing grids; synthesize() also
renders to a GridMeasure for the small cross-validation cases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .bumps import bump
from .errors import EmptyY, ParameterOutOfRange, ResolutionTooCoarse
from .measure_core import GridMeasure

_DELTA = 0.05  # tube-width exponent offset used by this harness


@dataclass(frozen=True)
class Packet:
    cap_angle: float
    center: tuple
    amplitude: complex

    def direction(self, surface=None):
        if surface is None:
            return np.array([np.cos(self.cap_angle), np.sin(self.cap_angle)])
        v = surface.boundary(np.array([self.cap_angle]))[0]
        return v / np.hypot(v[0], v[1])

    def cap_frequency(self, R, surface=None):
        if surface is None:
            return R * np.array([np.cos(self.cap_angle), np.sin(self.cap_angle)])
        return R * surface.boundary(np.array([self.cap_angle]))[0]


@dataclass
class PacketConfig:
    R: int
    packets: list
    p: float = 6.0
    surface: object = None  # None = unit circle; else a NormBody (dual boundary)
    delta: float = _DELTA
    y_cells: np.ndarray = None  # (k, 2) int array of R^{-1/2}-cell indices

    @property
    def width(self):
        return float(self.R) ** (-0.5 + self.delta)

    @property
    def q(self):
        """Side of the Y cells: R^{-1/2}."""
        return float(self.R) ** -0.5

    def __post_init__(self):
        if not (2.0 <= self.p <= 6.0):
            raise ParameterOutOfRange(f"p={self.p} outside [2, 6]")
        for pk in self.packets:
            c = np.asarray(pk.center)
            if np.hypot(c[0], c[1]) + 0.5 > 1.0 + 1e-9:
                raise ParameterOutOfRange(
                    f"packet at {pk.center} does not lie in the unit ball")


def _profile_int(p):
    """integral of bump(u)^p over [-1, 1] (cached)."""
    key = round(float(p), 12)
    if key not in _PROFILE_CACHE:
        val, _ = integrate.quad(lambda u: float(bump(np.array([u]))[0]) ** p, -1, 1)
        _PROFILE_CACHE[key] = val
    return _PROFILE_CACHE[key]


_PROFILE_CACHE = {}


def packet_lp_norm(config: PacketConfig, pk: Packet) -> float:
    """||f_T||_p: exact separable product of 1D profile integrals."""
    p = config.p
    ip = _profile_int(p)
    return abs(pk.amplitude) * (ip * 0.5) ** (1 / p) * (ip * config.width / 2) ** (1 / p)


def packet_l2_norm(config, pk):
    i2 = _profile_int(2.0)
    return abs(pk.amplitude) * np.sqrt(i2 * 0.5) * np.sqrt(i2 * config.width / 2)


def eval_packets(config: PacketConfig, px, py):
    """f(points) = sum of packets, evaluated analytically."""
    out = np.zeros(np.shape(px), dtype=np.complex128)
    for pk in config.packets:
        e = pk.direction(config.surface)
        w = pk.cap_frequency(config.R, config.surface)
        dx = px - pk.center[0]
        dy = py - pk.center[1]
        s_long = dx * e[0] + dy * e[1]
        s_trans = -dx * e[1] + dy * e[0]
        prof = bump(s_long / 0.5) * bump(s_trans / (config.width / 2.0))
        nz = prof > 0
        if np.any(nz):
            phase = np.exp(2j * np.pi * (w[0] * px[nz] + w[1] * py[nz]))
            out[nz] += pk.amplitude * prof[nz] * phase
    return out


def synthesize(config: PacketConfig, n: int) -> GridMeasure:
    """Render the packet sum on an n x n grid over [-1, 1]^2."""
    if n < 4 * config.R:
        raise ResolutionTooCoarse(f"n={n} < 4R={4 * config.R}")
    h = 2.0 / n
    xs = -1.0 + (np.arange(n) + 0.5) * h
    X = np.broadcast_to(xs[None, :], (n, n))
    Y = np.broadcast_to(xs[:, None], (n, n))
    vals = eval_packets(config, X, Y)
    return GridMeasure(vals, (0.0, 0.0), 2.0, n, "packet_sum")


def microlocalization_fractions(config: PacketConfig, pad: int = 8):
    """(radial, tangential) spectral energy fractions of one packet inside
    the doubled cap block: |xi_rad| <= 2 and |xi_tan| <= 2 R^{1/2}.

    All packets share the same separable profile, so one 1D computation per
    axis suffices: the profile transforms are evaluated by dense FFT.
    """
    fractions = []
    for half_support, half_box in ((0.5, 2.0), (config.width / 2.0,
                                                2.0 * np.sqrt(config.R))):
        M = 1 << 14
        L = half_support * pad * 4
        dx = 2 * L / M
        u = (np.arange(M) - M / 2) * dx
        v = bump(u / half_support)
        spec = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(v))) * dx
        freqs = np.fft.fftshift(np.fft.fftfreq(M, d=dx))
        tot = float(np.sum(np.abs(spec) ** 2))
        inside = float(np.sum(np.abs(spec[np.abs(freqs) <= half_box]) ** 2))
        fractions.append(inside / tot)
    return tuple(fractions)


def auto_y(config: PacketConfig, dilate: float = 1.0) -> np.ndarray:
    """All R^{-1/2} cells of [-1,1]^2 meeting at least one packet support."""
    q = config.q
    ncell = int(np.ceil(2.0 / q))
    hit = set()
    for pk in config.packets:
        e = pk.direction(config.surface)
        half = np.abs(e) * 0.5 * dilate + np.abs([-e[1], e[0]]) * config.width / 2 * dilate
        lo = np.asarray(pk.center) - half
        hi = np.asarray(pk.center) + half
        i0 = max(int((lo[1] + 1) / q), 0)
        i1 = min(int((hi[1] + 1) / q), ncell - 1)
        j0 = max(int((lo[0] + 1) / q), 0)
        j1 = min(int((hi[0] + 1) / q), ncell - 1)
        for i in range(i0, i1 + 1):
            cy = -1 + (i + 0.5) * q
            for j in range(j0, j1 + 1):
                cx = -1 + (j + 0.5) * q
                if _tube_cell_overlap(pk, config, cx, cy, q):
                    hit.add((i, j))
    if not hit:
        return np.zeros((0, 2), dtype=int)
    return np.array(sorted(hit), dtype=int)


def _tube_cell_overlap(pk, config, cx, cy, q):
    """Separating-axis test: packet support rectangle vs a q-cell."""
    e = pk.direction(config.surface)
    perp = np.array([-e[1], e[0]])
    d = np.array([cx - pk.center[0], cy - pk.center[1]])
    exts = (0.5, config.width / 2.0)
    # axes: tube frame
    for axis, ext in ((e, exts[0]), (perp, exts[1])):
        proj_cell = (abs(axis[0]) + abs(axis[1])) * q / 2.0
        if abs(d @ axis) > ext + proj_cell:
            return False
    # axes: cell frame
    for k in range(2):
        ext_tube = abs(e[k]) * exts[0] + abs(perp[k]) * exts[1]
        if abs(d[k]) > ext_tube + q / 2.0:
            return False
    return True


def multiplicity(config: PacketConfig, y_cells=None) -> int:
    """Max over Y cells of the number of packet tubes meeting the cell."""
    if y_cells is None:
        y_cells = config.y_cells if config.y_cells is not None else auto_y(config)
    if len(y_cells) == 0:
        return 0
    q = config.q
    best = 0
    counts = np.zeros(len(y_cells), dtype=int)
    for pk in config.packets:
        for idx, (i, j) in enumerate(y_cells):
            cx = -1 + (j + 0.5) * q
            cy = -1 + (i + 0.5) * q
            if _tube_cell_overlap(pk, config, cx, cy, q):
                counts[idx] += 1
    best = int(counts.max())
    return best


def lp_on_y(config: PacketConfig, y_cells=None, sub: int = 4, f: GridMeasure = None):
    """||f||_{L^p(Y)} by per-cell quadrature (grid or analytic)."""
    if y_cells is None:
        y_cells = config.y_cells if config.y_cells is not None else auto_y(config)
    if len(y_cells) == 0:
        raise EmptyY("target set Y is empty")
    q = config.q
    p = config.p
    total = 0.0
    if f is not None:
        xs, ys = f.cell_centers_1d()
        for (i, j) in y_cells:
            x0, y0 = -1 + j * q, -1 + i * q
            jj = np.nonzero((xs >= x0) & (xs < x0 + q))[0]
            ii = np.nonzero((ys >= y0) & (ys < y0 + q))[0]
            if len(jj) and len(ii):
                block = f.values[np.ix_(ii, jj)]
                total += float(np.sum(np.abs(block) ** p)) * f.cell_area
        return total ** (1.0 / p)
    # analytic: midpoint sub-quadrature per cell
    offs = (np.arange(sub) + 0.5) / sub * q
    for (i, j) in y_cells:
        x0, y0 = -1 + j * q, -1 + i * q
        X, Y = np.meshgrid(x0 + offs, y0 + offs)
        vals = eval_packets(config, X.ravel(), Y.ravel())
        total += float(np.sum(np.abs(vals) ** p)) * (q / sub) ** 2
    return total ** (1.0 / p)


def decoupling_ratio(config: PacketConfig, f: GridMeasure = None,
                     y_cells=None) -> dict:
    """LHS/RHS of the refined inequality plus its ingredients."""
    if y_cells is None:
        y_cells = config.y_cells if config.y_cells is not None else auto_y(config)
    W = len(config.packets)
    M = multiplicity(config, y_cells)
    lhs = lp_on_y(config, y_cells, f=f)
    norms = np.array([packet_lp_norm(config, pk) for pk in config.packets])
    if norms.max() > 2.0 * norms.min():
        raise ParameterOutOfRange("||f_T||_p spread exceeds the factor-2 contract")
    rhs = (M / W) ** (0.5 - 1.0 / config.p) * np.sqrt(np.sum(norms**2))
    return {"lhs": lhs, "rhs": float(rhs), "ratio": lhs / float(rhs),
            "M": M, "W": W}


def classical_decoupling_ratio(config: PacketConfig, f: GridMeasure = None) -> dict:
    """Cap-decoupling ratio ||f||_p / (sum_caps ||f_cap||_p^2)^{1/2}.

    The rapidly-decaying ball weight is constant to rounding on the packet
    supports (all inside the unit ball), so plain integrals are used.
    """
    y_cells = auto_y(config)
    lhs = lp_on_y(config, y_cells, f=f)
    caps = {}
    for pk in config.packets:
        caps.setdefault(round(pk.cap_angle, 12), []).append(pk)
    acc = 0.0
    for ang, pks in caps.items():
        sub = PacketConfig(config.R, pks, config.p, config.surface, config.delta)
        acc += lp_on_y(sub, auto_y(sub), f=None) ** 2
    rhs = float(np.sqrt(acc))
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs, "n_caps": len(caps)}


# ---------------------------------------------------------------------------
# seeded random configurations for the sweep
# ---------------------------------------------------------------------------

def random_config(R: int, p: float, seed: int, surface=None,
                  n_caps: int = None, per_cap: int = None) -> PacketConfig:
    rng = np.random.Generator(np.random.Philox(key=seed))
    if n_caps is None:
        n_caps = int(rng.integers(4, 24))
    if per_cap is None:
        per_cap = int(rng.integers(1, 6))
    width = float(R) ** (-0.5 + _DELTA)
    packets = []
    for _ in range(n_caps):
        theta = float(rng.uniform(0, 2 * np.pi))
        for _ in range(per_cap):
            e = np.array([np.cos(theta), np.sin(theta)]) if surface is None else None
            if e is None:
                v = surface.boundary(np.array([theta]))[0]
                e = v / np.hypot(v[0], v[1])
            perp = np.array([-e[1], e[0]])
            c = (e * rng.uniform(-0.3, 0.3)
                 + perp * rng.uniform(-0.45, 0.45))
            packets.append(Packet(theta, (float(c[0]), float(c[1])), 1.0))
    return PacketConfig(R, packets, p, surface)
