"""Smooth symmetric convex bodies via sampled support functions.

A body K is stored as its support function h(theta) at m equispaced angles,
with angular derivatives by spectral (FFT) differentiation.  theta is the
outward-normal angle of the boundary: the boundary point with normal
direction (cos theta, sin theta) is

    b(theta) = h(theta) (cos, sin) + h'(theta) (-sin, cos),

the radius of curvature there is rho = h + h'', and kappa = 1/rho.  The
dual body K* is the polar body; its boundary in polar form is
r(theta) = 1/h(theta), and the dual support function equals the gauge of K.
All Gauss-map and norm queries reduce to spectral evaluations of h and its
derivatives, so round trips hold to well below 1e-6.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .bumps import plateau
from .errors import CurvatureNonPositive, FlatArc, ParameterOutOfRange

_FINE = 1 << 14  # resampled table size for fast interpolated queries


def _spectral_derivatives(h):
    m = len(h)
    c = sfft.fft(h)
    k = np.fft.fftfreq(m) * m
    d1 = sfft.ifft(c * (1j * k)).real
    d2 = sfft.ifft(c * -(k**2)).real
    return d1, d2


def _resample_periodic(h, m_out):
    """Exact trigonometric interpolation onto a finer uniform grid."""
    m = len(h)
    if m_out == m:
        return np.asarray(h, dtype=np.float64).copy()
    if m_out < m:
        raise ValueError("only upsampling is supported")
    c = sfft.fft(h)
    out = np.zeros(m_out, dtype=np.complex128)
    half = m // 2
    out[:half] = c[:half]
    out[m_out - half + 1 :] = c[half + 1 :]
    # split the Nyquist coefficient symmetrically
    out[half] = c[half] / 2.0
    out[m_out - half] = c[half] / 2.0
    return sfft.ifft(out).real * (m_out / m)


class _PeriodicTable:
    """Linear-interp lookup on a fine uniform angle grid (vectorized)."""

    def __init__(self, samples):
        self.samples = np.asarray(samples, dtype=np.float64)
        self.m = len(samples)

    def __call__(self, theta):
        t = np.asarray(theta, dtype=np.float64) * (self.m / (2 * np.pi))
        i0 = np.floor(t).astype(np.int64)
        frac = t - i0
        i0 = i0 % self.m
        i1 = (i0 + 1) % self.m
        s = self.samples
        return s[i0] * (1.0 - frac) + s[i1] * frac


@dataclass
class NormBody:
    """Symmetric convex body given by m support-function samples."""

    support: np.ndarray
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        h = np.asarray(self.support, dtype=np.float64)
        m = len(h)
        if m < 512 or (m & (m - 1)) != 0:
            raise ParameterOutOfRange(f"support sample count {m} must be a power of two >= 512")
        half = m // 2
        sym_err = np.abs(h - np.roll(h, half)).max()
        if sym_err > 1e-9 * max(1.0, np.abs(h).max()):
            raise ParameterOutOfRange(f"support function not symmetric: err={sym_err:.2e}")
        if h.min() <= 0:
            raise CurvatureNonPositive("support function must be positive")
        d1, d2 = _spectral_derivatives(h)
        rho = h + d2
        if rho.min() <= 0:
            raise CurvatureNonPositive(
                f"h + h'' reaches {rho.min():.3e}; body is not strictly convex")
        self.support = h
        self.m = m
        self.h1 = d1
        self.h2 = d2

    # -- spectral evaluation at arbitrary angles ---------------------------

    def _coeffs(self):
        if "coeffs" not in self._cache:
            self._cache["coeffs"] = sfft.fft(self.support) / self.m
        return self._cache["coeffs"]

    def support_eval(self, theta, deriv=0):
        """Evaluate h (deriv=0), h' (1) or h'' (2) at arbitrary angles."""
        scalar = np.ndim(theta) == 0
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64)).ravel()
        c = self._coeffs()
        k = np.fft.fftfreq(self.m) * self.m
        if deriv == 1:
            c = c * (1j * k)
        elif deriv == 2:
            c = c * -(k**2)
        out = np.zeros(theta.shape, dtype=np.complex128)
        for start in range(0, len(theta), 4096):
            t = theta[start : start + 4096]
            out[start : start + 4096] = np.exp(1j * np.outer(t, k)) @ c
        return float(out[0].real) if scalar else out.real

    def fine_tables(self):
        """(h, h', h'') linear-interp tables on a 2^14 grid."""
        if "fine" not in self._cache:
            h = _resample_periodic(self.support, _FINE)
            d1, d2 = _spectral_derivatives(h)
            self._cache["fine"] = (
                _PeriodicTable(h), _PeriodicTable(d1), _PeriodicTable(d2))
        return self._cache["fine"]

    # -- geometry -----------------------------------------------------------

    def boundary(self, theta):
        """Boundary point(s) with outward normal angle theta."""
        theta = np.asarray(theta, dtype=np.float64)
        h = self.support_eval(theta)
        d1 = self.support_eval(theta, 1)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([h * c - d1 * s, h * s + d1 * c], axis=-1)

    def grid_angles(self):
        return np.arange(self.m) * (2 * np.pi / self.m)

    def perimeter(self):
        # L = integral of rho dtheta; exact for trig polynomials
        return float((self.support + self.h2).sum() * (2 * np.pi / self.m))

    def dual(self) -> "NormBody":
        if "dual" not in self._cache:
            self._cache["dual"] = dual_body(self)
        return self._cache["dual"]


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def body_from_support(samples, label="") -> NormBody:
    return NormBody(np.asarray(samples, dtype=np.float64), label)


def disk(radius=1.0, m=512) -> NormBody:
    return body_from_support(np.full(m, float(radius)), f"disk({radius})")


def ellipse(a, b, m=512) -> NormBody:
    th = np.arange(m) * (2 * np.pi / m)
    h = np.sqrt(a**2 * np.cos(th) ** 2 + b**2 * np.sin(th) ** 2)
    return body_from_support(h, f"ellipse({a},{b})")


def perturbed_disk(amplitude, harmonic=4, m=512) -> NormBody:
    """h = 1 + amplitude*cos(k theta); needs |amplitude| < 1/(k^2 - 1)."""
    th = np.arange(m) * (2 * np.pi / m)
    return body_from_support(1.0 + amplitude * np.cos(harmonic * th),
                             f"perturbed({amplitude},{harmonic})")


def lp_ball_smoothed(p, sigma=0.05, m=512) -> NormBody:
    """l^p unit ball mollified by a periodic Gaussian of width sigma (radians).

    The raw l^p support function (the dual l^q norm of the direction) has
    curvature degenerating at the axis directions for p > 2; the mollification
    keeps it strictly convex with a small but positive curvature there."""
    if p <= 1:
        raise ParameterOutOfRange("p must exceed 1")
    q = p / (p - 1.0)
    th = np.arange(m) * (2 * np.pi / m)
    h = (np.abs(np.cos(th)) ** q + np.abs(np.sin(th)) ** q) ** (1.0 / q)
    k = np.fft.fftfreq(m) * m
    g = np.exp(-0.5 * (sigma * k) ** 2)
    h_s = sfft.ifft(sfft.fft(h) * g).real
    return body_from_support(h_s, f"lp({p},{sigma})")


def body_from_preset(spec: str, m=512) -> NormBody:
    """Parse 'disk', 'disk 2', 'ellipse 2 1', 'perturbed 0.05 4', 'lp 4 0.05'."""
    parts = spec.split()
    name, args = parts[0], parts[1:]
    if name == "disk":
        return disk(float(args[0]) if args else 1.0, m=m)
    if name == "ellipse":
        return ellipse(float(args[0]), float(args[1]), m=m)
    if name == "perturbed":
        return perturbed_disk(float(args[0]), int(args[1]) if len(args) > 1 else 4, m=m)
    if name == "lp":
        return lp_ball_smoothed(float(args[0]),
                                float(args[1]) if len(args) > 1 else 0.05, m=m)
    raise ParameterOutOfRange(f"unknown body preset {name!r}")


# ---------------------------------------------------------------------------
# duality and the Gauss maps
# ---------------------------------------------------------------------------

def _gauge_on_grid(K: NormBody, phis):
    """gauge_K(u(phi)) = sup_theta cos(theta - phi)/h(theta), Newton-refined.

    The coarse argmax over the sample grid seeds a Newton iteration on the
    stationarity condition sin(q) h + cos(q) h' = 0 (q = theta - phi),
    which converges to machine precision in a few steps."""
    phis = np.asarray(phis, dtype=np.float64)
    th = K.grid_angles()
    h = K.support
    # coarse argmax, chunked to keep the m x len(phis) matrix small
    theta = np.empty_like(phis)
    for start in range(0, len(phis), 2048):
        p = phis[start : start + 2048]
        vals = np.cos(th[None, :] - p[:, None]) / h[None, :]
        theta[start : start + 2048] = th[np.argmax(vals, axis=1)]
    for _ in range(6):
        hv = K.support_eval(theta)
        h1 = K.support_eval(theta, 1)
        h2 = K.support_eval(theta, 2)
        q = theta - phis
        N = -np.sin(q) * hv - np.cos(q) * h1
        Np = -np.cos(q) * (hv + h2)
        step = N / Np
        step = np.clip(step, -0.5 * 2 * np.pi / K.m, 0.5 * 2 * np.pi / K.m)
        theta = theta - step
    hv = K.support_eval(theta)
    return np.cos(theta - phis) / hv


def dual_body(K: NormBody) -> NormBody:
    """Support function of the polar body K*, sampled on K's angle grid."""
    h_star = _gauge_on_grid(K, K.grid_angles())
    try:
        return body_from_support(h_star, label=f"dual({K.label})")
    except CurvatureNonPositive as exc:
        raise CurvatureNonPositive(f"dual of {K.label or 'body'}: {exc}") from exc


def norm_value(K: NormBody, v) -> float:
    """Gauge norm ||v||_K via the dual support table: |v| h_{K*}(angle v)."""
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    pts = np.atleast_2d(v)
    r = np.hypot(pts[:, 0], pts[:, 1])
    out = np.zeros(len(pts))
    nz = r > 0
    if nz.any():
        ang = np.arctan2(pts[nz, 1], pts[nz, 0])
        hstar = K.dual().support_eval(ang)
        out[nz] = r[nz] * hstar
    return float(out[0]) if single else out


def norm_values_bulk(K: NormBody, vx, vy):
    """Vectorized ||.||_K for large arrays, via the fine dual table."""
    table = K.dual().fine_tables()[0]
    r = np.hypot(vx, vy)
    ang = np.arctan2(vy, vx)
    return r * table(ang)


def curvature(K: NormBody, theta):
    """kappa = 1/(h + h'') at outward-normal angle theta."""
    rho = np.asarray(K.support_eval(theta)) + np.asarray(K.support_eval(theta, 2))
    if np.any(rho <= 0):
        raise CurvatureNonPositive(f"rho={rho} at theta={theta}")
    out = 1.0 / rho
    return float(out) if np.ndim(theta) == 0 else out


@dataclass(frozen=True)
class GaussMapTable:
    """Sampled v(omega) and omega(v) maps on the body's angle grid."""

    angles: np.ndarray
    forward: np.ndarray   # v(omega): boundary of K at normal angle
    inverse: np.ndarray   # omega(v): boundary of K* at normal angle
    m: int


def gauss_map_table(K: NormBody) -> GaussMapTable:
    th = K.grid_angles()
    return GaussMapTable(th, K.boundary(th), K.dual().boundary(th), K.m)


def v_of_omega(K: NormBody, omega):
    """The unique point of K attaining sup_{v in K} omega . v."""
    omega = np.asarray(omega, dtype=np.float64)
    ang = np.arctan2(omega[..., 1], omega[..., 0])
    return K.boundary(ang)


def omega_of_v(K: NormBody, v):
    """The unique omega in bd K* with omega . v = ||v||_K."""
    v = np.asarray(v, dtype=np.float64)
    ang = np.arctan2(v[..., 1], v[..., 0])
    return K.dual().boundary(ang)


# ---------------------------------------------------------------------------
# arc measures and their transforms
# ---------------------------------------------------------------------------

def _quadrature_grid(K: NormBody, n_nodes):
    th = np.arange(n_nodes) * (2 * np.pi / n_nodes)
    h = _resample_periodic(K.support, n_nodes)
    d1, d2 = _spectral_derivatives(h)
    c, s = np.cos(th), np.sin(th)
    bx = h * c - d1 * s
    by = h * s + d1 * c
    rho = h + d2
    return th, bx, by, rho


def arc_measure_ft(K: NormBody, xi) -> complex:
    """Fourier transform of the normalized arc-length measure on bd K.

    High-order (trapezoid on the periodic, spectrally-resampled boundary)
    quadrature of (1/L) * integral of e^{-2 pi i xi.y} over bd K."""
    xi = np.asarray(xi, dtype=np.float64)
    q = float(np.hypot(xi[0], xi[1]))
    n_nodes = max(K.m, 64 * int(np.ceil(q + 1)))
    n_nodes = 1 << int(np.ceil(np.log2(n_nodes)))
    _, bx, by, rho = _quadrature_grid(K, n_nodes)
    L = rho.sum() * (2 * np.pi / n_nodes)
    phase = np.exp(-2j * np.pi * (xi[0] * bx + xi[1] * by))
    return complex((phase * rho).sum() * (2 * np.pi / n_nodes) / L)


def herz_prediction(K: NormBody, xi) -> complex:
    """Two-term stationary-phase asymptotic for arc_measure_ft.

    For a symmetric body the two stationary points give
    (2/L) |xi|^{-1/2} kappa^{-1/2} cos(2 pi (||xi||_{K*} - 1/8))."""
    xi = np.asarray(xi, dtype=np.float64)
    q = float(np.hypot(xi[0], xi[1]))
    if q == 0:
        return complex(1.0)
    ang = float(np.arctan2(xi[1], xi[0]))
    kap = curvature(K, ang)
    L = K.perimeter()
    norm_star = norm_value(K.dual(), xi)  # ||xi||_{K*} = gauge of the dual body
    return complex(
        (2.0 / L) * q**-0.5 * kap**-0.5 * np.cos(2 * np.pi * (norm_star - 0.125)))


def sphere_convolve(f, K: NormBody, t: float, x) -> complex:
    """(f * sigma^K_t)(x): normalized arc-length average of f over x - t bd K.

    Bilinear interpolation of the grid density; nodes outside the domain
    contribute zero (f is treated as zero there)."""
    if t <= 0:
        raise ParameterOutOfRange("t must be positive")
    n_nodes = max(K.m, 8 * int(np.ceil(t * K.perimeter() / f.h)))
    n_nodes = 1 << int(np.ceil(np.log2(n_nodes)))
    _, bx, by, rho = _quadrature_grid(K, n_nodes)
    L = rho.sum() * (2 * np.pi / n_nodes)
    px = x[0] - t * bx
    py = x[1] - t * by
    vals = bilinear_sample(f, px, py)
    w = rho * (2 * np.pi / n_nodes) / L
    return complex(np.sum(vals * w))


def bilinear_sample(f, px, py):
    """Sample a GridMeasure's density at arbitrary points (0 outside)."""
    gx = (np.asarray(px) - f.x0) / f.h - 0.5
    gy = (np.asarray(py) - f.y0) / f.h - 0.5
    i0 = np.floor(gy).astype(np.int64)
    j0 = np.floor(gx).astype(np.int64)
    fy = gy - i0
    fx = gx - j0
    out = np.zeros(np.shape(px), dtype=np.complex128)
    v = f.values
    n = f.n
    for di, dj, wgt in (
        (0, 0, (1 - fy) * (1 - fx)),
        (0, 1, (1 - fy) * fx),
        (1, 0, fy * (1 - fx)),
        (1, 1, fy * fx),
    ):
        ii = i0 + di
        jj = j0 + dj
        ok = (ii >= 0) & (ii < n) & (jj >= 0) & (jj < n)
        if ok.any():
            out[ok] += wgt[ok] * v[ii[ok], jj[ok]]
    return out


# ---------------------------------------------------------------------------
# the vanishing-curvature workaround
# ---------------------------------------------------------------------------

def smooth_cap_body(K: NormBody, arc_center: float, arc_width: float,
                    flat_tol: float = 0.05, transition: float = None) -> NormBody:
    """A uniformly convex body agreeing with K on the given normal-angle arc.

    Outside the arc, K's support function is blended (via a smooth plateau
    window, symmetrized) into a circumscribed trig-quadratic envelope.  One
    admissible realization of the construction; raises FlatArc when the
    curvature of K drops below flat_tol inside the requested arc."""
    if not (0 < arc_width < np.pi / 2):
        raise ParameterOutOfRange("arc_width must lie in (0, pi/2)")
    probe = arc_center + np.linspace(-arc_width / 2, arc_width / 2, 257)
    kap = 1.0 / (K.support_eval(probe) + K.support_eval(probe, 2))
    if kap.min() < flat_tol:
        raise FlatArc(
            f"curvature reaches {kap.min():.3e} < {flat_tol} inside the arc")
    th = K.grid_angles()
    h = K.support
    c = sfft.fft(h) / K.m
    a0 = c[0].real
    a2 = 2 * c[2].real
    b2 = -2 * c[2].imag
    env = a0 + a2 * np.cos(2 * th) + b2 * np.sin(2 * th)
    rho_env = a0 - 3.0 * (a2 * np.cos(2 * th) + b2 * np.sin(2 * th))
    if rho_env.min() <= 0 or env.min() <= 0:
        env = np.full(K.m, a0)
    # circumscribe
    env = env * float(np.max(h / env))
    if transition is None:
        transition = arc_width
    half = arc_width / 2.0 + transition
    d = np.angle(np.exp(1j * (th - arc_center)))
    d2 = np.angle(np.exp(1j * (th - arc_center - np.pi)))
    w = plateau(d / half, flat=(arc_width / 2.0) / half)
    w = np.maximum(w, plateau(d2 / half, flat=(arc_width / 2.0) / half))
    blended = w * h + (1.0 - w) * env
    body = body_from_support(blended, label=f"capped({K.label})")
    return body
