"""Cauchy transform, branch inverses, and R-transform numerics.

A one-cut spectral measure with square-root edges is stored as a
Chebyshev-U expansion of the smooth density factor.  In the Joukowski
variable w (with z = center + halfwidth*(w + 1/w)/2, |w| <= 1) each mode
integrates in closed form,

    int U_j(t) sqrt(1-t^2) / (ztilde - t) dt = pi * w^(j+1),

so the Cauchy transform is a short polynomial in w.  That keeps full
accuracy arbitrarily close to the spectral edges, where plain quadrature
in x degenerates.  The quadrature evaluator is retained as a cross-check.
"""

from __future__ import annotations

import cmath
import json
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .errors import (BranchError, DomainError, ModelError, NumericError,
                     PoleError)

SERIES_RADIUS = 1e-3       # |k| below which r_eval switches to the cumulant series
STITCH_WINDOW = 1e-4       # |k - g(edge)| window where both branches are averaged
SERIES_ORDER = 10


def _f2h(x: float) -> str:
    return struct.pack("<d", float(x)).hex()


def _h2f(s: str) -> float:
    return struct.unpack("<d", bytes.fromhex(s))[0]


# ---------------------------------------------------------------------------
# spectral measures
# ---------------------------------------------------------------------------

def _gauss_chebyshev_u(m: int):
    """Nodes/weights for int f(t) sqrt(1-t^2) dt on [-1, 1]."""
    i = np.arange(1, m + 1)
    theta = i * np.pi / (m + 1)
    return np.cos(theta), (np.pi / (m + 1)) * np.sin(theta) ** 2


def _chebyshev_u_values(coeffs, t):
    """Evaluate sum_j coeffs[j] U_j(t) with the standard recurrence."""
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    um, u = np.zeros_like(t), np.ones_like(t)
    for c in coeffs:
        total = total + c * u
        um, u = u, 2.0 * t * u - um
    return total


@dataclass
class SpectralMeasure:
    """One-cut probability measure nu(x) = rho(x) * sqrt((b-x)(x-a)) on [a, b].

    density_coeffs holds the Chebyshev-U coefficients of the smooth factor
    rho in the scaled variable t = (2x - a - b)/(b - a).
    """

    a: float
    b: float
    density_coeffs: np.ndarray
    mass: float = field(default=0.0)

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("need a < b")
        self.density_coeffs = np.asarray(self.density_coeffs, dtype=float)
        self.mass = self.half_width ** 2 * self.density_coeffs[0] * np.pi / 2.0
        if abs(self.mass - 1.0) > 1e-10:
            raise ModelError(f"measure mass {self.mass!r} deviates from 1")
        t, _ = _gauss_chebyshev_u(257)
        if np.min(self._rho_scaled(t) * np.sqrt(1 - t ** 2)) < -1e-12:
            raise ModelError("density is negative at a sample node")
        self._moment_cache = [1.0]
        self._cumulant_cache = None

    @property
    def half_width(self) -> float:
        return 0.5 * (self.b - self.a)

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    def _rho_scaled(self, t):
        return _chebyshev_u_values(self.density_coeffs, t)

    def scaled(self, z):
        return (np.asarray(z) - self.center) / self.half_width

    def density(self, x):
        """nu(x); zero outside [a, b]."""
        x = np.asarray(x, dtype=float)
        t = np.clip(self.scaled(x), -1.0, 1.0)
        inside = (x >= self.a) & (x <= self.b)
        val = self._rho_scaled(t) * np.sqrt((self.b - x) * (x - self.a) * inside)
        return val * inside

    def cdf(self, x):
        """Distribution function of nu, exact per Chebyshev mode."""
        x = np.asarray(x, dtype=float)
        t = np.clip(self.scaled(x), -1.0, 1.0)
        theta = np.arccos(t)
        total = np.zeros_like(theta)
        # int_theta^pi sin(m th) sin(th) dth summed against mode coefficients
        for j, d in enumerate(self.density_coeffs):
            m = j + 1
            if m == 1:
                seg = 0.5 * (np.pi - theta) + 0.25 * np.sin(2 * theta)
            else:
                seg = (np.sin((m + 1) * theta) / (m + 1)
                       - np.sin((m - 1) * theta) / (m - 1)) / 2.0
            total += d * seg
        out = self.half_width ** 2 * total
        return np.where(x <= self.a, 0.0, np.where(x >= self.b, 1.0, out))

    def moments(self, order: int) -> list:
        """Moments m_1..m_order of nu, computed by exact quadrature and cached."""
        while len(self._moment_cache) <= order:
            n = len(self._moment_cache)
            m = max(64, n + len(self.density_coeffs) + 4)
            t, w = _gauss_chebyshev_u(m)
            x = self.center + self.half_width * t
            val = self.half_width ** 2 * np.sum(w * self._rho_scaled(t) * x ** n)
            self._moment_cache.append(float(val))
        return self._moment_cache[1:order + 1]

    def free_cumulants(self, order: int = SERIES_ORDER) -> list:
        """Free cumulants c_1..c_order via series reversion of the moment series."""
        if self._cumulant_cache is None or len(self._cumulant_cache) < order:
            ps = PowerSeries(self.moments(order), order)
            self._cumulant_cache = list(r_series(ps).coeffs)
        return self._cumulant_cache[:order]

    def to_json(self) -> str:
        return json.dumps({
            "a": _f2h(self.a),
            "b": _f2h(self.b),
            "density_coeffs": [_f2h(c) for c in self.density_coeffs],
        })

    @classmethod
    def from_json(cls, text: str) -> "SpectralMeasure":
        d = json.loads(text)
        return cls(_h2f(d["a"]), _h2f(d["b"]),
                   np.array([_h2f(c) for c in d["density_coeffs"]]))

    @classmethod
    def semicircle(cls, radius: float = 2.0, center: float = 0.0) -> "SpectralMeasure":
        """Semicircle law of the given radius: nu = sqrt(r^2 - x^2) * 2/(pi r^2) / 2."""
        coeff = 2.0 / (np.pi * radius ** 2)
        return cls(center - radius, center + radius, np.array([coeff]))


@dataclass(frozen=True)
class BranchPoint:
    """Edge values k_lo = g(a) < 0 < k_hi = g(b) of the Cauchy transform."""

    k_lo: float
    k_hi: float

    def __post_init__(self):
        if not self.k_lo < 0.0 < self.k_hi:
            raise ValueError("edge values must straddle 0")

    @classmethod
    def from_measure(cls, measure: SpectralMeasure) -> "BranchPoint":
        return cls(g_at_edge(measure, "lower"), g_at_edge(measure, "upper"))


# ---------------------------------------------------------------------------
# Cauchy transform
# ---------------------------------------------------------------------------

def _joukowski_w(ztilde):
    """w = ztilde - sqrt(ztilde^2 - 1) on the branch with |w| <= 1.

    The factored square root sqrt(z-1)*sqrt(z+1) puts the cut exactly on
    [-1, 1] and behaves like ztilde at infinity in every direction.  The
    reciprocal form 1/(ztilde + sqrt(...)) is the same branch without the
    large-|z| cancellation.
    """
    z = complex(ztilde)
    return 1.0 / (z + cmath.sqrt(z - 1.0) * cmath.sqrt(z + 1.0))


def _g_from_w(measure: SpectralMeasure, w):
    total = 0.0j
    p = 1.0 + 0.0j
    for c in measure.density_coeffs:
        p *= w
        total += c * p
    return np.pi * measure.half_width * total


def support_distance(measure: SpectralMeasure, z) -> float:
    zr, zi = np.real(z), np.imag(z)
    dx = max(measure.a - zr, 0.0, zr - measure.b)
    return math.hypot(float(dx), float(zi))


def cauchy_g(measure: SpectralMeasure, z) -> complex:
    """g(z) = int dnu(x)/(z - x), evaluated mode by mode in the w variable.

    Exact (to rounding) for polynomial density factors, on the whole plane
    off the support.
    """
    if support_distance(measure, z) <= 1e-12:
        raise DomainError(f"z = {z} lies on the support [{measure.a}, {measure.b}]")
    w = _joukowski_w(measure.scaled(z))
    val = _g_from_w(measure, w)
    if np.imag(z) == 0:
        return complex(val.real, 0.0)
    return val


def cauchy_g_quadrature(measure: SpectralMeasure, z, nodes: int = 256,
                        rtol: float = 1e-12, max_nodes: int = 1 << 15) -> complex:
    """Gauss-Chebyshev evaluation of g(z) with node doubling.

    Cross-check for cauchy_g, reliable once dist(z, [a,b]) is a small
    fraction of the support width.
    """
    if support_distance(measure, z) <= 1e-12:
        raise DomainError(f"z = {z} lies on the support [{measure.a}, {measure.b}]")
    zt = measure.scaled(z)
    prev = None
    m = nodes
    while m <= max_nodes:
        t, w = _gauss_chebyshev_u(m)
        val = measure.half_width * np.sum(w * measure._rho_scaled(t) / (zt - t))
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
            return complex(val)
        prev = val
        m *= 2
    return complex(prev)


def g_at_edge(measure: SpectralMeasure, which: str) -> float:
    w = 1.0 if which == "upper" else -1.0
    return float(_g_from_w(measure, w).real)


def g_boundary(measure: SpectralMeasure, x: float, side: str = "upper") -> complex:
    """Boundary value g(x -+ i0) for x inside the support.

    side='upper' gives the limit from above (Im <= 0); side='lower' the
    conjugate.  The density satisfies nu(x) = Im g_lower(x) / pi.
    """
    t = float(measure.scaled(x))
    if not -1.0 <= t <= 1.0:
        raise DomainError("x is outside the support")
    theta = math.acos(t)
    w = cmath.exp(-1j * theta if side == "upper" else 1j * theta)
    return complex(_g_from_w(measure, w))


def _z_of_w(measure: SpectralMeasure, w: float) -> float:
    return measure.center + measure.half_width * 0.5 * (w + 1.0 / w)


def _g_of_w_real(measure: SpectralMeasure, w: float) -> float:
    total = 0.0
    p = 1.0
    for c in measure.density_coeffs:
        p *= w
        total += c * p
    return np.pi * measure.half_width * total


def g_inverse(measure: SpectralMeasure, k: float, hint: float | None = None) -> float:
    """Unique z0 outside (a, b) with g(z0) = k, for k in [g(a), g(b)] \\ {0}.

    The root is found in the w variable, where g is a polynomial; this
    stays accurate arbitrarily close to the branch points.
    """
    edges = BranchPoint.from_measure(measure)
    if k == 0.0:
        raise PoleError("g_inverse(0) is the point at infinity")
    tol = 1e-9 * (edges.k_hi - edges.k_lo)
    if k > edges.k_hi + tol or k < edges.k_lo - tol:
        raise BranchError(
            f"k = {k} is outside [g(a), g(b)] = [{edges.k_lo}, {edges.k_hi}]",
            redirect="h_inverse")
    if k >= edges.k_hi:
        return measure.b
    if k <= edges.k_lo:
        return measure.a

    def f(w):
        return _g_of_w_real(measure, w) - k

    lo, hi = (1e-300, 1.0) if k > 0 else (-1.0, -1e-300)
    w0 = brentq(f, lo, hi, xtol=1e-16, rtol=8.9e-16)
    return _z_of_w(measure, w0)


def h_branch(potential, measure: SpectralMeasure, x: float) -> float:
    """Second sheet h(x) = V'(x) - g(x) of the two-valued resolvent pair."""
    if measure.a < x < measure.b:
        raise DomainError("x lies inside the support")
    if support_distance(measure, x) <= 1e-12:
        g = g_at_edge(measure, "upper" if x >= measure.center else "lower")
    else:
        g = cauchy_g(measure, x).real
    return float(potential.dv(x) - g)


def h_inverse(potential, measure: SpectralMeasure, k: float) -> float:
    """Unique x0 outside [a, b] with h(x0) = k, for k beyond [g(a), g(b)]."""
    edges = BranchPoint.from_measure(measure)
    tol = 1e-9 * (edges.k_hi - edges.k_lo)
    if edges.k_lo + tol < k < edges.k_hi - tol:
        raise BranchError(
            f"k = {k} lies inside [g(a), g(b)] = [{edges.k_lo}, {edges.k_hi}]",
            redirect="g_inverse")
    if abs(k - edges.k_hi) <= tol:
        return measure.b
    if abs(k - edges.k_lo) <= tol:
        return measure.a

    def f(w):
        return potential.dv(_z_of_w(measure, w)) - _g_of_w_real(measure, w) - k

    if k > edges.k_hi:
        lo = 1.0
        # h decreases in w on (0, 1); shrink the lower end until it brackets
        wlo = 0.5
        while f(wlo) < 0:
            wlo *= 0.5
            if wlo < 1e-280:
                raise NumericError("failed to bracket h_inverse")
        w0 = brentq(f, wlo, lo, xtol=1e-16, rtol=8.9e-16)
    else:
        whi = -0.5
        while f(whi) > 0:
            whi *= 0.5
            if whi > -1e-280:
                raise NumericError("failed to bracket h_inverse")
        w0 = brentq(f, -1.0, whi, xtol=1e-16, rtol=8.9e-16)
    return _z_of_w(measure, w0)


# ---------------------------------------------------------------------------
# power series and reversion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerSeries:
    """Truncated coefficient sequence; coeffs[i] is the order-(i+1) coefficient.

    A moment series stores (m_1, ..., m_T); an R-transform series stores the
    free cumulants (c_1, ..., c_T) of R(k) = sum c_n k^(n-1).  Entries may be
    exact rationals or floats.
    """

    coeffs: tuple
    truncation_order: int

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        if len(self.coeffs) != self.truncation_order:
            raise ValueError("coeffs length must equal truncation_order")

    def is_exact(self) -> bool:
        return all(isinstance(c, (int, Fraction)) for c in self.coeffs)


def _series_mul(u, v, order):
    out = [0] * order
    for i, ui in enumerate(u):
        if i >= order:
            break
        for j, vj in enumerate(v):
            if i + j >= order:
                break
            out[i + j] += ui * vj
    return out


def _series_recip(u, order):
    one = Fraction(1) if isinstance(u[0], (int, Fraction)) else 1.0
    v = [0] * order
    v[0] = one / u[0]
    for n in range(1, order):
        v[n] = -sum(u[i] * v[n - i] for i in range(1, min(n, len(u) - 1) + 1)) / u[0]
    return v


def r_series(moments: PowerSeries) -> PowerSeries:
    """Free cumulants by functional reversion of g(z) = sum m_n z^(-n-1).

    Writes k*z(k) = 1 + sum c_n k^n and solves order by order for the
    condition g(z(k)) = k; independent of the partition-sum recursion.
    """
    t = moments.truncation_order
    if t < 2:
        raise ValueError("need truncation_order >= 2")
    exact = moments.is_exact()
    one = Fraction(1) if exact else 1.0
    m = [one] + [Fraction(c) if exact and not isinstance(c, Fraction) else c
                 for c in moments.coeffs]
    order = t + 1
    c = [0] * order           # c[0] is an unused slot; k z(k) = 1 + sum c_n k^n
    for j in range(1, order):
        u = [one] + c[1:]
        v = _series_recip(u, order)
        # Phi(k) = sum_n m_n k^n v(k)^(n+1) must equal 1 through order t
        vpow = v[:]
        phi = [m[0] * x for x in v]
        for n in range(1, min(j, t) + 1):
            vpow = _series_mul(vpow, v, order)
            shifted = [0] * order
            for i, x in enumerate(vpow):
                if i + n < order:
                    shifted[i + n] = x
            phi = [p + m[n] * s for p, s in zip(phi, shifted)]
        c[j] = c[j] + phi[j]
    return PowerSeries(tuple(c[1:]), t)


# ---------------------------------------------------------------------------
# R-transform evaluation
# ---------------------------------------------------------------------------

def r_series_eval(cumulants, k: float) -> float:
    """R(k) = sum c_n k^(n-1) truncated to the available cumulants."""
    total = 0.0
    p = 1.0
    for c in cumulants:
        total += float(c) * p
        p *= k
    return total


def r_eval(potential, measure: SpectralMeasure, k: float) -> float:
    """R(k) pieced together from both saddle branches.

    Inside (g(a), g(b)) the saddle sits on the first sheet and
    R = g^(-1)(k) - 1/k; beyond the branch points it moves to the second
    sheet and R = h^(-1)(k) - 1/k.  A small window around each branch point
    averages the two (equal) evaluations, and |k| < SERIES_RADIUS falls back
    to the cumulant series where the pole subtraction loses digits.
    """
    if abs(k) < SERIES_RADIUS:
        return r_series_eval(measure.free_cumulants(SERIES_ORDER), k)
    edges = BranchPoint.from_measure(measure)
    near_hi = abs(k - edges.k_hi) <= STITCH_WINDOW
    near_lo = abs(k - edges.k_lo) <= STITCH_WINDOW
    if near_hi or near_lo:
        edge = edges.k_hi if near_hi else edges.k_lo
        kg = min(max(k, edges.k_lo), edges.k_hi)
        kh = max(k, edge) if near_hi else min(k, edge)
        zg = g_inverse(measure, kg)
        zh = h_inverse(potential, measure, kh)
        return 0.5 * (zg + zh) - 1.0 / k
    if edges.k_lo < k < edges.k_hi:
        return g_inverse(measure, k) - 1.0 / k
    return h_inverse(potential, measure, k) - 1.0 / k


def blue_fn(potential, measure: SpectralMeasure, k: float) -> float:
    """Blue's function b(k) = 1/k + R(k), the full inverse of g."""
    if k == 0.0:
        raise PoleError("the Blue's function has a pole at k = 0")
    return 1.0 / k + r_eval(potential, measure, k)


# ---------------------------------------------------------------------------
# bounded-density-free reference ensemble (cube-root edge at the origin)
# ---------------------------------------------------------------------------

BOSON_EDGE = 1.5 * math.sqrt(3.0)   # support is [-edge, edge]
_OMEGA = cmath.exp(2j * math.pi / 3.0)


def boson_r(k):
    """R(k) = k / (1 - k^2): unit even free cumulants, vanishing odd ones."""
    k = complex(k)
    return k / (1.0 - k * k)


def boson_blue(k):
    """b(k) = 1/k + R(k) = 1 / (k (1 - k^2))."""
    k = complex(k)
    if k == 0:
        raise PoleError("pole at k = 0")
    return 1.0 / (k * (1.0 - k * k))


def _boson_roots(z: complex):
    """All three roots of z*g^3 - z*g + 1 = 0 via the two-cube-root formula.

    Principal roots alone do not always satisfy the Cardano product
    constraint, so the second cube root is rotated by the cube root of
    unity that restores A*B = 1/3; the remaining two roots follow by the
    conjugate rotations.
    """
    d = cmath.sqrt(1.0 / 27.0 - 1.0 / (4.0 * z * z))
    roots = []
    for s in (1.0, -1.0):
        w = s * d
        a3 = w - 1j / (2.0 * z)
        b3 = w + 1j / (2.0 * z)
        a = a3 ** (1.0 / 3.0)
        b0 = b3 ** (1.0 / 3.0)
        b = min((b0 * _OMEGA ** j for j in range(3)),
                key=lambda bb: abs(a * bb - 1.0 / 3.0))
        for j in range(3):
            roots.append(1j * a * _OMEGA ** j - 1j * b * _OMEGA ** (-j))
    return roots


def boson_g(z) -> complex:
    """Physical branch of the cube-root closed form for the Cauchy transform.

    Selected so that z*g(z) -> 1 at infinity and Im g < 0 in the upper
    half-plane.  Raises for z on the support; use boson_density there.
    """
    z = complex(z)
    if z == 0:
        raise DomainError("z = 0 is on the support")
    if z.imag == 0 and abs(z.real) <= BOSON_EDGE:
        raise DomainError("real z inside the support; use boson_density")
    cands = []
    for g in _boson_roots(z):
        if abs(z * g ** 3 - z * g + 1.0) > 1e-8 * max(1.0, abs(z)):
            continue
        cands.append(g)
    if z.imag != 0:
        sign = -1.0 if z.imag > 0 else 1.0
        cands = [g for g in cands if g.imag * sign > 0]
    else:
        cands = [g for g in cands
                 if abs(g.imag) < 1e-8 and abs(z * g - 1.0) < 0.5]
    if not cands:
        raise NumericError(f"branch selection failed at z = {z}")
    return min(cands, key=lambda g: abs(z * g - 1.0))


def boson_density(x: float) -> float:
    """Density of states of the reference ensemble at real x inside the support.

    Uses the boundary value from below: nu = Im g(x - i0) / pi, taken from
    the conjugate root pair of the defining cubic.
    """
    if abs(x) > BOSON_EDGE or x == 0.0:
        raise DomainError("x must lie inside the open support, away from 0")
    roots = np.roots([x, 0.0, -x, 1.0])
    im = np.imag(roots)
    pos = im[im > 1e-12]
    if pos.size == 0:
        raise NumericError(f"no complex boundary pair at x = {x}")
    return float(pos.max() / math.pi)
