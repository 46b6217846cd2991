"""One-cut equilibrium measures for convex polynomial confining potentials.

The endpoint conditions are the two weighted moments of V' against the
inverse-square-root kernel (coefficient matching of the resolvent at
orders z^0 and z^-1).  Writing V'(center + halfwidth*c) = sum alpha_j T_j(c)
they read alpha_0 = 0 and halfwidth*alpha_1 = 4, and the density factor
follows mode by mode from the finite Hilbert transform pair
P.V. int U_{m-1}(y) sqrt(1-y^2)/(x-y) dy = pi T_m(x).
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as nc
from numpy.polynomial import polynomial as npoly

from .errors import ConfigError, ConvergenceError, DomainError
from .transforms import SpectralMeasure, _joukowski_w

CERTIFICATE_NODES = 201


@dataclass
class Potential:
    """Confining potential V as ascending polynomial coefficients.

    The constant term is ignored (absorbed by normalization).  The leading
    term must have even degree and positive coefficient, and V'' must be
    positive on the certificate interval; `convexity_certificate` records
    the verified lower bound.
    """

    coeffs: np.ndarray
    convexity_certificate: float = 0.0
    certificate_interval: tuple = (0.0, 0.0)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.size:
            c = c.copy()
            c[0] = 0.0
        while c.size > 1 and c[-1] == 0.0:
            c = c[:-1]
        self.coeffs = c
        deg = c.size - 1
        if deg < 2:
            raise ConfigError("potential must have degree >= 2 for confinement")
        if deg % 2 != 0 or c[-1] <= 0.0:
            raise ConfigError(
                "potential needs an even-degree positive leading term; the "
                "convexity certificate cannot hold otherwise")
        self._d1 = npoly.polyder(c)
        self._d2 = npoly.polyder(c, 2)
        radius = self._init_radius()
        lo, hi = -2.0 * radius + self.minimizer(), 2.0 * radius + self.minimizer()
        grid = np.linspace(lo, hi, CERTIFICATE_NODES)
        cert = float(np.min(self.d2v(grid)))
        if cert <= 0.0:
            raise ConfigError(
                f"convexity certificate failed: min V'' = {cert:.3g} on "
                f"[{lo:.3g}, {hi:.3g}]")
        self.convexity_certificate = cert
        self.certificate_interval = (lo, hi)

    def v(self, x):
        return npoly.polyval(x, self.coeffs)

    def dv(self, x):
        return npoly.polyval(x, self._d1)

    def d2v(self, x):
        return npoly.polyval(x, self._d2)

    def minimizer(self) -> float:
        """Unique minimum of V, from the real roots of V'."""
        roots = npoly.polyroots(self._d1)
        real = roots[np.abs(roots.imag) < 1e-9].real
        if real.size == 0:
            return 0.0
        return float(real[np.argmin(self.v(real))])

    def _init_radius(self) -> float:
        x0 = 0.0
        for _ in range(50):  # crude Newton toward the minimum, guard-railed
            d2 = float(self.d2v(x0))
            if d2 <= 0:
                break
            step = float(self.dv(x0)) / d2
            x0 -= step
            if abs(step) < 1e-12:
                break
        kappa = max(float(self.d2v(x0)), 1e-6)
        return 2.0 / math.sqrt(kappa)

    def degree(self) -> int:
        return self.coeffs.size - 1

    def to_json(self) -> str:
        return json.dumps({"coeffs": list(map(float, self.coeffs))})

    @classmethod
    def from_json(cls, text: str) -> "Potential":
        return cls(np.asarray(json.loads(text)["coeffs"], dtype=float))

    @classmethod
    def gaussian(cls) -> "Potential":
        """V = x^2 / 2, the Gaussian reference ensemble."""
        return cls(np.array([0.0, 0.0, 0.5]))

    @classmethod
    def quartic(cls, g: float = 0.1, cubic: float = 0.0) -> "Potential":
        """V = x^2/2 + cubic*x^3 + g*x^4 (convex for g > 3*cubic^2/4)."""
        return cls(np.array([0.0, 0.0, 0.5, cubic, g]))


@dataclass
class EquilibriumSolution:
    """Solved equilibrium data: measure, Lagrange multiplier, residual."""

    measure: SpectralMeasure
    ell: float
    residual: float


def _t_coeffs(potential: Potential, u: float, delta: float) -> np.ndarray:
    """Chebyshev-T coefficients alpha_j of c -> V'(u + delta*c)."""
    shifted = npoly.Polynomial(potential._d1)(npoly.Polynomial([u, delta]))
    return nc.poly2cheb(shifted.coef)


def _endpoint_residual(potential: Potential, u: float, delta: float):
    alpha = _t_coeffs(potential, u, delta)
    a1 = alpha[1] if alpha.size > 1 else 0.0
    return np.array([alpha[0], delta * a1 - 4.0]), alpha


def solve_equilibrium(potential: Potential, tol: float = 1e-12) -> EquilibriumSolution:
    """Endpoints, density, and Lagrange multiplier for the one-cut measure.

    Damped 2D Newton on (center, halfwidth), initialized from the
    semicircle of matched curvature at the potential minimum.
    """
    tol = max(tol, 1e-12)
    u = potential.minimizer()
    delta = potential._init_radius()
    f, _ = _endpoint_residual(potential, u, delta)
    for _ in range(100):
        if np.max(np.abs(f)) < tol:
            break
        # finite-difference Jacobian; the map is smooth and well scaled
        eps = 1e-7 * max(1.0, delta)
        fu, _ = _endpoint_residual(potential, u + eps, delta)
        fd, _ = _endpoint_residual(potential, u, delta + eps)
        jac = np.column_stack([(fu - f) / eps, (fd - f) / eps])
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular endpoint Jacobian: {exc}")
        lam = 1.0
        for _ in range(40):
            nu_, nd = u + lam * step[0], delta + lam * step[1]
            if nd > 0:
                fn, _ = _endpoint_residual(potential, nu_, nd)
                if np.linalg.norm(fn) < np.linalg.norm(f):
                    u, delta, f = nu_, nd, fn
                    break
            lam *= 0.5
        else:
            raise ConvergenceError("endpoint Newton stalled while damping")
    else:
        raise ConvergenceError("endpoint Newton did not converge in 100 iterations")

    _, alpha = _endpoint_residual(potential, u, delta)
    dcoeffs = np.array([alpha[j] / (2.0 * np.pi * delta)
                        for j in range(1, alpha.size)])
    measure = SpectralMeasure(u - delta, u + delta, dcoeffs)

    ell = 2.0 * log_abs_integral(measure, measure.center) - float(potential.v(measure.center))
    nodes = measure.center + measure.half_width * np.cos(
        (2 * np.arange(1, 65) - 1) * np.pi / 128.0)
    res = max(abs(float(potential.v(x)) - 2.0 * log_abs_integral(measure, x) + ell)
              for x in nodes)
    return EquilibriumSolution(measure=measure, ell=ell, residual=res)


# ---------------------------------------------------------------------------
# integrated branch functions
# ---------------------------------------------------------------------------

def _log_mode_sum(measure: SpectralMeasure, w):
    """sum over modes of d_j (w^(j+2)/(j+2) - [j>=1] w^j / j), times pi*hw^2/2."""
    total = 0.0j
    wj = 1.0 + 0.0j
    for j, d in enumerate(measure.density_coeffs):
        term = w ** (j + 2) / (j + 2)
        if j >= 1:
            term -= wj / j
        total += d * term
        wj *= w
    return (np.pi * measure.half_width ** 2 / 2.0) * total


def big_G(solution: EquilibriumSolution, z) -> complex:
    """G(z) = int log(z - x) dnu(x) with the principal logarithm.

    Defined off the cut (-inf, b); real for real z >= b.  Obtained by
    integrating the mode expansion of g along the Joukowski variable.
    """
    measure = solution.measure
    z = complex(z)
    if z.imag == 0.0 and z.real < measure.b:
        raise DomainError("real z < b lies on the logarithmic cut")
    w = _joukowski_w(measure.scaled(z))
    val = math.log(measure.half_width / 2.0) - cmath.log(w) + _log_mode_sum(measure, w)
    # the j = 0 mode contributes d_0 w^2/2 inside the sum and -log w above
    if z.imag == 0.0:
        return complex(val.real, 0.0)
    return val


def log_abs_integral(measure: SpectralMeasure, x: float) -> float:
    """int log|x - y| dnu(y) for any real x, including points on the support.

    Real part of the analytic continuation of G; on the support the
    Joukowski variable sits on the unit circle and the mode sum reduces to
    Chebyshev-T values.
    """
    t = float(measure.scaled(x))
    if -1.0 <= t <= 1.0:
        w = cmath.exp(-1j * math.acos(t))
    else:
        w = _joukowski_w(t)
    val = math.log(measure.half_width / 2.0) - math.log(abs(w)) \
        + _log_mode_sum(measure, w).real
    return float(val)


def big_H(solution: EquilibriumSolution, potential: Potential, z: float) -> float:
    """Second integrated branch H(z) = V(z) - G(z) + ell, for real z off [a, b].

    Uses the real log-kernel integral so the z < a side stays real; its
    derivative is the h branch, and H meets G at both endpoints.
    """
    measure = solution.measure
    if measure.a < z < measure.b:
        raise DomainError("z lies inside the support")
    return float(potential.v(z)) - log_abs_integral(measure, z) + solution.ell


def euler_lagrange_residual(solution: EquilibriumSolution, potential: Potential,
                            x: float) -> float:
    """V(x) - 2 int log|x-y| dnu(y) + ell, which vanishes on the support."""
    return (float(potential.v(x))
            - 2.0 * log_abs_integral(solution.measure, x) + solution.ell)
