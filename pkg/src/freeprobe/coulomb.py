"""Finite-N engines: Metropolis log-gas sampler, the rank-one projective
integral, orthogonal polynomials for exp(-N V), and characteristic-function
estimators.

Exponentially large and small quantities never appear as raw floats: the
localization sum, determinant averages, and Laplace integrands are carried
as (sign, log magnitude) pairs and combined with streaming log-sum-exp.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import Potential
from .errors import ConfigError, DegeneracyError, PrecisionError
from .util import batch_means, signed_logsumexp

BURN_IN_FACTOR = 10          # burn-in sweeps per particle
ACCEPT_LOW, ACCEPT_HIGH = 0.3, 0.5
CACHE_CHECK_EVERY = 100      # sweeps between log-weight cache audits

_SERIES_KSPREAD = 30.0       # |k|*(max-min) below which the series route is exact
_MAX_DIGIT_LOSS = 12.0       # beyond this the critical-point sum defers to Opitz


def _f2h(x: float) -> str:
    return struct.pack("<d", float(x)).hex()


def _h2f(s: str) -> float:
    return struct.unpack("<d", bytes.fromhex(s))[0]


# ---------------------------------------------------------------------------
# Metropolis engine (vectorized over independent chains)
# ---------------------------------------------------------------------------

class LogGas:
    """Independent Metropolis chains over n-particle log-gas configurations.

    Targets prod |x_i - x_j|^2 * prod exp(-scale * V(x_l)); single-particle
    Gaussian proposals, step adapted to 30-50% acceptance during burn-in and
    frozen afterwards.  All chains advance in lockstep from one seeded
    generator, so a run is reproducible bit for bit.
    """

    def __init__(self, potential: Potential, n_particles: int, scale: float,
                 n_chains: int, seed, step: float | None = None):
        if n_particles < 1:
            raise ConfigError("need at least one particle")
        self.potential = potential
        self.n = n_particles
        self.scale = float(scale)
        self.rng = np.random.default_rng(seed)
        radius = potential._init_radius()
        center = potential.minimizer()
        self.x = center + radius * self.rng.uniform(-1.0, 1.0, size=(n_chains, n_particles))
        self.step = step if step is not None else max(0.02, 2.0 / n_particles) * radius
        self.step_frozen = step is not None
        self.sweeps_done = 0
        self.accepted = 0
        self.proposed = 0
        self._win_acc = 0
        self._win_prop = 0
        self.log_weight = self._log_weight_full()
        self.max_cache_drift = 0.0

    def _log_weight_full(self):
        diffs = np.abs(self.x[:, :, None] - self.x[:, None, :])
        iu = np.triu_indices(self.n, 1)
        pair = (np.log(diffs[:, iu[0], iu[1]]).sum(axis=1)
                if self.n > 1 else np.zeros(self.x.shape[0]))
        return 2.0 * pair - self.scale * self.potential.v(self.x).sum(axis=1)

    def sweep(self):
        x, n = self.x, self.n
        chains = x.shape[0]
        props = self.rng.standard_normal((n, chains)) * self.step
        us = np.log(self.rng.random((n, chains)))
        vp = self.potential.v
        for i in range(n):
            old = x[:, i]
            new = old + props[i]
            if n > 1:
                dn = np.abs(new[:, None] - x)
                do = np.abs(old[:, None] - x)
                dn[:, i] = 1.0
                do[:, i] = 1.0
                dlog = 2.0 * (np.log(dn).sum(axis=1) - np.log(do).sum(axis=1))
            else:
                dlog = np.zeros(chains)
            dlog = dlog - self.scale * (vp(new) - vp(old))
            acc = us[i] < dlog
            x[acc, i] = new[acc]
            self.log_weight[acc] += dlog[acc]
            na = int(acc.sum())
            self.accepted += na
            self.proposed += chains
            self._win_acc += na
            self._win_prop += chains
        self.sweeps_done += 1
        if self.sweeps_done % CACHE_CHECK_EVERY == 0:
            drift = float(np.max(np.abs(self.log_weight - self._log_weight_full())))
            self.max_cache_drift = max(self.max_cache_drift, drift)

    def run(self, sweeps: int, adapt: bool = False):
        window = 20
        for s in range(sweeps):
            self.sweep()
            if adapt and not self.step_frozen and (s + 1) % window == 0:
                rate = self._win_acc / max(1, self._win_prop)
                if rate < ACCEPT_LOW:
                    self.step *= 0.8
                elif rate > ACCEPT_HIGH:
                    self.step *= 1.25
                self._win_acc = self._win_prop = 0

    def burn_in(self):
        self.run(BURN_IN_FACTOR * self.n, adapt=True)
        self.accepted = self.proposed = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / max(1, self.proposed)

    def samples(self, count: int, thin: int = 2):
        """Yield (chains, n) eigenvalue snapshots every `thin` sweeps."""
        for _ in range(count):
            self.run(thin)
            yield self.x


@dataclass
class CoulombChain:
    """Public single-chain state with acceptance and batch-means bookkeeping."""

    eigs: np.ndarray
    potential: Potential
    beta_log_weight: float
    rng_seed: int
    acceptance_rate: float
    batch_means: list = field(default_factory=list)
    sweeps_done: int = 0
    max_cache_drift: float = 0.0
    _engine: LogGas | None = None

    def measure(self, observable, samples: int, thin: int = 2, batches: int = 50):
        """(mean, stderr) of a scalar observable along the chain; stores batch means."""
        vals = []
        for snap in self._engine.samples(samples, thin):
            vals.append(float(observable(snap[0])))
        mean, err, per = batch_means(np.asarray(vals), batches)
        self.batch_means = list(per)
        self._sync()
        return mean, err

    def _sync(self):
        self.eigs = self._engine.x[0].copy()
        self.beta_log_weight = float(self._engine.log_weight[0])
        self.acceptance_rate = self._engine.acceptance_rate
        self.sweeps_done = self._engine.sweeps_done
        self.max_cache_drift = self._engine.max_cache_drift

    def to_json(self) -> str:
        return json.dumps({
            "seed": self.rng_seed,
            "sweeps": self.sweeps_done,
            "eigs": [_f2h(v) for v in self.eigs],
        })

    @classmethod
    def from_json(cls, text: str, potential: Potential) -> "CoulombChain":
        d = json.loads(text)
        eigs = np.array([_h2f(h) for h in d["eigs"]])
        return cls(eigs=eigs, potential=potential, beta_log_weight=0.0,
                   rng_seed=d["seed"], acceptance_rate=0.0,
                   sweeps_done=d["sweeps"])


def sample_chain(potential: Potential, N: int, sweeps: int, seed) -> CoulombChain:
    """Burnt-in Metropolis chain over N eigenvalues with weight exp(-N V).

    Burn-in of 10*N sweeps is run and discarded before the requested
    measurement sweeps; identical seeds reproduce identical trajectories.
    """
    if N < 2:
        raise ConfigError("need N >= 2")
    if sweeps < 1:
        raise ConfigError("need sweeps >= 1")
    engine = LogGas(potential, N, float(N), n_chains=1, seed=seed)
    engine.burn_in()
    engine.run(sweeps)
    chain = CoulombChain(eigs=engine.x[0].copy(), potential=potential,
                         beta_log_weight=float(engine.log_weight[0]),
                         rng_seed=seed, acceptance_rate=engine.acceptance_rate,
                         _engine=engine)
    chain._sync()
    return chain


# ---------------------------------------------------------------------------
# rank-one projective-space integral
# ---------------------------------------------------------------------------

def _dh_series(x: np.ndarray, k: float):
    """Divided-difference series: dh = (N-1)! sum_t k^t h_t(x) / (N-1+t)!.

    h_t are complete homogeneous symmetric polynomials; terms are bounded by
    (|k| max|x|)^t / t!, so the sum converges fast and never overflows once
    the nodes are centered.
    """
    n = x.size
    mu = float(x.mean())
    y = x - mu
    # terms are bounded by (|k| max|y|)^t / t!; size the table accordingly
    kspan = abs(k) * float(np.max(np.abs(y)))
    hmax = min(400, int(3 * kspan) + 40)
    # cumulative DP: h_t(y_1..y_j) = h_t(y_1..y_{j-1}) + y_j h_{t-1}(y_1..y_j)
    h = np.zeros(hmax + 1)
    h[0] = 1.0
    for yj in y:
        for t in range(1, hmax + 1):
            h[t] += yj * h[t - 1]
    total = 0.0
    f = 1.0
    for t in range(hmax + 1):
        total += f * h[t]
        f *= k / (n + t)
    if total == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, total), math.log(abs(total)) + k * mu


def _dh_localized(x: np.ndarray, k: float):
    """Localization sum over critical points in (sign, log) form.

    Returns None when the alternating sum cancels so deeply that doubles
    cannot represent the result; the caller then switches to the stable
    matrix route.
    """
    n = x.size
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, 1.0)
    logs = k * x - np.log(np.abs(d)).sum(axis=1)
    signs = np.where((d < 0).sum(axis=1) % 2 == 0, 1.0, -1.0)
    sgn, logsum = signed_logsumexp(logs, signs)
    loss = (float(np.max(logs)) - logsum) / math.log(10.0)
    if sgn == 0.0 or loss > _MAX_DIGIT_LOSS:
        return None
    sign_k = 1.0 if k > 0 or (n - 1) % 2 == 0 else -1.0
    return sgn * sign_k, math.lgamma(n) - (n - 1) * math.log(abs(k)) + logsum


def _dh_opitz(x: np.ndarray, k: float):
    """Divided difference of exp via its bidiagonal matrix representation.

    Every entry of exp of the bidiagonal node matrix is itself a divided
    difference of the exponential, hence positive; the squarings in the
    scaling-and-squaring evaluation therefore sum positive terms and keep
    relative accuracy at any cancellation depth.  dh = (N-1)! * dd.
    O(N^3 log) per call, used only where the direct sum loses precision.
    """
    n = x.size
    y = k * x
    mu = float(y.mean())
    d = y - mu
    a = np.diag(d) + np.diag(np.ones(n - 1), 1)
    s = max(0, int(math.ceil(math.log2(float(np.max(np.abs(d))) + 1.0))))
    b = a / (2.0 ** s)
    t = np.eye(n)
    term = np.eye(n)
    for m in range(1, 80):
        term = term @ b / m
        t = t + term
        if float(np.max(np.abs(term))) < 1e-20 * float(np.max(np.abs(t))):
            break
    sigma = 0.0
    for _ in range(s):
        t = t @ t
        sigma *= 2.0
        peak = float(np.max(t))
        t /= peak
        sigma += math.log(peak)
    entry = float(t[0, n - 1])
    if entry <= 0.0:
        raise PrecisionError("matrix divided difference underflowed")
    return 1.0, math.lgamma(n) + mu + sigma + math.log(entry)


def dh_rank_one_signed_log(x, k: float):
    """(sign, log) of the normalized rank-one spherical integral.

    Small |k| uses the symmetric-function series (the localization sum
    cancels catastrophically there); large |k| uses the critical-point sum
    with log-sum-exp.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        raise ConfigError("need at least one eigenvalue")
    if n == 1:
        return 1.0, k * float(x[0])
    xs = np.sort(x)
    if float(np.min(np.diff(xs))) <= 1e-12:
        raise DegeneracyError("coincident eigenvalues; perturb the configuration")
    if k == 0.0:
        return 1.0, 0.0
    spread = float(xs[-1] - xs[0])
    if abs(k) * spread <= _SERIES_KSPREAD:
        return _dh_series(x, k)
    direct = _dh_localized(x, k)
    if direct is not None:
        return direct
    return _dh_opitz(x, k)


def dh_rank_one(x, k: float) -> float:
    """Normalized projective-space integral; equals 1 at k = 0.

    Evaluates (N-1)! k^(1-N) sum_i exp(k x_i) / prod_{j != i} (x_i - x_j)
    through the stable signed-log routes.  Values beyond float range come
    back as +-inf; use dh_rank_one_signed_log for log-scale work.
    """
    sgn, lg = dh_rank_one_signed_log(x, k)
    if lg > 709.0:
        return math.inf * sgn
    return sgn * math.exp(lg)


# ---------------------------------------------------------------------------
# Monte-Carlo characteristic function (rank one, commuting sector)
# ---------------------------------------------------------------------------

def mc_char_rank1(potential: Potential, N: int, k: float, *, samples: int = 400,
                  thin: int = 2, n_chains: int = 16, seed=None,
                  batches: int = 50):
    """(estimate, stderr) of (1/N) log of the ensemble-averaged rank-one integral.

    Chain samples feed the localization sum at argument N*k; the average is
    taken in log space with streaming log-sum-exp, and the error bar comes
    from batch means of per-batch log averages.
    """
    if seed is None:
        raise ConfigError("a seed is required for stochastic estimators")
    if k == 0.0:
        return 0.0, 0.0
    engine = LogGas(potential, N, float(N), n_chains=n_chains, seed=seed)
    engine.burn_in()
    per_chain = max(2, samples // n_chains)
    logs = np.empty((per_chain, n_chains))
    for s, snap in enumerate(engine.samples(per_chain, thin)):
        for c in range(n_chains):
            sgn, lg = dh_rank_one_signed_log(snap[c], N * k)
            if sgn <= 0.0:
                raise PrecisionError("projective integral lost positivity")
            logs[s, c] = lg

    def log_mean(block):
        _, total = signed_logsumexp(block.ravel())
        return (total - math.log(block.size)) / N

    estimate = log_mean(logs)
    nb = max(2, min(batches, per_chain))
    edges = np.linspace(0, per_chain, nb + 1, dtype=int)
    per = np.array([log_mean(logs[lo:hi]) for lo, hi in zip(edges[:-1], edges[1:])])
    stderr = float(per.std(ddof=1) / math.sqrt(nb))
    return float(estimate), stderr


# ---------------------------------------------------------------------------
# orthogonal polynomials for the weight exp(-N V)
# ---------------------------------------------------------------------------

@dataclass
class OrthoPolySet:
    """Monic three-term recurrence pi_{j+1} = (x - alpha_j) pi_j - beta_j pi_{j-1}.

    betas[0] is an unused placeholder (the recurrence starts subtracting at
    degree 2); log_mass is the log of the weight's total mass, and
    orthogonality_defect the largest deviation of the normalized Gram matrix
    from the identity on the build grid.
    """

    alphas: np.ndarray
    betas: np.ndarray
    max_degree: int
    N: int
    log_mass: float
    orthogonality_defect: float

    def eval_monic(self, degree: int, s):
        """pi_degree(s); plain recurrence, safe for moderate degrees."""
        s = np.asarray(s, dtype=float)
        pm, p = np.zeros_like(s), np.ones_like(s)
        for j in range(degree):
            pm, p = p, (s - self.alphas[j]) * p - (self.betas[j] if j else 0.0) * pm
        return p

    def eval_log(self, degree: int, s: float):
        """(sign, log|pi_degree(s)|) via a rescaled recurrence."""
        pm, p, lg = 0.0, 1.0, 0.0
        for j in range(degree):
            nxt = (s - self.alphas[j]) * p - (self.betas[j] if j else 0.0) * pm
            pm, p = p, nxt
            m = max(abs(p), abs(pm))
            if m > 1e100 or (0.0 < m < 1e-100):
                pm /= m
                p /= m
                lg += math.log(m)
        if p == 0.0:
            return 0.0, -math.inf
        return math.copysign(1.0, p), lg + math.log(abs(p))


def _stieltjes(nodes, weights, degree):
    """Recurrence coefficients by the Stieltjes procedure on a fixed grid.

    Runs on normalized polynomial values (Lanczos-style), so grid values
    stay O(1) at every degree.  Returns alphas[j] = alpha_j for j < degree
    and betas[j] = beta_j = |pi_j|^2 / |pi_{j-1}|^2 for 1 <= j < degree,
    with betas[0] = 0 as a placeholder.
    """
    mass = float(weights.sum())
    alphas = np.empty(degree)
    betas = np.zeros(degree)
    phat_m = np.zeros_like(nodes)
    phat = np.ones_like(nodes) / math.sqrt(mass)
    kept = [phat.copy()]
    for j in range(degree):
        alphas[j] = float(np.sum(weights * nodes * phat * phat))
        q = (nodes - alphas[j]) * phat - (math.sqrt(betas[j]) if j else 0.0) * phat_m
        norm2 = float(np.sum(weights * q * q))
        if norm2 <= 0.0:
            raise PrecisionError(
                f"lost positivity at degree {j + 1}; increase quadrature order")
        if j + 1 < degree:
            betas[j + 1] = norm2
        phat_m, phat = phat, q / math.sqrt(norm2)
        kept.append(phat.copy())
    return alphas, betas, mass, kept


def build_ortho_polys(potential: Potential, N: int, max_degree: int,
                      start_nodes: int | None = None) -> OrthoPolySet:
    """Stieltjes recurrence for the weight exp(-N V) on a doubling Gauss grid.

    Gauss-Legendre nodes on a bracket chosen so the discarded tails are
    beyond 10^-35 of the largest integrand; node count doubles until the
    recurrence coefficients move by less than 1e-12.
    """
    if max_degree > 2 * N:
        raise ConfigError("max_degree above 2N exceeds the quadrature accuracy bound")
    if max_degree < 1:
        raise ConfigError("need max_degree >= 1")
    vmin_x = potential.minimizer()
    vmin = float(potential.v(vmin_x))
    radius = potential._init_radius()

    def far_enough(c):
        poly_growth = 4.0 * max_degree * math.log1p(abs(c - vmin_x) / max(radius, 1e-3))
        return N * (float(potential.v(c)) - vmin) - poly_growth > 80.0

    lo, hi = vmin_x - 2.0 * radius, vmin_x + 2.0 * radius
    while not far_enough(lo):
        lo = vmin_x - 1.25 * (vmin_x - lo)
    while not far_enough(hi):
        hi = vmin_x + 1.25 * (hi - vmin_x)

    q = start_nodes or max(4 * N, 2 * max_degree + 32, 128)
    prev = None
    while q <= (1 << 16):
        t, w = np.polynomial.legendre.leggauss(q)
        nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t
        weights = 0.5 * (hi - lo) * w * np.exp(-N * (potential.v(nodes) - vmin))
        alphas, betas, mass, kept = _stieltjes(nodes, weights, max_degree)
        if prev is not None:
            move = max(np.max(np.abs(alphas - prev[0])),
                       np.max(np.abs(betas - prev[1])))
            if move < 1e-12 * max(1.0, float(np.max(np.abs(betas)))):
                gram = np.array(kept) * np.sqrt(weights)
                g = gram @ gram.T
                defect = float(np.max(np.abs(g - np.eye(g.shape[0]))))
                if defect > 1e-8:
                    raise PrecisionError(
                        f"orthogonality defect {defect:.2e}; increase quadrature order")
                return OrthoPolySet(alphas=alphas, betas=betas,
                                    max_degree=max_degree, N=N,
                                    log_mass=math.log(mass) - N * vmin,
                                    orthogonality_defect=defect)
        prev = (alphas, betas)
        q *= 2
    raise PrecisionError("quadrature did not stabilize the recurrence")


# ---------------------------------------------------------------------------
# average characteristic polynomial versus the recurrence polynomial
# ---------------------------------------------------------------------------

def avg_char_poly_check(potential: Potential, N: int, t_grid, *,
                        samples: int = 10 ** 6, seed=None, n_chains: int = 512,
                        batches: int = 50):
    """Largest |MC - recurrence| / stderr over t_grid.

    The Monte-Carlo side averages prod_l (t - x_l) over the (N-1)-particle
    gas carrying the N-scaled weight; the exact side is the monic
    recurrence polynomial of degree N-1 for the same weight.
    """
    if N > 8:
        raise ConfigError("determinant averaging is capped at N = 8")
    if seed is None:
        raise ConfigError("a seed is required for stochastic estimators")
    t_grid = np.asarray(t_grid, dtype=float)
    ops = build_ortho_polys(potential, N, N - 1)
    exact = ops.eval_monic(N - 1, t_grid)

    engine = LogGas(potential, N - 1, float(N), n_chains=n_chains, seed=seed)
    engine.burn_in()
    per_chain = max(2, samples // n_chains)
    acc = np.empty((per_chain, t_grid.size))
    for s, snap in enumerate(engine.samples(per_chain, thin=2)):
        prods = np.prod(t_grid[None, :, None] - snap[:, None, :], axis=2)
        acc[s] = prods.mean(axis=0)
    worst = 0.0
    for j in range(t_grid.size):
        mean, err, _ = batch_means(acc[:, j], batches)
        worst = max(worst, abs(mean - exact[j]) / max(err, 1e-300))
    return worst


# ---------------------------------------------------------------------------
# deterministic characteristic function (anticommuting sector)
# ---------------------------------------------------------------------------

_ORTHO_CACHE: dict = {}


def _cached_polys(potential: Potential, N: int) -> OrthoPolySet:
    key = (potential.coeffs.tobytes(), N)
    if key not in _ORTHO_CACHE:
        _ORTHO_CACHE[key] = build_ortho_polys(potential, N, N)
    return _ORTHO_CACHE[key]


def fermionic_char(potential: Potential, N: int, k: float) -> float:
    """(1/N) log of the determinant-averaged transform at argument N*k.

    Averages of det(t - k H) reduce to the degree-N monic recurrence
    polynomial, leaving a scalar Laplace integral over t that is evaluated
    in log space around its peak; the factorial prefactor enters through
    lgamma.
    """
    if k == 0.0:
        raise ConfigError("k = 0 is excluded; the value there is 0 by normalization")
    if N > 256:
        raise ConfigError("N is capped at 256")
    ops = _cached_polys(potential, N)

    def logf(t):
        sgn, lg = ops.eval_log(N, t / k)
        return sgn, lg + N * math.log(abs(k)) - N * t

    # bracket the peak of |integrand| on a log-spaced + linear scan
    grid = np.concatenate([np.geomspace(1e-8, 1.0, 40),
                           np.linspace(1.0, max(4.0, 8.0 * abs(k)), 120)])
    vals = np.array([logf(t)[1] for t in grid])
    t0 = float(grid[np.argmax(vals)])
    # refine and take a curvature-based window
    for _ in range(60):
        step = 0.05 * t0
        cand = [t0 - step, t0, t0 + step]
        best = max(cand, key=lambda t: logf(t)[1] if t > 0 else -math.inf)
        if best == t0:
            break
        t0 = best
    h = max(1e-5, 1e-4 * t0)
    curv = (logf(t0 + h)[1] - 2 * logf(t0)[1] + logf(t0 - h)[1]) / h ** 2
    width = 1.0 / math.sqrt(-curv) if curv < 0 else 0.5 * t0
    lo, hi = max(1e-12, t0 - 12 * width), t0 + 12 * width
    peak = logf(t0)[1]
    while logf(hi)[1] > peak - 45.0:
        hi += 10 * width
    while lo > 1e-12 and logf(lo)[1] > peak - 45.0:
        lo = max(1e-12, lo - 10 * width)

    gl_t, gl_w = np.polynomial.legendre.leggauss(240)
    tt = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gl_t
    signs = np.empty_like(tt)
    lgs = np.empty_like(tt)
    for i, t in enumerate(tt):
        signs[i], lgs[i] = logf(t)
    lgs += np.log(0.5 * (hi - lo) * gl_w)
    sgn, total = signed_logsumexp(lgs, signs)
    if sgn <= 0:
        raise PrecisionError("Laplace quadrature lost its sign")
    stirling = (N + 1) * math.log(N) - math.lgamma(N + 1)
    return (stirling + total) / N
