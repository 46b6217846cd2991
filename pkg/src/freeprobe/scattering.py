"""Stochastic scattering with resolvent-coupled channels.

The scattering matrix S(E) = Id - 2i W^+ (E - H + i W W^+)^{-1} W is
evaluated two ways: a dense solve for explicit Hamiltonians, and a
channel-reduced form for ensemble runs, where invariance lets the Haar
conjugation act on the coupling instead of the matrix.  With K(E) =
Z^+ (E - X)^{-1} Z built from the eigenvalue configuration X and the
rotated coupling Z, the Cayley form S = (1 - iK)(1 + iK)^{-1} gives the
same matrix at O(N M^2) cost per energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .coulomb import LogGas
from .equilibrium import EquilibriumSolution, Potential, solve_equilibrium
from .util import run_jobs
from .errors import ConfigError, EdgeError, MatchingError, NumericError
from .transforms import SpectralMeasure, g_boundary


# ---------------------------------------------------------------------------
# model and domain types
# ---------------------------------------------------------------------------

@dataclass
class ScatteringModel:
    """Channel count, internal dimension, coupling matrix, and ensemble choice."""

    N: int
    M: int
    W: np.ndarray
    E: float
    potential: Potential

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        if self.W.shape != (self.N, self.M):
            raise ConfigError("W must be N x M")
        if self.M > 8:
            raise ConfigError("channel count is capped at 8")
        if self.N < 16 * self.M:
            raise ConfigError("need N >= 16 M for the channel-reduced evaluators")
        gram = self.W.T @ self.W
        if np.max(np.abs(gram - np.diag(np.diag(gram)))) > 1e-12:
            raise ConfigError("coupling columns must be orthogonal")

    @property
    def channel_strengths(self) -> np.ndarray:
        return np.sqrt(np.diag(self.W.T @ self.W))

    def with_scales(self, scales) -> "ScatteringModel":
        return ScatteringModel(self.N, self.M, self.W * np.asarray(scales)[None, :],
                               self.E, self.potential)

    @classmethod
    def diagonal_coupling(cls, N: int, M: int, strengths, E: float,
                          potential: Potential) -> "ScatteringModel":
        """Coupling on the first M basis vectors with the given strengths."""
        w = np.zeros((N, M))
        for a, s in enumerate(strengths):
            w[a, a] = s
        return cls(N, M, w, E, potential)


@dataclass
class CorrelationEstimate:
    """One epsilon point of the element-element correlation function."""

    value: complex
    stderr: float
    epsilon: float
    channels: tuple

    def __post_init__(self):
        if not (self.stderr > 0 and np.isfinite(self.value)):
            raise NumericError("correlation estimate must be finite with stderr > 0")


@dataclass
class SaddlePair:
    """Conjugate pair of scalar saddle values at bulk energy z."""

    g_plus: complex
    g_minus: complex
    z: float
    residual: float = field(default=0.0)

    def __post_init__(self):
        if not (self.g_plus.real == self.g_minus.real
                and self.g_plus.imag == -self.g_minus.imag
                and self.g_plus.imag < 0):
            raise NumericError("saddle pair must be conjugate with Im g_plus < 0")


# ---------------------------------------------------------------------------
# scattering matrix
# ---------------------------------------------------------------------------

def s_matrix(h: np.ndarray, w: np.ndarray, e: float) -> np.ndarray:
    """Dense-resolvent scattering matrix; unitary for Hermitian h and real e."""
    n = h.shape[0]
    a = e * np.eye(n, dtype=complex) - h + 1j * (w @ w.T.conj())
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericError(f"resolvent condition estimate {cond:.2e} exceeds 1e12")
    lu = lu_factor(a)
    return np.eye(w.shape[1], dtype=complex) - 2j * (w.T.conj() @ lu_solve(lu, w.astype(complex)))


def _s_reduced(x: np.ndarray, z: np.ndarray, e: float) -> np.ndarray:
    """Channel-reduced S(E) from eigenvalues x and rotated coupling z."""
    k = (z.conj().T / (e - x)) @ z
    m = z.shape[1]
    eye = np.eye(m, dtype=complex)
    return np.linalg.solve((eye + 1j * k).T, (eye - 1j * k).T).T


def unitarity_defect(s: np.ndarray) -> float:
    return float(np.max(np.abs(s @ s.conj().T - np.eye(s.shape[0]))))


# ---------------------------------------------------------------------------
# ensemble sampling
# ---------------------------------------------------------------------------

def haar_unitary(n: int, rng) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    g = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))


def haar_frame(n: int, m: int, rng) -> np.ndarray:
    """First m columns of a Haar unitary (uniform orthonormal frame)."""
    g = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / math.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))


def sample_hamiltonian(potential: Potential, N: int, chain_params: dict | None,
                       seed) -> np.ndarray:
    """One invariant-ensemble Hamiltonian: chain eigenvalues, Haar rotated."""
    params = dict(chain_params or {})
    sweeps = params.get("sweeps", 4 * N)
    ss = np.random.SeedSequence(seed)
    chain_seed, haar_seed = ss.spawn(2)
    engine = LogGas(potential, N, float(N), n_chains=1, seed=chain_seed)
    engine.burn_in()
    engine.run(sweeps)
    u = haar_unitary(N, np.random.default_rng(haar_seed))
    return (u * engine.x[0]) @ u.conj().T


def sample_hamiltonians(potential: Potential, N: int, count: int, seed, *,
                        n_chains: int = 64, thin: int = 2) -> np.ndarray:
    """Stack of invariant-ensemble Hamiltonians from vectorized chains.

    Eigenvalue rows come from parallel Metropolis chains; each row is
    conjugated by an independent Haar unitary drawn via batched QR.
    """
    chain_seed, haar_seed = np.random.SeedSequence(seed).spawn(2)
    engine = LogGas(potential, N, float(N), n_chains=n_chains, seed=chain_seed)
    engine.burn_in()
    rows = []
    need = max(1, count // n_chains)
    for snap in engine.samples(need, thin):
        rows.append(snap.copy())
    x = np.concatenate(rows, axis=0)[:count]
    rng = np.random.default_rng(haar_seed)
    g = (rng.standard_normal((x.shape[0], N, N))
         + 1j * rng.standard_normal((x.shape[0], N, N))) / math.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.einsum("sii->si", r)
    q = q * (d / np.abs(d))[:, None, :]
    return np.einsum("sij,sj,skj->sik", q, x, q.conj())


# ---------------------------------------------------------------------------
# spectral helpers
# ---------------------------------------------------------------------------

def solve_saddle_scalar(potential: Potential, solution: EquilibriumSolution,
                        z: float) -> SaddlePair:
    """Conjugate solutions of q + R-shifted inversion q^{-1} + R(q) = z.

    g_plus is the boundary value of the Cauchy transform from above
    (Im < 0); the residual is the distance |g^{-1}(q) - z| measured by an
    independent complex Newton inversion of the mode series.
    """
    measure = solution.measure
    if not measure.a < z < measure.b:
        raise EdgeError("z outside the bulk: the saddle orbit degenerates")
    gp = g_boundary(measure, z, side="upper")
    if not gp.imag < 0:
        raise EdgeError("vanishing density at z; saddle pair degenerates")
    pair = SaddlePair(g_plus=gp, g_minus=gp.conjugate(), z=z,
                      residual=_inversion_residual(measure, gp, z))
    return pair


def _inversion_residual(measure: SpectralMeasure, q: complex, z: float) -> float:
    """Distance from z to the nearest functional-inverse image of q.

    The Cauchy transform is a polynomial in the Joukowski variable, so its
    full inverse is a polynomial root set; this is an independent check that
    1/q + R(q) recovers z for the boundary value q.
    """
    delta = measure.half_width
    coeffs = [-complex(q)] + [np.pi * delta * d for d in measure.density_coeffs]
    roots = np.roots(list(reversed(coeffs)))
    roots = roots[np.abs(roots) > 1e-12]
    cands = measure.center + delta * 0.5 * (roots + 1.0 / roots)
    return float(np.min(np.abs(cands - z)))


def unfold_epsilon(solution: EquilibriumSolution, z: float,
                   epsilon_physical: float, N: int) -> float:
    """Energy offset in units of the local mean level spacing 1/(N nu(z))."""
    nu = float(solution.measure.density(z))
    if not solution.measure.a < z < solution.measure.b or nu <= 1e-12:
        raise EdgeError("z must sit in the bulk with positive density")
    return epsilon_physical * N * nu


def mean_level_spacing(solution: EquilibriumSolution, z: float, N: int) -> float:
    nu = float(solution.measure.density(z))
    if nu <= 1e-12:
        raise EdgeError("vanishing density; no spacing scale")
    return 1.0 / (N * nu)


# ---------------------------------------------------------------------------
# Monte-Carlo correlation functions
# ---------------------------------------------------------------------------

GROUP_CHAINS = 16   # chains per group; fixed so results never depend on threads


def _corr_group_worker(job):
    """One group of chains: burn in, thin, and evaluate S at every energy."""
    (coeffs, n_dim, n_ch, strengths, energies, per_chain, thin, seed) = job
    potential = Potential(np.asarray(coeffs))
    chain_seed, frame_seed = seed.spawn(2)
    engine = LogGas(potential, n_dim, float(n_dim), n_chains=GROUP_CHAINS,
                    seed=chain_seed)
    engine.burn_in()
    rng = np.random.default_rng(frame_seed)
    strengths = np.asarray(strengths)
    smats = np.empty((per_chain * GROUP_CHAINS, len(energies), n_ch, n_ch),
                     dtype=complex)
    defect = 0.0
    idx = 0
    for snap in engine.samples(per_chain, thin):
        for c in range(GROUP_CHAINS):
            x = snap[c]
            zc = haar_frame(n_dim, n_ch, rng) * strengths[None, :]
            for i, e in enumerate(energies):
                s = _s_reduced(x, zc, e)
                smats[idx, i] = s
                defect = max(defect, unitarity_defect(s))
            idx += 1
    return smats, defect, engine.acceptance_rate


def _correlation_run(model: ScatteringModel, energy_pairs, samples: int, seed,
                     n_chains: int = 32, thin: int = 2, threads: int = 1):
    """Sampled S matrices at every energy appearing in energy_pairs.

    Returns (smats, energies, worst unitarity defect, acceptance rate) with
    smats of shape (samples, energies, M, M).  Chains run in fixed groups
    with seeds spawned per group, so results are identical for any thread
    count and can optionally run in parallel processes.
    """
    energies = sorted({e for pair in energy_pairs for e in pair})
    n_groups = max(1, n_chains // GROUP_CHAINS)
    per_chain = max(1, -(-samples // (n_groups * GROUP_CHAINS)))
    seeds = np.random.SeedSequence(seed).spawn(n_groups)
    jobs = [(model.potential.coeffs, model.N, model.M,
             model.channel_strengths, energies, per_chain, thin, s)
            for s in seeds]
    results = run_jobs(_corr_group_worker, jobs, threads)
    smats = np.concatenate([r[0] for r in results], axis=0)
    defect = max(r[1] for r in results)
    acc = float(np.mean([r[2] for r in results]))
    return smats, energies, defect, acc


def _estimate_from_smats(smats, energies, pair, channels):
    a, b, c, d = channels
    i1 = energies.index(pair[0])
    i2 = energies.index(pair[1])
    t1 = smats[:, i1, a, b] - (1.0 if a == b else 0.0)
    t2 = smats[:, i2, c, d] - (1.0 if c == d else 0.0)
    # t1 * conj(t2) written out in reals, so that swapping the two factors
    # conjugates the estimator exactly (vectorized complex multiplication is
    # not operand-order symmetric at the last bit)
    re = t1.real * t2.real + t1.imag * t2.imag
    im = t1.imag * t2.real - t1.real * t2.imag
    return re + 1j * im


def _batched_complex(values, batches: int = 50):
    n = values.size
    nb = max(2, min(batches, n // 2))
    edges = np.linspace(0, n, nb + 1, dtype=int)
    per = np.array([values[lo:hi].mean() for lo, hi in zip(edges[:-1], edges[1:])])
    err = math.sqrt(per.real.var(ddof=1) + per.imag.var(ddof=1)) / math.sqrt(nb)
    return complex(values.mean()), float(err)


def mc_s_correlation(model: ScatteringModel, epsilon_grid, samples: int, seed,
                     *, channels=(0, 0, 0, 0), n_chains: int = 32, thin: int = 2,
                     solution: EquilibriumSolution | None = None,
                     batches: int = 50, threads: int = 1):
    """Correlation estimates over an epsilon grid given in spacing units.

    For each epsilon the two energies straddle model.E by half the physical
    separation epsilon/(N nu); errors are batch means over samples.  Also
    returns a diagnostics dict with the worst unitarity defect.
    """
    if samples < 10 ** 3:
        raise ConfigError("need at least 1e3 samples")
    sol = solution or solve_equilibrium(model.potential)
    spacing = mean_level_spacing(sol, model.E, model.N)
    pairs = [(model.E + 0.5 * eps * spacing, model.E - 0.5 * eps * spacing)
             for eps in epsilon_grid]
    smats, energies, defect, acc = _correlation_run(model, pairs, samples, seed,
                                                    n_chains=n_chains, thin=thin,
                                                    threads=threads)
    out = []
    for eps, pair in zip(epsilon_grid, pairs):
        terms = _estimate_from_smats(smats, energies, pair, channels)
        value, err = _batched_complex(terms, batches)
        out.append(CorrelationEstimate(value=value, stderr=err, epsilon=float(eps),
                                       channels=tuple(channels)))
    diagnostics = {"unitarity_defect": defect, "acceptance_rate": acc,
                   "spacing": spacing, "samples": smats.shape[0]}
    return out, diagnostics


def mc_s_average(model: ScatteringModel, samples: int, seed, *,
                 n_chains: int = 32, thin: int = 2, threads: int = 1):
    """Channel-diagonal averages <S_aa> at E = model.E with batch-means errors."""
    pairs = [(model.E, model.E)]
    smats, energies, defect, _ = _correlation_run(model, pairs, samples, seed,
                                                  n_chains=n_chains, thin=thin,
                                                  threads=threads)
    vals = np.empty(model.M, dtype=complex)
    errs = np.empty(model.M)
    for a in range(model.M):
        vals[a], errs[a] = _batched_complex(smats[:, 0, a, a])
    return vals, errs, defect


def matched_coupling(model_ref: ScatteringModel, model_adj: ScatteringModel, *,
                     samples: int = 4000, seed=0, tol: float = 0.01,
                     max_iter: int = 20):
    """Rescale model_adj's coupling columns until |<S_aa>| matches model_ref.

    Per-channel secant iteration on the column scales; every evaluation
    reuses the same seed (common random numbers) so the iteration sees a
    smooth objective.  Returns (adjusted model, scales, match report).
    """
    if model_ref.M != model_adj.M or model_ref.E != model_adj.E:
        raise ConfigError("models must share the channel count and energy")
    target, terr, _ = mc_s_average(model_ref, samples, seed)
    target_abs = np.abs(target)

    sol_r = solve_equilibrium(model_ref.potential)
    sol_a = solve_equilibrium(model_adj.potential)
    nu_ratio = (float(sol_r.measure.density(model_ref.E))
                / float(sol_a.measure.density(model_adj.E)))
    scales = np.full(model_adj.M, math.sqrt(nu_ratio))

    def objective(sc):
        vals, _, _ = mc_s_average(model_adj.with_scales(sc), samples, seed + 1)
        return np.abs(vals) - target_abs

    prev_s = scales * 1.1
    prev_f = objective(prev_s)
    cur_s = scales.copy()
    cur_f = objective(cur_s)
    for _ in range(max_iter):
        if np.max(np.abs(cur_f)) < tol:
            report = {"target_abs": target_abs.tolist(),
                      "achieved_gap": np.abs(cur_f).tolist(),
                      "target_stderr": terr.tolist()}
            return model_adj.with_scales(cur_s), cur_s, report
        denom = cur_f - prev_f
        denom = np.where(np.abs(denom) < 1e-12, 1e-12, denom)
        new_s = cur_s - cur_f * (cur_s - prev_s) / denom
        new_s = np.clip(new_s, 0.2 * cur_s, 5.0 * cur_s)
        prev_s, prev_f = cur_s, cur_f
        cur_s, cur_f = new_s, objective(new_s)
    raise MatchingError(f"coupling match not reached in {max_iter} secant steps; "
                        f"residual {np.abs(cur_f)}")
