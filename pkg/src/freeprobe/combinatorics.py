"""Exact set-partition combinatorics and moment/cumulant conversions.

Everything in this module that is not a Monte-Carlo estimator works in
exact rational arithmetic (`fractions.Fraction`), so roundtrip identities
hold exactly rather than to rounding.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ArityError, InsufficientDataError, SizeLimitError

MAX_ENUM_N = 12          # Bell(12) = 4 213 597 is the desk-scale ceiling
MAX_CLASSICAL_N = 10


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """A set partition of {1..n} in canonical form.

    Blocks are stored sorted internally and ordered by smallest element.
    """

    n: int
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(b)) for b in self.blocks),
                              key=lambda b: b[0]))
        object.__setattr__(self, "blocks", blocks)
        seen = [e for b in blocks for e in b]
        if sorted(seen) != list(range(1, self.n + 1)):
            raise ValueError("blocks must partition {1..n} exactly")

    def block_profile(self) -> Counter:
        """Counter mapping block size l to the number of blocks of that size."""
        return Counter(len(b) for b in self.blocks)

    def to_json(self):
        """JSON-ready list of blocks, each sorted, ordered by smallest element."""
        return [list(b) for b in self.blocks]

    @classmethod
    def from_json(cls, data):
        blocks = tuple(tuple(b) for b in data)
        n = sum(len(b) for b in blocks)
        return cls(n, blocks)


@dataclass(frozen=True)
class CycleClass:
    """Conjugacy class of a permutation of {1..n}, given by its cycle type."""

    n: int
    cycle_type: tuple

    def __post_init__(self):
        ct = tuple(sorted(int(l) for l in self.cycle_type))
        object.__setattr__(self, "cycle_type", ct)
        if sum(ct) != self.n or any(l < 1 for l in ct):
            raise ValueError("cycle type must be a partition of n")

    @classmethod
    def irreducible(cls, n: int) -> "CycleClass":
        """The class of a single n-cycle."""
        return cls(n, (n,))


@dataclass(frozen=True)
class CumulantSeq:
    """Cumulants c_1..c_order (free) or k_1..k_order (classical)."""

    order: int
    values: tuple = field(default=())

    def __post_init__(self):
        vals = tuple(_as_rational(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) != self.order:
            raise ValueError("values length must equal order")

    def __getitem__(self, l: int):
        """Cumulant of order l (1-based)."""
        return self.values[l - 1]


def _as_rational(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    return v  # floats pass through for float-mode callers


# ---------------------------------------------------------------------------
# counting oracles
# ---------------------------------------------------------------------------

def bell_number(n: int) -> int:
    """Bell number via the Bell triangle recursion."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def catalan_number(n: int) -> int:
    """Catalan number via the convolution recursion C_{n+1} = sum C_i C_{n-i}."""
    c = [1]
    for m in range(n):
        c.append(sum(c[i] * c[m - i] for i in range(m + 1)))
    return c[n]


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def _iter_rgs(n: int):
    """Iterate restricted growth strings of length n, in lexicographic order.

    The yielded list is reused in place; callers must copy before storing.
    """
    a = [0] * n
    b = [1] * n
    if n == 1:
        yield a
        return
    while True:
        yield a
        j = n - 1
        while a[j] == b[j]:
            j -= 1
            if j == 0:
                return
        a[j] += 1
        nb = b[j] + (1 if a[j] == b[j] else 0)
        for i in range(j + 1, n):
            a[i] = 0
            b[i] = nb


def _blocks_from_rgs(a):
    blocks = []
    for pos, v in enumerate(a, start=1):
        if v == len(blocks):
            blocks.append([pos])
        else:
            blocks[v].append(pos)
    return blocks


def iter_partitions(n: int):
    """Yield every set partition of {1..n} as a Partition, without caching."""
    if not 1 <= n <= MAX_ENUM_N:
        raise SizeLimitError(f"partition enumeration supports 1 <= n <= {MAX_ENUM_N}, got {n}")
    for a in _iter_rgs(n):
        yield Partition(n, tuple(tuple(b) for b in _blocks_from_rgs(a)))


def enumerate_partitions(n: int) -> list:
    """All set partitions of {1..n}; the count equals the n-th Bell number.

    For n near the cap the list holds millions of objects; prefer
    `iter_partitions` when only a scan is needed.
    """
    return list(iter_partitions(n))


def _iter_nc_blocks(elems: tuple):
    """Yield non-crossing partitions of an ordered tuple as tuples of blocks.

    The block of the first element is grown left to right; the gaps it
    leaves are partitioned independently, which enforces non-crossing.
    """
    if not elems:
        yield ()
        return
    m = len(elems)

    def grow(block, start):
        blk = tuple(block)
        for tail in _iter_nc_blocks(elems[start:]):
            yield (blk,) + tail
        for i in range(start, m):
            for inner in _iter_nc_blocks(elems[start:i]):
                block.append(elems[i])
                for res in grow(block, i + 1):
                    yield res + inner
                block.pop()

    yield from grow([elems[0]], 1)


def iter_noncrossing_partitions(n: int):
    """Yield every non-crossing partition of {1..n}; count is Catalan(n)."""
    if not 1 <= n <= MAX_ENUM_N:
        raise SizeLimitError(f"partition enumeration supports 1 <= n <= {MAX_ENUM_N}, got {n}")
    for blocks in _iter_nc_blocks(tuple(range(1, n + 1))):
        yield Partition(n, blocks)


def count_partitions(n: int) -> int:
    """Count set partitions of {1..n} by full enumeration (no objects built)."""
    if not 1 <= n <= MAX_ENUM_N:
        raise SizeLimitError(f"partition enumeration supports 1 <= n <= {MAX_ENUM_N}, got {n}")
    return sum(1 for _ in _iter_rgs(n))


def count_noncrossing(n: int) -> int:
    """Count non-crossing partitions of {1..n} by full enumeration."""
    if not 1 <= n <= MAX_ENUM_N:
        raise SizeLimitError(f"partition enumeration supports 1 <= n <= {MAX_ENUM_N}, got {n}")
    return sum(1 for _ in _iter_nc_blocks(tuple(range(1, n + 1))))


def _pair_crosses(a: tuple, b: tuple) -> bool:
    """True iff sorted blocks a and b interleave as i1 < j1 < i2 < j2.

    Equivalent test: merge both blocks in order and look for four
    alternating ownership runs (ABAB or BABA).
    """
    merged = sorted([(e, 0) for e in a] + [(e, 1) for e in b])
    runs = 0
    last = None
    for _, tag in merged:
        if tag != last:
            runs += 1
            last = tag
            if runs >= 4:
                return True
    return False


def is_noncrossing(p: Partition) -> bool:
    """Whether no two blocks of p interleave in the order 1..n."""
    blocks = p.blocks
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            if _pair_crosses(blocks[i], blocks[j]):
                return False
    return True


# ---------------------------------------------------------------------------
# moment <-> cumulant conversion
# ---------------------------------------------------------------------------

# size-profile multiplicity caches: n -> Counter{profile tuple: count},
# where a profile is the sorted tuple of block sizes
_NC_PROFILES: dict = {}
_ALL_PROFILES: dict = {}


def _nc_profiles(n: int) -> Counter:
    if n not in _NC_PROFILES:
        _NC_PROFILES[n] = Counter(
            tuple(sorted(len(b) for b in blocks))
            for blocks in _iter_nc_blocks(tuple(range(1, n + 1)))
        )
    return _NC_PROFILES[n]


def _all_profiles(n: int) -> Counter:
    if n not in _ALL_PROFILES:
        cnt = Counter()
        for a in _iter_rgs(n):
            sizes = Counter(a)
            cnt[tuple(sorted(sizes.values()))] += 1
        _ALL_PROFILES[n] = cnt
    return _ALL_PROFILES[n]


def _profile_sum(profiles: Counter, cvals, skip_single_block=False):
    total = Fraction(0) if all(isinstance(c, (Fraction, int)) for c in cvals) else 0.0
    n = max(sum(p) for p in profiles)
    for profile, count in profiles.items():
        if skip_single_block and profile == (n,):
            continue
        term = count
        for l in profile:
            term = term * cvals[l - 1]
        total = total + term
    return total


def _cumulant_values(c, n: int):
    if isinstance(c, CumulantSeq):
        if c.order < n:
            raise ArityError(f"cumulant sequence of order {c.order} cannot produce moment {n}")
        return c.values
    vals = tuple(_as_rational(v) for v in c)
    if len(vals) < n:
        raise ArityError(f"need at least {n} cumulants, got {len(vals)}")
    return vals


def moments_from_free_cumulants(c, n: int):
    """Moment m_n as the sum over non-crossing partitions of cumulant products."""
    if not 1 <= n <= MAX_ENUM_N:
        raise SizeLimitError(f"free moment formula supports n <= {MAX_ENUM_N}")
    vals = _cumulant_values(c, n)
    return _profile_sum(_nc_profiles(n), vals)


def free_cumulants_from_moments(m, n: int) -> CumulantSeq:
    """Invert the non-crossing moment formula by peeling off the single-block term."""
    if not 1 <= n <= MAX_ENUM_N:
        raise SizeLimitError(f"free cumulant recursion supports n <= {MAX_ENUM_N}")
    mvals = [_as_rational(v) for v in m]
    if len(mvals) < n:
        raise ArityError(f"need at least {n} moments, got {len(mvals)}")
    c = []
    for j in range(1, n + 1):
        c.append(mvals[j - 1])  # placeholder so indexing works during the sum
        lower = _profile_sum(_nc_profiles(j), c, skip_single_block=True) if j > 1 else 0
        c[-1] = mvals[j - 1] - lower
    return CumulantSeq(n, tuple(c))


def classical_moments_from_cumulants(k, n: int):
    """Moment m_n as the sum over all set partitions of cumulant products."""
    if not 1 <= n <= MAX_CLASSICAL_N:
        raise SizeLimitError(f"classical moment formula supports n <= {MAX_CLASSICAL_N}")
    vals = _cumulant_values(k, n)
    return _profile_sum(_all_profiles(n), vals)


# ---------------------------------------------------------------------------
# elementary-symmetric-function identity
# ---------------------------------------------------------------------------

def dual_cauchy_residual(eigs, max_m=None) -> float:
    """Residual of det(1 - K) against the alternating elementary-symmetric sum.

    Both sides are computed independently: the determinant as a direct
    product over eigenvalues, the sum via the Newton-style convolution
    recurrence for e_m.  Vanishes to rounding when max_m covers all
    eigenvalues.
    """
    lam = np.asarray(eigs, dtype=complex)
    if lam.size == 0:
        raise ArityError("need at least one eigenvalue")
    if max_m is None:
        max_m = lam.size
    det = np.prod(1.0 - lam)
    e = np.zeros(lam.size + 1, dtype=complex)
    e[0] = 1.0
    for x in lam:
        e[1:] = e[1:] + x * e[:-1]
    alt = sum((-1) ** m * e[m] for m in range(min(max_m, lam.size) + 1))
    return abs(det - alt)


# ---------------------------------------------------------------------------
# cumulant-tensor class estimators
# ---------------------------------------------------------------------------

def _class_index_pairs(cls: CycleClass, idx):
    """(i, j) index pairs whose delta pattern isolates the given class.

    Each cycle of length l gets its own set of l distinct indices wired
    cyclically; length-1 cycles give a diagonal pair.  idx has shape
    (patterns, n).
    """
    ii = np.empty_like(idx)
    jj = np.empty_like(idx)
    t = 0
    for l in cls.cycle_type:
        sub = idx[:, t:t + l]
        ii[:, t:t + l] = sub
        jj[:, t:t + l] = np.roll(sub, -1, axis=1)
        t += l
    return ii, jj


def _k2(x, y):
    s = x.shape[0]
    return (np.sum(x * y, axis=0) - np.sum(x, axis=0) * np.sum(y, axis=0) / s) / (s - 1)


def _k3(x, y, z):
    s = x.shape[0]
    cx = x - x.mean(axis=0)
    cy = y - y.mean(axis=0)
    cz = z - z.mean(axis=0)
    return s / ((s - 1) * (s - 2)) * np.sum(cx * cy * cz, axis=0)


def gamma_profile_estimate(samples, n: int, cls: CycleClass,
                           patterns: int = 128, seed: int = 0, batches: int = 16):
    """Scaled cumulant-tensor class coefficient with a batch-means error bar.

    Estimates N^(n-1) times the class coefficient by joint k-statistics of
    matrix entries at index patterns that isolate the class, averaged over
    random index choices.  Returns (estimate, stderr).
    """
    if n not in (2, 3):
        raise SizeLimitError("entry-cumulant estimation is implemented for n in {2, 3}")
    if cls.n != n:
        raise ValueError("cycle class order must match n")
    h = np.asarray(samples)
    if h.ndim != 3 or h.shape[1] != h.shape[2]:
        raise ValueError("samples must be a stack of square matrices")
    s, dim = h.shape[0], h.shape[1]
    if s < 10:
        raise InsufficientDataError(f"need at least 10 samples, got {s}")
    if dim < n:
        raise ValueError("matrix dimension must be at least n")

    rng = np.random.default_rng(seed)
    idx = np.empty((patterns, n), dtype=np.intp)
    for p in range(patterns):
        idx[p] = rng.choice(dim, size=n, replace=False)
    ii, jj = _class_index_pairs(cls, idx)
    # entry for pair (i, j) is H[j, i]; shape (samples, patterns, n)
    x = h[:, jj, ii]

    kfun = _k2 if n == 2 else _k3
    scale = dim ** (n - 1)

    def estimate(block):
        ks = kfun(*(block[:, :, t] for t in range(n)))
        return scale * float(np.mean(ks.real))

    value = estimate(x)
    nb = min(batches, s // 5)
    edges = np.linspace(0, s, nb + 1, dtype=int)
    per_batch = np.array([estimate(x[lo:hi]) for lo, hi in zip(edges[:-1], edges[1:])])
    stderr = float(per_batch.std(ddof=1) / math.sqrt(nb))
    return value, stderr


def gamma_profile(samples, n: int, cls: CycleClass,
                  patterns: int = 128, seed: int = 0) -> float:
    """Point estimate of the scaled class coefficient (see gamma_profile_estimate)."""
    value, _ = gamma_profile_estimate(samples, n, cls, patterns=patterns, seed=seed)
    return value
