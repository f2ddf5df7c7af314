"""Kernel permutation tests on precomputed Gram matrices.

Unconditional independence is tested by bootstrapped HSIC; conditional
independence by SDCIT (single optimal z-preserving permutation with a
half-sample null) or KCIPT (bootstrapped two-sample MMD against the
permuted sample).  All permutation searches use an exact linear
assignment solver with the diagonal barred, so the permutations are
fixed-point free and cost-optimal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class TestConfig:
    __test__ = False  # not a test case despite the name

    alpha: float = 0.05
    b_outer: int = 100
    n_perm: int = 20000
    n_null: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if min(self.b_outer, self.n_perm, self.n_null) < 1:
            raise ValueError("counts must be positive")


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a test case despite the name

    statistic: float
    p_value: float
    null_samples: np.ndarray
    alpha: float

    @property
    def reject(self):
        return self.p_value < self.alpha


@dataclass(frozen=True)
class PermutationPlan:
    sigma: np.ndarray
    cost: float

    def __post_init__(self):
        if np.any(self.sigma == np.arange(len(self.sigma))):
            raise ValueError("permutation has fixed points")


def _entries(k):
    """Accept either a GramMatrix or a plain square array."""
    m = getattr(k, "entries", k)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("square Gram matrix required")
    return m


def _p_value(stat, null):
    return (1.0 + np.sum(null >= stat)) / (1.0 + len(null))


@njit(cache=True)
def _hsic_perm_stats(kxc, kyc, perms):
    n = kxc.shape[0]
    out = np.empty(perms.shape[0])
    for b in range(perms.shape[0]):
        p = perms[b]
        acc = 0.0
        for i in range(n):
            for j in range(n):
                acc += kxc[i, j] * kyc[p[i], p[j]]
        out[b] = acc / (n * n)
    return out


def hsic_bootstrap(kx, ky, cfg):
    """HSIC statistic trace(H kx H . H ky H) / n^2 with a permutation
    null from n_null random reshufflings of the second sample."""
    kx = _entries(kx)
    ky = _entries(ky)
    n = kx.shape[0]
    if ky.shape[0] != n:
        raise ValueError("Gram sizes differ")
    if n < 5:
        raise ValueError("need at least 5 samples")
    h = np.eye(n) - np.full((n, n), 1.0 / n)
    kxc = h @ kx @ h
    kyc = h @ ky @ h
    stat = float(np.sum(kxc * kyc) / n ** 2)
    rng = np.random.default_rng(cfg.seed)
    perms = np.stack([rng.permutation(n) for _ in range(cfg.n_null)])
    null = _hsic_perm_stats(kxc, kyc, perms)
    return TestResult(stat, _p_value(stat, null), null, cfg.alpha)


def find_invariant_permutation(kz):
    """Fixed-point-free permutation minimizing the summed RKHS distance
    sum_i D(z_i, z_sigma(i)), D(i,j) = kz[i,i] + kz[j,j] - 2 kz[i,j].

    Solved exactly as a linear assignment problem with the diagonal
    barred by a finite penalty larger than any full tour.
    """
    kz = _entries(kz)
    n = kz.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples")
    diag = np.diag(kz)
    dist = diag[:, None] + diag[None, :] - 2.0 * kz
    np.fill_diagonal(dist, 0.0)
    penalty = float(np.abs(dist).sum()) + 1.0
    np.fill_diagonal(dist, penalty)
    rows, cols = linear_sum_assignment(dist)
    sigma = cols[np.argsort(rows)]
    cost = float(dist[np.arange(n), sigma].sum())
    return PermutationPlan(sigma=sigma, cost=cost)


def mmd_sq_unbiased(k_joint, idx_a, idx_b):
    """Unbiased two-sample MMD^2 read off a joint Gram matrix.

    Within-sample terms exclude the diagonal; samples are given as
    disjoint index lists into the joint matrix.
    """
    k = _entries(k_joint)
    idx_a = np.asarray(idx_a, dtype=np.int64)
    idx_b = np.asarray(idx_b, dtype=np.int64)
    if len(set(idx_a.tolist()) & set(idx_b.tolist())):
        raise ValueError("index lists overlap")
    na, nb = len(idx_a), len(idx_b)
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least 2 elements")
    kaa = k[np.ix_(idx_a, idx_a)]
    kbb = k[np.ix_(idx_b, idx_b)]
    kab = k[np.ix_(idx_a, idx_b)]
    t_aa = (kaa.sum() - np.trace(kaa)) / (na * (na - 1))
    t_bb = (kbb.sum() - np.trace(kbb)) / (nb * (nb - 1))
    return float(t_aa + t_bb - 2.0 * kab.mean())


def _coupled_mmd(kx, ky, kz, sigma):
    """MMD^2 between a sample and its y-permuted counterfactual under
    the product kernel, with all diagonals excluded (the two samples
    share x and z indices, so paired terms are dropped)."""
    n = kx.shape[0]
    off = ~np.eye(n, dtype=bool)
    k_orig = kx * ky * kz
    k_perm = kx * ky[np.ix_(sigma, sigma)] * kz
    k_cross = kx * ky[:, sigma] * kz
    return (k_orig[off].mean() + k_perm[off].mean()
            - 2.0 * k_cross[off].mean())


def _jittered_invariant_permutation(dist, penalty, scale, eps, rng):
    """Near-optimal fixed-point-free permutation: solve the assignment
    with exponentially jittered costs so repeated draws explore distinct
    low-distance permutations."""
    n = dist.shape[0]
    cost = dist + eps * scale * rng.exponential(1.0, size=(n, n))
    np.fill_diagonal(cost, penalty)
    rows, cols = linear_sum_assignment(cost)
    return cols[np.argsort(rows)]


def sdcit(kx, ky, kz, cfg, eps=0.5):
    """Self-discrepancy conditional independence test.

    The statistic is the unbiased MMD^2 between the sample and its
    counterfactual under the optimal z-preserving permutation.  Each
    null sample first decouples y from (x, z) by a random near-optimal
    z-preserving permutation, then applies the same statistic, so the
    null mirrors both location and spread of the statistic under true
    conditional independence.
    """
    kx, ky, kz = _entries(kx), _entries(ky), _entries(kz)
    n = kx.shape[0]
    if ky.shape[0] != n or kz.shape[0] != n:
        raise ValueError("Gram sizes differ")
    sigma = find_invariant_permutation(kz).sigma
    stat = _coupled_mmd(kx, ky, kz, sigma)
    diag = np.diag(kz)
    dist = diag[:, None] + diag[None, :] - 2.0 * kz
    np.fill_diagonal(dist, 0.0)
    off = ~np.eye(n, dtype=bool)
    scale = float(np.median(dist[off]))
    if not scale > 0:
        scale = 1.0
    penalty = float(np.abs(dist).sum()) + 1.0
    rng = np.random.default_rng(cfg.seed)
    null = np.empty(cfg.n_null)
    for b in range(cfg.n_null):
        pi = _jittered_invariant_permutation(dist, penalty, scale, eps, rng)
        null[b] = _coupled_mmd(kx, ky[np.ix_(pi, pi)], kz, sigma)
    return TestResult(stat, _p_value(stat, null), null, cfg.alpha)


def _two_sample_labels_null(k_joint, m, n_inner, rng):
    """Permutation null of the two-sample MMD by reshuffling the group
    labels of a combined sample of size 2m."""
    out = np.empty(n_inner)
    for p in range(n_inner):
        perm = rng.permutation(2 * m)
        out[p] = mmd_sq_unbiased(k_joint, perm[:m], perm[m:])
    return out


def kcipt(kx, ky, kz, cfg):
    """Bootstrapped conditional-independence permutation test.

    Each of b_outer rounds splits the sample in half, decouples y from
    (x, z) in the second half by the optimal z-preserving permutation,
    and measures the two-sample MMD between the halves.  Inner label
    permutations give per-round nulls; round statistics and nulls are
    aggregated by Monte-Carlo averaging.
    """
    kx, ky, kz = _entries(kx), _entries(ky), _entries(kz)
    n = kx.shape[0]
    if ky.shape[0] != n or kz.shape[0] != n:
        raise ValueError("Gram sizes differ")
    if n < 8:
        raise ValueError("too few samples to split")
    rng = np.random.default_rng(cfg.seed)
    m = n // 2
    n_inner = max(1, cfg.n_perm // cfg.b_outer)
    stats = np.empty(cfg.b_outer)
    inner_nulls = np.empty((cfg.b_outer, n_inner))
    for b in range(cfg.b_outer):
        order = rng.permutation(n)
        ia, ib = order[:m], order[m:2 * m]
        sig = find_invariant_permutation(kz[np.ix_(ib, ib)]).sigma
        ib_y = ib[sig]
        idx = np.concatenate([ia, ib])
        idx_y = np.concatenate([ia, ib_y])
        k_joint = (kx[np.ix_(idx, idx)]
                   * ky[np.ix_(idx_y, idx_y)]
                   * kz[np.ix_(idx, idx)])
        stats[b] = mmd_sq_unbiased(k_joint, np.arange(m), np.arange(m, 2 * m))
        inner_nulls[b] = _two_sample_labels_null(k_joint, m, n_inner, rng)
    stat = float(stats.mean())
    null = np.empty(cfg.n_null)
    for t in range(cfg.n_null):
        picks = rng.integers(0, n_inner, size=cfg.b_outer)
        null[t] = inner_nulls[np.arange(cfg.b_outer), picks].mean()
    return TestResult(stat, _p_value(stat, null), null, cfg.alpha)
