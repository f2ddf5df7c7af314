"""Signature-kernel evaluation between path segments.

The kernel of two piecewise-linear paths solves a hyperbolic Goursat
problem driven by the increments of a static kernel on the path values;
it is integrated here with an explicit second-order finite-difference
scheme on the product of the two time grids, optionally dyadically
refined.  A truncated-signature evaluation via Chen's identity serves
as a brute-force cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.spatial.distance import pdist

from .paths import Path, augment_time

EUCLIDEAN = "euclidean"
RBF = "rbf"


@dataclass(frozen=True)
class KernelConfig:
    """bandwidth None requests the median heuristic on the inputs at
    hand; a number fixes the RBF length scale."""

    lifting: str = RBF
    bandwidth: float = None
    refinement: int = 2
    add_time: bool = True

    def __post_init__(self):
        if self.lifting not in (EUCLIDEAN, RBF):
            raise ValueError(f"unknown lifting {self.lifting!r}")
        if (self.lifting == RBF and self.bandwidth is not None
                and not self.bandwidth > 0):
            raise ValueError("rbf lifting needs a positive bandwidth")
        if not 0 <= self.refinement <= 6:
            raise ValueError("refinement must lie in [0, 6]")


class GramMatrix:
    def __init__(self, entries, symmetric):
        self.entries = np.asarray(entries, dtype=np.float64)
        self.symmetric = bool(symmetric)

    def check_psd(self, jitter=1e-8):
        """Attempt a Cholesky factorization after adding jitter."""
        if not self.symmetric:
            raise ValueError("PSD check applies to symmetric Gram matrices")
        n = self.entries.shape[0]
        np.linalg.cholesky(self.entries + jitter * np.eye(n))
        return True


def median_bandwidth(sample, max_pairs=10 ** 6):
    """Median Euclidean distance over all (path, time point) value pairs.

    Accepts a PathSample or a plain list of paths.  Larger pools are
    subsampled to max_pairs pairs with a fixed seed.  Returns 0 for
    degenerate all-identical input, which callers must reject before
    building an RBF config.
    """
    path_list = sample.paths if hasattr(sample, "paths") else list(sample)
    rows = np.vstack([p.x for p in path_list])
    n = rows.shape[0]
    n_pairs = n * (n - 1) // 2
    if n_pairs <= max_pairs:
        dists = pdist(rows)
    else:
        rng = np.random.default_rng(0)
        i = rng.integers(0, n, size=max_pairs)
        j = rng.integers(0, n, size=max_pairs)
        keep = i != j
        dists = np.linalg.norm(rows[i[keep]] - rows[j[keep]], axis=1)
    if len(dists) == 0:
        return 0.0
    return float(np.median(dists))


def refine_dyadic(path, order):
    """Insert midpoints of each grid cell `order` times, interpolating
    values linearly."""
    t, x = path.t, path.x
    for _ in range(order):
        mid = 0.5 * (t[:-1] + t[1:])
        t_new = np.empty(2 * len(t) - 1)
        t_new[0::2] = t
        t_new[1::2] = mid
        x_new = np.empty((len(t_new), x.shape[1]))
        x_new[0::2] = x
        x_new[1::2] = 0.5 * (x[:-1] + x[1:])
        t, x = t_new, x_new
    return Path(t, x, path.coord_map, time_augmented=path.time_augmented)


@njit(cache=True)
def _solve_goursat(a):
    """March the explicit second-order scheme over the increment-product
    matrix a and return the terminal corner value."""
    n, m = a.shape
    prev = np.ones(m + 1)
    curr = np.empty(m + 1)
    for i in range(n):
        curr[0] = 1.0
        for j in range(m):
            aij = a[i, j]
            curr[j + 1] = ((curr[j] + prev[j + 1])
                           * (1.0 + 0.5 * aij + aij * aij / 12.0)
                           - prev[j] * (1.0 - aij * aij / 12.0))
        prev, curr = curr, prev
    return prev[m]


def _prepare(path, cfg):
    if cfg.add_time and not path.time_augmented:
        path = augment_time(path)
    if cfg.refinement > 0:
        path = refine_dyadic(path, cfg.refinement)
    return path


def _resolve_bandwidth(cfg, path_list):
    """Fill in a missing RBF bandwidth by the median heuristic on the
    lifted values of the inputs at hand."""
    if cfg.lifting != RBF or cfg.bandwidth is not None:
        return cfg
    bw = median_bandwidth(path_list)
    if not bw > 0:
        raise ValueError("median bandwidth degenerate (all values equal)")
    from dataclasses import replace
    return replace(cfg, bandwidth=bw)


def _increment_products(x, y, cfg):
    """Matrix a[i, j] driving the PDE: inner products of increments for
    euclidean lifting, second mixed differences of the RBF static
    kernel otherwise."""
    if cfg.lifting == EUCLIDEAN:
        return np.diff(x, axis=0) @ np.diff(y, axis=0).T
    sq = (np.sum(x ** 2, axis=1)[:, None] + np.sum(y ** 2, axis=1)[None, :]
          - 2.0 * x @ y.T)
    k = np.exp(-np.maximum(sq, 0.0) / (2.0 * cfg.bandwidth ** 2))
    return k[1:, 1:] - k[1:, :-1] - k[:-1, 1:] + k[:-1, :-1]


def sig_kernel_pde(x, y, cfg):
    """Signature kernel of two paths via the Goursat finite-difference
    scheme on the product of their (refined) grids."""
    x = _prepare(x, cfg)
    y = _prepare(y, cfg)
    if x.dim != y.dim:
        raise ValueError("paths must have equal dimension after lifting")
    cfg = _resolve_bandwidth(cfg, [x, y])
    a = _increment_products(x.x, y.x, cfg)
    val = _solve_goursat(a)
    if not np.isfinite(val):
        raise FloatingPointError(
            f"non-finite PDE solution on grid {a.shape[0]+1} x {a.shape[1]+1}")
    return float(val)


def gram(a, b, cfg):
    """Pairwise signature kernels between two lists of path segments.

    When a and b are the same list the symmetric half is reused.
    """
    sym = a is b
    xs = [_prepare(p, cfg) for p in a]
    ys = xs if sym else [_prepare(p, cfg) for p in b]
    cfg = _resolve_bandwidth(cfg, xs if sym else xs + ys)
    out = np.empty((len(xs), len(ys)))
    for i, px in enumerate(xs):
        j_start = i if sym else 0
        for j in range(j_start, len(ys)):
            try:
                m = _increment_products(px.x, ys[j].x, cfg)
                out[i, j] = _solve_goursat(m)
            except Exception as exc:
                raise RuntimeError(f"gram entry ({i}, {j}) failed") from exc
            if sym:
                out[j, i] = out[i, j]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite Gram entries")
    return GramMatrix(out, symmetric=sym)


# ---------------------------------------------------------------------------
# Truncated signatures (brute-force oracle).

MEMORY_GUARD = 10 ** 7


class TruncatedSignature:
    """Iterated-integral tensors up to a fixed depth; level 0 is the
    scalar 1."""

    def __init__(self, levels):
        self.levels = levels

    @property
    def depth(self):
        return len(self.levels) - 1


def _tensor_exp(delta, depth):
    """Signature of a single linear segment: levels delta^(x)n / n!."""
    levels = [np.array(1.0)]
    for n in range(1, depth + 1):
        levels.append(np.multiply.outer(levels[-1], delta) / n)
    return levels


def _chen_product(s, t, depth):
    """Concatenation of signatures: level n is the convolution
    sum_k s_k (x) t_{n-k}."""
    out = []
    for n in range(depth + 1):
        acc = None
        for k in range(n + 1):
            term = np.multiply.outer(s[k], t[n - k])
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


def truncated_signature(path, depth):
    """Exact signature of the piecewise-linear interpolant up to depth."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    dim = path.dim
    if dim ** depth > MEMORY_GUARD:
        raise MemoryError(f"signature level {depth} of dim {dim} too large")
    increments = np.diff(path.x, axis=0)
    levels = _tensor_exp(increments[0], depth)
    for delta in increments[1:]:
        levels = _chen_product(levels, _tensor_exp(delta, depth), depth)
    return TruncatedSignature(levels)


def _random_feature_path(path, cfg, n_features=256, seed=12345):
    """Map values through random Fourier features of the RBF static
    kernel so the euclidean oracle approximates the rbf-lifted kernel."""
    rng = np.random.default_rng(seed)
    dim = path.dim
    w = rng.standard_normal((dim, n_features)) / cfg.bandwidth
    b = rng.uniform(0, 2 * np.pi, size=n_features)
    feats = np.sqrt(2.0 / n_features) * np.cos(path.x @ w + b)
    t = path.t
    from .paths import CoordMap
    return Path(t, feats, CoordMap([(0, 0, n_features)]))


def truncated_sig_kernel_oracle(x, y, depth, cfg):
    """Inner product of truncated signatures, after the same lifting as
    the PDE solver (random-feature approximation for rbf)."""
    if cfg.add_time:
        x = x if x.time_augmented else augment_time(x)
        y = y if y.time_augmented else augment_time(y)
    cfg = _resolve_bandwidth(cfg, [x, y])
    if cfg.lifting == RBF:
        x = _random_feature_path(x, cfg)
        y = _random_feature_path(y, cfg)
    sx = truncated_signature(x, depth)
    sy = truncated_signature(y, depth)
    total = 1.0
    for n in range(1, depth + 1):
        total += float(np.sum(sx.levels[n] * sy.levels[n]))
    return total
