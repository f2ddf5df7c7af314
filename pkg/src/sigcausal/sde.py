"""Seeded simulation of the data-generating families.

All generators use Euler-Maruyama on a uniform grid and derive one
random stream per path index from the configured seed, so a fixed
(spec, config) pair reproduces bit-identical samples and individual
paths can be regenerated in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import Dag
from .paths import CoordMap, Path, PathSample

DIVERGENCE_BOUND = 1e6


class SimulationDiverged(RuntimeError):
    def __init__(self, path_index):
        super().__init__(f"simulation diverged on path {path_index}")
        self.path_index = path_index


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    n_steps: int = 128
    horizon: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_steps < 2 or self.horizon <= 0 or self.n_paths < 1:
            raise ValueError("invalid simulation configuration")


@dataclass(frozen=True)
class LinearSdeSpec:
    """dX = (A X + c) dt + diag(B X + dvec) dW.

    x0_mean / x0_sd give independent Gaussian initial values per
    coordinate; sd 0 makes them constants.
    """

    A: np.ndarray
    c: np.ndarray
    B: np.ndarray
    dvec: np.ndarray
    x0_mean: np.ndarray = None
    x0_sd: np.ndarray = None

    def __post_init__(self):
        d = np.asarray(self.A).shape[0]
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float).reshape(d, d))
        object.__setattr__(self, "B", np.asarray(self.B, dtype=float).reshape(d, d))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(d))
        object.__setattr__(self, "dvec", np.asarray(self.dvec, dtype=float).reshape(d))
        x0m = self.x0_mean if self.x0_mean is not None else np.zeros(d)
        x0s = self.x0_sd if self.x0_sd is not None else np.full(d, 0.1)
        object.__setattr__(self, "x0_mean", np.asarray(x0m, dtype=float).reshape(d))
        object.__setattr__(self, "x0_sd", np.asarray(x0s, dtype=float).reshape(d))

    @property
    def d(self):
        return self.A.shape[0]

    def dependence_graph(self, tol=0.0):
        """DAG implied by the nonzero couplings of A and B.

        Off-diagonal nonzeros of either matrix give edges j -> i for
        entry (i, j); diagonal nonzeros give self-loops.
        """
        edges = []
        for i in range(self.d):
            for j in range(self.d):
                if abs(self.A[i, j]) > tol or abs(self.B[i, j]) > tol:
                    edges.append((j, i))
        return Dag(self.d, set(edges))


@dataclass(frozen=True)
class NonlinearSpec:
    omega: float
    r: float
    dvec: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dvec", np.asarray(self.dvec, dtype=float).reshape(2))
        if not (np.isfinite(self.omega) and np.isfinite(self.r)):
            raise ValueError("omega and r must be finite")
        if np.any(self.dvec < 0):
            raise ValueError("diffusion scales must be nonnegative")


@dataclass(frozen=True)
class FbmSpec:
    hurst: float
    a21: float
    d1: float
    d2: float

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise ValueError("hurst must lie in (0, 1)")


@dataclass(frozen=True)
class FdaSpec:
    m_basis: int
    a: float
    noise_sd: float

    def __post_init__(self):
        if self.m_basis < 1:
            raise ValueError("need at least one basis function")


def _path_rngs(cfg):
    return [np.random.default_rng(np.random.SeedSequence([cfg.seed, i]))
            for i in range(cfg.n_paths)]


def _grid(cfg):
    return np.linspace(0.0, cfg.horizon, cfg.n_steps + 1)


def _check_finite(x, path_index):
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > DIVERGENCE_BOUND):
        raise SimulationDiverged(path_index)


def simulate_linear(spec, cfg):
    """Euler-Maruyama for the linear model with diagonal state-dependent
    diffusion diag(B X + dvec)."""
    t = _grid(cfg)
    dt = t[1] - t[0]
    sq = np.sqrt(dt)
    d = spec.d
    cm = CoordMap.scalar(d)
    paths = []
    for idx, rng in enumerate(_path_rngs(cfg)):
        x = np.empty((len(t), d))
        x[0] = spec.x0_mean + spec.x0_sd * rng.standard_normal(d)
        for k in range(len(t) - 1):
            xi = rng.standard_normal(d)
            drift = spec.A @ x[k] + spec.c
            sigma = spec.B @ x[k] + spec.dvec
            x[k + 1] = x[k] + drift * dt + sigma * sq * xi
            _check_finite(x[k + 1], idx)
        paths.append(Path(t, x, cm))
    return PathSample(paths, cm)


def simulate_nonlinear(spec, cfg):
    """Two-dimensional system with drift (-r w sin(w t), r w tanh(X2))."""
    t = _grid(cfg)
    dt = t[1] - t[0]
    sq = np.sqrt(dt)
    cm = CoordMap.scalar(2)
    paths = []
    for idx, rng in enumerate(_path_rngs(cfg)):
        x = np.empty((len(t), 2))
        x[0] = 0.1 * rng.standard_normal(2)
        for k in range(len(t) - 1):
            xi = rng.standard_normal(2)
            drift = np.array([
                -spec.r * spec.omega * np.sin(spec.omega * t[k]),
                spec.r * spec.omega * np.tanh(x[k, 1]),
            ])
            x[k + 1] = x[k] + drift * dt + spec.dvec * sq * xi
            _check_finite(x[k + 1], idx)
        paths.append(Path(t, x, cm))
    return PathSample(paths, cm)


def simulate_path_dependent(cfg, rng, a23=None, a31=None, d1=None, d2=None):
    """Hidden-integrator construction: coordinate 2 is driven by the
    running integral of coordinate 0 through a latent third coordinate.

    Couplings default to U([-3.5,-1] u [1,3.5]) draws and diffusion
    scales to U([0.1, 0.2]); only the two visible coordinates are
    returned.
    """
    def pm_uniform(lo, hi):
        return float(rng.uniform(lo, hi) * rng.choice([-1.0, 1.0]))

    a23 = pm_uniform(1.0, 3.5) if a23 is None else a23
    a31 = pm_uniform(1.0, 3.5) if a31 is None else a31
    d1 = float(rng.uniform(0.1, 0.2)) if d1 is None else d1
    d2 = float(rng.uniform(0.1, 0.2)) if d2 is None else d2
    A = np.zeros((3, 3))
    A[1, 2] = a23
    A[2, 0] = a31
    spec = LinearSdeSpec(A=A, c=np.zeros(3), B=np.zeros((3, 3)),
                         dvec=np.array([d1, d2, 0.0]))
    full = simulate_linear(spec, cfg)
    cm = CoordMap.scalar(2)
    return PathSample([Path(p.t, p.x[:, :2], cm) for p in full.paths], cm)


def fbm_increment_factor(t, hurst, jitter=1e-12):
    """Cholesky factor of the exact fBM covariance on the grid t[1:].

    Multiplying a standard normal vector by the factor yields B_H at the
    positive grid times; B_H(0) = 0.
    """
    s = t[1:]
    cov = 0.5 * (np.abs(s[:, None]) ** (2 * hurst)
                 + np.abs(s[None, :]) ** (2 * hurst)
                 - np.abs(s[:, None] - s[None, :]) ** (2 * hurst))
    try:
        return np.linalg.cholesky(cov + jitter * np.eye(len(s)))
    except np.linalg.LinAlgError as exc:
        raise ValueError("fBM covariance not positive definite") from exc


def simulate_fbm_pair(spec, cfg):
    """Coupled pair dX = d1 dW1, dY = a21 X dt + d2 dW2 with W1, W2
    independent fractional Brownian motions of the same Hurst index."""
    t = _grid(cfg)
    dt = t[1] - t[0]
    L = fbm_increment_factor(t, spec.hurst)
    cm = CoordMap.scalar(2)
    paths = []
    for idx, rng in enumerate(_path_rngs(cfg)):
        b1 = np.concatenate(([0.0], L @ rng.standard_normal(len(t) - 1)))
        b2 = np.concatenate(([0.0], L @ rng.standard_normal(len(t) - 1)))
        x = np.empty((len(t), 2))
        x[0] = 0.1 * rng.standard_normal(2)
        for k in range(len(t) - 1):
            x[k + 1, 0] = x[k, 0] + spec.d1 * (b1[k + 1] - b1[k])
            x[k + 1, 1] = (x[k, 1] + spec.a21 * x[k, 0] * dt
                           + spec.d2 * (b2[k + 1] - b2[k]))
            _check_finite(x[k + 1], idx)
        paths.append(Path(t, x, cm))
    return PathSample(paths, cm)


def fda_beta(s, t, c1, c2):
    """Quadratic interaction surface 8(s - c1)^2 - 8(t - c2)^2."""
    return 8.0 * (s - c1) ** 2 - 8.0 * (t - c2) ** 2


def historical_integral(parent_values, t, c1, c2):
    """Trapezoid-rule evaluation of int_0^t x(s) beta(s, t) ds on the
    grid, returned for every grid time."""
    out = np.zeros(len(t))
    for k in range(1, len(t)):
        integrand = parent_values[:k + 1] * fda_beta(t[:k + 1], t[k], c1, c2)
        out[k] = np.trapezoid(integrand, t[:k + 1])
    return out


def generate_fda_sample(g, spec, cfg, centers=None):
    """Functional sample on a DAG: sources are random Fourier series,
    each non-source is the sum of historical integrals of its parents
    scaled by spec.a, plus observation noise.

    centers optionally fixes the (c1, c2) surface centers per parent
    edge; otherwise they are drawn U(0, 1) per path and edge.
    """
    t = _grid(cfg)
    cm = CoordMap.scalar(g.d)
    order = g.topological_order()
    basis = np.empty((spec.m_basis, len(t)))
    for m in range(spec.m_basis):
        freq = (m // 2) + 1
        if m % 2 == 0:
            basis[m] = np.sin(2 * np.pi * freq * t / cfg.horizon)
        else:
            basis[m] = np.cos(2 * np.pi * freq * t / cfg.horizon)
    paths = []
    for idx, rng in enumerate(_path_rngs(cfg)):
        x = np.zeros((len(t), g.d))
        for v in order:
            pa = sorted(g.parents(v))
            if not pa:
                coeffs = rng.standard_normal(spec.m_basis)
                x[:, v] = coeffs @ basis
            else:
                acc = np.zeros(len(t))
                for p in pa:
                    if centers is not None:
                        c1, c2 = centers[(p, v)]
                    else:
                        c1, c2 = rng.uniform(0, 1, size=2)
                    acc += historical_integral(x[:, p], t, c1, c2)
                x[:, v] = spec.a * acc
            if spec.noise_sd > 0:
                x[:, v] += spec.noise_sd * rng.standard_normal(len(t))
        paths.append(Path(t, x, cm))
    return PathSample(paths, cm)


def sample_params(family, rng, g=None):
    """Draw a generator spec for one of the benchmark families.

    Families: "linear-drift", "diffusion", "path-dependence",
    "nonlinear", "fbm", "cd-linear" (needs the DAG g).
    """
    def pm_uniform(lo, hi):
        return float(rng.uniform(lo, hi) * rng.choice([-1.0, 1.0]))

    if family == "linear-drift":
        A = np.array([[rng.uniform(-0.5, 0.5), 0.0],
                      [rng.uniform(1.0, 2.5), rng.uniform(-0.5, 0.5)]])
        return LinearSdeSpec(A=A, c=np.zeros(2), B=np.zeros((2, 2)),
                             dvec=rng.uniform(0.1, 0.2, size=2))
    if family == "diffusion":
        A = np.diag([rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0)])
        B = np.zeros((2, 2))
        B[1, 0] = rng.uniform(1.0, 4.5)
        # A small baseline diffusion keeps both coordinates stochastic.
        return LinearSdeSpec(A=A, c=np.zeros(2), B=B,
                             dvec=rng.uniform(0.1, 0.2, size=2))
    if family == "path-dependence":
        return {
            "a23": pm_uniform(1.0, 3.5),
            "a31": pm_uniform(1.0, 3.5),
            "d1": float(rng.uniform(0.1, 0.2)),
            "d2": float(rng.uniform(0.1, 0.2)),
        }
    if family == "nonlinear":
        return NonlinearSpec(omega=float(rng.uniform(6 * np.pi, 8 * np.pi)),
                             r=float(rng.uniform(0.5, 1.0)),
                             dvec=rng.uniform(2.0, 2.5, size=2))
    if family == "fbm":
        return FbmSpec(hurst=float(rng.uniform(0.1, 0.9)),
                       a21=float(rng.uniform(-2, 2)),
                       d1=float(rng.uniform(-2, 2)),
                       d2=float(rng.uniform(-2, 2)))
    if family == "cd-linear":
        if g is None:
            raise ValueError("cd-linear needs the ground-truth DAG")
        A = np.zeros((g.d, g.d))
        for i, j in g.nonloop_edges:
            A[j, i] = pm_uniform(1.0, 2.0)
        for k in g.loops:
            A[k, k] = rng.uniform(-0.5, 0.5)
        return LinearSdeSpec(A=A, c=np.zeros(g.d), B=np.zeros((g.d, g.d)),
                             dvec=rng.uniform(0.1, 0.2, size=g.d))
    raise ValueError(f"unknown family {family!r}")
