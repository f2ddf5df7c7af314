"""Conditional-independence relations on path segments and the
constraint-based discovery algorithms built on them.

Every algorithm talks to a CI backend through four query types: the
full-interval symmetric relation, the future-extended relation on a
past/future time split, the self-loop relation, and the initial-value
relation.  The oracle backend answers by d-separation in a ground-truth
graph (lifted where appropriate); the statistical backend answers by
kernel permutation tests on signature Gram matrices.  Algorithms are
agnostic to which backend they get, which is what the exact-recovery
tests exploit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from . import citest, sigkernel
from .graphs import (Dag, MixedGraph, SepSetTable, ancestors,
                     apply_meek_rules, d_separated, lift)
from .paths import Interval, restrict_and_rebase


@dataclass(frozen=True)
class DiscoveryConfig:
    s: float = 0.1
    h: float = 0.9
    alpha: float = 0.05
    max_cond_size: int = None
    seed: int = 0
    eager: bool = True

    def __post_init__(self):
        if not 0 < self.s < self.s + self.h:
            raise ValueError("need 0 < s < s + h")


@dataclass(frozen=True)
class CiQuery:
    relation: str
    i: object
    j: object
    K: tuple


class ConditioningCapExceeded(RuntimeError):
    pass


class _BackendBase:
    """Shared query logging and memoization."""

    def __init__(self):
        self.log = []
        self._cache = {}

    def _answer(self, query, fn):
        if query not in self._cache:
            self._cache[query] = fn()
            self.log.append((query,) + self._cache[query])
        return self._cache[query]

    def sym(self, i, j, K):
        q = CiQuery("sym", i, j, tuple(sorted(K)))
        return self._answer(q, lambda: self._sym(i, j, q.K))[0]

    def future_extended(self, i, j, K):
        q = CiQuery("future", i, j, tuple(sorted(K)))
        return self._answer(q, lambda: self._future(i, j, q.K))[0]

    def self_loop(self, k, K):
        q = CiQuery("self", k, k, tuple(sorted(K)))
        return self._answer(q, lambda: self._self_loop(k, q.K))[0]

    def initial_value(self, i, j):
        q = CiQuery("init", i, j, ())
        return self._answer(q, lambda: self._initial(i, j))[0]

    def initial_value_pvalue(self, i, j):
        self.initial_value(i, j)
        return self._cache[CiQuery("init", i, j, ())][1]

    def future_extended_pvalue(self, i, j, K):
        self.future_extended(i, j, K)
        return self._cache[CiQuery("future", i, j, tuple(sorted(K)))][1]

    def query_count(self):
        return len(self.log)


class OracleBackend(_BackendBase):
    """Answers CI queries by d-separation in a ground-truth graph."""

    def __init__(self, truth):
        super().__init__()
        self.truth = truth
        self.lifted = lift(truth)
        self.d = truth.d

    def _sym(self, i, j, K):
        sep = d_separated(self.truth, {i}, {j}, set(K))
        return sep, 1.0 if sep else 0.0

    def _future(self, i, j, K):
        cond = {(j, 0)} | {(k, 0) for k in K} | {(k, 1) for k in K}
        sep = d_separated(self.lifted, {(i, 0)}, {(j, 1)}, cond)
        return sep, 1.0 if sep else 0.0

    def _self_loop(self, k, K):
        cond = {(v, 0) for v in K} | {(v, 1) for v in K}
        sep = d_separated(self.lifted, {(k, 0)}, {(k, 1)}, cond)
        return sep, 1.0 if sep else 0.0

    def _initial(self, i, j):
        sep = i not in ancestors(self.truth, j)
        return sep, 1.0 if sep else 0.0


class StatisticalBackend(_BackendBase):
    """Answers CI queries by kernel permutation tests on a PathSample.

    Gram matrices of rebased path segments are cached per (variable,
    interval); conditioning sets enter as elementwise products of the
    per-segment Grams.
    """

    def __init__(self, sample, kernel_cfg=None, test_cfg=None,
                 s=0.1, h=0.9, cond_test=citest.sdcit):
        super().__init__()
        self.sample = sample
        self.kernel_cfg = kernel_cfg or sigkernel.KernelConfig()
        self.test_cfg = test_cfg or citest.TestConfig()
        self.s = s
        self.h = h
        self.cond_test = cond_test
        self.variables = sample.coord_map.variables()
        self.d = len(self.variables)
        self._grams = {}

    def _seeded(self, query):
        code = {"sym": 1, "future": 2, "self": 3, "init": 4}[query.relation]
        flat = [self.test_cfg.seed, code, hash(query.i) % (2 ** 31),
                hash(query.j) % (2 ** 31)]
        flat += [hash(k) % (2 ** 31) for k in query.K]
        seed = int(np.random.SeedSequence(flat).generate_state(1)[0])
        return replace(self.test_cfg, seed=seed)

    def _segment_gram(self, var, a, b, rebase=False):
        """Gram matrix of one variable's segments on [a, b].

        In the forward-in-time tests the past and conditioning blocks
        keep their level at a (the initial segment of a path carries its
        starting value as signal) while future blocks are rebased so
        their level is absorbed by the conditioning variable.  The
        whole-interval symmetric test rebases every block.
        """
        key = (var, round(a, 12), round(b, 12), rebase)
        if key not in self._grams:
            segs = [restrict_and_rebase(p, {var}, Interval(a, b), rebase=rebase)
                    for p in self.sample.paths]
            self._grams[key] = sigkernel.gram(segs, segs, self.kernel_cfg).entries
        return self._grams[key]

    def _product_gram(self, pieces):
        out = None
        for var, a, b in pieces:
            g = self._segment_gram(var, a, b)
            out = g if out is None else out * g
        return out

    def _initial_gram(self, var):
        key = ("init", var)
        if key not in self._grams:
            cols = self.sample.coord_map.columns(var)
            x0 = np.stack([p.x[0, cols] for p in self.sample.paths])
            sq = ((x0[:, None, :] - x0[None, :, :]) ** 2).sum(-1)
            tri = sq[np.triu_indices(len(x0), k=1)]
            bw2 = np.median(tri[tri > 0]) if np.any(tri > 0) else 1.0
            self._grams[key] = np.exp(-sq / (2.0 * bw2))
        return self._grams[key]

    @property
    def horizon(self):
        return self.sample.paths[0].horizon

    def _run(self, query, kx, ky, kz):
        cfg = self._seeded(query)
        if kz is None:
            res = citest.hsic_bootstrap(kx, ky, cfg)
        else:
            res = self.cond_test(kx, ky, kz, cfg)
        return (not res.reject), res.p_value

    def _sym(self, i, j, K):
        q = CiQuery("sym", i, j, K)
        t = self.horizon
        kx = self._segment_gram(i, 0.0, t, rebase=True)
        ky = self._segment_gram(j, 0.0, t, rebase=True)
        if K:
            kz = None
            for k in K:
                g = self._segment_gram(k, 0.0, t, rebase=True)
                kz = g if kz is None else kz * g
        else:
            kz = None
        return self._run(q, kx, ky, kz)

    def _future(self, i, j, K):
        q = CiQuery("future", i, j, K)
        s, e = self.s, min(self.s + self.h, self.horizon)
        kx = self._segment_gram(i, 0.0, s)
        ky = self._segment_gram(j, s, e, rebase=True)
        pieces = [(j, 0.0, s)]
        for k in K:
            pieces += [(k, 0.0, s), (k, s, e)]
        kz = self._product_gram(pieces)
        return self._run(q, kx, ky, kz)

    def _self_loop(self, k, K):
        q = CiQuery("self", k, k, K)
        s, e = self.s, min(self.s + self.h, self.horizon)
        kx = self._segment_gram(k, 0.0, s)
        ky = self._segment_gram(k, s, e, rebase=True)
        kz = self._product_gram([(v, 0.0, e) for v in K]) if K else None
        return self._run(q, kx, ky, kz)

    def _initial(self, i, j):
        q = CiQuery("init", i, j, ())
        kx = self._initial_gram(i)
        ky = self._segment_gram(j, 0.0, self.horizon, rebase=True)
        return self._run(q, kx, ky, None)


# Thin public adapters so callers can stay backend-agnostic.

def test_sym(bk, i, j, K=()):
    return bk.sym(i, j, K)


def test_future_extended(bk, i, j, K=()):
    return bk.future_extended(i, j, K)


def test_self_loop(bk, k, K=()):
    return bk.self_loop(k, K)


def test_initial_value(bk, i, j):
    return bk.initial_value(i, j)


def _max_cond(cfg, d):
    return cfg.max_cond_size if cfg.max_cond_size is not None else max(d - 2, 0)


def _loop_pass(bk, d, parents):
    loops = []
    for k in range(d):
        K = tuple(sorted(set(parents(k)) - {k}))
        if not bk.self_loop(k, K):
            loops.append((k, k))
    return loops


def run_algorithm1(bk, d, cfg=DiscoveryConfig()):
    """Edge discovery over the lifted two-layer structure.

    Starts from the complete lifted edge set and removes the three-edge
    bundle of a pair (i, j) as soon as the future-extended relation
    accepts for some conditioning set whose members are all still
    parents of the future copy of j.  Loops are resolved afterwards by
    self-loop tests conditioned on the discovered parents.
    """
    adj = {(i, j): True for i in range(d) for j in range(d) if i != j}
    max_c = _max_cond(cfg, d)
    for c in range(max_c + 1):
        removals = []
        for i, j in sorted(adj):
            if not adj[(i, j)]:
                continue
            pool = sorted(k for k in range(d)
                          if k not in (i, j) and adj[(k, j)])
            for K in itertools.combinations(pool, c):
                if bk.future_extended(i, j, K):
                    if cfg.eager:
                        adj[(i, j)] = False
                    else:
                        removals.append((i, j))
                    break
        if not cfg.eager:
            for i, j in removals:
                adj[(i, j)] = False
    edges = [(i, j) for (i, j), present in adj.items() if present]
    parent_map = {j: [i for i, jj in edges if jj == j] for j in range(d)}
    edges += _loop_pass(bk, d, lambda k: parent_map.get(k, []))
    return Dag(d, edges, strict=False)


def _pc_skeleton(bk, d, cfg, nodes=None, exhaustive_tail=False):
    """PC-style skeleton with the symmetric relation.

    Conditioning sets are drawn from the current neighbors of the second
    endpoint; with exhaustive_tail the surviving pairs face every subset
    of the remaining variables up to the conditioning cap.
    """
    nodes = sorted(nodes) if nodes is not None else list(range(d))
    adj = {frozenset(p) for p in itertools.combinations(nodes, 2)}
    seps = SepSetTable()
    max_c = _max_cond(cfg, len(nodes))

    def neighbors(v):
        return sorted(w for w in nodes if w != v and frozenset((v, w)) in adj)

    for c in range(max_c + 1):
        for i, j in sorted((a, b) for a in nodes for b in nodes if a != b):
            if frozenset((i, j)) not in adj:
                continue
            pool = [k for k in neighbors(j) if k != i]
            for K in itertools.combinations(pool, c):
                if bk.sym(i, j, K):
                    adj.discard(frozenset((i, j)))
                    seps.record(i, j, K)
                    break
    if exhaustive_tail:
        for i, j in sorted(tuple(sorted(p)) for p in adj):
            pool = [k for k in nodes if k not in (i, j)]
            done = False
            for c in range(min(max_c, len(pool)) + 1):
                for K in itertools.combinations(pool, c):
                    if bk.sym(i, j, K):
                        adj.discard(frozenset((i, j)))
                        seps.record(i, j, K)
                        done = True
                        break
                if done:
                    break
    return adj, seps


def _pattern_from_skeleton(d, adj, seps):
    """Collider orientation: i -> j <- k whenever j sits between the
    non-adjacent pair (i, k) but outside its separating set."""
    mg = MixedGraph(d)
    for pair in adj:
        i, j = sorted(pair)
        mg.add_undirected(i, j)
    for i, k in itertools.combinations(range(d), 2):
        if frozenset((i, k)) in adj:
            continue
        sep = seps.get(i, k)
        if sep is None:
            continue
        for j in range(d):
            if j in (i, k) or j in sep:
                continue
            if frozenset((i, j)) in adj and frozenset((k, j)) in adj:
                mg.add_directed(i, j)
                mg.add_directed(k, j)
    return apply_meek_rules(mg)


def run_pc_with_init_postprocessing(bk, d, cfg=DiscoveryConfig()):
    """PC skeleton and colliders on the symmetric relation, Meek
    closure, then orientation of the leftover undirected edges by
    initial-value independence, and a final self-loop pass."""
    adj, seps = _pc_skeleton(bk, d, cfg)
    mg = _pattern_from_skeleton(d, adj, seps)
    for a, b in sorted(mg.undirected_pairs()):
        ind_ab = bk.initial_value(a, b)
        ind_ba = bk.initial_value(b, a)
        if ind_ab == ind_ba:
            # Statistically contradictory answers: trust the direction
            # with the stronger dependence evidence.
            ind_ab = bk.initial_value_pvalue(a, b) >= bk.initial_value_pvalue(b, a)
            ind_ba = not ind_ab
        if ind_ba:
            mg.add_directed(a, b)
        else:
            mg.add_directed(b, a)
    edges = list(mg.directed_edges())
    parent_map = {j: [i for i, jj in edges if jj == j] for j in range(d)}
    edges += _loop_pass(bk, d, lambda k: parent_map.get(k, []))
    return Dag(d, edges, strict=False)


def run_robust_no_init(bk, d, cfg=DiscoveryConfig()):
    """Orientation of leftover undirected edges without initial values.

    Each direction i -> j of an undirected pair is attacked with the
    future-extended relation over conditioning sets formed by the known
    parents of j plus any subset of j's undirected neighbors; the
    direction that accepts is removed from the lifted structure.
    """
    adj, seps = _pc_skeleton(bk, d, cfg)
    mg = _pattern_from_skeleton(d, adj, seps)
    max_c = _max_cond(cfg, d)
    kept = {}
    for a, b in sorted(mg.undirected_pairs()):
        for i, j in ((a, b), (b, a)):
            pa_known = sorted(k for k in range(d) if mg.has_directed(k, j))
            un = sorted(k for k in range(d)
                        if k != i and mg.has_undirected(k, j))
            if len(un) > max_c:
                raise ConditioningCapExceeded(
                    f"{len(un)} undirected neighbors of {j} exceed the cap {max_c}")
            kept[(i, j)] = True
            for size in range(len(un) + 1):
                stop = False
                for S in itertools.combinations(un, size):
                    K = tuple(sorted(set(pa_known) | set(S)))
                    if bk.future_extended(i, j, K):
                        kept[(i, j)] = False
                        stop = True
                        break
                if stop:
                    break
    for a, b in sorted(mg.undirected_pairs()):
        ab, ba = kept[(a, b)], kept[(b, a)]
        if ab and ba:
            # Neither direction separated: keep the one with the weaker
            # independence evidence.
            p_ab = max((bk.future_extended_pvalue(a, b, K)
                        for K in _tested_sets(bk, a, b)), default=0.0)
            p_ba = max((bk.future_extended_pvalue(b, a, K)
                        for K in _tested_sets(bk, b, a)), default=0.0)
            ab = p_ab <= p_ba
            ba = not ab
        if ab and not ba:
            mg.add_directed(a, b)
        elif ba and not ab:
            mg.add_directed(b, a)
        else:
            mg.remove_edge(a, b)
    edges = list(mg.directed_edges())
    parent_map = {j: [i for i, jj in edges if jj == j] for j in range(d)}
    edges += _loop_pass(bk, d, lambda k: parent_map.get(k, []))
    return Dag(d, edges, strict=False)


def _tested_sets(bk, i, j):
    return [q.K for q in bk._cache
            if q.relation == "future" and q.i == i and q.j == j]


def run_partially_observed(bk, observed, cfg=DiscoveryConfig()):
    """Ancestral-graph recovery over an observed variable subset.

    The skeleton uses the symmetric relation with conditioning sets
    drawn from the observed variables only (adjacency-guided first,
    then exhaustively for the surviving pairs, so adjacency matches
    observed-inseparability exactly).  Each remaining adjacency is
    oriented into ->, <- or <-> by the two initial-value queries.
    Output nodes follow the sorted order of ``observed``.
    """
    obs = sorted(set(observed))
    index = {v: p for p, v in enumerate(obs)}
    adj, _ = _pc_skeleton(bk, len(obs), cfg, nodes=obs, exhaustive_tail=True)
    mg = MixedGraph(len(obs))
    for pair in sorted(tuple(sorted(p)) for p in adj):
        x, y = pair
        ind_xy = bk.initial_value(x, y)
        ind_yx = bk.initial_value(y, x)
        if not ind_xy and not ind_yx:
            # Both directions look ancestral, impossible in an acyclic
            # model; keep the direction with stronger evidence.
            if bk.initial_value_pvalue(x, y) >= bk.initial_value_pvalue(y, x):
                ind_xy = True
            else:
                ind_yx = True
        if not ind_xy:
            mg.add_directed(index[x], index[y])
        elif not ind_yx:
            mg.add_directed(index[y], index[x])
        else:
            mg.add_bidirected(index[x], index[y])
    return mg
