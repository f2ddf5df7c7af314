"""Shared brute-force oracles and generators for the test suite.

Everything here is deliberately naive: path enumeration instead of
reachability, factorial search instead of assignment, explicit
equivalence-class enumeration instead of rule propagation.  Slow but
obviously correct, which is the point.
"""

import itertools

import numpy as np

from sigcausal import CoordMap, Dag, MixedGraph, Path, ancestors, cpdag_of


def descendants(g, v):
    """Reflexive descendant set of v, ignoring self-loops."""
    out = {v}
    stack = [v]
    while stack:
        w = stack.pop()
        for c in g.children(w):
            if c not in out:
                out.add(c)
                stack.append(c)
    return out


def path_enum_d_separated(g, i, j, C):
    """d-separation by explicit enumeration of simple undirected paths.

    A path is blocked if some non-collider on it is in C, or some
    collider on it has no descendant in C.  d-separated means every
    simple path between i and j is blocked.
    """
    C = set(C)
    adj = {v: set() for v in range(g.d)}
    for a, b in g.nonloop_edges:
        adj[a].add(b)
        adj[b].add(a)

    def extend(path):
        v = path[-1]
        if v == j:
            yield path
            return
        for w in adj[v]:
            if w not in path:
                yield from extend(path + [w])

    for path in extend([i]):
        blocked = False
        for pos in range(1, len(path) - 1):
            prev, mid, nxt = path[pos - 1], path[pos], path[pos + 1]
            collider = g.has_edge(prev, mid) and g.has_edge(nxt, mid)
            if collider:
                if not any(u in C for u in descendants(g, mid)):
                    blocked = True
                    break
            elif mid in C:
                blocked = True
                break
        if not blocked:
            return False
    return True


def v_structures(g):
    """Set of (i, j, k) with i -> j <- k, i < k, i and k non-adjacent."""
    out = set()
    for jj in range(g.d):
        for i, k in itertools.combinations(sorted(g.parents(jj)), 2):
            if not (g.has_edge(i, k) or g.has_edge(k, i)):
                out.add((i, jj, k))
    return out


def brute_force_cpdag(g):
    """CPDAG by enumerating the whole Markov equivalence class.

    Members are the acyclic orientations of g's skeleton with the same
    v-structures; an edge is directed in the CPDAG iff it has the same
    orientation in every member.
    """
    skel = sorted(tuple(sorted(e)) for e in g.nonloop_edges)
    target = v_structures(g)
    members = []
    for choice in itertools.product((0, 1), repeat=len(skel)):
        edges = [(a, b) if bit == 0 else (b, a)
                 for (a, b), bit in zip(skel, choice)]
        try:
            cand = Dag(g.d, edges)
        except ValueError:
            continue
        if v_structures(cand) == target:
            members.append(cand)
    mg = MixedGraph(g.d)
    for a, b in skel:
        if all(m.has_edge(a, b) for m in members):
            mg.add_directed(a, b)
        elif all(m.has_edge(b, a) for m in members):
            mg.add_directed(b, a)
        else:
            mg.add_undirected(a, b)
    return mg


def brute_force_min_derangement(dist):
    """Minimum-cost fixed-point-free permutation by factorial search."""
    n = dist.shape[0]
    best_cost, best_perm = np.inf, None
    for perm in itertools.permutations(range(n)):
        if any(p == i for i, p in enumerate(perm)):
            continue
        cost = sum(dist[i, p] for i, p in enumerate(perm))
        if cost < best_cost:
            best_cost, best_perm = cost, perm
    return best_cost, best_perm


def random_psd_gram(n, rng, width=3):
    """Random PSD Gram matrix from an RBF kernel on random points."""
    pts = rng.standard_normal((n, width))
    sq = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    return np.exp(-sq / (2.0 * np.median(sq[sq > 0])))


def random_piecewise_linear(rng, dim=2, max_segments=8, total_variation=1.0):
    """Random piecewise-linear path with total variation at most the
    given bound, on a uniform grid over [0, 1]."""
    n_seg = int(rng.integers(2, max_segments + 1))
    steps = rng.standard_normal((n_seg, dim))
    tv = np.sum(np.linalg.norm(steps, axis=1))
    steps *= total_variation * rng.uniform(0.5, 1.0) / tv
    x = np.vstack([np.zeros(dim), np.cumsum(steps, axis=0)])
    t = np.linspace(0.0, 1.0, n_seg + 1)
    return Path(t, x, CoordMap([(0, 0, dim)]))


def mag_by_definition(g, observed):
    """Latent projection read directly off ancestral relations and
    m-connecting walks, for cross-checking project_to_mag.

    Adjacency: x and y observed are adjacent iff they cannot be
    m-separated by any subset of the remaining observed nodes, which for
    a DAG projection equals d-connection given every such subset.
    """
    obs = sorted(set(observed))
    index = {v: p for p, v in enumerate(obs)}
    mg = MixedGraph(len(obs))
    for x, y in itertools.combinations(obs, 2):
        rest = [v for v in obs if v not in (x, y)]
        separable = any(
            path_enum_d_separated(g, x, y, set(C))
            for r in range(len(rest) + 1)
            for C in itertools.combinations(rest, r))
        if separable:
            continue
        x_anc = x in ancestors(g, y)
        y_anc = y in ancestors(g, x)
        if x_anc and not y_anc:
            mg.add_directed(index[x], index[y])
        elif y_anc and not x_anc:
            mg.add_directed(index[y], index[x])
        else:
            mg.add_bidirected(index[x], index[y])
    return mg


def offdiag_shd(g1, g2):
    """Structural Hamming distance over ordered pairs, loops excluded."""
    a1, a2 = g1.adjacency(), g2.adjacency()
    np.fill_diagonal(a1, 0)
    np.fill_diagonal(a2, 0)
    return int(np.abs(a1 - a2).sum())
