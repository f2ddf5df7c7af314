"""Causal graph structures and algorithms.

Directed graphs with self-loops, their loop-free lifted version, mixed
graphs (CPDAGs and MAGs), d-separation, Meek orientation rules,
latent projection to a MAG, random DAG sampling and structural
Hamming distances.
"""

from __future__ import annotations

import itertools
import json

import numpy as np

TAIL = "tail"
ARROW = "arrow"
CIRCLE = "circle"

_MARKS = (TAIL, ARROW, CIRCLE)


def _check_nodes(d, nodes):
    for v in nodes:
        if not (0 <= v < d):
            raise IndexError(f"node {v} out of range for d={d}")


class Dag:
    """Directed graph on nodes 0..d-1 with optional self-loops.

    Cycles of length greater than one are rejected at construction.
    Self-loops (k, k) are allowed and tracked alongside the ordinary
    edges.  strict=False skips the acyclicity check so that outputs of
    statistical discovery runs, which can contain two-cycles, remain
    representable; such graphs only support adjacency-level queries.
    """

    def __init__(self, d, edges, strict=True):
        if d < 1:
            raise ValueError("need at least one node")
        edges = frozenset((int(i), int(j)) for i, j in edges)
        for i, j in edges:
            _check_nodes(d, (i, j))
        self.d = d
        self.edges = edges
        self.loops = frozenset(k for k, l in edges if k == l)
        self._parents = [set() for _ in range(d)]
        self._children = [set() for _ in range(d)]
        for i, j in edges:
            if i != j:
                self._parents[j].add(i)
                self._children[i].add(j)
        self.acyclic = not self._has_cycle()
        if strict and not self.acyclic:
            raise ValueError("directed cycle of length > 1")

    def _has_cycle(self):
        indeg = np.array([len(p) for p in self._parents])
        queue = [v for v in range(self.d) if indeg[v] == 0]
        seen = 0
        while queue:
            v = queue.pop()
            seen += 1
            for c in self._children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        return seen < self.d

    @property
    def nonloop_edges(self):
        return frozenset((i, j) for i, j in self.edges if i != j)

    def parents(self, v):
        """Parents of v, excluding v itself even when a loop is present."""
        return frozenset(self._parents[v])

    def children(self, v):
        return frozenset(self._children[v])

    def has_edge(self, i, j):
        return (i, j) in self.edges

    def adjacency(self):
        """0/1 adjacency matrix; the diagonal marks self-loops."""
        a = np.zeros((self.d, self.d), dtype=np.int64)
        for i, j in self.edges:
            a[i, j] = 1
        return a

    def topological_order(self):
        indeg = {v: len(self._parents[v]) for v in range(self.d)}
        queue = sorted(v for v in range(self.d) if indeg[v] == 0)
        order = []
        while queue:
            v = queue.pop(0)
            order.append(v)
            for c in sorted(self._children[v]):
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        return order

    def __eq__(self, other):
        return (isinstance(other, Dag) and self.d == other.d
                and self.edges == other.edges)

    def __hash__(self):
        return hash((self.d, self.edges))

    def __repr__(self):
        return f"Dag(d={self.d}, edges={sorted(self.edges)})"

    def to_json(self):
        return json.dumps({
            "d": self.d,
            "edges": sorted([i, j] for i, j in self.nonloop_edges),
            "loops": sorted(self.loops),
        })

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        edges = [(i, j) for i, j in obj.get("edges", [])]
        edges += [(k, k) for k in obj.get("loops", [])]
        return cls(obj["d"], edges)


def ancestors(g, v):
    """Ancestors of v in g under the reflexive-transitive parent closure.

    v itself is always included.  Self-loops are ignored.
    """
    out = {v}
    stack = [v]
    while stack:
        w = stack.pop()
        for p in g.parents(w):
            if p not in out:
                out.add(p)
                stack.append(p)
    return frozenset(out)


def sample_er_dag(d, edge_prob, loop_prob, rng):
    """Erdos-Renyi DAG: random node order, each forward pair kept with
    probability edge_prob, self-loops added independently per node."""
    order = rng.permutation(d)
    edges = []
    for a in range(d):
        for b in range(a + 1, d):
            if rng.random() < edge_prob:
                edges.append((int(order[a]), int(order[b])))
    for k in range(d):
        if rng.random() < loop_prob:
            edges.append((k, k))
    return Dag(d, edges)


# ---------------------------------------------------------------------------
# Lifted graph: two copies of each node, initial segment (k, 0) and
# increment segment (k, 1).

class LiftedGraph:
    """Loop-free DAG on nodes (k, 0) and (k, 1) for k in 0..d-1.

    Construction enforces the pattern produced by lift(): no edge may
    run from the increment layer back to the initial layer, and for
    i != j the three edges (i0, j0), (i1, j1), (i0, j1) appear together
    or not at all.
    """

    def __init__(self, d, edges):
        edges = frozenset(((int(i), int(a)), (int(j), int(b)))
                          for (i, a), (j, b) in edges)
        for (i, a), (j, b) in edges:
            _check_nodes(d, (i, j))
            if a not in (0, 1) or b not in (0, 1):
                raise ValueError("layer index must be 0 or 1")
            if a == 1 and b == 0:
                raise ValueError("edge from increment layer to initial layer")
            if (i, a) == (j, b):
                raise ValueError("lifted graph admits no self-loops")
        for i in range(d):
            for j in range(d):
                if i == j:
                    continue
                triple = [((i, 0), (j, 0)) in edges,
                          ((i, 1), (j, 1)) in edges,
                          ((i, 0), (j, 1)) in edges]
                if any(triple) and not all(triple):
                    raise ValueError(
                        f"inconsistent edge triple for pair ({i}, {j})")
        self.d = d
        self.edges = edges
        self._parents = {}
        self._children = {}
        for v in self.nodes():
            self._parents[v] = set()
            self._children[v] = set()
        for u, v in edges:
            self._parents[v].add(u)
            self._children[u].add(v)

    def nodes(self):
        return [(k, layer) for layer in (0, 1) for k in range(self.d)]

    def parents(self, v):
        return frozenset(self._parents[v])

    def children(self, v):
        return frozenset(self._children[v])

    def __eq__(self, other):
        return (isinstance(other, LiftedGraph) and self.d == other.d
                and self.edges == other.edges)

    def __repr__(self):
        return f"LiftedGraph(d={self.d}, edges={sorted(self.edges)})"


def lift(g):
    """Build the lifted graph of a DAG with loops.

    A loop at k becomes the single edge (k,0) -> (k,1); each ordinary
    edge i -> j becomes the triple (i,0)->(j,0), (i,1)->(j,1) and
    (i,0)->(j,1).
    """
    edges = []
    for k in g.loops:
        edges.append(((k, 0), (k, 1)))
    for i, j in g.nonloop_edges:
        edges.append(((i, 0), (j, 0)))
        edges.append(((i, 1), (j, 1)))
        edges.append(((i, 0), (j, 1)))
    return LiftedGraph(g.d, edges)


def collapse(lg):
    """Invert lift(): read loops off the (k,0)->(k,1) edges and ordinary
    edges off the cross pairs."""
    edges = []
    for k in range(lg.d):
        if ((k, 0), (k, 1)) in lg.edges:
            edges.append((k, k))
    for i in range(lg.d):
        for j in range(lg.d):
            if i != j and ((i, 0), (j, 0)) in lg.edges:
                edges.append((i, j))
    return Dag(lg.d, edges)


# ---------------------------------------------------------------------------
# d-separation via reachability (Bayes-ball traversal).

def d_separated(g, A, B, C):
    """Whether A and B are d-separated by C in the directed graph g.

    g may be a Dag or a LiftedGraph; self-loops on a Dag are ignored
    for separation purposes.  A, B, C must be pairwise disjoint sets of
    nodes of g.
    """
    A, B, C = set(A), set(B), set(C)
    if A & B or A & C or B & C:
        raise ValueError("A, B, C must be pairwise disjoint")
    if not A or not B:
        return True

    an_c = set()
    stack = list(C)
    an_c.update(C)
    while stack:
        v = stack.pop()
        for p in g.parents(v):
            if p not in an_c:
                an_c.add(p)
                stack.append(p)

    # States are (node, direction); direction "up" means the node was
    # entered from a child, "down" means from a parent.
    visited = set()
    frontier = [(a, "up") for a in A]
    while frontier:
        v, direction = frontier.pop()
        if (v, direction) in visited:
            continue
        visited.add((v, direction))
        if v in B:
            return False
        if direction == "up":
            if v not in C:
                for p in g.parents(v):
                    frontier.append((p, "up"))
                for c in g.children(v):
                    if c != v:
                        frontier.append((c, "down"))
        else:
            if v not in C:
                for c in g.children(v):
                    if c != v:
                        frontier.append((c, "down"))
            if v in an_c:
                for p in g.parents(v):
                    frontier.append((p, "up"))
    return True


# ---------------------------------------------------------------------------
# Mixed graphs: CPDAGs and MAGs.

class MixedGraph:
    """Graph with endpoint marks per unordered pair, plus per-node loops.

    marks maps a sorted pair (i, j) to (mark at i, mark at j); a
    directed edge i -> j carries a tail at i and an arrow at j, an
    undirected edge two tails, a bidirected edge two arrows.  Self-loops
    are kept in a separate node set since they carry no endpoint marks.
    """

    def __init__(self, d, marks=None, loops=()):
        self.d = d
        self.marks = {}
        if marks:
            for (i, j), (mi, mj) in marks.items():
                self._set(i, j, mi, mj)
        self.loops = set(int(k) for k in loops)
        _check_nodes(d, self.loops)

    def _set(self, i, j, mi, mj):
        i, j = int(i), int(j)
        _check_nodes(self.d, (i, j))
        if i == j:
            raise ValueError("self-loops are stored in .loops, not as marks")
        if mi not in _MARKS or mj not in _MARKS:
            raise ValueError(f"marks must be in {_MARKS}")
        if i > j:
            i, j, mi, mj = j, i, mj, mi
        self.marks[(i, j)] = (mi, mj)

    def copy(self):
        return MixedGraph(self.d, dict(self.marks), set(self.loops))

    def add_undirected(self, i, j):
        self._set(i, j, TAIL, TAIL)

    def add_directed(self, i, j):
        """Add or overwrite the edge i -> j."""
        self._set(i, j, TAIL, ARROW)

    def add_bidirected(self, i, j):
        self._set(i, j, ARROW, ARROW)

    def remove_edge(self, i, j):
        self.marks.pop((min(i, j), max(i, j)), None)

    def is_adjacent(self, i, j):
        return (min(i, j), max(i, j)) in self.marks

    def mark_at(self, i, j):
        """Mark at endpoint j of the edge between i and j."""
        a, b = min(i, j), max(i, j)
        mi, mj = self.marks[(a, b)]
        return mj if j == b else mi

    def has_directed(self, i, j):
        return (self.is_adjacent(i, j) and self.mark_at(j, i) == TAIL
                and self.mark_at(i, j) == ARROW)

    def has_undirected(self, i, j):
        return (self.is_adjacent(i, j) and self.mark_at(j, i) == TAIL
                and self.mark_at(i, j) == TAIL)

    def has_bidirected(self, i, j):
        return (self.is_adjacent(i, j) and self.mark_at(j, i) == ARROW
                and self.mark_at(i, j) == ARROW)

    def neighbors(self, v):
        return frozenset(j if i == v else i
                         for (i, j) in self.marks if v in (i, j))

    def directed_edges(self):
        out = set()
        for (i, j), (mi, mj) in self.marks.items():
            if (mi, mj) == (TAIL, ARROW):
                out.add((i, j))
            elif (mi, mj) == (ARROW, TAIL):
                out.add((j, i))
        return out

    def undirected_pairs(self):
        return {(i, j) for (i, j), m in self.marks.items()
                if m == (TAIL, TAIL)}

    def bidirected_pairs(self):
        return {(i, j) for (i, j), m in self.marks.items()
                if m == (ARROW, ARROW)}

    def __eq__(self, other):
        return (isinstance(other, MixedGraph) and self.d == other.d
                and self.marks == other.marks and self.loops == other.loops)

    def __repr__(self):
        return (f"MixedGraph(d={self.d}, marks={self.marks}, "
                f"loops={sorted(self.loops)})")

    def to_json(self):
        return json.dumps({
            "d": self.d,
            "marks": sorted([i, j, mi, mj]
                            for (i, j), (mi, mj) in self.marks.items()),
            "loops": sorted(self.loops),
        })

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        marks = {(i, j): (mi, mj) for i, j, mi, mj in obj.get("marks", [])}
        return cls(obj["d"], marks, obj.get("loops", ()))


class SepSetTable:
    """Separating sets recorded per non-adjacent unordered pair."""

    def __init__(self):
        self._table = {}

    def record(self, i, j, sep):
        self._table[(min(i, j), max(i, j))] = frozenset(sep)

    def get(self, i, j):
        return self._table.get((min(i, j), max(i, j)))

    def __contains__(self, pair):
        i, j = pair
        return (min(i, j), max(i, j)) in self._table

    def items(self):
        return self._table.items()


def _would_cycle(mg, i, j):
    """True if orienting i -> j would close a directed cycle."""
    stack = [j]
    seen = {j}
    while stack:
        v = stack.pop()
        if v == i:
            return True
        for a, b in mg.directed_edges():
            if a == v and b not in seen:
                seen.add(b)
                stack.append(b)
    return False


def apply_meek_rules(mg):
    """Orient undirected edges of a pattern to a fixed point.

    The four standard propagation rules are applied repeatedly:
      R1: i -> j - k with i, k non-adjacent orients j -> k.
      R2: i -> j -> k with i - k orients i -> k.
      R3: i - j, i - k, i - l, k -> j, l -> j, k and l non-adjacent
          orients i -> j.
      R4: i - j, i - k, k -> l, l -> j, k and j non-adjacent
          orients i -> j.
    """
    mg = mg.copy()
    changed = True
    while changed:
        changed = False
        for (a, b) in list(mg.undirected_pairs()):
            for i, j in ((a, b), (b, a)):
                if _meek_fires(mg, i, j):
                    mg.add_directed(i, j)
                    changed = True
                    break
    return mg


def _meek_fires(mg, i, j):
    """Whether some Meek rule orients the undirected edge i - j as i -> j."""
    # R1: k -> i, k and j non-adjacent.
    for k in mg.neighbors(i):
        if mg.has_directed(k, i) and not mg.is_adjacent(k, j):
            return True
    # R2: i -> k -> j.
    for k in mg.neighbors(i):
        if mg.has_directed(i, k) and mg.has_directed(k, j):
            return True
    # R3: i - k, i - l, k -> j, l -> j, k and l non-adjacent.
    candidates = [k for k in mg.neighbors(i)
                  if mg.has_undirected(i, k) and mg.has_directed(k, j)]
    for k, l in itertools.combinations(candidates, 2):
        if not mg.is_adjacent(k, l):
            return True
    # R4: i - k, k -> l, l -> j, k and j non-adjacent.
    for k in mg.neighbors(i):
        if not mg.has_undirected(i, k) or mg.is_adjacent(k, j):
            continue
        for l in mg.neighbors(k):
            if mg.has_directed(k, l) and mg.has_directed(l, j):
                return True
    return False


def cpdag_of(g):
    """CPDAG of a DAG: skeleton, v-structures, then Meek closure.

    Self-loops of g are ignored; the output has no loops set.
    """
    mg = MixedGraph(g.d)
    for i, j in g.nonloop_edges:
        mg.add_undirected(i, j)
    for j in range(g.d):
        pa = sorted(g.parents(j))
        for i, k in itertools.combinations(pa, 2):
            if not (g.has_edge(i, k) or g.has_edge(k, i)):
                mg.add_directed(i, j)
                mg.add_directed(k, j)
    return apply_meek_rules(mg)


# ---------------------------------------------------------------------------
# Latent projection of a DAG onto an observed subset (MAG).

def _inducing_path_exists(g, x, y, observed):
    """Inducing path between x and y relative to the latent nodes.

    A path is inducing when every non-endpoint node that is observed is
    a collider on the path, and every collider on it is an ancestor of
    x or y.  Searched over walk states (previous node, current node,
    whether current was entered through an arrowhead).
    """
    latent = set(range(g.d)) - set(observed)
    anc_xy = ancestors(g, x) | ancestors(g, y)

    # Walk states: (current node, entered through an arrowhead).  The
    # first step out of x carries no interior-node condition.
    start = [(w, True) for w in g.children(x) if w != x]
    start += [(w, False) for w in g.parents(x) if w != x]
    seen = set(start)
    stack = list(start)
    while stack:
        v, head_in = stack.pop()
        if v == y:
            return True
        # Leaving v through a tail (edge v -> w): v is a non-collider on
        # the walk, which an inducing path only tolerates for latent v.
        if v in latent:
            for w in g.children(v):
                if w != v and (w, True) not in seen:
                    seen.add((w, True))
                    stack.append((w, True))
        # Leaving v through an arrowhead (edge w -> v traversed towards
        # w): v is a collider iff it was also entered through a head.
        ok = (v in anc_xy) if head_in else (v in latent)
        if ok:
            for w in g.parents(v):
                if w != v and (w, False) not in seen:
                    seen.add((w, False))
                    stack.append((w, False))
    return False


def project_to_mag(g, observed):
    """Project a DAG onto an observed node subset as a MAG.

    Nodes are relabelled 0..m-1 following the sorted order of
    ``observed``.  Two observed nodes are adjacent iff an inducing path
    relative to the latent set connects them; the endpoint at y gets an
    arrowhead unless y is an ancestor of x (then a tail).  Self-loops
    are outside the ancestral-graph layer and are not carried over.
    """
    obs = sorted(set(observed))
    _check_nodes(g.d, obs)
    index = {v: p for p, v in enumerate(obs)}
    mg = MixedGraph(len(obs))
    for x, y in itertools.combinations(obs, 2):
        if not _inducing_path_exists(g, x, y, obs):
            continue
        x_anc_of_y = x in ancestors(g, y)
        y_anc_of_x = y in ancestors(g, x)
        if x_anc_of_y and not y_anc_of_x:
            mg.add_directed(index[x], index[y])
        elif y_anc_of_x and not x_anc_of_y:
            mg.add_directed(index[y], index[x])
        else:
            mg.add_bidirected(index[x], index[y])
    return mg


# ---------------------------------------------------------------------------
# Structural Hamming distance.

def shd(g1, g2):
    """Entrywise L1 distance between adjacency matrices.

    The diagonal is included, so each self-loop disagreement costs 1 and
    a reversed edge costs 2.
    """
    if g1.d != g2.d:
        raise ValueError("graphs must share the node count")
    return int(np.abs(g1.adjacency() - g2.adjacency()).sum())


def nshd(g1, g2):
    """shd normalized by the number of ordered node pairs d(d-1)."""
    return shd(g1, g2) / (g1.d * (g1.d - 1))
