"""Weighted symmetric graphs, degrees, potentials, and directional gradient norms."""

import math
from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .errors import (
    DuplicateEdge,
    IndexOutOfRange,
    IsolatedNode,
    NonpositiveWeight,
    SelfLoop,
    SizeMismatch,
    UnsupportedNorm,
)

# Cap standing in for infinity everywhere; no IEEE inf is stored in node fields.
INFINITY_CAP = 1e6

P_ONE = 1
P_INF = math.inf


def check_p(p):
    if p != P_ONE and p != P_INF:
        raise UnsupportedNorm(f"only p=1 and p=inf are supported, got {p}")
    return p == P_INF


@dataclass(frozen=True)
class Graph:
    """Symmetric weighted graph in CSR form, neighbors sorted by index.

    Immutable after construction; safe for concurrent reads.
    """

    n_nodes: int
    indptr: np.ndarray   # (n+1,) int64
    indices: np.ndarray  # (nnz,) int64
    weights: np.ndarray  # (nnz,) float64, > 0
    csqrt: np.ndarray = field(init=False)  # sqrt(weights), the gradient coefficients

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.weights):
            arr.setflags(write=False)
        csqrt = np.sqrt(self.weights)
        csqrt.setflags(write=False)
        object.__setattr__(self, "csqrt", csqrt)

    @property
    def edge_count(self):
        """Number of undirected edges."""
        return self.indices.shape[0] // 2

    def neighbors(self, i):
        """(neighbor indices, weights) of node i."""
        self.check_node(i)
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def check_node(self, i):
        if not 0 <= i < self.n_nodes:
            raise IndexOutOfRange(f"node {i} not in [0, {self.n_nodes})")

    def weight(self, i, j):
        """w(i, j); 0.0 when the edge is absent."""
        nbrs, w = self.neighbors(i)
        self.check_node(j)
        pos = np.searchsorted(nbrs, j)
        if pos < nbrs.shape[0] and nbrs[pos] == j:
            return float(w[pos])
        return 0.0

    def edges(self):
        """Undirected edge list [(i, j, w)] with i < j."""
        out = []
        for i in range(self.n_nodes):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            for e in range(lo, hi):
                j = int(self.indices[e])
                if i < j:
                    out.append((i, j, float(self.weights[e])))
        return out


def build_graph(n_nodes, edges):
    """Build a symmetric Graph from an undirected edge list [(i, j, w)].

    Listing both (i, j) and (j, i), or the same pair twice, is rejected.
    """
    adj = [dict() for _ in range(n_nodes)]
    for i, j, w in edges:
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise IndexOutOfRange(f"edge ({i},{j}) outside [0, {n_nodes})")
        if i == j:
            raise SelfLoop(f"self-loop at node {i}")
        if w <= 0:
            raise NonpositiveWeight(f"edge ({i},{j}) has weight {w}")
        if j in adj[i]:
            raise DuplicateEdge(f"edge ({i},{j}) listed more than once")
        adj[i][j] = float(w)
        adj[j][i] = float(w)
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    idx = []
    wts = []
    for i in range(n_nodes):
        nbrs = sorted(adj[i].items())
        indptr[i + 1] = indptr[i] + len(nbrs)
        idx.extend(j for j, _ in nbrs)
        wts.extend(w for _, w in nbrs)
    return Graph(
        n_nodes=n_nodes,
        indptr=indptr,
        indices=np.asarray(idx, dtype=np.int64),
        weights=np.asarray(wts, dtype=np.float64),
    )


def degree(g, i):
    """Weighted degree: sum of incident edge weights."""
    _, w = g.neighbors(i)
    return float(w.sum())


def degrees(g):
    """Weighted degree of every node."""
    return np.add.reduceat(
        np.concatenate([g.weights, [0.0]]), g.indptr[:-1]
    ) * (np.diff(g.indptr) > 0)


@dataclass
class PotentialParams:
    """Potential rho(x): fixed degree power, or a learnable per-node log field."""

    mode: str = "fixed_alpha"  # fixed_alpha | learned
    alpha: float = 0.0
    log_rho: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("fixed_alpha", "learned"):
            raise ValueError(f"unknown potential mode {self.mode!r}")


def potential_eval(g, p):
    """Evaluate rho(x) on every node; strictly positive by construction."""
    if p.mode == "learned":
        if p.log_rho is None or p.log_rho.shape[0] != g.n_nodes:
            raise SizeMismatch("log_rho length must equal n_nodes")
        return np.exp(np.asarray(p.log_rho, dtype=np.float64))
    d = degrees(g)
    if np.any(d <= 0):
        bad = int(np.argmin(d))
        raise IsolatedNode(f"node {bad} has zero degree; delta(x)^alpha undefined")
    return d**p.alpha


def grad_norm_all(g, f2d, p):
    """L_p norm of the descent gradient at every node, rowwise over f2d (K, n)."""
    p_inf = check_p(p)
    f2d = np.atleast_2d(np.asarray(f2d, dtype=np.float64))
    if f2d.shape[1] != g.n_nodes:
        raise SizeMismatch(f"field width {f2d.shape[1]} != n_nodes {g.n_nodes}")
    return kernels.grad_norm(g.indptr, g.indices, g.csqrt, f2d, p_inf)


def neg_grad_norm(g, f, i, p):
    """||(grad^- f)(i)||_p: descent-direction gradient norm at one node."""
    g.check_node(i)
    return float(grad_norm_all(g, f, p)[0, i])


def save_graph(g, path):
    """Write the tab-separated edge-list format (one undirected edge per line)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes={g.n_nodes}\n")
        for i, j, w in g.edges():
            fh.write(f"{i}\t{j}\t{w!r}\n")


def load_graph(path):
    """Read the format written by :func:`save_graph`."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# nodes="):
            raise ValueError(f"{path}: expected '# nodes=<n>' header, got {header!r}")
        n = int(header.split("=", 1)[1])
        edges = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            i, j, w = line.split("\t")
            edges.append((int(i), int(j), float(w)))
    return build_graph(n, edges)
