"""Geodesic distance solvers: Dijkstra oracle, steady-state fast-iterative
solver, and the fixed-step RK4 integrator of the time-dependent equation."""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .errors import (
    EmptyNeighborhood,
    EmptySourceSet,
    NonpositiveStep,
    NotConverged,
    SizeMismatch,
)
from .graph import INFINITY_CAP, P_ONE, check_p, grad_norm_all


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary nodes partitioned by class label."""

    classes: tuple  # tuple of int tuples, one per class

    def __post_init__(self):
        classes = tuple(tuple(int(i) for i in cls) for cls in self.classes)
        object.__setattr__(self, "classes", classes)
        seen = set()
        for cls in classes:
            for i in cls:
                if i in seen:
                    raise ValueError(f"boundary node {i} appears in two classes")
                seen.add(i)
        if not seen:
            raise ValueError("boundary is empty")

    @property
    def n_classes(self):
        return len(self.classes)

    @property
    def all_nodes(self):
        return sorted(set().union(*map(set, self.classes)))

    def validate(self, n_nodes):
        for cls in self.classes:
            for i in cls:
                if not 0 <= i < n_nodes:
                    raise SizeMismatch(f"boundary node {i} not in [0, {n_nodes})")

    @staticmethod
    def from_labels(nodes, labels, n_classes):
        """Group boundary `nodes` by their label into n_classes lists."""
        classes = [[] for _ in range(n_classes)]
        for i in nodes:
            classes[int(labels[i])].append(int(i))
        return BoundarySpec(tuple(map(tuple, classes)))


@dataclass(frozen=True)
class SolverConfig:
    p: float = P_ONE
    step_size: float = 0.1
    snapshot_times: tuple = (1.0, 2.0, 3.0, 4.0, 5.0)
    clamp_boundary: bool = True
    steady_tol: float = 1e-8
    max_sweeps: int | None = None

    def __post_init__(self):
        check_p(self.p)
        if self.step_size <= 0:
            raise NonpositiveStep(f"step_size must be > 0, got {self.step_size}")
        if self.steady_tol <= 0:
            raise ValueError("steady_tol must be > 0")
        times = tuple(float(t) for t in self.snapshot_times)
        object.__setattr__(self, "snapshot_times", times)
        if any(t <= 0 for t in times) or list(times) != sorted(set(times)):
            raise ValueError("snapshot_times must be ascending positive reals")
        for t in times:
            steps = t / self.step_size
            if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
                raise ValueError(
                    f"snapshot time {t} is not an integer multiple of step {self.step_size}"
                )

    def snapshot_steps(self):
        return [int(round(t / self.step_size)) for t in self.snapshot_times]


@dataclass
class DistanceField:
    """Solver output f^k(x, t): values indexed [class, snapshot, node]."""

    values: np.ndarray        # (K, T, n)
    snapshot_times: tuple
    reachable: np.ndarray = field(default=None)  # (K, n) bool, steady solve only

    @property
    def n_classes(self):
        return self.values.shape[0]

    @property
    def n_snapshots(self):
        return self.values.shape[1]

    @property
    def n_nodes(self):
        return self.values.shape[2]


def write_distance_csv(fld, path):
    """CSV serialization, node-major then class then snapshot."""
    K, T, n = fld.values.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node,class,t,value\n")
        for x in range(n):
            for k in range(K):
                for ti, t in enumerate(fld.snapshot_times):
                    fh.write(f"{x},{k},{float(t)!r},{float(fld.values[k, ti, x])!r}\n")


def read_distance_csv(path):
    raw = np.genfromtxt(path, delimiter=",", names=True)
    nodes = raw["node"].astype(int)
    classes = raw["class"].astype(int)
    times = raw["t"]
    K = classes.max() + 1
    n = nodes.max() + 1
    uniq_t = sorted(set(times.tolist()))
    tindex = {t: i for i, t in enumerate(uniq_t)}
    values = np.empty((K, len(uniq_t), n))
    for x, k, t, v in zip(nodes, classes, times, raw["value"]):
        values[k, tindex[t], x] = v
    return DistanceField(values=values, snapshot_times=tuple(uniq_t))


def dijkstra(g, sources):
    """Hop-count distance from a source set (edge weights ignored).

    Unreachable nodes get the cap constant.
    """
    sources = np.asarray(sorted(set(int(s) for s in sources)), dtype=np.int64)
    if sources.size == 0:
        raise EmptySourceSet("source set is empty")
    for s in sources:
        g.check_node(int(s))
    return kernels.hop_distances(g.indptr, g.indices, sources, INFINITY_CAP)


def reachable_mask(g, sources):
    """Boolean mask of nodes reachable from the source set."""
    return dijkstra(g, sources) < INFINITY_CAP


def local_solve(neighbor_values, coeffs, rhs, p):
    """Single-node update: the unique t with sum_j c_j (t - a_j)_+ = rhs (p=1),
    or min_j (a_j + rhs / c_j) (p=inf)."""
    p_inf = check_p(p)
    a = np.asarray(neighbor_values, dtype=np.float64)
    c = np.asarray(coeffs, dtype=np.float64)
    if a.size == 0:
        raise EmptyNeighborhood("no neighbor values")
    if a.shape != c.shape:
        raise SizeMismatch("neighbor_values and coeffs differ in length")
    if np.any(c <= 0) or rhs <= 0:
        raise ValueError("coeffs and rhs must be positive")
    if p_inf:
        return float(np.min(a + rhs / c))
    order = np.argsort(a, kind="stable")
    a, c = a[order], c[order]
    csum = casum = 0.0
    for k in range(a.size):
        csum += c[k]
        casum += c[k] * a[k]
        t = (rhs + casum) / csum
        if k == a.size - 1 or t <= a[k + 1]:
            return float(t)
    return float(t)


def solve_steady(g, boundary, rho, cfg):
    """Gauss-Seidel fast-iterative solve of the steady equation, per class.

    Nodes unreachable from the class boundary keep the cap value and are
    flagged in the result's reachability mask.
    """
    boundary.validate(g.n_nodes)
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (g.n_nodes,):
        raise SizeMismatch("rho length must equal n_nodes")
    if np.any(rho <= 0):
        raise ValueError("rho must be strictly positive")
    max_sweeps = cfg.max_sweeps if cfg.max_sweeps is not None else 10 * g.n_nodes
    p_inf = check_p(cfg.p)
    rhs = 1.0 / rho
    K = boundary.n_classes
    values = np.empty((K, 1, g.n_nodes))
    reach = np.zeros((K, g.n_nodes), dtype=bool)
    for k, cls in enumerate(boundary.classes):
        if not cls:
            values[k, 0] = INFINITY_CAP
            continue
        mask = reachable_mask(g, cls)
        reach[k] = mask
        f = np.full(g.n_nodes, INFINITY_CAP)
        f[list(cls)] = 0.0
        update = mask.copy()
        update[list(cls)] = False
        converged = False
        for _ in range(max_sweeps):
            change = kernels.gauss_seidel_sweep(
                g.indptr, g.indices, g.csqrt, f, rhs, update, p_inf
            )
            if change < cfg.steady_tol:
                converged = True
                break
        if not converged:
            res = residual(g, f, rho, cfg.p, cls)
            res = float(np.max(res[mask]))
            raise NotConverged(
                f"class {k}: no convergence in {max_sweeps} sweeps "
                f"(max residual {res:.3e})",
                max_residual=res,
            )
        values[k, 0] = f
    return DistanceField(values=values, snapshot_times=(float("inf"),), reachable=reach)


def residual(g, f, rho, p, boundary_nodes):
    """|rho * grad_norm - 1| off the boundary, |f| on it."""
    f = np.asarray(f, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    if f.shape != (g.n_nodes,) or rho.shape != (g.n_nodes,):
        raise SizeMismatch("f and rho must have length n_nodes")
    out = np.abs(rho * grad_norm_all(g, f, p)[0] - 1.0)
    b = list(boundary_nodes)
    out[b] = np.abs(f[b])
    return out


def integrate(g, boundary, rho, phi0, cfg):
    """Classic RK4 on df/dt = -rho * ||grad^- f||_p + 1, per class.

    clamp_boundary=True pins each class's boundary nodes to zero (their
    right-hand side is masked and values reset every step); False lets
    them evolve freely.
    """
    boundary.validate(g.n_nodes)
    rho = np.asarray(rho, dtype=np.float64)
    phi0 = np.asarray(phi0, dtype=np.float64)
    K = boundary.n_classes
    if rho.shape != (g.n_nodes,):
        raise SizeMismatch("rho length must equal n_nodes")
    if phi0.shape != (K, g.n_nodes):
        raise SizeMismatch(f"phi0 must be (K, n) = ({K}, {g.n_nodes}), got {phi0.shape}")
    p_inf = check_p(cfg.p)
    h = cfg.step_size

    bmask = np.zeros((K, g.n_nodes), dtype=bool)
    for k, cls in enumerate(boundary.classes):
        bmask[k, list(cls)] = True

    f = phi0.copy()
    if cfg.clamp_boundary:
        f[bmask] = 0.0

    def rhs(state):
        out = 1.0 - rho * kernels.grad_norm(g.indptr, g.indices, g.csqrt, state, p_inf)
        if cfg.clamp_boundary:
            out[bmask] = 0.0
        return out

    snap_steps = cfg.snapshot_steps()
    values = np.empty((K, len(snap_steps), g.n_nodes))
    step = 0
    for ti, target in enumerate(snap_steps):
        while step < target:
            k1 = rhs(f)
            k2 = rhs(f + 0.5 * h * k1)
            k3 = rhs(f + 0.5 * h * k2)
            k4 = rhs(f + h * k3)
            f = f + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if cfg.clamp_boundary:
                f[bmask] = 0.0
            step += 1
        values[:, ti, :] = f
    return DistanceField(values=values, snapshot_times=cfg.snapshot_times)


def distance_map_distortion(f_before, f_after):
    """Mean relative change of a distance map, guarded against zero distances."""
    f_before = np.asarray(f_before, dtype=np.float64)
    f_after = np.asarray(f_after, dtype=np.float64)
    if f_before.shape != f_after.shape:
        raise SizeMismatch("fields differ in length")
    return float(np.mean(np.abs(f_after - f_before) / (f_before + 1.0)))


def with_clamping(cfg, clamp):
    return dataclasses.replace(cfg, clamp_boundary=clamp)
