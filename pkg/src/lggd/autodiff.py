"""Minimal reverse-mode tape over numpy arrays.

Covers exactly what the unrolled integrator, the initial-condition MLP and
the GCN backbone need. Gradient accumulation is fixed-order (topological),
so repeated backward passes are bit-identical.
"""

import numpy as np

from .backend import kernels
from .graph import check_p


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "requires_grad")

    def __init__(self, data, parents=(), backward=None, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, seed=None):
        if seed is None:
            seed = np.ones_like(self.data)
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited and p.requires_grad:
                    stack.append((p, False))
        self._accumulate(seed)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data + other.data, (self, other))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        out._backward = bwd
        return out

    def __mul__(self, other):
        other = as_tensor(other)
        out = Tensor(self.data * other.data, (self, other))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        out._backward = bwd
        return out

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def matmul(self, other):
        other = as_tensor(other)
        out = Tensor(self.data @ other.data, (self, other))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(g @ other.data.T)
            if other.requires_grad:
                other._accumulate(self.data.T @ g)

        out._backward = bwd
        return out

    __matmul__ = matmul

    @property
    def T(self):
        out = Tensor(self.data.T, (self,))

        def bwd(g):
            if self.requires_grad:
                self._accumulate(g.T)

        out._backward = bwd
        return out


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data):
    return Tensor(np.asarray(data, dtype=np.float64).copy(), requires_grad=True)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def relu(t):
    out = Tensor(np.maximum(t.data, 0.0), (t,))

    def bwd(g):
        if t.requires_grad:
            t._accumulate(g * (t.data > 0.0))

    out._backward = bwd
    return out


def softplus(t):
    # numerically stable: max(x, 0) + log1p(exp(-|x|))
    out = Tensor(np.maximum(t.data, 0.0) + np.log1p(np.exp(-np.abs(t.data))), (t,))

    def bwd(g):
        if t.requires_grad:
            t._accumulate(g / (1.0 + np.exp(-t.data)))

    out._backward = bwd
    return out


def exp(t):
    out = Tensor(np.exp(t.data), (t,))

    def bwd(g):
        if t.requires_grad:
            t._accumulate(g * out.data)

    out._backward = bwd
    return out


def take_columns(t, idx):
    """t[:, idx] with scatter-add backward."""
    idx = np.asarray(idx, dtype=np.int64)
    out = Tensor(t.data[:, idx], (t,))

    def bwd(g):
        if t.requires_grad:
            acc = np.zeros_like(t.data)
            np.add.at(acc, (slice(None), idx), g)
            t._accumulate(acc)

    out._backward = bwd
    return out


def mean_square(t):
    out = Tensor(np.mean(t.data**2), (t,))

    def bwd(g):
        if t.requires_grad:
            t._accumulate(g * 2.0 * t.data / t.data.size)

    out._backward = bwd
    return out


def cross_entropy_mean(logits, labels):
    """Mean cross-entropy of softmax(logits) rows against integer labels."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsumexp
    m = labels.shape[0]
    out = Tensor(-logp[np.arange(m), labels].mean(), (logits,))

    def bwd(g):
        if logits.requires_grad:
            grad = np.exp(logp)
            grad[np.arange(m), labels] -= 1.0
            logits._accumulate(g * grad / m)

    out._backward = bwd
    return out


def softmax_rows(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def spmm(mat, t):
    """Sparse (scipy) @ dense Tensor; `mat` must be symmetric."""
    out = Tensor(mat @ t.data, (t,))

    def bwd(g):
        if t.requires_grad:
            t._accumulate(mat @ g)

    out._backward = bwd
    return out


def rk4_step(g, f, p, h, rho_const=None, log_rho=None):
    """One fused RK4 step of df/dt = 1 - rho * ||grad^- f||_p as a taped op.

    Identical math to four eikonal_rhs evaluations and the classic update,
    but with a single hand-written VJP per step; either a constant rho array
    or a learnable log_rho Tensor is supplied.
    """
    p_inf = check_p(p)
    if log_rho is not None:
        rho = np.exp(log_rho.data)
        parents = (f, log_rho)
    else:
        rho = np.asarray(rho_const, dtype=np.float64)
        parents = (f,)
    f_new, s2, s3, s4 = kernels.rk4_stages(
        g.indptr, g.indices, g.csqrt, rho, f.data, h, p_inf
    )
    out = Tensor(f_new, parents)

    def bwd(grad):
        df, drho = kernels.rk4_step_vjp(
            g.indptr, g.indices, g.csqrt, rho, f.data, s2, s3, s4, h, p_inf, grad
        )
        if f.requires_grad:
            f._accumulate(df)
        if log_rho is not None and log_rho.requires_grad:
            log_rho._accumulate(rho * drho)

    out._backward = bwd
    return out


def eikonal_rhs(g, f, p, rho_const=None, log_rho=None):
    """Right-hand side 1 - rho * ||grad^- f||_p as a taped op.

    Either a constant rho array or a learnable log_rho Tensor is supplied.
    The (a)_+ kink takes subgradient 0 at exact ties.
    """
    p_inf = check_p(p)
    gn = kernels.grad_norm(g.indptr, g.indices, g.csqrt, f.data, p_inf)
    if log_rho is not None:
        rho = np.exp(log_rho.data)
        parents = (f, log_rho)
    else:
        rho = np.asarray(rho_const, dtype=np.float64)
        parents = (f,)
    out = Tensor(1.0 - rho * gn, parents)

    def bwd(grad):
        if f.requires_grad:
            f._accumulate(
                -kernels.grad_norm_vjp(g.indptr, g.indices, g.csqrt, f.data, grad * rho, p_inf)
            )
        if log_rho is not None and log_rho.requires_grad:
            log_rho._accumulate(-(rho * (grad * gn).sum(axis=0)))

    out._backward = bwd
    return out
