"""Dense tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a flat row-major numpy array (channels-first for image
data) plus an optional gradient slot. Every differentiable operation
records its inputs and a backward closure on the result, forming the tape;
``backward`` replays the tape once in reverse topological order and sums
gradient contributions into every reachable tensor that asked for them.

Two numeric profiles are supported: float64 for oracles and gradient
checks (finite differences are unreliable in float32) and float32 for
training. The profile is simply the dtype of the underlying array and is
fixed at construction.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .errors import ContractViolation

_ALLOWED_DTYPES = (np.float32, np.float64)


class Tensor:
    """N-dimensional array node of the autodiff tape.

    ``grad`` is lazily allocated: it stays ``None`` until backward
    actually deposits a contribution, so constant/input tensors carry no
    gradient storage.
    """

    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "op")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward_fn: Callable[[], None] | None = None,
        op: str = "leaf",
    ):
        arr = np.asarray(data)
        if arr.dtype not in _ALLOWED_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def accumulate_grad(self, g: np.ndarray) -> None:
        """Add a contribution; a tensor consumed by k nodes receives the sum of k of these."""
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    # -- elementwise arithmetic (enough to express test losses) --------

    def __add__(self, other) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other) -> "Tensor":
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __sub__(self, other) -> "Tensor":
        return add(self, -_as_tensor(other, self.dtype))

    def sum(self) -> "Tensor":
        return tensor_sum(self)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractViolation(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _result(data, parents: Iterable[Tensor], backward_fn, op: str) -> Tensor:
    parents = tuple(parents)
    needs = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=needs, parents=parents,
                  backward_fn=backward_fn if needs else None, op=op)


def add(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a.dtype)
    if b.shape not in ((), a.shape):
        raise ContractViolation(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = _result(a.data + b.data, (a, b), None, "add")

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g if b.shape == a.shape else g.sum())

    out.backward_fn = backward if out.requires_grad else None
    return out


def mul(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a.dtype)
    if b.shape not in ((), a.shape):
        raise ContractViolation(f"mul shape mismatch: {a.shape} vs {b.shape}")
    out = _result(a.data * b.data, (a, b), None, "mul")

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate_grad(g * b.data)
        if b.requires_grad:
            gb = g * a.data
            b.accumulate_grad(gb if b.shape == a.shape else gb.sum())

    out.backward_fn = backward if out.requires_grad else None
    return out


def tensor_sum(a: Tensor) -> Tensor:
    out = _result(a.data.sum(), (a,), None, "sum")

    def backward():
        if a.requires_grad:
            a.accumulate_grad(np.broadcast_to(out.grad, a.shape))

    out.backward_fn = backward if out.requires_grad else None
    return out


def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order DFS; each node appears exactly once."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Fill the grad slots of every tensor reachable from a scalar loss."""
    if loss.data.shape != () and loss.data.size != 1:
        raise ContractViolation(f"backward expects a scalar loss, got shape {loss.shape}")
    order = _topo_order(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn()


def grad_check(f: Callable[[], Tensor], theta: Tensor, eps: float = 1e-5) -> float:
    """Max relative error between the taped gradient of ``f`` and central differences.

    ``f`` must evaluate a fresh forward pass reading the current contents
    of ``theta``; the error per coordinate is ``|g_ad - g_fd| /
    max(1, |g_ad|, |g_fd|)``. Use the float64 profile.
    """
    if eps <= 0:
        raise ContractViolation(f"grad_check requires eps > 0, got {eps}")
    if not theta.requires_grad:
        raise ContractViolation("grad_check target must have requires_grad=True")

    theta.zero_grad()
    loss = f()
    backward(loss)
    if theta.grad is None:
        raise ContractViolation("theta unreachable from the loss")
    g_ad = theta.grad.copy()

    flat = theta.data.reshape(-1)
    g_fd = np.empty_like(flat)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        up = f().item()
        flat[i] = keep - eps
        down = f().item()
        flat[i] = keep
        g_fd[i] = (up - down) / (2.0 * eps)
    g_fd = g_fd.reshape(theta.shape)

    denom = np.maximum(1.0, np.maximum(np.abs(g_ad), np.abs(g_fd)))
    return float(np.max(np.abs(g_ad - g_fd) / denom))
