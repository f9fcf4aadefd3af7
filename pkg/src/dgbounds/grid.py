"""Periodic uniform meshes, Legendre-Gauss-Lobatto quadrature and tensor operators.

All nodal fields on an element are stored as flat vectors of length
``n_g**d`` with the first axis fastest (Fortran stacking), i.e. the flat
index of the grid point ``(i_1, ..., i_d)`` is ``sum(i_l * n_g**l)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mesh",
    "LglRule",
    "TensorOperators",
    "ResourceBudgetError",
    "FORM_MODES",
    "lgl_rule",
    "diff_matrix",
    "lagrange_eval_matrix",
    "tensor_operators",
    "apply_form",
    "mean_project",
]

FORM_MODES = ("l2", "grad", "star", "bnd", "bnd_grad")


class ResourceBudgetError(RuntimeError):
    """Requested tensor grid exceeds the configured point budget."""


@dataclass(frozen=True)
class Mesh:
    """Uniform periodic partition of ``[0, L]^d`` into ``m^d`` box elements.

    Element ids stack the per-axis indices with the first axis fastest:
    ``e = i_1 + i_2*m + ... + i_d*m**(d-1)``.  Every face is interior
    thanks to the periodic closure; the face between an element and its
    high-side neighbor along ``axis`` is owned by the lower element.
    """

    d: int
    length: float
    m: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.length <= 0:
            raise ValueError("domain length must be positive")
        if self.m < 1:
            raise ValueError("need at least one element per axis")

    @property
    def h(self) -> float:
        return self.length / self.m

    @property
    def n_elements(self) -> int:
        return self.m**self.d

    def multi_index(self, e: int) -> tuple[int, ...]:
        idx = []
        for _ in range(self.d):
            idx.append(e % self.m)
            e //= self.m
        return tuple(idx)

    def element_id(self, idx) -> int:
        e = 0
        for l in reversed(range(self.d)):
            e = e * self.m + (idx[l] % self.m)
        return e

    def origin(self, e: int) -> np.ndarray:
        """Lower corner of element ``e``."""
        return np.array(self.multi_index(e), dtype=float) * self.h

    def neighbor(self, e: int, axis: int, side: int) -> int:
        """Neighbor across the face of ``e`` on ``side`` (0 low / 1 high) of ``axis``."""
        idx = list(self.multi_index(e))
        idx[axis] = (idx[axis] + (1 if side else -1)) % self.m
        return self.element_id(idx)

    def face_id(self, e: int, axis: int, side: int) -> int:
        """Global id of the face of ``e`` on ``side`` of ``axis`` (owned low-side)."""
        owner = e if side == 1 else self.neighbor(e, axis, 0)
        return owner * self.d + axis

    def faces(self):
        """Iterate ``(face_id, element, axis)`` over each interior face once.

        The face is the high-side face of ``element`` along ``axis``; the
        second incident element is ``neighbor(element, axis, 1)``.
        """
        for e in range(self.n_elements):
            for axis in range(self.d):
                yield e * self.d + axis, e, axis


@dataclass(frozen=True)
class LglRule:
    """Legendre-Gauss-Lobatto quadrature with ``n`` points on ``[0, h]``.

    Exact for polynomials of degree up to ``2n - 3``; the endpoints are
    nodes, which is what makes boundary forms expressible as diagonal
    weights on the volume grid.
    """

    n: int
    h: float
    nodes: np.ndarray
    weights: np.ndarray
    ref_nodes: np.ndarray  # nodes on [-1, 1], kept for differentiation


def lgl_rule(n: int, h: float, max_iter: int = 100) -> LglRule:
    """Build the ``n``-point LGL rule on ``[0, h]``.

    Nodes are the roots of ``(1 - x^2) P'_{n-1}(x)`` found by Newton
    iteration on the Legendre recursion, started from Chebyshev-Lobatto
    points.
    """
    if n < 2:
        raise ValueError("LGL rule needs at least 2 points")
    if h <= 0:
        raise ValueError("element size must be positive")

    x = -np.cos(np.pi * np.arange(n) / (n - 1))
    vand = np.zeros((n, n))
    x_prev = 2.0 * np.ones_like(x)
    for _ in range(max_iter):
        vand[:, 0] = 1.0
        if n > 1:
            vand[:, 1] = x
        for k in range(1, n - 1):
            vand[:, k + 1] = ((2 * k + 1) * x * vand[:, k] - k * vand[:, k - 1]) / (k + 1)
        x_prev, x = x, x - (x * vand[:, n - 1] - vand[:, n - 2]) / (n * vand[:, n - 1])
        if np.max(np.abs(x - x_prev)) < 1e-15:
            break
    else:
        raise RuntimeError(f"LGL node search did not converge for n={n}")

    # symmetrize and pin the endpoints exactly
    x = 0.5 * (x - x[::-1])
    x[0], x[-1] = -1.0, 1.0
    vand[:, 0] = 1.0
    vand[:, 1] = x
    for k in range(1, n - 1):
        vand[:, k + 1] = ((2 * k + 1) * x * vand[:, k] - k * vand[:, k - 1]) / (k + 1)
    w = 2.0 / (n * (n - 1) * vand[:, n - 1] ** 2)
    w = 0.5 * (w + w[::-1])

    return LglRule(n=n, h=h, nodes=(x + 1.0) * (h / 2.0), weights=w * (h / 2.0), ref_nodes=x)


def _barycentric_weights(x: np.ndarray) -> np.ndarray:
    diff = np.subtract.outer(x, x)
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / diff.prod(axis=1)
    return w / np.max(np.abs(w))


def diff_matrix(rule: LglRule) -> np.ndarray:
    """Nodal differentiation matrix ``D[i, j] = p_j'(y_i)`` on the rule's grid.

    Built in barycentric form on the reference interval with the
    negative-sum trick for the diagonal, then scaled to ``[0, h]``; exact
    for polynomials of degree below ``n``.
    """
    x = rule.ref_nodes
    w = _barycentric_weights(x)
    diff = np.subtract.outer(x, x)
    np.fill_diagonal(diff, 1.0)
    d = np.outer(1.0 / w, w) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d * (2.0 / rule.h)


def lagrange_eval_matrix(rule: LglRule, targets: np.ndarray) -> np.ndarray:
    """Barycentric evaluation matrix from the rule's nodes to ``targets`` in ``[0, h]``.

    ``P @ u`` evaluates the nodal interpolant of ``u`` at the target points.
    """
    x = rule.nodes
    w = _barycentric_weights(x)
    t = np.asarray(targets, dtype=float)
    diff = np.subtract.outer(t, x)
    hit = np.isclose(diff, 0.0, rtol=0.0, atol=1e-14 * max(rule.h, 1.0))
    diff[hit] = 1.0
    p = w / diff
    p /= p.sum(axis=1)[:, None]
    p[np.any(hit, axis=1)] = 0.0
    p[hit] = 1.0
    return p


@dataclass
class TensorOperators:
    """Discrete per-element forms on the tensor LGL grid of ``[0, h]^d``.

    Operators are kept as 1D factors and applied axis-wise; no dense
    ``n^d x n^d`` matrix is formed for ``d >= 2``.  The available
    bilinear forms are

    - ``l2``:       volume mass,
    - ``grad``:     gradient stiffness,
    - ``star``:     gradient stiffness plus the mean-value rank-one term,
    - ``bnd``:      boundary mass over all 2d faces,
    - ``bnd_grad``: boundary mass of the normal derivative.
    """

    rule: LglRule
    d: int
    w1: np.ndarray = field(repr=False)
    d1: np.ndarray = field(repr=False)
    wd: np.ndarray = field(repr=False)
    wb: list = field(repr=False)
    wb_sum: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.rule.n

    @property
    def size(self) -> int:
        return self.rule.n**self.d

    @property
    def volume(self) -> float:
        return self.rule.h**self.d

    def points(self) -> np.ndarray:
        """Grid coordinates, shape ``(size, d)``, first axis fastest."""
        axes = np.meshgrid(*([self.rule.nodes] * self.d), indexing="ij")
        return np.column_stack([a.reshape(-1, order="F") for a in axes])

    def axis_apply(self, mat: np.ndarray, u: np.ndarray, axis: int) -> np.ndarray:
        """Apply a 1D operator along one tensor axis of a flat nodal vector."""
        n = self.n
        a = u.reshape((n,) * self.d, order="F")
        a = np.moveaxis(a, axis, 0)
        shp = a.shape
        b = mat @ a.reshape(n, -1)
        b = np.moveaxis(b.reshape(shp), 0, axis)
        return b.reshape(-1, order="F")

    def apply_diff(self, u: np.ndarray, axis: int) -> np.ndarray:
        return self.axis_apply(self.d1, u, axis)

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u, dtype=float)
        for l in range(self.d):
            out += self.apply_diff(self.apply_diff(u, l), l)
        return out

    def face_index(self, axis: int, side: int) -> np.ndarray:
        """Flat indices of the grid points on one face, transverse axes F-stacked."""
        n = self.n
        idx = np.arange(self.size).reshape((n,) * self.d, order="F")
        sl = [slice(None)] * self.d
        sl[axis] = -1 if side else 0
        return idx[tuple(sl)].reshape(-1, order="F")

    def face_weights(self) -> np.ndarray:
        """(d-1)-dimensional LGL weights on a face (scalar 1 when d = 1)."""
        if self.d == 1:
            return np.ones(1)
        wf = self.w1.copy()
        for _ in range(self.d - 2):
            wf = np.multiply.outer(wf, self.w1).reshape(-1, order="F")
        return wf

    # ---- matrix-free form applications -------------------------------------

    def ma_apply(self, u: np.ndarray) -> np.ndarray:
        return self.wd * u

    def mb_apply(self, u: np.ndarray) -> np.ndarray:
        return self.wb_sum * u

    def grad_apply(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u, dtype=float)
        for l in range(self.d):
            out += self.axis_apply(self.d1.T, self.wd * self.apply_diff(u, l), l)
        return out

    def k_apply(self, u: np.ndarray) -> np.ndarray:
        """Star-form operator: gradient stiffness plus mean-value rank-one term."""
        return self.grad_apply(u) + self.wd * (self.wd @ u / self.volume)

    def mdelta_apply(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u, dtype=float)
        for l in range(self.d):
            out += self.axis_apply(self.d1.T, self.wb[l] * self.apply_diff(u, l), l)
        return out

    def apply_columns(self, op, table: np.ndarray) -> np.ndarray:
        out = np.empty_like(table, dtype=float)
        for j in range(table.shape[1]):
            out[:, j] = op(table[:, j])
        return out

    def form(self, mode: str, u: np.ndarray, v: np.ndarray) -> float:
        """Evaluate the bilinear form ``u^T M v`` for the selected operator.

        Quadratic forms are accumulated factor-wise (e.g. ``(D u) W (D v)``)
        so that ``form(mode, u, u)`` is a sum of weighted products and never
        loses positivity to cancellation.
        """
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if u.shape != (self.size,) or v.shape != (self.size,):
            raise ValueError(f"expected vectors of length {self.size}")
        if mode == "l2":
            return float(np.dot(u * self.wd, v))
        if mode == "grad":
            acc = 0.0
            for l in range(self.d):
                acc += np.dot(self.apply_diff(u, l) * self.wd, self.apply_diff(v, l))
            return float(acc)
        if mode == "star":
            mean_term = (self.wd @ u) * (self.wd @ v) / self.volume
            return float(self.form("grad", u, v) + mean_term)
        if mode == "bnd":
            return float(np.dot(u * self.wb_sum, v))
        if mode == "bnd_grad":
            acc = 0.0
            for l in range(self.d):
                acc += np.dot(self.apply_diff(u, l) * self.wb[l], self.apply_diff(v, l))
            return float(acc)
        raise ValueError(f"unknown form mode {mode!r}; expected one of {FORM_MODES}")


def tensor_operators(rule: LglRule, d: int, max_points: int = 200_000) -> TensorOperators:
    """Assemble the tensor-product operators for ``[0, h]^d``.

    Raises :class:`ResourceBudgetError` when ``n^d`` exceeds ``max_points``.
    """
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    size = rule.n**d
    if size > max_points:
        raise ResourceBudgetError(
            f"tensor grid with n_g^d = {size} points exceeds the budget of {max_points}"
        )

    w1 = rule.weights
    wd = w1.copy()
    for _ in range(d - 1):
        wd = np.multiply.outer(wd, w1).reshape(-1, order="F")

    wb = []
    shape = (rule.n,) * d
    for l in range(d):
        arr = np.zeros(shape)
        trans = [w1] * d
        trans[l] = np.ones(1)
        grid = np.meshgrid(*trans, indexing="ij")
        wf_nd = np.ones_like(grid[0])
        for g in grid:
            wf_nd = wf_nd * g
        sl = [slice(None)] * d
        for side in (0, -1):
            sl[l] = side
            arr[tuple(sl)] = wf_nd.reshape(arr[tuple(sl)].shape)
        wb.append(arr.reshape(-1, order="F"))

    return TensorOperators(
        rule=rule,
        d=d,
        w1=w1,
        d1=diff_matrix(rule),
        wd=wd,
        wb=wb,
        wb_sum=sum(wb),
    )


def apply_form(ops: TensorOperators, mode: str, u: np.ndarray, v: np.ndarray) -> float:
    """Functional wrapper around :meth:`TensorOperators.form`."""
    return ops.form(mode, u, v)


def mean_project(ops: TensorOperators, v: np.ndarray) -> float:
    """Mean value of a nodal field over the element: ``w^T v / |element|``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (ops.size,):
        raise ValueError(f"expected vector of length {ops.size}")
    return float(ops.wd @ v / ops.volume)
