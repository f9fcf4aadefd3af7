"""Per-element constants entering the error bounds, via local eigenvalue problems.

Three constants per element and space:

- ``inverse_trace``: largest ratio of the boundary normal-gradient norm of
  a discrete function to its star norm (a small dense problem on the
  space's coefficients);
- ``poincare_vol`` and ``poincare_face``: largest ratio of the volume
  resp. boundary L2 norm to the star norm over the star-orthogonal
  complement of the space (singular pencils solved matrix-free with a
  block-one LOBPCG iteration kept on the complement).

The penalty parameter is derived from ``inverse_trace``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .basis import BasisSpace, Projector
from .grid import TensorOperators

__all__ = [
    "LocalConstants",
    "max_eig_dense",
    "max_eig_lobpcg",
    "inverse_trace_constant",
    "complement_constants",
    "dense_complement_oracle",
    "choose_penalty",
]


@dataclass
class LocalConstants:
    """Constants of one element: complement bounds, trace constant, penalty."""

    element: int
    poincare_vol: float
    poincare_face: float
    inverse_trace: float
    penalty: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def max_eig_dense(a_mat: np.ndarray, b_mat: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenpair of the symmetric dense pencil ``A c = lambda B c``.

    ``B`` must be positive definite on the subspace; the reduction is the
    standard Cholesky-based symmetric solve.
    """
    a_mat = 0.5 * (a_mat + a_mat.T)
    b_mat = 0.5 * (b_mat + b_mat.T)
    try:
        vals, vecs = scipy.linalg.eigh(a_mat, b_mat)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError("projected B-form is not positive definite") from exc
    return float(vals[-1]), vecs[:, -1]


def project_pencil(a_apply, b_apply, table: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project two operator applications onto the columns of ``table``."""
    a_cols = np.column_stack([a_apply(table[:, j]) for j in range(table.shape[1])])
    b_cols = np.column_stack([b_apply(table[:, j]) for j in range(table.shape[1])])
    return table.T @ a_cols, table.T @ b_cols


def max_eig_lobpcg(
    a_apply,
    b_apply,
    size: int,
    tol: float = 1e-3,
    max_it: int = 500,
    project=None,
    rng=None,
    zero_floor: float = 0.0,
) -> tuple[float, np.ndarray, bool, int]:
    """Largest eigenvalue of ``A v = lambda B v`` by block-one LOBPCG.

    No preconditioner; the search subspace is the classic three-term block
    (iterate, residual, conjugate direction).  ``project`` is re-applied to
    the iterate and residual every iteration so a known kernel of ``B``
    never enters the subspace.  Returns the best estimate flagged
    unconverged when ``max_it`` is exhausted; low accuracy is acceptable
    for the estimator constants.
    """
    rng = np.random.default_rng(rng)
    proj = project if project is not None else (lambda v: v)

    x = proj(rng.standard_normal(size))
    bx = b_apply(x)
    x = x / math.sqrt(max(x @ bx, np.finfo(float).tiny))
    ax, bx = a_apply(x), b_apply(x)
    lam = float(x @ ax) / float(x @ bx)
    p = None
    converged = False
    stagnant = 0
    it = 0
    for it in range(1, max_it + 1):
        r = ax - lam * bx
        rnorm = np.linalg.norm(r)
        scale = np.linalg.norm(ax) + abs(lam) * np.linalg.norm(bx)
        if rnorm <= tol * scale:
            converged = True
            break
        if zero_floor > 0.0 and abs(lam) <= zero_floor:
            stagnant += 1
            if stagnant >= 3:
                converged = True
                break
        r = proj(r)
        cols = [x, r] if p is None else [x, r, p]
        basis, _ = np.linalg.qr(np.column_stack(cols))
        keep = [j for j in range(basis.shape[1]) if np.linalg.norm(basis[:, j]) > 0.5]
        basis = basis[:, keep]
        a_small, b_small = project_pencil(a_apply, b_apply, basis)
        a_small = 0.5 * (a_small + a_small.T)
        b_small = 0.5 * (b_small + b_small.T)
        try:
            vals, vecs = scipy.linalg.eigh(a_small, b_small)
        except scipy.linalg.LinAlgError:
            # drop the conjugate direction and retry on the two-term block
            basis = basis[:, :2]
            a_small, b_small = project_pencil(a_apply, b_apply, basis)
            try:
                vals, vecs = scipy.linalg.eigh(
                    0.5 * (a_small + a_small.T), 0.5 * (b_small + b_small.T)
                )
            except scipy.linalg.LinAlgError:
                break
        y = vecs[:, -1]
        lam_new = float(vals[-1])
        x_new = proj(basis @ y)
        if basis.shape[1] > 1:
            p = basis[:, 1:] @ y[1:]
            pn = np.linalg.norm(p)
            p = None if pn == 0.0 else p / pn
        bx_new = b_apply(x_new)
        bnorm = float(x_new @ bx_new)
        if bnorm <= 0.0:
            break
        x = x_new / math.sqrt(bnorm)
        ax, bx = a_apply(x), b_apply(x)
        lam_prev, lam = lam, float(x @ ax) / float(x @ bx)
        if abs(lam - lam_prev) <= 0.1 * tol * max(abs(lam), np.finfo(float).tiny):
            stagnant += 1
            if stagnant >= 3:
                converged = True
                break
        else:
            stagnant = 0
    return lam, x, converged, it


def inverse_trace_constant(space: BasisSpace, ops: TensorOperators) -> float:
    """Trace-inverse constant of the space: dense eigensolve on the coefficients."""
    a_mat, b_mat = project_pencil(ops.mdelta_apply, ops.k_apply, space.table)
    lam, _ = max_eig_dense(a_mat, b_mat)
    return math.sqrt(max(lam, 0.0))


def complement_constants(
    space: BasisSpace,
    proj: Projector,
    ops: TensorOperators,
    tol: float = 1e-3,
    max_it: int = 500,
    rng=None,
) -> tuple[float, float, dict]:
    """Volume and boundary complement constants, solved matrix-free.

    The pencils are the volume/boundary mass forms against the star form,
    both pre- and post-composed with the complement projector; their
    common kernel (the space itself) is suppressed by re-projection inside
    the iteration.
    """
    rng = np.random.default_rng(rng)
    diag: dict = {"method": "lobpcg"}

    def b_op(v):
        return proj.complement_t(ops.k_apply(proj.complement(v)))

    results = []
    for name, mass in (("vol", ops.ma_apply), ("face", ops.mb_apply)):
        def a_op(v, mass=mass):
            return proj.complement_t(mass(proj.complement(v)))

        lam, _, conv, iters = max_eig_lobpcg(
            a_op,
            b_op,
            ops.size,
            tol=tol,
            max_it=max_it,
            project=proj.complement,
            rng=rng,
            zero_floor=1e-22,
        )
        results.append(math.sqrt(max(lam, 0.0)))
        diag[f"{name}_iterations"] = iters
        diag[f"{name}_converged"] = bool(conv)
    return results[0], results[1], diag


def dense_complement_oracle(
    space: BasisSpace, proj: Projector, ops: TensorOperators, max_size: int = 2500
) -> tuple[float, float]:
    """Dense cross-validation path: materialize the complement and solve exactly.

    Builds an orthonormal basis of the complement range by SVD of the
    materialized projector and solves the reduced dense pencils.  Only for
    grids with at most ``max_size`` points.
    """
    n = ops.size
    if n > max_size:
        raise ValueError(f"dense oracle limited to {max_size} grid points, got {n}")
    eye = np.eye(n)
    q_mat = np.column_stack([proj.complement(eye[:, j]) for j in range(n)])
    u, sig, _ = np.linalg.svd(q_mat)
    rank = n - space.n_basis
    z = u[:, :rank]
    k_z = np.column_stack([ops.k_apply(z[:, j]) for j in range(rank)])
    b_mat = z.T @ k_z
    out = []
    for mass in (ops.ma_apply, ops.mb_apply):
        a_cols = np.column_stack([mass(z[:, j]) for j in range(rank)])
        a_mat = z.T @ a_cols
        lam, _ = max_eig_dense(a_mat, b_mat)
        out.append(math.sqrt(max(lam, 0.0)))
    return out[0], out[1]


def choose_penalty(
    inverse_trace: float,
    theta: float,
    rule: str = "coercive",
    manual: float | None = None,
    floor: float = 1.0,
) -> float:
    """Penalty parameter from the trace constant.

    ``coercive`` uses the smallest value that makes the bilinear form
    coercive, ``safety`` the larger classical choice, ``manual`` a user
    value.  The floor keeps the broken norm a norm when the coercive bound
    degenerates (e.g. the non-symmetric form).
    """
    if rule == "manual":
        if manual is None or manual <= 0:
            raise ValueError("manual penalty must be positive")
        return float(manual)
    if rule == "coercive":
        return float(max(0.5 * (1.0 + theta) ** 2 * inverse_trace**2, floor))
    if rule == "safety":
        return float(max(2.0 * (1.0 + abs(theta)) ** 2 * inverse_trace**2, floor))
    raise ValueError(f"unknown penalty rule {rule!r}")
