"""Per-element approximation spaces as nodal value tables, and their projectors.

A space is represented by the table of its basis functions sampled on the
element's LGL grid, kept orthonormal in the discrete L2 inner product of
the element.  Spaces are required to contain the constant function; the
adaptive local basis constructor appends it explicitly when the truncated
eigenfunction set misses it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .fields import PotentialSpec
from .fourier import plane_wave_eval_tensor, plane_wave_hamiltonian
from .grid import Mesh, TensorOperators

__all__ = [
    "BasisSpace",
    "Projector",
    "orthonormalize",
    "polynomial_space",
    "alb_space",
    "projector",
]


@dataclass
class BasisSpace:
    """Nodal table of basis functions on one element's LGL grid.

    Columns are orthonormal in the discrete L2 product of the element and
    span a space that contains constants.
    """

    element: int
    kind: str  # "polynomial" | "alb" | "custom"
    table: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def n_basis(self) -> int:
        return self.table.shape[1]


def orthonormalize(
    raw: np.ndarray,
    ops: TensorOperators,
    drop_tol: float = 1e-8,
    element: int = 0,
    kind: str = "custom",
) -> BasisSpace:
    """Discrete-L2 orthonormalization by SVD of the weighted table.

    Singular directions with relative singular value at most ``drop_tol``
    are removed; raises when nothing survives.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] != ops.size or raw.shape[1] == 0:
        raise ValueError("raw table must be (grid size, >=1 columns)")
    s = np.sqrt(ops.wd)
    u, sig, _ = np.linalg.svd(raw * s[:, None], full_matrices=False)
    keep = sig > drop_tol * sig[0]
    if not np.any(keep):
        raise ValueError("all columns dropped during orthonormalization")
    table = u[:, keep] / s[:, None]
    return BasisSpace(element=element, kind=kind, table=table, meta={"dropped": int(np.sum(~keep))})


def polynomial_space(mesh: Mesh, ops: TensorOperators, element: int, p: int) -> BasisSpace:
    """Total-degree-``p`` polynomial space sampled on the element grid.

    The span is generated from tensor Legendre polynomials (same span as
    the monomials, far better conditioned at high degree) and then
    orthonormalized; the dimension is ``binom(p + d, d)``.
    """
    d = ops.d
    n_expected = math.comb(p + d, d)
    if n_expected > ops.size:
        raise ValueError(
            f"polynomial space of dimension {n_expected} does not fit in {ops.size} grid points"
        )
    t = 2.0 * ops.rule.nodes / ops.rule.h - 1.0
    vander = np.polynomial.legendre.legvander(t, p)  # (n, p+1)

    combos = [c for c in _total_degree_indices(d, p)]
    raw = np.empty((ops.size, len(combos)))
    pts_idx = np.meshgrid(*([np.arange(ops.n)] * d), indexing="ij")
    flat_idx = [g.reshape(-1, order="F") for g in pts_idx]
    for j, combo in enumerate(combos):
        col = np.ones(ops.size)
        for l in range(d):
            col *= vander[flat_idx[l], combo[l]]
        raw[:, j] = col
    space = orthonormalize(raw, ops, drop_tol=1e-10, element=element, kind="polynomial")
    if space.n_basis != n_expected:
        raise ValueError(
            f"rank loss in polynomial space: kept {space.n_basis} of {n_expected} functions"
        )
    space.meta.update({"degree": p})
    return space


def _total_degree_indices(d: int, p: int):
    """Multi-indices with total degree <= p, ordered by degree then lexicographically."""
    combos = []
    def rec(prefix, remaining_axes, budget):
        if remaining_axes == 0:
            combos.append(tuple(prefix))
            return
        for j in range(budget + 1):
            rec(prefix + [j], remaining_axes - 1, budget - j)
    rec([], d, p)
    combos.sort(key=lambda c: (sum(c), c))
    return combos


def _stream_orthonormalize(
    candidates,
    ops: TensorOperators,
    target: int,
    dep_tol: float = 1e-6,
):
    """Accept candidates in order, keeping discrete-L2 orthonormal columns.

    Modified Gram-Schmidt with re-orthogonalization; near-dependent
    candidates (residual below ``dep_tol`` of their norm) are skipped.
    Stops once ``target`` columns are accepted.
    """
    accepted = []
    for cand in candidates:
        v = np.asarray(cand, dtype=float)
        nrm0 = math.sqrt(ops.form("l2", v, v))
        if nrm0 == 0.0:
            continue
        v = v / nrm0
        for _ in range(2):
            for q in accepted:
                v = v - q * ops.form("l2", q, v)
        nrm = math.sqrt(ops.form("l2", v, v))
        if nrm <= dep_tol:
            continue
        accepted.append(v / nrm)
        if len(accepted) == target:
            break
    return accepted


def _constant_planewave_modes(n_pw: int, d: int, value: float, length: float):
    """Analytic eigenpairs of the periodic planewave operator for constant potential.

    Yields ``(eigenvalue, is_cos, k_vector)`` sorted by eigenvalue with a
    deterministic tie order; each +/- mode pair contributes a cosine and a
    sine candidate.
    """
    half = n_pw // 2
    axes = [range(-half, half) for _ in range(d)]
    seen = set()
    entries = []
    import itertools

    for m in itertools.product(*axes):
        m = tuple(m)
        neg = tuple(-x for x in m)
        if neg in seen:
            continue
        seen.add(m)
        ksq = (2.0 * np.pi / length) ** 2 * sum(x * x for x in m)
        entries.append((ksq + value, m))
    entries.sort(key=lambda t: (t[0], t[1]))
    for lam, m in entries:
        kvec = 2.0 * np.pi / length * np.array(m, dtype=float)
        yield lam, "cos", kvec
        if any(m):
            yield lam, "sin", kvec


def alb_space(
    mesh: Mesh,
    ops: TensorOperators,
    element: int,
    n_basis: int,
    potential: PotentialSpec,
    n_pw: int = 48,
    eig_data=None,
) -> BasisSpace:
    """Adaptive local basis: low eigenfunctions of the operator on the extended element.

    The extended element is the element together with its ``3^d - 1``
    periodic neighbors.  The periodic eigenproblem on it is solved in a
    planewave basis, the eigenfunctions of the lowest eigenvalues are
    restricted to the element's LGL grid, orthonormalized with
    near-dependencies pruned, and the constant function is appended when
    the truncation misses it.

    ``eig_data`` allows reuse of a precomputed ``(eigenvalues, eigenvectors,
    modes)`` triple from :func:`alb_eig_data` across a sweep over ``n_basis``.
    """
    d = ops.d
    h = mesh.h
    ext_len = 3.0 * h
    origin = mesh.origin(element) - h
    axis_targets = [mesh.origin(element)[l] + ops.rule.nodes for l in range(d)]

    candidates = []
    eigenvalues = []
    if potential.kind == "constant":
        gen = _constant_planewave_modes(n_pw, d, potential.value, ext_len)
        local = ops.points() + mesh.origin(element)[None, :]
        for lam, fn, kvec in gen:
            phase = local @ kvec
            candidates.append(np.cos(phase) if fn == "cos" else np.sin(phase))
            eigenvalues.append(lam)
            if len(candidates) >= 2 * (n_basis + 8):
                break
    else:
        if eig_data is None:
            eig_data = alb_eig_data(mesh, element, potential, n_pw, d, k_need=n_basis + 8)
        lam, vecs, modes = eig_data
        for i in range(vecs.shape[1]):
            vals = plane_wave_eval_tensor(vecs[:, i], modes, ext_len, axis_targets, origin=list(origin))
            re, im = np.real(vals), np.imag(vals)
            nrm = np.linalg.norm(vals)
            candidates.append(re)
            eigenvalues.append(lam[i])
            if np.linalg.norm(im) > 1e-10 * nrm:
                candidates.append(im)
                eigenvalues.append(lam[i])

    cols = _stream_orthonormalize(candidates, ops, target=n_basis)
    if len(cols) < n_basis:
        raise ValueError(
            f"only {len(cols)} independent basis functions available for requested {n_basis}"
        )
    table = np.column_stack(cols)

    appended_constant = False
    one = np.ones(ops.size)
    proj = table @ (table.T @ (ops.wd * one))
    resid = one - proj
    rnorm = math.sqrt(ops.form("l2", resid, resid) / ops.volume)
    if rnorm > 1e-10:
        extra = _stream_orthonormalize([resid], ops, target=1)
        if extra:
            table = np.column_stack([table, extra[0]])
            appended_constant = True

    return BasisSpace(
        element=element,
        kind="alb",
        table=table,
        meta={
            "requested": n_basis,
            "eigenvalues": np.array(eigenvalues[: table.shape[1]]),
            "n_pw": n_pw,
            "appended_constant": appended_constant,
        },
    )


def alb_eig_data(mesh: Mesh, element: int, potential: PotentialSpec, n_pw: int, d: int, k_need: int):
    """Lowest ``k_need`` planewave eigenpairs of the operator on the extended element."""
    h = mesh.h
    ext_len = 3.0 * h
    origin = mesh.origin(element) - h
    ham, modes = plane_wave_hamiltonian(potential, ext_len, d, n_pw, origin=list(origin))
    k_need = min(k_need, ham.shape[0])
    lam, vecs = scipy.linalg.eigh(ham, subset_by_index=[0, k_need - 1])
    return lam, vecs, modes


@dataclass
class Projector:
    """Projection onto a basis space in the star inner product.

    ``apply`` is the projector, ``complement`` its residual map, and
    ``complement_t`` the adjoint of the residual map in the nodal basis.
    Applications cost one pass over the cached ``K``-image of the table
    plus a small triangular solve.
    """

    space: BasisSpace
    ops: TensorOperators
    k_table: np.ndarray = field(repr=False)
    cho: tuple = field(repr=False)
    condition: float = 0.0
    ill_conditioned: bool = False

    def apply(self, v: np.ndarray) -> np.ndarray:
        coef = scipy.linalg.cho_solve(self.cho, self.k_table.T @ v)
        return self.space.table @ coef

    def complement(self, v: np.ndarray) -> np.ndarray:
        return v - self.apply(v)

    def complement_t(self, v: np.ndarray) -> np.ndarray:
        coef = scipy.linalg.cho_solve(self.cho, self.space.table.T @ v)
        return v - self.k_table @ coef


def projector(space: BasisSpace, ops: TensorOperators) -> Projector:
    """Build the star-product projector for a space."""
    k_table = ops.apply_columns(ops.k_apply, space.table)
    gram = space.table.T @ k_table
    gram = 0.5 * (gram + gram.T)
    cond = float(np.linalg.cond(gram))
    ill = cond > 1e12
    if ill:
        warnings.warn(
            f"projector Gram matrix for element {space.element} has condition {cond:.2e}",
            RuntimeWarning,
        )
    cho = scipy.linalg.cho_factor(gram)
    return Projector(
        space=space, ops=ops, k_table=k_table, cho=cho, condition=cond, ill_conditioned=ill
    )
