"""Planewave utilities: trigonometric interpolation and periodic operator assembly.

Frequencies follow numpy FFT ordering; real fields are recovered by taking
the real part of the truncated series, which reproduces the standard real
trigonometric interpolant (the unpaired Nyquist mode turns into a cosine).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "freq_indices",
    "fourier_coefficients",
    "fourier_eval_tensor",
    "fourier_interpolate",
    "fourier_interpolate_points",
    "plane_wave_hamiltonian",
    "plane_wave_eval_tensor",
]


def freq_indices(n: int) -> np.ndarray:
    """Integer mode numbers in FFT order for an ``n``-point uniform grid."""
    return np.fft.fftfreq(n, d=1.0 / n).astype(int)


def fourier_coefficients(values: np.ndarray) -> np.ndarray:
    """Normalized FFT coefficients of samples on a uniform periodic grid."""
    values = np.asarray(values, dtype=float)
    return np.fft.fftn(values) / values.size


def fourier_eval_tensor(
    coef: np.ndarray,
    length: float,
    axis_targets,
    origin=0.0,
) -> np.ndarray:
    """Evaluate a truncated Fourier series on a tensor grid of target points.

    ``coef`` is a d-dimensional coefficient array in FFT order for a series
    periodic with period ``length`` per axis, anchored at ``origin``.
    Returns real values flattened with the first axis fastest.
    """
    coef = np.asarray(coef)
    d = coef.ndim
    if np.isscalar(origin):
        origin = [origin] * d
    out = coef
    for l in range(d):
        m = freq_indices(coef.shape[l])
        t = np.asarray(axis_targets[l], dtype=float) - origin[l]
        phase = np.exp(2j * np.pi / length * np.outer(t, m))
        out = np.tensordot(phase, out, axes=([1], [l]))
        out = np.moveaxis(out, 0, l)
    return np.real(out).reshape(-1, order="F")


def fourier_interpolate(values: np.ndarray, length: float, axis_targets, origin=0.0) -> np.ndarray:
    """Trigonometric interpolation from a uniform periodic grid to a tensor target grid.

    ``values`` holds samples on the uniform grid of a box with edge
    ``length`` anchored at ``origin``; ``axis_targets`` gives the target
    coordinates per axis (absolute coordinates).  Exact for band-limited
    data.
    """
    return fourier_eval_tensor(fourier_coefficients(values), length, axis_targets, origin)


def fourier_interpolate_points(values: np.ndarray, length: float, pts: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant at scattered points ``(npts, d)``."""
    coef = fourier_coefficients(values)
    d = coef.ndim
    pts = np.atleast_2d(pts)
    acc = None
    flat = coef.reshape(-1)
    grids = np.meshgrid(*[freq_indices(coef.shape[l]) for l in range(d)], indexing="ij")
    for l in range(d):
        ph = np.exp(2j * np.pi / length * np.outer(pts[:, l], grids[l].reshape(-1)))
        acc = ph if acc is None else acc * ph
    return np.real(acc @ flat)


def plane_wave_hamiltonian(potential, length: float, d: int, n_pw: int, origin=0.0):
    """Dense planewave discretization of ``-Laplace + V`` on a periodic box.

    Returns ``(H, modes)`` where ``H`` is Hermitian of size ``n_pw**d`` and
    ``modes`` is the ``(n_pw**d, d)`` integer mode table (FFT order per
    axis, first axis fastest).  The potential is sampled on a twice-finer
    uniform grid so every difference frequency is alias-free.
    """
    if np.isscalar(origin):
        origin = [origin] * d
    n_quad = 2 * n_pw
    axes = [origin[l] + np.arange(n_quad) * (length / n_quad) for l in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([g.reshape(-1, order="F") for g in grids])
    vgrid = potential(pts).reshape((n_quad,) * d, order="F")
    vhat = np.fft.fftn(vgrid) / vgrid.size

    m1 = freq_indices(n_pw)
    mgrids = np.meshgrid(*([m1] * d), indexing="ij")
    modes = np.column_stack([g.reshape(-1, order="F") for g in mgrids])

    size = n_pw**d
    diff_idx = []
    for l in range(d):
        dm = (modes[:, l][:, None] - modes[:, l][None, :]) % n_quad
        diff_idx.append(dm)
    h = vhat[tuple(diff_idx)].astype(complex)
    ksq = (2.0 * np.pi / length) ** 2 * np.sum(modes.astype(float) ** 2, axis=1)
    h[np.arange(size), np.arange(size)] += ksq
    return h, modes


def plane_wave_eval_tensor(
    coef_by_mode: np.ndarray,
    modes: np.ndarray,
    length: float,
    axis_targets,
    origin=0.0,
) -> np.ndarray:
    """Evaluate ``sum_m c_m exp(i k_m (x - origin))`` on a tensor target grid.

    ``coef_by_mode`` is indexed like ``modes`` (flat, first axis fastest);
    reshapes to the FFT-ordered tensor and reuses the tensor evaluator.
    """
    d = modes.shape[1]
    n_pw = int(round(len(coef_by_mode) ** (1.0 / d))) if d > 1 else len(coef_by_mode)
    out = np.asarray(coef_by_mode).reshape((n_pw,) * d, order="F")
    if np.isscalar(origin):
        origin = [origin] * d
    for l in range(d):
        m = freq_indices(n_pw)
        t = np.asarray(axis_targets[l], dtype=float) - origin[l]
        phase = np.exp(2j * np.pi / length * np.outer(t, m))
        out = np.tensordot(phase, out, axes=([1], [l]))
        out = np.moveaxis(out, 0, l)
    return out.reshape(-1, order="F")
