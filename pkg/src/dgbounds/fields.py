"""Scalar coefficient fields on the periodic box: potentials and right-hand sides.

Gaussian bumps are periodized by summing the three nearest lattice images
per axis after wrapping the evaluation point into ``[0, L)``; the sum
factorizes over axes, so the cost stays linear in the number of terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["GaussianTerm", "PotentialSpec", "SourceSpec", "TrigFactor"]


@dataclass(frozen=True)
class GaussianTerm:
    """One bump ``magnitude * exp(-alpha * |x - center|^2)`` (periodized)."""

    center: tuple
    alpha: float
    magnitude: float


@dataclass(frozen=True)
class TrigFactor:
    """One per-axis factor ``sin(k x)`` or ``cos(k x)`` of a product mode."""

    func: str  # "sin" | "cos"
    k: float


def _periodized_gaussian(delta: np.ndarray, alpha: float, length: float) -> np.ndarray:
    out = np.zeros_like(delta)
    for off in (-length, 0.0, length):
        out += np.exp(-alpha * (delta + off) ** 2)
    return out


@dataclass(frozen=True)
class PotentialSpec:
    """Bounded periodic potential on ``[0, L]^d``.

    Kinds: ``constant`` (``value``), ``gaussian_sum`` (``terms``) and
    ``table`` (values on a uniform periodic grid, evaluated through the
    trigonometric interpolant).
    """

    kind: str
    d: int
    length: float
    value: float = 0.0
    terms: tuple = ()
    table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("constant", "gaussian_sum", "table"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "gaussian_sum" and not self.terms:
            raise ValueError("gaussian_sum potential needs at least one term")
        if self.kind == "table" and self.table is None:
            raise ValueError("table potential needs nodal values")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at points of shape ``(npts, d)`` (wrapped periodically)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[1] != self.d:
            raise ValueError(f"points must have {self.d} columns")
        if self.kind == "constant":
            return np.full(pts.shape[0], self.value)
        wrapped = pts - self.length * np.floor(pts / self.length)
        if self.kind == "gaussian_sum":
            out = np.zeros(pts.shape[0])
            for term in self.terms:
                fac = np.ones(pts.shape[0])
                for l in range(self.d):
                    fac *= _periodized_gaussian(
                        wrapped[:, l] - term.center[l], term.alpha, self.length
                    )
                out += term.magnitude * fac
            return out
        from .fourier import fourier_interpolate_points

        return fourier_interpolate_points(self.table, self.length, wrapped)

    def bound(self) -> float:
        """Crude sup-norm bound used for sanity checks."""
        if self.kind == "constant":
            return abs(self.value)
        if self.kind == "gaussian_sum":
            return float(sum(abs(t.magnitude) * 3**self.d for t in self.terms))
        return float(np.max(np.abs(self.table)))


@dataclass(frozen=True)
class SourceSpec:
    """Right-hand side field: a trigonometric product mode, a Gaussian sum, or constant."""

    kind: str  # "trig" | "gaussian_sum" | "constant"
    d: int
    length: float
    value: float = 0.0
    factors: tuple = ()  # TrigFactor per axis for kind="trig"
    terms: tuple = ()  # GaussianTerm list for kind="gaussian_sum"

    def __post_init__(self):
        if self.kind not in ("trig", "gaussian_sum", "constant"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "trig" and len(self.factors) != self.d:
            raise ValueError("trig source needs one factor per axis")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[1] != self.d:
            raise ValueError(f"points must have {self.d} columns")
        if self.kind == "constant":
            return np.full(pts.shape[0], self.value)
        if self.kind == "trig":
            out = np.ones(pts.shape[0])
            for l, fac in enumerate(self.factors):
                f = np.sin if fac.func == "sin" else np.cos
                out *= f(fac.k * pts[:, l])
            return out
        wrapped = pts - self.length * np.floor(pts / self.length)
        out = np.zeros(pts.shape[0])
        for term in self.terms:
            fac = np.ones(pts.shape[0])
            for l in range(self.d):
                fac *= _periodized_gaussian(
                    wrapped[:, l] - term.center[l], term.alpha, self.length
                )
            out += term.magnitude * fac
        return out
