"""Tensor-product computational domains with a partitioned boundary.

Nodes are vertex-centred and numbered with the x index running fastest,
``index = ix + nx * iy``.  Boundary nodes are classified as ``DAMPED``
(the support of the damping coefficient) or ``REFLECTING``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ._validation import check_int, check_positive
from .errors import (
    ConfigurationError,
    EllipticityError,
    InvalidDomainError,
    SymmetryError,
)

__all__ = [
    "BoundaryClass",
    "GridDomain",
    "CoefficientField",
    "DampingProfile",
    "build_interval",
    "build_rectangle",
    "validate_coefficients",
]

_SIDES = {
    "left": (0, -1.0),
    "right": (0, 1.0),
    "bottom": (1, -1.0),
    "top": (1, 1.0),
}


class BoundaryClass(str, Enum):
    DAMPED = "damped"
    REFLECTING = "reflecting"


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Discretized interval or rectangle.

    ``surface_weights`` are trapezoidal weights along the side from which
    each boundary node inherits its class and normal; ``mass_weights`` are
    the tensor trapezoidal weights of the interior quadrature.
    """

    dim: int
    extents: tuple
    counts: tuple
    spacing: tuple
    nodes: np.ndarray
    boundary_nodes: np.ndarray
    normals: np.ndarray
    boundary_class: tuple
    surface_weights: np.ndarray
    mass_weights: np.ndarray
    description: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def damped_mask(self):
        """Boolean mask over ``boundary_nodes`` selecting the damped part."""
        return np.array([c is BoundaryClass.DAMPED for c in self.boundary_class])

    @property
    def damped_nodes(self):
        return self.boundary_nodes[self.damped_mask]

    @property
    def reflecting_nodes(self):
        return self.boundary_nodes[~self.damped_mask]

    def grid_shape(self):
        """Node counts in array order (ny, nx) for reshaping nodal fields."""
        return tuple(reversed(self.counts))


def _trapezoid(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def build_interval(n, length, damped_end="right"):
    """Uniform grid on ``[0, length]`` with one or both endpoints damped."""
    try:
        n = check_int(n, "n", minimum=3)
        length = check_positive(length, "length")
    except ValueError as exc:
        raise InvalidDomainError(str(exc)) from exc
    if damped_end not in ("left", "right", "both"):
        raise InvalidDomainError(f"damped_end must be left, right or both, got {damped_end!r}")
    h = length / (n - 1)
    x = np.linspace(0.0, length, n)
    left = BoundaryClass.DAMPED if damped_end in ("left", "both") else BoundaryClass.REFLECTING
    right = BoundaryClass.DAMPED if damped_end in ("right", "both") else BoundaryClass.REFLECTING
    return GridDomain(
        dim=1,
        extents=(float(length),),
        counts=(n,),
        spacing=(h,),
        nodes=_frozen(x[:, None]),
        boundary_nodes=_frozen([0, n - 1]),
        normals=_frozen([[-1.0], [1.0]]),
        boundary_class=(left, right),
        surface_weights=_frozen([1.0, 1.0]),
        mass_weights=_frozen(_trapezoid(n, h)),
        description={"dim": 1, "n": n, "length": float(length), "damped_end": damped_end},
    )


def build_rectangle(nx, ny, lx, ly, damped_side="right", damped_range=None):
    """Tensor grid on ``[0, lx] x [0, ly]`` with a damped sub-segment.

    ``damped_range`` is an interval of the coordinate running along
    ``damped_side`` (y for left/right, x for bottom/top); ``None`` damps the
    whole side.  A corner is damped exactly when it lies on the damped
    segment and then carries the damped side's normal; the remaining
    corners take the normal of their left/right side.
    """
    try:
        nx = check_int(nx, "nx", minimum=3)
        ny = check_int(ny, "ny", minimum=3)
        lx = check_positive(lx, "lx")
        ly = check_positive(ly, "ly")
    except ValueError as exc:
        raise InvalidDomainError(str(exc)) from exc
    if damped_side not in _SIDES:
        raise InvalidDomainError(f"damped_side must be one of {sorted(_SIDES)}, got {damped_side!r}")
    axis, sign = _SIDES[damped_side]
    along = 1 - axis
    side_len = (lx, ly)[along]
    if damped_range is None:
        lo, hi = 0.0, side_len
    else:
        lo, hi = (float(v) for v in damped_range)
        if not hi > lo:
            raise InvalidDomainError("damped_range has zero length")

    hx, hy = lx / (nx - 1), ly / (ny - 1)
    xs, ys = np.linspace(0.0, lx, nx), np.linspace(0.0, ly, ny)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    ext = (lx, ly)
    counts = (nx, ny)
    spacing = (hx, hy)
    tol = 1e-12 * max(lx, ly)

    bnodes, normals, classes, sweights = [], [], [], []
    for idx in range(nx * ny):
        ix, iy = idx % nx, idx // nx
        on = []
        if ix == 0:
            on.append("left")
        if ix == nx - 1:
            on.append("right")
        if iy == 0:
            on.append("bottom")
        if iy == ny - 1:
            on.append("top")
        if not on:
            continue
        coord = nodes[idx, along]
        damped = damped_side in on and lo - tol <= coord <= hi + tol
        if damped:
            side = damped_side
        elif len(on) == 1:
            side = on[0]
        else:
            side = next(sd for sd in on if sd in ("left", "right"))
        ax, sg = _SIDES[side]
        nrm = np.zeros(2)
        nrm[ax] = sg
        run = 1 - ax
        i_run = (ix, iy)[run]
        w = spacing[run] / 2 if i_run in (0, counts[run] - 1) else spacing[run]
        bnodes.append(idx)
        normals.append(nrm)
        classes.append(BoundaryClass.DAMPED if damped else BoundaryClass.REFLECTING)
        sweights.append(w)

    if BoundaryClass.DAMPED not in classes:
        raise InvalidDomainError("damped segment contains no boundary node; the damped set must be nonempty")
    mass = np.outer(_trapezoid(ny, hy), _trapezoid(nx, hx)).ravel()
    return GridDomain(
        dim=2,
        extents=ext,
        counts=counts,
        spacing=spacing,
        nodes=_frozen(nodes),
        boundary_nodes=_frozen(bnodes),
        normals=_frozen(normals),
        boundary_class=tuple(classes),
        surface_weights=_frozen(sweights),
        mass_weights=_frozen(mass),
        description={
            "dim": 2,
            "nx": nx,
            "ny": ny,
            "lx": lx,
            "ly": ly,
            "damped_side": damped_side,
            "damped_range": [lo, hi],
        },
    )


@dataclass(eq=False)
class CoefficientField:
    """Nodal samples of the symmetric coefficient matrix, shape (N, d, d)."""

    values: np.ndarray
    beta: float | None = None

    @classmethod
    def identity(cls, domain):
        return cls.constant(domain, np.eye(domain.dim))

    @classmethod
    def constant(cls, domain, matrix):
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        if m.shape != (domain.dim, domain.dim):
            raise ConfigurationError(f"coefficient matrix must be {domain.dim}x{domain.dim}")
        return cls(np.broadcast_to(m, (domain.n_nodes,) + m.shape).copy())

    @classmethod
    def from_function(cls, domain, func):
        """``func(x)`` returns the d x d matrix at the point ``x``."""
        vals = np.array([np.atleast_2d(func(x)) for x in domain.nodes], dtype=float)
        return cls(vals)

    @classmethod
    def from_csv(cls, domain, path):
        """Read samples with columns x, y, a11, a12, a22 (2D only).

        Every grid node must appear exactly once (matched to 1e-9).
        """
        if domain.dim != 2:
            raise ConfigurationError("sampled coefficients are supported on rectangles only")
        vals = np.full((domain.n_nodes, 2, 2), np.nan)
        nx = domain.counts[0]
        hx, hy = domain.spacing
        with open(Path(path), newline="") as fh:
            for row in csv.DictReader(fh):
                x, y = float(row["x"]), float(row["y"])
                ix, iy = round(x / hx), round(y / hy)
                idx = ix + nx * iy
                if not (0 <= ix < nx and 0 <= iy < domain.counts[1]) or not np.allclose(
                    domain.nodes[idx], (x, y), atol=1e-9
                ):
                    raise ConfigurationError(f"sample point ({x}, {y}) is not a grid node")
                a12 = float(row["a12"])
                vals[idx] = [[float(row["a11"]), a12], [a12, float(row["a22"])]]
        if np.isnan(vals).any():
            raise ConfigurationError("coefficient samples do not cover every grid node")
        return cls(vals)


def validate_coefficients(field_):
    """Check symmetry and uniform ellipticity; return and store ``beta``.

    ``beta`` is the minimum over nodes of the smallest eigenvalue.
    """
    vals = np.asarray(field_.values, dtype=float)
    if vals.ndim != 3 or vals.shape[1] != vals.shape[2]:
        raise ConfigurationError(f"coefficient values must have shape (N, d, d), got {vals.shape}")
    asym = np.abs(vals - np.swapaxes(vals, 1, 2)).max(initial=0.0)
    if asym > 1e-12 * max(1.0, np.abs(vals).max(initial=0.0)):
        raise SymmetryError(f"coefficient matrix is not symmetric (max |a_jk - a_kj| = {asym:.3e})")
    lam_min = np.linalg.eigvalsh(vals)[:, 0]
    worst = int(np.argmin(lam_min))
    if lam_min[worst] <= 0:
        raise EllipticityError(
            f"coefficient matrix is not positive definite at node {worst} (smallest eigenvalue {lam_min[worst]:.6g})"
        )
    field_.beta = float(lam_min[worst])
    return field_.beta


@dataclass(eq=False)
class DampingProfile:
    """Damping coefficient on ``domain.boundary_nodes`` (same order)."""

    values: np.ndarray

    @classmethod
    def constant(cls, domain, a):
        a = check_positive(a, "a", strict=False)
        return cls(np.where(domain.damped_mask, a, 0.0))

    @classmethod
    def from_function(cls, domain, func):
        """Sample ``func(x)`` on the damped nodes; zero elsewhere."""
        vals = np.zeros(len(domain.boundary_nodes))
        mask = domain.damped_mask
        for i in np.flatnonzero(mask):
            vals[i] = float(func(domain.nodes[domain.boundary_nodes[i]]))
        return cls(vals)

    @classmethod
    def zero(cls, domain):
        """Damping switched off: the conservative reference problem."""
        return cls(np.zeros(len(domain.boundary_nodes)))

    def check(self, domain):
        """Validate against ``domain``; an all-zero profile is always accepted."""
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(domain.boundary_nodes),):
            raise ConfigurationError("damping profile must have one value per boundary node")
        if (vals < 0).any():
            raise ConfigurationError("damping coefficient must be nonnegative")
        if not vals.any():
            return vals
        mask = domain.damped_mask
        if ((vals > 0) != mask).any():
            bad = domain.boundary_nodes[(vals > 0) != mask]
            raise ConfigurationError(f"damping support does not match the damped boundary class at nodes {bad.tolist()}")
        return vals
