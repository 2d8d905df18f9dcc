"""Space-time extension ``z(s, x) = e^{i lambda s} u0(x)`` of a resolvent solution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._validation import as_complex_scalar, check_vector
from ..errors import InconsistencyError

__all__ = ["ExtensionResult", "elliptic_extension"]


@dataclass(frozen=True, eq=False)
class ExtensionResult:
    """Extended field on a space-time grid with its equation residual.

    ``residual`` is ``max_s |r(s)| / (max_s |e^{i lambda s}| |f|)`` with
    ``r = z_ss + P_h z + i D_h z_s - (lambda f0 + f1 + D_h f0) e^{i lambda s}``;
    the damping terms are the discrete form of the boundary line.
    """

    z: np.ndarray
    s_nodes: np.ndarray
    lambda_spec: complex
    u0: np.ndarray
    f0: np.ndarray
    f1: np.ndarray
    gen: object
    residual: float
    max_abs_residual: float


def elliptic_extension(u0, lambda_spec, grid, gen, f0, f1, solve_residual=None, factor=10.0):
    """Build ``z = e^{i lambda s} u0`` on ``grid`` and verify its elliptic equation.

    ``z_ss`` is taken exactly as ``(i lambda)^2 z``.  When ``solve_residual``
    is given, a residual above ``factor * solve_residual`` (or above
    ``factor`` times machine precision when that is larger) raises.

    Raises
    ------
    InconsistencyError
    """
    lam = as_complex_scalar(lambda_spec)
    n = gen.N
    u0 = check_vector(u0, n, "u0").astype(complex)
    f0 = check_vector(f0, n, "f0").astype(complex)
    f1 = check_vector(f1, n, "f1").astype(complex)
    s = np.asarray(grid.s_nodes, dtype=float)
    e = np.exp(1j * lam * s)
    z = e[:, None] * u0[None, :]
    z_s = 1j * lam * z
    z_ss = (1j * lam) ** 2 * z
    Pz = (gen.P @ z.T).T
    Dzs = (gen.D @ z_s.T).T
    src = lam * f0 + f1 + gen.D @ f0
    r = z_ss + Pz + 1j * Dzs - e[:, None] * src[None, :]
    rmax = float(np.linalg.norm(r, axis=1).max()) if len(s) else 0.0
    fnorm = float(np.linalg.norm(np.concatenate([f0, f1])))
    emax = float(np.abs(e).max()) if len(s) else 1.0
    rel = rmax / (emax * fnorm) if fnorm > 0 else rmax
    if solve_residual is not None:
        bound = factor * max(solve_residual, np.finfo(float).eps)
        if rel > bound:
            raise InconsistencyError(f"extension residual {rel:.3e} exceeds {factor} x solve residual ({bound:.3e})")
    return ExtensionResult(z, s, lam, u0, f0, f1, gen, float(rel), rmax)
