"""Discrete elliptic operator, damped wave generator and resolvent solver.

The semi-discrete system is ``M u'' + B u' + K u = 0`` with lumped
(trapezoidal) mass ``M``, symmetric stiffness ``K`` and diagonal boundary
damping ``B = diag(w_i a_i)``.  In first-order form the generator is

    A_h = [[0, I], [P_h, -D_h]],  P_h = -M^{-1} K,  D_h = M^{-1} B.

Eliminating ghost nodes of the second-order centred co-normal flux
difference produces exactly this ``M^{-1} K`` structure, so ``P_h`` is
symmetric in the mass-weighted inner product.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg import lapack

from ._validation import as_complex_scalar, check_vector
from .domain import CoefficientField, DampingProfile, GridDomain, validate_coefficients
from .errors import ConfigurationError, DimensionError, NearEigenvalueError

__all__ = [
    "StateVector",
    "WaveGenerator",
    "ResolventSolver",
    "assemble_generator",
    "apply_generator",
    "solve_resolvent",
    "imaginary_part_identity",
    "energy",
    "energy_inner",
    "h_norm",
    "dissipation_rate",
]

RESIDUAL_TOL = 1e-10
PIVOT_RATIO_TOL = 1e-14
RCOND_TOL = 1e-15


@dataclass(frozen=True)
class StateVector:
    """Displacement ``u0`` (H^1 component) and velocity ``u1`` (L^2 component)."""

    u0: np.ndarray
    u1: np.ndarray

    def __post_init__(self):
        u0, u1 = np.asarray(self.u0), np.asarray(self.u1)
        if u0.ndim != 1 or u0.shape != u1.shape:
            raise DimensionError(f"u0 and u1 must be 1-D of equal length, got {u0.shape} and {u1.shape}")
        if not (np.all(np.isfinite(u0)) and np.all(np.isfinite(u1))):
            raise ValueError("state contains non-finite entries")
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "u1", u1)

    @property
    def n(self):
        return self.u0.shape[0]

    def to_array(self):
        return np.concatenate([self.u0, self.u1])

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x)
        if x.ndim != 1 or x.shape[0] % 2:
            raise DimensionError("stacked state must be 1-D with even length")
        n = x.shape[0] // 2
        return cls(x[:n].copy(), x[n:].copy())

    @classmethod
    def zeros(cls, n, dtype=float):
        return cls(np.zeros(n, dtype=dtype), np.zeros(n, dtype=dtype))

    def __add__(self, other):
        return StateVector(self.u0 + other.u0, self.u1 + other.u1)

    def __sub__(self, other):
        return StateVector(self.u0 - other.u0, self.u1 - other.u1)

    def __mul__(self, c):
        return StateVector(c * self.u0, c * self.u1)

    __rmul__ = __mul__


def _as_state(x, n):
    if isinstance(x, StateVector):
        if x.n != n:
            raise DimensionError(f"state has length {x.n}, generator has N={n}")
        return x
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.shape[0] != 2 * n:
        raise DimensionError(f"expected a StateVector or a stacked vector of length {2 * n}")
    return StateVector.from_array(arr)


@dataclass(frozen=True, eq=False)
class WaveGenerator:
    """Assembled discrete generator; all matrices are read-only after assembly."""

    domain: GridDomain
    coeffs: CoefficientField
    damping: DampingProfile
    mass: np.ndarray
    K: sp.csr_matrix
    K_h1: sp.csr_matrix
    b_diag: np.ndarray
    P: sp.csr_matrix
    D: sp.dia_matrix
    A: sp.csr_matrix
    W: sp.csr_matrix

    @property
    def N(self):
        return self.mass.shape[0]

    @property
    def P_h(self):
        return self.P.toarray()

    @property
    def D_h(self):
        return self.D.toarray()

    @property
    def A_h(self):
        return self.A.toarray()

    @property
    def h_inner(self):
        """Weight matrix ``blockdiag(M + K_1, M)`` of the discrete H = H^1 x L^2 norm."""
        return self.W

    @property
    def undamped(self):
        return not self.b_diag.any()


def _stiffness_1d(domain, a):
    n = domain.n_nodes
    h = domain.spacing[0]
    ae = 0.5 * (a[:-1] + a[1:])
    i = np.arange(n - 1)
    rows = np.concatenate([i, i + 1, i, i + 1])
    cols = np.concatenate([i, i + 1, i + 1, i])
    vals = np.concatenate([ae, ae, -ae, -ae]) / h
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


# corner gradients of a bilinear cell, nodes ordered (00, 10, 01, 11)
_CORNER_DX = np.array([[-1, 1, 0, 0], [-1, 1, 0, 0], [0, 0, -1, 1], [0, 0, -1, 1]], dtype=float)
_CORNER_DY = np.array([[-1, 0, 1, 0], [0, -1, 0, 1], [-1, 0, 1, 0], [0, -1, 0, 1]], dtype=float)


def _stiffness_2d(domain, a):
    nx, ny = domain.counts
    hx, hy = domain.spacing
    ix, iy = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1))
    n00 = (ix + nx * iy).ravel()
    cell = np.column_stack([n00, n00 + 1, n00 + nx, n00 + nx + 1])
    abar = a[cell].mean(axis=1)
    G = np.stack([_CORNER_DX / hx, _CORNER_DY / hy], axis=1)  # (corner, dir, node)
    ke = 0.25 * hx * hy * np.einsum("cia,eij,cjb->eab", G, abar, G)
    rows = np.repeat(cell, 4, axis=1).ravel()
    cols = np.tile(cell, (1, 4)).ravel()
    n = domain.n_nodes
    return sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(n, n))


def _stiffness(domain, values):
    if domain.dim == 1:
        return _stiffness_1d(domain, values[:, 0, 0])
    return _stiffness_2d(domain, values)


def assemble_generator(domain, coeffs=None, damping=None):
    """Assemble ``P_h``, ``D_h`` and the block generator ``A_h``.

    ``coeffs`` defaults to the identity field and ``damping`` to the zero
    profile (conservative reference problem).
    """
    if coeffs is None:
        coeffs = CoefficientField.identity(domain)
    if damping is None:
        damping = DampingProfile.zero(domain)
    vals = np.asarray(coeffs.values, dtype=float)
    if vals.shape != (domain.n_nodes, domain.dim, domain.dim):
        raise ConfigurationError(
            f"coefficient field shape {vals.shape} does not match the domain ({domain.n_nodes}, {domain.dim}, {domain.dim})"
        )
    if coeffs.beta is None:
        validate_coefficients(coeffs)
    avals = damping.check(domain)

    n = domain.n_nodes
    mass = np.asarray(domain.mass_weights, dtype=float)
    K = _stiffness(domain, vals)
    K = (0.5 * (K + K.T)).tocsr()
    K_h1 = _stiffness(domain, np.broadcast_to(np.eye(domain.dim), vals.shape))
    K_h1 = (0.5 * (K_h1 + K_h1.T)).tocsr()
    b = np.zeros(n)
    b[domain.boundary_nodes] = np.asarray(domain.surface_weights) * avals
    minv = sp.diags(1.0 / mass)
    P = (-(minv @ K)).tocsr()
    D = sp.diags(b / mass)
    I = sp.identity(n, format="csr")
    A = sp.bmat([[None, I], [P, -D]], format="csr")
    W = sp.block_diag([sp.diags(mass) + K_h1, sp.diags(mass)], format="csr")
    for arr in (mass, b):
        arr.setflags(write=False)
    return WaveGenerator(domain, coeffs, damping, mass, K, K_h1, b, P, D, A, W)


def apply_generator(gen, x):
    """Return ``A_h x = (u1, P_h u0 - D_h u1)``."""
    x = _as_state(x, gen.N)
    return StateVector(x.u1.copy(), gen.P @ x.u0 - gen.D @ x.u1)


def energy_inner(gen, x, y):
    """Energy-form pairing ``y0^H K x0 + y1^H M x1``."""
    x, y = _as_state(x, gen.N), _as_state(y, gen.N)
    return np.vdot(y.u0, gen.K @ x.u0) + np.vdot(y.u1, gen.mass * x.u1)


def energy(gen, x):
    """Seminorm energy ``(|u1|_M^2 + u0^H K u0) / 2``."""
    return 0.5 * float(np.real(energy_inner(gen, x, x)))


def dissipation_rate(gen, x):
    """Boundary dissipation ``sum_i w_i a_i |u1_i|^2``."""
    x = _as_state(x, gen.N)
    return float(np.real(np.vdot(x.u1, gen.b_diag * x.u1)))


def h_norm(gen, x):
    """Norm in the discrete H = H^1 x L^2 inner product."""
    v = _as_state(x, gen.N).to_array()
    return float(np.sqrt(max(np.real(np.vdot(v, gen.W @ v)), 0.0)))


class ResolventSolver:
    """Factorization of ``A_h - lambda I`` through the reduced N x N system.

    With ``u1 = f0 + lambda u0`` the second row becomes

        (-K - lambda B - lambda^2 M) u0 = M (lambda f0 + f1) + B f0,

    which is factored once by dense LU with partial pivoting.  The shift is
    rejected as a near-eigenvalue when the pivot ratio drops below
    ``PIVOT_RATIO_TOL`` or the LAPACK reciprocal condition estimate below
    ``RCOND_TOL``.
    """

    def __init__(self, gen, lambda_spec, rcond_tol=RCOND_TOL):
        self.gen = gen
        lam = as_complex_scalar(lambda_spec)
        self.lambda_spec = lam
        K = gen.K.toarray()
        R = -K - lam * np.diag(gen.b_diag) - lam**2 * np.diag(gen.mass)
        R = R.astype(complex)
        anorm = np.abs(R).sum(axis=0).max()
        self._lu, self._piv = sla.lu_factor(R, check_finite=False)
        udiag = np.abs(np.diag(self._lu))
        self.pivot_ratio = float(udiag.min() / udiag.max()) if udiag.max() > 0 else 0.0
        rc, info = lapack.zgecon(self._lu, anorm, norm="1")
        self.rcond = float(rc) if info == 0 else 0.0
        if self.pivot_ratio < PIVOT_RATIO_TOL or self.rcond < rcond_tol:
            raise NearEigenvalueError(
                f"reduced resolvent system is numerically singular at lambda={lam:.12g} "
                f"(rcond={self.rcond:.3e}, pivot ratio={self.pivot_ratio:.3e})",
                lambda_spec=lam,
                rcond=self.rcond,
            )
        self._op = (gen.A - lam * sp.identity(2 * gen.N, format="csr")).tocsr()

    def solve_array(self, f):
        """Raw solve on a stacked vector, no residual certification."""
        n = self.gen.N
        f = np.asarray(f)
        f0, f1 = f[:n], f[n:]
        lam = self.lambda_spec
        rhs = self.gen.mass * (lam * f0 + f1) + self.gen.b_diag * f0
        u0 = sla.lu_solve((self._lu, self._piv), rhs.astype(complex), check_finite=False)
        u1 = f0 + lam * u0
        return np.concatenate([u0, u1])

    def solve_adjoint_array(self, g):
        """Solve ``(A_h - lambda I)^H y = g`` with the same factorization."""
        n = self.gen.N
        g = np.asarray(g)
        g0, g1 = g[:n], g[n:]
        lamc = np.conj(self.lambda_spec)
        yt = sla.lu_solve((self._lu, self._piv), (g0 + lamc * g1).astype(complex), trans=2, check_finite=False)
        y1 = self.gen.mass * yt
        y0 = g1 + (self.gen.D @ y1) + lamc * y1
        return np.concatenate([y0, y1])

    def residual(self, u, f):
        """Relative residual ``|(A - lambda) u - f| / |f|`` and the normwise backward error."""
        r = self._op @ u - f
        nf = np.linalg.norm(f)
        rel = np.linalg.norm(r) / nf if nf > 0 else float(np.linalg.norm(r) > 0)
        opnorm = abs(self._op).sum(axis=1).max()
        denom = opnorm * np.abs(u).max(initial=0.0) + np.abs(f).max(initial=0.0)
        backward = np.abs(r).max(initial=0.0) / denom if denom > 0 else 0.0
        return float(rel), float(backward)

    def solve(self, f, refine=2):
        """Solve ``(A_h - lambda I) u = f`` with certified residual.

        Up to ``refine`` steps of iterative refinement are applied.  A
        :class:`NearEigenvalueError` is raised when neither the relative
        residual nor the normwise backward error reaches 1e-10.
        """
        f = _as_state(f, self.gen.N).to_array().astype(complex)
        if not f.any():
            self.last_residual = 0.0
            return StateVector.zeros(self.gen.N, dtype=complex)
        u = self.solve_array(f)
        rel, bwd = self.residual(u, f)
        for _ in range(refine):
            if rel <= RESIDUAL_TOL * 1e-2:
                break
            u = u + self.solve_array(f - self._op @ u)
            rel, bwd = self.residual(u, f)
        if rel > RESIDUAL_TOL and bwd > RESIDUAL_TOL:
            raise NearEigenvalueError(
                f"resolvent solve at lambda={self.lambda_spec:.12g} reached relative residual {rel:.3e}",
                lambda_spec=self.lambda_spec,
                residual=rel,
                rcond=self.rcond,
            )
        self.last_residual = rel
        return StateVector.from_array(u)


def solve_resolvent(gen, lambda_spec, f):
    """Return ``u`` with ``(A_h - lambda I) u = f``."""
    return ResolventSolver(gen, lambda_spec).solve(f)


def imaginary_part_identity(gen, lambda_spec, u0, f0, f1, return_terms=False):
    """Check the imaginary part of the energy pairing of the reduced equation.

    Pairing the reduced equation with ``conj(u0)`` in the mass inner product
    and using the boundary coupling gives

        <-(lambda f0 + f1), u0>_M
            = lambda^2 |u0|_M^2 + u0^H K u0 + sum_i w_i a_i (lambda u0_i + f0_i) conj(u0_i).

    The left side is evaluated from the data and the right side from
    ``u0``; the return value is ``|Im L - Im R| / (1 + |Im R|)``.  With
    ``return_terms`` a dict with both sides and the boundary dissipation term
    ``Im(lambda) sum w a |u0|^2`` is returned as well.
    """
    lam = as_complex_scalar(lambda_spec)
    n = gen.N
    u0 = check_vector(u0, n, "u0").astype(complex)
    f0 = check_vector(f0, n, "f0").astype(complex)
    f1 = check_vector(f1, n, "f1").astype(complex)
    m, b = gen.mass, gen.b_diag
    lhs = -np.sum(m * (lam * f0 + f1) * np.conj(u0))
    stiff = np.vdot(u0, gen.K @ u0)
    boundary = np.sum(b * (lam * u0 + f0) * np.conj(u0))
    rhs = lam**2 * np.sum(m * np.abs(u0) ** 2) + stiff + boundary
    res = abs(lhs.imag - rhs.imag) / (1.0 + abs(rhs.imag))
    if return_terms:
        terms = {
            "lhs": complex(lhs),
            "rhs": complex(rhs),
            "boundary_dissipation": float(lam.imag * np.sum(b * np.abs(u0) ** 2)),
        }
        return float(res), terms
    return float(res)
