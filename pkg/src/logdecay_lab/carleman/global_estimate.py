"""Ratio check of the global Carleman estimate on manufactured solutions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp
from scipy.optimize import brentq

from ..errors import InconsistencyError
from .symbolic import _expr, coefficient_matrix, coords

__all__ = ["NormSet", "ManufacturedTriple", "ExtensionTriple", "GlobalReport", "check_global_estimate", "minimal_constant"]

NEUMANN_TOL = 1e-10


@dataclass(frozen=True)
class NormSet:
    """Norms entering the estimate (all nonnegative)."""

    h1_Y: float
    z0_X: float
    z1_Sigma: float
    z_Z: float
    zs_Z: float
    h1_X: float

    @property
    def data(self):
        return self.z0_X + self.z1_Sigma + self.z_Z + self.zs_Z


def minimal_constant(norms, eps):
    """Smallest ``C > 0`` with ``h1_Y <= C e^{C eps} data + C e^{-2/eps} h1_X``.

    Zero when ``h1_Y = 0``; ``inf`` when the right side vanishes identically.
    """
    if norms.h1_Y == 0:
        return 0.0
    D, T = norms.data, np.exp(-2.0 / eps) * norms.h1_X
    if D == 0 and T == 0:
        return float("inf")

    def F(C):
        with np.errstate(over="ignore"):
            return C * (np.exp(C * eps) * D + T) - norms.h1_Y

    hi = 1.0
    while F(hi) < 0:
        hi *= 2.0
    return float(brentq(F, 0.0, hi, xtol=1e-14, rtol=1e-13))


def _gauss(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


class ManufacturedTriple:
    """``(z, z0, z1)`` from a closed-form ``z`` on the continuous domain.

    ``z0 = z_ss + sum (a^{jk} z_j)_k`` and, on the damped part,
    ``z1 = (sum a^{jk} z_j nu_k) / a - i z_s``.  The homogeneous co-normal
    condition on the reflecting part is verified at the boundary quadrature
    nodes.

    Parameters
    ----------
    z : TestFunction
    domain : GridDomain
        Supplies the geometry (extents, damped side and range).
    coeffs : optional
        Symbolic or constant coefficient matrix.
    damping : expression in x, default 1
    nq : int
        Gauss-Legendre nodes per direction.
    """

    def __init__(self, z, domain, coeffs=None, damping=1, nq=16, name=None):
        self.z, self.domain, self.nq = z, domain, nq
        self.name = name or z.name
        self.dim = domain.dim
        self.a = coefficient_matrix(self.dim, coeffs)
        self.damping = _expr(damping)
        vs = coords(self.dim)
        s, xs = vs[0], vs[1:]
        ze = z.expr
        grad = [sp.diff(ze, x) for x in xs]
        z0 = sp.diff(ze, s, 2) + sum(sp.diff(self.a[j, k] * grad[j], xs[k]) for j in range(self.dim) for k in range(self.dim))
        self._f = sp.lambdify(vs, [ze, sp.diff(ze, s), *grad, z0], "numpy")
        self._conormal = [
            sp.lambdify(vs, sum(self.a[j, k] * grad[j] for j in range(self.dim)), "numpy") for k in range(self.dim)
        ]
        self._a = sp.lambdify(vs[1:], self.damping, "numpy")
        self._zs = sp.lambdify(vs, sp.diff(ze, s), "numpy")

    def _eval(self, pts):
        m = pts.shape[0]
        return [np.broadcast_to(np.asarray(v, dtype=complex), (m,)) for v in self._f(*pts.T)]

    def _volume(self, s_lo, s_hi):
        ss, ws = _gauss(s_lo, s_hi, 2 * self.nq)
        axes = [_gauss(0.0, L, self.nq) for L in self.domain.extents]
        grids = np.meshgrid(ss, *[a[0] for a in axes], indexing="ij")
        wts = np.meshgrid(ws, *[a[1] for a in axes], indexing="ij")
        pts = np.column_stack([g.ravel() for g in grids])
        w = np.prod([g.ravel() for g in wts], axis=0)
        return pts, w

    def _boundary(self):
        """Gauss nodes on the boundary: list of (points_x, weights, normal, damped)."""
        d = self.domain.description
        out = []
        if self.dim == 1:
            L = self.domain.extents[0]
            de = d["damped_end"]
            out.append((np.array([[0.0]]), np.array([1.0]), np.array([-1.0]), de in ("left", "both")))
            out.append((np.array([[L]]), np.array([1.0]), np.array([1.0]), de in ("right", "both")))
            return out
        lx, ly = self.domain.extents
        lo, hi = d["damped_range"]
        sides = {"left": (0, 0.0, -1), "right": (0, lx, 1), "bottom": (1, 0.0, -1), "top": (1, ly, 1)}
        for name, (ax, val, sg) in sides.items():
            run_len = (lx, ly)[1 - ax]
            cuts = [0.0, run_len]
            if name == d["damped_side"]:
                cuts = sorted({0.0, max(lo, 0.0), min(hi, run_len), run_len})
            for a_, b_ in zip(cuts[:-1], cuts[1:]):
                if b_ - a_ <= 0:
                    continue
                t, w = _gauss(a_, b_, self.nq)
                p = np.zeros((len(t), 2))
                p[:, ax] = val
                p[:, 1 - ax] = t
                nu = np.zeros(2)
                nu[ax] = sg
                damped = name == d["damped_side"] and a_ >= lo - 1e-12 and b_ <= hi + 1e-12
                out.append((p, w, nu, damped))
        return out

    def norms(self):
        res = {}
        for key, (lo, hi) in (("Y", (-1.0, 1.0)), ("X", (-2.0, 2.0))):
            pts, w = self._volume(lo, hi)
            z, zs, *grad, z0 = self._eval(pts)
            dens = np.abs(z) ** 2 + np.abs(zs) ** 2 + sum(np.abs(g) ** 2 for g in grad)
            res["h1_" + key] = float(np.sqrt(np.sum(w * dens)))
            if key == "X":
                res["z0_X"] = float(np.sqrt(np.sum(w * np.abs(z0) ** 2)))
        ss, ws = _gauss(-2.0, 2.0, 2 * self.nq)
        z1_sq = zZ_sq = zsZ_sq = 0.0
        for px, wx, nu, damped in self._boundary():
            S_, X_ = np.meshgrid(ss, np.arange(len(px)), indexing="ij")
            pts = np.column_stack([S_.ravel(), px[X_.ravel()]])
            w = (ws[:, None] * wx[None, :]).ravel()
            m = pts.shape[0]
            cn = sum(nu[k] * np.broadcast_to(np.asarray(self._conormal[k](*pts.T), complex), (m,)) for k in range(self.dim))
            if not damped:
                bad = float(np.abs(cn).max())
                if bad > NEUMANN_TOL * max(1.0, res["h1_X"]):
                    raise InconsistencyError(f"{self.name}: co-normal derivative {bad:.3e} on the reflecting boundary")
                continue
            a = np.broadcast_to(np.asarray(self._a(*pts[:, 1:].T), float), (m,))
            z, zs = self._eval(pts)[:2]
            z1 = cn / a - 1j * zs
            z1_sq += np.sum(w * np.abs(z1) ** 2)
            zZ_sq += np.sum(w * np.abs(z) ** 2)
            zsZ_sq += np.sum(w * np.abs(zs) ** 2)
        return NormSet(res["h1_Y"], res["z0_X"], float(np.sqrt(z1_sq)), float(np.sqrt(zZ_sq)), float(np.sqrt(zsZ_sq)), res["h1_X"])


class ExtensionTriple:
    """Triple built from a discrete extension ``z = e^{i lambda s} u0``.

    Uses ``z0 = (lambda f0 + f1) e^{i lambda s}`` and ``z1 = -f0 e^{i lambda s}``
    on the damped nodes; spatial integrals use the trapezoidal mass and the
    discrete H^1 stiffness, ``s`` integrals Gauss-Legendre quadrature.
    """

    def __init__(self, ext, nq=32, name="extension"):
        self.ext, self.nq, self.name = ext, nq, name

    def norms(self):
        ext, gen = self.ext, self.ext.gen
        lam = ext.lambda_spec
        m = gen.mass
        u0, f0, f1 = ext.u0, ext.f0, ext.f1
        l2u = float(np.real(np.vdot(u0, m * u0)))
        gradu = float(np.real(np.vdot(u0, gen.K_h1 @ u0)))
        g = lam * f0 + f1
        l2g = float(np.real(np.vdot(g, m * g)))
        dn = gen.domain.damped_nodes
        sw = np.zeros(gen.N)
        sw[gen.domain.boundary_nodes] = gen.domain.surface_weights
        wz = sw[dn]
        bu = float(np.sum(wz * np.abs(u0[dn]) ** 2))
        bf = float(np.sum(wz * np.abs(f0[dn]) ** 2))

        def s_int(lo, hi):
            ss, ws = _gauss(lo, hi, self.nq)
            return float(np.sum(ws * np.abs(np.exp(1j * lam * ss)) ** 2))

        eY, eX = s_int(-1.0, 1.0), s_int(-2.0, 2.0)
        h1 = lambda e: np.sqrt(e * ((1 + abs(lam) ** 2) * l2u + gradu))  # noqa: E731
        return NormSet(
            float(h1(eY)), float(np.sqrt(eX * l2g)), float(np.sqrt(eX * bf)),
            float(np.sqrt(eX * bu)), float(abs(lam) * np.sqrt(eX * bu)), float(h1(eX)),
        )


@dataclass
class GlobalReport:
    eps: list
    C_min: list
    per_triple: dict
    norms: dict
    flagged: bool
    notes: list = field(default_factory=list)

    def table(self):
        return [{"eps": e, "C_min": c} for e, c in zip(self.eps, self.C_min)]


def check_global_estimate(z_family, weight=None, eps=(0.25, 0.5, 1.0, 2.0)):
    """Minimal constant of the global estimate over a family of triples, per ``eps``.

    For each ``eps`` the reported ``C_min`` is the smallest ``C`` making
    ``|z|_{H^1(Y)} <= C e^{C eps} [data] + C e^{-2/eps} |z|_{H^1(X)}`` hold
    for every triple.  ``flagged`` is set when some triple admits no finite
    constant.  ``weight`` is accepted for provenance only.
    """
    del weight
    eps = [float(e) for e in np.atleast_1d(eps)]
    if any(e <= 0 for e in eps):
        raise ValueError("eps must be positive")
    norms = {}
    for i, t in enumerate(z_family):
        norms[getattr(t, "name", f"triple{i}")] = t.norms()
    per = {name: [minimal_constant(n, e) for e in eps] for name, n in norms.items()}
    cmin = [max([v[i] for v in per.values()], default=0.0) for i in range(len(eps))]
    flagged = not all(np.isfinite(cmin))
    notes = ["a triple with vanishing right-hand side admits no finite constant"] if flagged else []
    return GlobalReport(eps, cmin, per, norms, flagged, notes)
