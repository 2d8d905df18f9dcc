"""Pointwise Carleman terms and the weighted inequality check.

Everything is evaluated in reduced form: with ``v = theta z`` every term is
``theta^2`` times a polynomial in the derivatives of ``ell`` and ``z``,
and the factor is divided out.  Reduced derivatives of ``v`` are

    v_s / theta = z_s + ell_s z,    v_j / theta = z_j + ell_j z,

and the flux derivatives become ``M_s / theta^2 = M~_s + 2 ell_s M~`` and
``(div V) / theta^2 = sum_k (V~_k,k + 2 ell_k V~_k)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from ..errors import EstimateViolationError, InconsistencyError
from .symbolic import JetFormula, _expr, coefficient_matrix, coords, generic_functions

__all__ = [
    "PointwiseTerms",
    "PointwiseReport",
    "carleman_terms",
    "check_pointwise_estimate",
    "check_psi_dual",
    "check_derivative_table",
    "coercivity_threshold",
]

FULL_SCALE_LIMIT = 350.0  # theta^2 = e^{2 ell} is representable below this ell
DUAL_TOL = 1e-9


def _sym(p, q):
    """``p conj(q) + conj(p) q`` for complex numbers given as (re, im)."""
    return 2 * (p[0] * q[0] + p[1] * q[1])


def _abs2(p):
    return p[0] ** 2 + p[1] ** 2


def _build(dim, a):
    vs = coords(dim)
    s, xs = vs[0], vs[1:]
    F = generic_functions(dim, ("L", "Zr", "Zi"))
    L, Z = F["L"], (F["Zr"], F["Zi"])
    n = dim
    d = lambda f, i: sp.diff(f, s) if i == "s" else sp.diff(f, xs[i])  # noqa: E731

    ls = d(L, "s")
    lj = [d(L, j) for j in range(n)]
    lss = d(ls, "s")
    ljs = [d(lj[j], "s") for j in range(n)]
    div_al = sum(d(a[j, k] * lj[j], k) for j in range(n) for k in range(n))
    Psi = -2 * lss - 2 * div_al
    G_ell = ls**2 + sum(a[j, k] * lj[j] * lj[k] for j in range(n) for k in range(n))
    A = G_ell - lss - div_al - Psi

    # reduced derivatives of v (complex as re/im pairs)
    V0 = Z
    Vs = tuple(d(z, "s") + ls * z for z in Z)
    Vj = [tuple(d(z, j) + lj[j] * z for z in Z) for j in range(n)]
    avv = sum(a[j, k] * (Vj[j][0] * Vj[k][0] + Vj[j][1] * Vj[k][1]) for j in range(n) for k in range(n))

    M = (
        2 * ls * (_abs2(Vs) - avv)
        + 2 * sum(a[j, k] * lj[j] * _sym(Vs, Vj[k]) for j in range(n) for k in range(n))
        - Psi * _sym(Vs, V0)
        + (2 * A * ls + d(Psi, "s")) * _abs2(V0)
    )
    V = []
    for k in range(n):
        Vk = 0
        for j in range(n):
            Vk += (
                -2 * a[j, k] * lj[j] * _abs2(Vs)
                + 2 * a[j, k] * ls * _sym(Vj[j], Vs)
                - Psi * a[j, k] * _sym(Vj[j], V0)
                + a[j, k] * (2 * A * lj[j] + d(Psi, j)) * _abs2(V0)
            )
            for jp in range(n):
                for kp in range(n):
                    Vk += (2 * a[j, kp] * a[jp, k] - a[j, k] * a[jp, kp]) * lj[j] * _sym(Vj[jp], Vj[kp])
        V.append(Vk)
    c = [
        [
            sum(
                2 * d(a[jp, k] * lj[jp], kp) * a[j, kp]
                - d(a[j, k], kp) * a[jp, kp] * lj[jp]
                + a[j, k] * d(a[jp, kp] * lj[jp], kp)
                for jp in range(n)
                for kp in range(n)
            )
            + a[j, k] * lss
            for k in range(n)
        ]
        for j in range(n)
    ]
    B_printed = (
        sum(d(a[j, k] * d(Psi, k), j) for j in range(n) for k in range(n))
        + 2 * d(A * ls, "s")
        + 2 * sum(d(A * a[j, k] * lj[j], k) for j in range(n) for k in range(n))
        + 2 * A * Psi
    )
    B = B_printed + d(d(Psi, "s"), "s")

    Pz = tuple(d(d(z, "s"), "s") + sum(d(a[j, k] * d(z, j), k) for j in range(n) for k in range(n)) for z in Z)
    Ms = d(M, "s") + 2 * ls * M
    divV = sum(d(V[k], k) + 2 * lj[k] * V[k] for k in range(n))
    lhs = _abs2(Pz) + Ms + divV
    quad = (
        2 * (3 * lss + div_al) * _abs2(Vs)
        + 4 * sum(a[j, k] * ljs[j] * _sym(Vj[k], Vs) for j in range(n) for k in range(n))
        + sum(c[j][k] * _sym(Vj[k], Vj[j]) for j in range(n) for k in range(n))
    )
    rhs = quad + B * _abs2(V0)
    rhs_printed = quad + B_printed * _abs2(V0)

    # the two squares left over by the identity
    def red_ss(z):
        return d(d(z, "s"), "s") + 2 * ls * d(z, "s") + (lss + ls**2) * z

    def red_jk(z, j, k):
        return d(d(z, j), k) + lj[j] * d(z, k) + lj[k] * d(z, j) + (d(lj[j], k) + lj[j] * lj[k]) * z

    I1 = tuple(
        red_ss(z)
        + sum(d(a[j, k], k) * (d(z, j) + lj[j] * z) + a[j, k] * red_jk(z, j, k) for j in range(n) for k in range(n))
        + A * z
        for z in Z
    )
    I2 = tuple(
        -2 * ls * Vs[i] - 2 * sum(a[j, k] * lj[j] * Vj[k][i] for j in range(n) for k in range(n)) + Psi * Z[i]
        for i in range(2)
    )
    names = (
        ["Psi", "A_w", "M", *[f"V{k + 1}" for k in range(n)]]
        + [f"c{j + 1}{k + 1}" for j in range(n) for k in range(n)]
        + ["B", "B_printed", "lhs", "rhs", "rhs_printed", "I1sq", "I2sq", "abs_vs2", "avv", "abs_v2"]
    )
    exprs = (
        [Psi, A, M, *V]
        + [c[j][k] for j in range(n) for k in range(n)]
        + [B, B_printed, lhs, rhs, rhs_printed, _abs2(I1), _abs2(I2), _abs2(Vs), avv, _abs2(V0)]
    )
    return names, exprs, F, vs


@lru_cache(maxsize=8)
def _compiled(dim, a_key):
    a = sp.Matrix(dim, dim, [_expr(e) for e in a_key])
    names, exprs, F, vs = _build(dim, a)
    return names, JetFormula(exprs, F, vs)


def _formula(dim, coeffs):
    a = coefficient_matrix(dim, coeffs)
    return _compiled(dim, tuple(str(e) for e in a))


@dataclass(frozen=True)
class PointwiseTerms:
    """All terms at one space-time point, divided by ``theta^2``.

    Scalars ``Psi``, ``A_w``, ``B`` and the ``ell`` table do not carry the
    weight; ``M``, ``V`` and ``c_jk`` quadratic forms do (``log_theta``
    records ``ell``).  ``full`` returns undivided values when representable.
    """

    point: tuple
    log_theta: float
    Psi: float
    A_w: float
    M: float
    V: tuple
    c_jk: np.ndarray
    B: float
    B_printed: float
    ell: dict
    Psi_expanded: float
    A_w_expanded: float
    lhs: float
    rhs: float

    @property
    def dual_error(self):
        e1 = abs(self.Psi - self.Psi_expanded) / max(abs(self.Psi), 1e-300)
        e2 = abs(self.A_w - self.A_w_expanded) / max(abs(self.A_w), 1e-300)
        return max(e1, e2)

    def full(self, name):
        if self.log_theta > FULL_SCALE_LIMIT:
            raise OverflowError(
                f"theta^2 = exp({2 * self.log_theta:.4g}) overflows; use the reduced value (theta^2 divided out)"
            )
        return getattr(self, name) * np.exp(2 * self.log_theta)


def _expanded_psi_A(weight, points, a_vals, a_div):
    """Chain-rule expansions of ``Psi`` and ``A_w`` through ``psi`` (no O(mu) terms dropped)."""
    lam, mu = weight.lambda_c, weight.mu
    n = weight.dim
    pj = weight.psi_jets(points, 2)
    e = [tuple(int(i == k) for i in range(1 + n)) for k in range(1 + n)]
    phi = np.exp(mu * pj[(0,) * (1 + n)])
    ps = pj[e[0]]
    pss = pj[tuple(2 * v for v in e[0])]
    px = [pj[e[1 + j]] for j in range(n)]
    G = ps**2 + sum(a_vals[j][k] * px[j] * px[k] for j in range(n) for k in range(n))
    lap = pss + sum(
        a_vals[j][k] * pj[tuple(p + q for p, q in zip(e[1 + j], e[1 + k]))] + a_div[j][k] * px[j]
        for j in range(n)
        for k in range(n)
    )
    Psi = -2 * lam * mu**2 * phi * G - 2 * lam * mu * phi * lap
    A = (lam**2 * mu**2 * phi**2 + lam * mu**2 * phi) * G + lam * mu * phi * lap
    return Psi, A, phi, G, px


def _a_values(dim, coeffs, points):
    a = coefficient_matrix(dim, coeffs)
    vs = coords(dim)
    m = points.shape[0]
    ev = lambda e: np.broadcast_to(np.asarray(sp.lambdify(vs, e, "numpy")(*points.T), float), (m,))  # noqa: E731
    vals = [[ev(a[j, k]) for k in range(dim)] for j in range(dim)]
    div = [[ev(sp.diff(a[j, k], vs[1 + k])) for k in range(dim)] for j in range(dim)]
    return vals, div


def _evaluate(weight, z, points, coeffs):
    if z.dim != weight.dim:
        raise ValueError("test function and weight dimensions differ")
    names, f = _formula(weight.dim, coeffs)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lj = weight.ell_jets(pts, f.max_order)
    zj = z.jets(pts, f.max_order)
    jets = {"L": lj, "Zr": {k: v[0] for k, v in zj.items()}, "Zi": {k: v[1] for k, v in zj.items()}}
    vals = dict(zip(names, f.evaluate(jets, pts)))
    return vals, lj, pts


def carleman_terms(weight, point, z, coeffs=None):
    """Every term of the pointwise estimate at one ``(s, x)`` point."""
    pt = np.atleast_2d(np.asarray(point, dtype=float))
    if pt.shape != (1, 1 + weight.dim):
        raise ValueError(f"point must have {1 + weight.dim} coordinates")
    if abs(pt[0, 0]) >= 2:
        raise ValueError("point must lie inside (-2, 2) x Omega")
    vals, lj, _ = _evaluate(weight, z, pt, coeffs)
    a_vals, a_div = _a_values(weight.dim, coeffs, pt)
    psi_e, a_e, _, _, _ = _expanded_psi_A(weight, pt, a_vals, a_div)
    n = weight.dim
    table = weight.derivative_table(pt)
    terms = PointwiseTerms(
        point=tuple(pt[0]),
        log_theta=float(lj[(0,) * (1 + n)][0]),
        Psi=float(vals["Psi"][0]),
        A_w=float(vals["A_w"][0]),
        M=float(vals["M"][0]),
        V=tuple(float(vals[f"V{k + 1}"][0]) for k in range(n)),
        c_jk=np.array([[vals[f"c{j + 1}{k + 1}"][0] for k in range(n)] for j in range(n)]),
        B=float(vals["B"][0]),
        B_printed=float(vals["B_printed"][0]),
        ell={k: float(v[0]) for k, v in table.items()},
        Psi_expanded=float(psi_e[0]),
        A_w_expanded=float(a_e[0]),
        lhs=float(vals["lhs"][0]),
        rhs=float(vals["rhs"][0]),
    )
    if terms.dual_error > DUAL_TOL:
        raise InconsistencyError(f"expanded and definitional Psi/A_w disagree by {terms.dual_error:.3e}")
    return terms


@dataclass(frozen=True)
class PointwiseReport:
    """Minima over the grid, all scaled by ``theta^-2``.

    ``min_gap`` uses the complete zeroth-order coefficient; ``min_gap_printed``
    the coefficient without ``Psi_ss``.  ``identity_defect`` is the largest
    ``|gap - |I1|^2 - |I2|^2|`` relative to ``scale``.
    """

    min_gap: float
    min_gap_printed: float
    min_gap_c3: float
    min_gap_pb8: float
    scale: float
    identity_defect: float
    worst_point: tuple
    n_points: int
    psi_dual_error: float
    points: np.ndarray | None = None
    gap_field: np.ndarray | None = None

    @property
    def relative_gap(self):
        return self.min_gap / self.scale if self.scale > 0 else 0.0


def check_pointwise_estimate(
    z, weight, grid, coeffs=None, tol=1e-6, raise_on_violation=True, beta=None, return_field=False
):
    """Evaluate both sides of the pointwise estimate on every grid point.

    The left side ``theta^2 |z_ss + sum (a z_j)_k|^2 + M_s + div V`` and the
    right side are compared after dividing by ``theta^2``.  The simplified
    leading-order lower bound and its coercive form (``beta h^2`` version)
    are evaluated as well; their minima are reported, not asserted.
    With ``return_field`` the report also carries the points and the
    per-point gap divided by ``scale``.

    Raises
    ------
    EstimateViolationError
        When ``min(lhs - rhs) < -tol * max|lhs|``.
    """
    pts = grid.points
    vals, lj, pts = _evaluate(weight, z, pts, coeffs)
    lhs, rhs, rhs_p = vals["lhs"], vals["rhs"], vals["rhs_printed"]
    gap = lhs - rhs
    scale = float(np.abs(lhs).max())
    defect = np.abs(gap - vals["I1sq"] - vals["I2sq"])
    a_vals, a_div = _a_values(weight.dim, coeffs, pts)
    psi_e, a_e, phi, G, px = _expanded_psi_A(weight, pts, a_vals, a_div)
    dual = max(
        float(np.max(np.abs(vals["Psi"] - psi_e) / np.maximum(np.abs(vals["Psi"]), 1e-300))),
        float(np.max(np.abs(vals["A_w"] - a_e) / np.maximum(np.abs(vals["A_w"]), 1e-300))),
    )
    n = weight.dim
    lam, mu = weight.lambda_c, weight.mu
    apsi = sum(a_vals[j][k] * px[j] * px[k] for j in range(n) for k in range(n))
    energy = vals["abs_vs2"] + vals["avv"]
    c3 = 2 * lam * mu**2 * phi * apsi * energy + 2 * lam**3 * mu**4 * phi**3 * apsi**2 * vals["abs_v2"]
    if beta is None:
        beta = float(np.min([np.linalg.eigvalsh(np.array([[a_vals[j][k][i] for k in range(n)] for j in range(n)])).min()
                             for i in range(len(pts))]))
    h = weight.h_min
    pb8 = lam * mu**2 * beta * h**2 * phi * energy + lam**3 * mu**4 * beta**2 * h**4 * phi**3 * vals["abs_v2"]
    i = int(np.argmin(gap))
    rep = PointwiseReport(
        min_gap=float(gap[i]),
        min_gap_printed=float(np.min(lhs - rhs_p)),
        min_gap_c3=float(np.min(lhs - c3)),
        min_gap_pb8=float(np.min(lhs - pb8)),
        scale=scale,
        identity_defect=float(defect.max() / scale) if scale > 0 else float(defect.max()),
        worst_point=tuple(pts[i]),
        n_points=len(pts),
        psi_dual_error=dual,
        points=pts if return_field else None,
        gap_field=gap / scale if return_field and scale > 0 else None,
    )
    if raise_on_violation and rep.min_gap < -tol * scale:
        raise EstimateViolationError(
            f"pointwise gap {rep.min_gap:.3e} below -{tol}*scale at {rep.worst_point}", point=rep.worst_point, gap=rep.min_gap
        )
    return rep


def coercivity_threshold(family, psi_hat, grid, mus=(2.0, 4.0, 8.0), lambdas=(3.0, 10.0, 30.0), coeffs=None, tol=1e-6):
    """Smallest sampled ``(mu, lambda_c)`` with a nonnegative gap on every family member.

    Pairs are scanned in lexicographic order of ``(mu, lambda_c)``.  Returns
    the pair (or ``None``) and the per-pair worst relative gaps.
    """
    from .weight import CarlemanWeight

    table = {}
    for mu in sorted(mus):
        for lam in sorted(lambdas):
            w = CarlemanWeight(psi_hat, mu, lam)
            table[(mu, lam)] = min(
                check_pointwise_estimate(z, w, grid, coeffs, tol, raise_on_violation=False).relative_gap for z in family
            )
    ok = [k for k, v in table.items() if v >= -tol]
    return (ok[0] if ok else None), table


def check_psi_dual(weight, points, coeffs=None):
    """Relative disagreement of definitional and chain-rule ``Psi``, ``A_w``."""
    pts = np.atleast_2d(points)
    n = weight.dim
    lj = weight.ell_jets(pts, 2)
    e = [tuple(int(i == k) for i in range(1 + n)) for k in range(1 + n)]
    a = coefficient_matrix(n, coeffs)
    a_vals, a_div = _a_values(n, coeffs, pts)
    lss = lj[tuple(2 * v for v in e[0])]
    ls = lj[e[0]]
    lx = [lj[e[1 + j]] for j in range(n)]
    div_al = sum(
        a_div[j][k] * lx[j] + a_vals[j][k] * lj[tuple(p + q for p, q in zip(e[1 + j], e[1 + k]))]
        for j in range(n)
        for k in range(n)
    )
    psi_def = -2 * lss - 2 * div_al
    A_def = ls**2 + sum(a_vals[j][k] * lx[j] * lx[k] for j in range(n) for k in range(n)) - lss - div_al - psi_def
    psi_e, a_e, *_ = _expanded_psi_A(weight, pts, a_vals, a_div)
    del a
    return max(
        float(np.max(np.abs(psi_def - psi_e) / np.abs(psi_def))),
        float(np.max(np.abs(A_def - a_e) / np.abs(A_def))),
    )


def check_derivative_table(weight, points, step=1e-3):
    """Compare the chain-rule table with centered differences of ``ell``.

    Two step sizes are combined by Richardson extrapolation.  Returns
    ``{multi_index: (err_h, err_h2, err_richardson)}`` relative to ``|ell|``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = 1 + weight.dim
    f = sp.lambdify(weight.variables, weight.ell, "numpy")
    ell = lambda p: np.asarray(f(*p.T), dtype=float)  # noqa: E731
    table = weight.derivative_table(pts)
    scale = np.abs(ell(pts))
    out = {}

    def fd(idx, h):
        ks = [k for k in range(n) for _ in range(idx[k])]
        E = np.eye(n) * h
        if len(ks) == 1:
            k = ks[0]
            return (ell(pts + E[k]) - ell(pts - E[k])) / (2 * h)
        j, k = ks
        if j == k:
            return (ell(pts + E[k]) - 2 * ell(pts) + ell(pts - E[k])) / h**2
        return (
            ell(pts + E[j] + E[k]) - ell(pts + E[j] - E[k]) - ell(pts - E[j] + E[k]) + ell(pts - E[j] - E[k])
        ) / (4 * h * h)

    for idx, exact in table.items():
        d1, d2 = fd(idx, step), fd(idx, step / 2)
        rich = (4 * d2 - d1) / 3
        out[idx] = tuple(float(np.max(np.abs(d - exact) / scale)) for d in (d1, d2, rich))
    return out
