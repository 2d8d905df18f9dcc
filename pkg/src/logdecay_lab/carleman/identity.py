"""Divergence identity for the multiplier ``g . grad w``."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from .symbolic import JetFormula, _expr, coefficient_matrix, coords, generic_functions

__all__ = ["IdentityReport", "check_multiplier_identity"]


def _mul(p, q):
    return (p[0] * q[0] - p[1] * q[1], p[0] * q[1] + p[1] * q[0])


def _conj(p):
    return (p[0], -p[1])


def _add(*ps):
    return (sum(p[0] for p in ps), sum(p[1] for p in ps))


def _scale(c, p):
    return (c * p[0], c * p[1])


def _sym(p, q):
    """``p conj(q) + conj(p) q`` as (re, im)."""
    return (2 * (p[0] * q[0] + p[1] * q[1]), 0)


def _build(dim, a, g, printed):
    vs = coords(dim)
    s, xs = vs[0], vs[1:]
    n = dim
    F = generic_functions(dim, ("Wr", "Wi"))
    w = (F["Wr"], F["Wi"])
    d = lambda f, i: sp.diff(f, s) if i == "s" else sp.diff(f, xs[i])  # noqa: E731
    dw = lambda i: (d(w[0], i), d(w[1], i))  # noqa: E731
    ws = dw("s")
    wj = [dw(j) for j in range(n)]
    g_grad_w = _add(*[_scale(g[l], wj[l]) for l in range(n)])
    gs_grad_w = _add(*[_scale(d(g[l], "s"), wj[l]) for l in range(n)])
    Q = ws[0] ** 2 + ws[1] ** 2 + sum(a[j, l] * (wj[j][0] * wj[l][0] + wj[j][1] * wj[l][1]) for j in range(n) for l in range(n))
    lhs = 0
    for k in range(n):
        aw = _add(*[_scale(a[j, k], wj[j]) for j in range(n)])
        flux = _sym(aw, g_grad_w)[0] - g[k] * Q
        lhs -= d(flux, k)
    Pw = tuple(d(d(w[i], "s"), "s") + sum(d(a[j, k] * d(w[i], j), k) for j in range(n) for k in range(n)) for i in range(2))
    divg = sum(d(g[l], l) for l in range(n))
    rhs = _add(
        _scale(-1, _sym(Pw, g_grad_w)),
        (d(_sym(ws, g_grad_w)[0], "s"), 0),
        _scale(divg, (ws[0] ** 2 + ws[1] ** 2, 0)),
        (sum((wj[j][0] * wj[k][0] + wj[j][1] * wj[k][1]) * sum(d(a[j, k] * g[m], m) for m in range(n))
             for j in range(n) for k in range(n)), 0),
    )
    if printed:
        # as typeset: mixed g_s / g factors and a non-symmetrized gradient term
        t2 = _add(_mul(ws, _conj(gs_grad_w)), _mul(_conj(ws), g_grad_w))
        t3 = _add(*[_scale(2 * a[j, k] * d(g[l], k), _mul(wj[j], _conj(wj[l])))
                    for j in range(n) for k in range(n) for l in range(n)])
    else:
        t2 = _sym(ws, gs_grad_w)
        t3 = _add(*[_scale(a[j, k] * d(g[l], k), _sym(wj[j], wj[l])) for j in range(n) for k in range(n) for l in range(n)])
    rhs = _add(rhs, _scale(-1, t2), _scale(-1, t3))
    return [lhs, rhs[0], rhs[1]], F, vs


@lru_cache(maxsize=16)
def _compiled(dim, a_key, g_key, printed):
    a = sp.Matrix(dim, dim, [_expr(e) for e in a_key])
    g = [_expr(e) for e in g_key]
    exprs, F, vs = _build(dim, a, g, printed)
    return JetFormula(exprs, F, vs)


@dataclass(frozen=True)
class IdentityReport:
    max_residual: float
    max_abs_lhs: float
    worst_point: tuple

    @property
    def relative(self):
        return self.max_residual / max(self.max_abs_lhs, 1e-300)


def check_multiplier_identity(w, g, grid, coeffs=None, printed=False):
    """Evaluate both sides of the multiplier identity at every grid point.

    The left side is the divergence of the flux
    ``(g . grad conj w) a grad w + conj - g |(w_s, grad w)|_a^2``; the right side
    collects the multiplier terms.  Both are computed from exact derivatives
    of ``w`` and ``g``.  ``printed=True`` uses the uncorrected grouping of the
    ``g_s`` and ``grad g`` terms (diagnostic only; not an identity).

    Returns
    -------
    IdentityReport
        ``max_residual = max |lhs - rhs|`` (complex modulus).
    """
    if w.dim != g.dim:
        raise ValueError("test function and vector field dimensions differ")
    a = coefficient_matrix(w.dim, coeffs)
    f = _compiled(w.dim, tuple(str(e) for e in a), tuple(str(c) for c in g.components), bool(printed))
    pts = grid.points
    wj = w.jets(pts, f.max_order)
    jets = {"Wr": {k: v[0] for k, v in wj.items()}, "Wi": {k: v[1] for k, v in wj.items()}}
    lhs, rr, ri = f.evaluate(jets, pts)
    res = np.hypot(lhs - rr, ri)
    i = int(np.argmax(res))
    return IdentityReport(float(res[i]), float(np.abs(lhs).max()), tuple(pts[i]))
