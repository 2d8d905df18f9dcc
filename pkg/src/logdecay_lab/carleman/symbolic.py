"""Symbolic building blocks: coordinates, coefficient matrices, test
functions, vector fields and jet substitution.

Formulas are written once for generic functions of ``(s, x)`` and then
compiled over *jet symbols* (values of the generic functions and their
partial derivatives).  A concrete test function or weight only has to
supply numerical jets, so one compiled formula serves every member of a
family.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

S = sp.Symbol("s", real=True)
X_SYMBOLS = (sp.Symbol("x1", real=True), sp.Symbol("x2", real=True))


def coords(dim):
    return (S,) + X_SYMBOLS[:dim]


def multi_indices(nvars, max_order):
    """All derivative multi-indices of total order ``<= max_order``."""
    out = []
    for order in range(max_order + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), order):
            idx = [0] * nvars
            for c in combo:
                idx[c] += 1
            out.append(tuple(idx))
    return out


def derivative(expr, variables, idx):
    args = []
    for v, k in zip(variables, idx):
        if k:
            args.extend([v, k])
    return sp.diff(expr, *args) if args else expr


def coefficient_matrix(dim, coeffs=None):
    """Symmetric sympy matrix ``a^{jk}(x)``.

    ``coeffs`` is ``None`` (identity), a constant array-like, or a sympy
    matrix / nested list of expressions in ``x1, x2``.
    """
    if coeffs is None:
        return sp.eye(dim)
    if isinstance(coeffs, sp.MatrixBase):
        m = coeffs
    else:
        rows = np.asarray(coeffs, dtype=object).reshape(dim, dim).tolist()
        m = sp.Matrix([[_coef(e) for e in row] for row in rows])
    if m.shape != (dim, dim):
        raise ValueError(f"coefficient matrix must be {dim}x{dim}")
    if sp.simplify(m - m.T) != sp.zeros(dim, dim):
        raise ValueError("coefficient matrix is not symmetric")
    return m


def _coef(e):
    if isinstance(e, (int, float, np.integer, np.floating)):
        return sp.nsimplify(float(e), rational=True)
    return _expr(e)


def _expr(e):
    return sp.sympify(e, locals={"s": S, "x1": X_SYMBOLS[0], "x2": X_SYMBOLS[1]})


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Closed-form complex function ``z = zr + i zi`` of ``(s, x)``.

    Parameters
    ----------
    re, im : sympy expression or str
        Real and imaginary parts in the symbols ``s, x1[, x2]``.
    dim : int
    name : str
    """

    __test__ = False  # not a pytest class despite the name

    re: sp.Expr
    im: sp.Expr
    dim: int
    name: str = "z"

    @classmethod
    def from_complex(cls, expr, dim, name="z"):
        e = sp.expand_complex(_expr(expr))
        return cls(sp.simplify(sp.re(e)), sp.simplify(sp.im(e)), dim, name)

    @classmethod
    def from_parts(cls, re, im, dim, name="z"):
        return cls(_expr(re), _expr(im), dim, name)

    @property
    def expr(self):
        return self.re + sp.I * self.im

    @property
    def variables(self):
        return coords(self.dim)

    def jets(self, points, max_order):
        """Numerical partial derivatives at ``points`` (shape ``(m, 1 + dim)``).

        Returns a dict ``{multi_index: (re_values, im_values)}``.
        """
        return _jets((self.re, self.im), self.variables, points, max_order)

    def evaluate(self, points):
        f = sp.lambdify(self.variables, [self.re, self.im], "numpy")
        pts = np.atleast_2d(points)
        r, i = (np.broadcast_to(np.asarray(v, dtype=float), (pts.shape[0],)) for v in f(*pts.T))
        return r + 1j * i

    def fd_self_check(self, points, step=1e-3):
        """Max error of centered differences against exact first and second
        derivatives at ``step`` and ``step / 2``; the ratio is ~4 for O(h^2)."""
        exact = self.jets(points, 2)
        errs = []
        for h in (step, step / 2):
            e = 0.0
            for k in range(1 + self.dim):
                dx = np.zeros(1 + self.dim)
                dx[k] = h
                fp, f0, fm = self.evaluate(points + dx), self.evaluate(points), self.evaluate(points - dx)
                one = tuple(int(i == k) for i in range(1 + self.dim))
                two = tuple(2 * int(i == k) for i in range(1 + self.dim))
                d1 = exact[one][0] + 1j * exact[one][1]
                d2 = exact[two][0] + 1j * exact[two][1]
                e = max(e, np.abs((fp - fm) / (2 * h) - d1).max(), np.abs((fp - 2 * f0 + fm) / h**2 - d2).max())
            errs.append(e)
        return errs[0], errs[1]


@dataclass(frozen=True, eq=False)
class VectorField:
    """Real vector field ``g(s, x)`` with polynomial components."""

    components: tuple
    dim: int

    @classmethod
    def from_exprs(cls, comps):
        comps = tuple(_expr(c) for c in comps)
        return cls(comps, len(comps))

    def __post_init__(self):
        if len(self.components) != self.dim:
            raise ValueError("vector field needs one component per space dimension")
        for c in self.components:
            if not sp.sympify(c).is_polynomial(*coords(self.dim)):
                raise ValueError("vector field components must be polynomial")


def _jets(exprs, variables, points, max_order):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = {}
    for idx in multi_indices(len(variables), max_order):
        ders = [derivative(e, variables, idx) for e in exprs]
        f = sp.lambdify(variables, ders, "numpy")
        vals = f(*pts.T)
        out[idx] = tuple(np.broadcast_to(np.asarray(v, dtype=float), (pts.shape[0],)).copy() for v in vals)
    return out


class JetFormula:
    """A formula in generic functions compiled over jet symbols.

    ``funcs`` maps names to sympy ``Function`` objects applied to the
    coordinates; coefficients are passed as a concrete matrix.  Every
    ``Derivative`` of a generic function in ``exprs`` is replaced by a
    symbol; ``evaluate`` takes the numerical jets of each generic function.
    """

    def __init__(self, exprs, funcs, variables):
        self.variables = tuple(variables)
        self.names = list(funcs)
        jet_syms = {}
        subs = {}
        atoms = set()
        for e in exprs:
            atoms |= e.atoms(sp.Derivative)
        for d in sorted(atoms, key=lambda d: -d.derivative_count):
            name = d.expr.func.__name__
            idx = tuple(d.variables.count(v) for v in self.variables)
            sym = sp.Symbol(f"{name}_{''.join(map(str, idx))}", real=True)
            jet_syms[(name, idx)] = sym
            subs[d] = sym
        for name, f in funcs.items():
            sym = sp.Symbol(f"{name}_{'0' * len(self.variables)}", real=True)
            jet_syms[(name, (0,) * len(self.variables))] = sym
        replaced = [e.xreplace(subs) for e in exprs]
        base = {f: jet_syms[(name, (0,) * len(self.variables))] for name, f in funcs.items()}
        replaced = [e.xreplace(base) for e in replaced]
        self.keys = sorted(jet_syms, key=str)
        self.max_order = max((sum(idx) for _, idx in self.keys), default=0)
        args = [jet_syms[k] for k in self.keys] + list(self.variables)
        self._f = sp.lambdify(args, replaced, "numpy", cse=True)
        self.n_out = len(exprs)

    def evaluate(self, jets, points):
        """``jets`` maps a function name to ``{multi_index: values}``."""
        pts = np.atleast_2d(points)
        args = [jets[name][idx] for name, idx in self.keys] + list(pts.T)
        out = self._f(*args)
        m = pts.shape[0]
        return [np.broadcast_to(np.asarray(o, dtype=float), (m,)) for o in out]


@lru_cache(maxsize=None)
def generic_functions(dim, names):
    vs = coords(dim)
    return {n: sp.Function(n)(*vs) for n in names}
