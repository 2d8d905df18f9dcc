"""Carleman weight construction: linear base weight, time profile, cutoff."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import sympy as sp

from ..domain import CoefficientField, GridDomain
from ..errors import ProfileError, WeightInvalidError
from .symbolic import S, X_SYMBOLS, _jets, coords, multi_indices

__all__ = [
    "SpaceTimeGrid",
    "LinearWeight",
    "WeightProfile",
    "CarlemanWeight",
    "build_weight",
    "weight_profile",
    "cutoff",
]

CONORMAL_TOL = 1e-12
LN2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class SpaceTimeGrid:
    """Tensor grid of ``s`` nodes on the open interval (-2, 2) times a spatial grid.

    Region masks are over the flattened ``(s, node)`` index with the node
    index running fastest.
    """

    s_nodes: np.ndarray
    x_grid: GridDomain

    @classmethod
    def uniform(cls, ns, x_grid):
        if ns < 1:
            raise ValueError("ns must be >= 1")
        return cls(np.linspace(-2.0, 2.0, ns + 2)[1:-1], x_grid)

    @property
    def shape(self):
        return (len(self.s_nodes), self.x_grid.n_nodes)

    @cached_property
    def points(self):
        """Array ``(ns * N, 1 + dim)`` of space-time points."""
        ns, n = self.shape
        s = np.repeat(self.s_nodes, n)
        x = np.tile(self.x_grid.nodes, (ns, 1))
        return np.column_stack([s, x])

    def _mask(self, s_mask, node_mask):
        return np.outer(s_mask, node_mask).ravel()

    @property
    def X(self):
        return np.ones(self.shape[0] * self.shape[1], dtype=bool)

    @property
    def Y(self):
        return self._mask(np.abs(self.s_nodes) < 1.0, np.ones(self.shape[1], bool))

    @property
    def Sigma(self):
        m = np.zeros(self.shape[1], bool)
        m[self.x_grid.boundary_nodes] = True
        return self._mask(np.ones(self.shape[0], bool), m)

    @property
    def Z(self):
        m = np.zeros(self.shape[1], bool)
        m[self.x_grid.damped_nodes] = True
        return self._mask(np.ones(self.shape[0], bool), m)


@dataclass(frozen=True, eq=False)
class LinearWeight:
    """Base weight ``psi_hat(x) = offset + d.x - min(d.x)`` with nodal values."""

    direction: np.ndarray
    offset: float
    shift: float
    values: np.ndarray
    domain: GridDomain
    sup: float

    @property
    def dim(self):
        return self.domain.dim

    @cached_property
    def expr(self):
        xs = X_SYMBOLS[: self.dim]
        d = [sp.nsimplify(float(c), rational=True) for c in self.direction]
        return sp.nsimplify(self.offset - self.shift, rational=True) + sum(c * x for c, x in zip(d, xs))

    @property
    def gradient(self):
        return np.asarray(self.direction, dtype=float)

    def __call__(self, x):
        x = np.atleast_2d(x)
        return self.offset - self.shift + x @ self.gradient


def build_weight(domain, direction, offset=0.1, coeffs=None):
    """Linear base weight on a tensor domain with certified conditions.

    Checks nodewise that ``psi_hat > 0``, ``|grad psi_hat| > 0`` and that the
    co-normal derivative ``sum a^{jk} psi_hat_j nu_k`` is ``<= 0`` on every
    reflecting boundary node.

    Raises
    ------
    WeightInvalidError
        Naming the first failing node and condition.
    """
    d = np.atleast_1d(np.asarray(direction, dtype=float))
    if d.shape != (domain.dim,):
        raise WeightInvalidError(f"direction must have {domain.dim} components", condition="shape")
    nrm = np.linalg.norm(d)
    if not nrm > 0:
        raise WeightInvalidError("direction must be nonzero", node=0, condition="gradient")
    d = d / nrm
    if coeffs is None:
        coeffs = CoefficientField.identity(domain)
    proj = domain.nodes @ d
    shift = float(proj.min())
    vals = offset + proj - shift
    if not offset > 0 or np.any(vals <= 0):
        i = int(np.argmin(vals))
        raise WeightInvalidError(f"psi_hat <= 0 at node {i}", node=i, condition="positivity")
    # gradient is constant, hence nonzero at every node
    a = np.asarray(coeffs.values)
    for node, nu, cls in zip(domain.boundary_nodes, domain.normals, domain.boundary_class):
        if cls.value == "reflecting":
            cn = float(nu @ (a[node] @ d))
            if cn > CONORMAL_TOL:
                raise WeightInvalidError(
                    f"co-normal derivative {cn:+.3g} > 0 at reflecting node {int(node)}",
                    node=int(node),
                    condition="conormal",
                )
    lo = np.zeros(domain.dim)
    hi = np.asarray(domain.extents, dtype=float)
    corners = np.array(np.meshgrid(*[[l, h] for l, h in zip(lo, hi)])).reshape(domain.dim, -1).T
    sup = float(np.max(offset + corners @ d - shift))
    vals.setflags(write=False)
    return LinearWeight(d, float(offset), shift, vals, domain, sup)


@dataclass(frozen=True)
class WeightProfile:
    """Time profile constants and their certification.

    ``b0`` is the value used downstream (depends on ``reading``);
    ``b0_formula`` is always ``sqrt(b^2 - 1 - ln(1 + e^mu) / mu)``.
    """

    mu: float
    b: float
    b0: float
    b0_formula: float
    reading: str
    psi_min: float
    ordered: bool
    inner_bound: bool
    outer_bound: bool
    phi_inner_min: float
    phi_outer_max: float

    @property
    def certified(self):
        return self.ordered and self.inner_bound and self.outer_bound


def weight_profile(mu, psi_hat, reading="sup", ns=401, raise_on_failure=True):
    """Constants ``b, b0`` of the time profile ``psi = -psi_hat/|psi_hat| + b^2 - s^2``.

    ``b = sqrt(2 + ln(2 + e^mu) / mu)``.  With ``reading="sup"``
    ``b0 = sqrt(b^2 - 1 - ln(1 + e^mu) / mu)``; with ``reading="min"`` the
    normalized minimum ``m`` of ``psi_hat`` replaces the 1, i.e.
    ``b0 = sqrt(b^2 - m - ln(1 + e^mu) / mu)``, which is the largest
    admissible choice for the outer inequality.

    The ordering ``1 < b0 < b <= 2`` and the bounds ``phi >= 2 + e^mu`` for
    ``|s| <= 1``, ``phi <= 1 + e^mu`` for ``b0 <= |s| <= b`` are checked on
    every node of ``psi_hat.domain`` and ``ns`` values of ``s`` per range.

    Raises
    ------
    ValueError
        If ``mu <= ln 2``.
    ProfileError
        If a check fails and ``raise_on_failure`` is set.
    """
    mu = float(mu)
    if not mu > LN2:
        raise ValueError(f"mu must exceed ln 2, got {mu}")
    # ln(2 + e^mu) = mu + log1p(2 e^-mu) avoids overflow for large mu
    l2 = mu + np.log1p(2.0 * np.exp(-mu))
    l1 = mu + np.log1p(np.exp(-mu))
    b2 = 2.0 + l2 / mu
    b = np.sqrt(b2)
    phat = np.asarray(psi_hat.values, dtype=float) / psi_hat.sup
    m = float(phat.min())
    b0_formula = float(np.sqrt(b2 - 1.0 - l1 / mu))
    if reading == "sup":
        b0 = b0_formula
    elif reading == "min":
        b0 = float(np.sqrt(b2 - m - l1 / mu))
    else:
        raise ValueError(f"unknown reading {reading!r}")
    ordered = bool(1.0 < b0 < b <= 2.0)
    # compare exponents: mu psi against ln(2 + e^mu), ln(1 + e^mu)
    s_in = np.linspace(-1.0, 1.0, ns)
    s_out = np.concatenate([np.linspace(-b, -b0, ns), np.linspace(b0, b, ns)]) if b0 < b else np.array([b])
    psi_in = -phat[None, :] + b2 - s_in[:, None] ** 2
    psi_out = -phat[None, :] + b2 - s_out[:, None] ** 2
    tol = 1e-12 * max(1.0, mu)
    inner = float(mu * psi_in.min() - l2)
    outer = float(mu * psi_out.max() - l1)
    prof = WeightProfile(
        mu, float(b), float(b0), b0_formula, reading, m, ordered, inner >= -tol, outer <= tol,
        float(np.exp(mu * psi_in.min())), float(np.exp(mu * psi_out.max())),
    )
    if raise_on_failure and not prof.certified:
        failed = [n for n, ok in (("1<b0<b<=2", ordered), ("inner bound", prof.inner_bound), ("outer bound", prof.outer_bound)) if not ok]
        raise ProfileError(
            f"profile check failed for mu={mu}, reading={reading!r}: {', '.join(failed)} "
            f"(b={b:.6f}, b0={b0:.6f}, max phi on outer range {prof.phi_outer_max:.6g} vs 1+e^mu={1 + np.exp(mu):.6g})"
        )
    return prof


def _bump(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _cutoff_symbolic():
    r, b0, b = sp.symbols("r b0 b", positive=True)
    f1, f2 = sp.exp(-1 / (b - r)), sp.exp(-1 / (r - b0))
    rho = f1 / (f1 + f2)
    return r, b0, b, [sp.lambdify((r, b0, b), sp.diff(rho, r, k), "numpy") for k in range(3)]


_CUT = None


def cutoff(s, b0, b, derivative=0):
    """Smooth cutoff equal to 1 on ``|s| <= b0`` and 0 on ``|s| >= b``.

    Built as ``f(b - |s|) / (f(b - |s|) + f(|s| - b0))`` with
    ``f(t) = exp(-1/t)`` for ``t > 0``.  ``derivative`` in {0, 1, 2}
    returns the exact derivative in ``s``.
    """
    global _CUT
    if not 1.0 < b0 < b:
        raise ValueError("cutoff needs 1 < b0 < b")
    s = np.asarray(s, dtype=float)
    r = np.abs(s)
    if derivative == 0:
        f1, f2 = _bump(b - r), _bump(r - b0)
        return f1 / (f1 + f2)
    if derivative not in (1, 2):
        raise ValueError("derivative must be 0, 1 or 2")
    if _CUT is None:
        _CUT = _cutoff_symbolic()
    fk = _CUT[3][derivative]
    out = np.zeros_like(r)
    mid = (r > b0) & (r < b)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        vals = fk(r[mid], b0, b)
    vals = np.nan_to_num(vals, nan=0.0, posinf=0.0, neginf=0.0)
    # chain rule for |s|: odd derivatives pick up sign(s)
    out[mid] = vals * (np.sign(s[mid]) if derivative == 1 else 1.0)
    return out if out.ndim else float(out)


class CarlemanWeight:
    """``psi = -psi_hat/|psi_hat| + b^2 - s^2``, ``phi = e^{mu psi}``, ``ell = lambda_c phi``.

    Parameters
    ----------
    psi_hat : LinearWeight
    mu : float
        Must exceed ln 2.
    lambda_c : float
        Carleman parameter, > 1.
    reading : {"min", "sup"}
        Passed to :func:`weight_profile`; only ``b0`` depends on it.
    """

    def __init__(self, psi_hat, mu, lambda_c, reading="min"):
        if not lambda_c > 1:
            raise ValueError("lambda_c must exceed 1")
        self.psi_hat = psi_hat
        self.mu = float(mu)
        self.lambda_c = float(lambda_c)
        self.profile = weight_profile(mu, psi_hat, reading=reading, raise_on_failure=False)
        self.b, self.b0 = self.profile.b, self.profile.b0
        self.dim = psi_hat.dim
        self.variables = coords(self.dim)
        b2 = sp.Float(self.b**2, 30)
        self.psi = -psi_hat.expr / sp.nsimplify(psi_hat.sup, rational=True) + b2 - S**2
        self.phi = sp.exp(sp.Float(self.mu, 30) * self.psi)
        self.ell = sp.Float(self.lambda_c, 30) * self.phi

    @property
    def h_min(self):
        return float(np.linalg.norm(self.psi_hat.gradient) / self.psi_hat.sup)

    @property
    def domain(self):
        return self.psi_hat.domain

    def ell_jets(self, points, max_order=4):
        """Exact partial derivatives of ``ell`` up to ``max_order``."""
        return {k: v[0] for k, v in _jets((self.ell,), self.variables, points, max_order).items()}

    def psi_jets(self, points, max_order=2):
        return {k: v[0] for k, v in _jets((self.psi,), self.variables, points, max_order).items()}

    def phi_values(self, points):
        return np.exp(self.mu * self.psi_jets(points, 0)[(0,) * (1 + self.dim)])

    def derivative_table(self, points):
        """``ell_s, ell_j, ell_ss, ell_jk, ell_js`` from the chain-rule table.

        Uses ``psi_sj = 0``.  Returns a dict keyed by multi-index.
        """
        lam, mu = self.lambda_c, self.mu
        pj = self.psi_jets(points, 2)
        n = 1 + self.dim
        e = [tuple(int(i == k) for i in range(n)) for k in range(n)]
        phi = np.exp(mu * pj[(0,) * n])
        out = {}
        for k in range(n):
            out[e[k]] = lam * mu * phi * pj[e[k]]
        for j in range(n):
            for k in range(j, n):
                idx = tuple(a + b for a, b in zip(e[j], e[k]))
                if j == 0 and k > 0:
                    out[idx] = lam * mu**2 * phi * pj[e[0]] * pj[e[k]]
                else:
                    out[idx] = lam * mu**2 * phi * pj[e[j]] * pj[e[k]] + lam * mu * phi * pj[idx]
        return out
