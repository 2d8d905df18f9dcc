"""Eigenvalues of the discrete generator and the logarithmic band fit."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from ._qr import eigvals_real
from ._validation import as_complex_scalar, check_int, check_positive
from .errors import BandViolationError, ConvergenceError, DimensionError
from .operator import ResolventSolver

__all__ = ["SpectrumResult", "BandFit", "eigen_full", "eigen_window", "band_fit", "band_margin"]

RESIDUAL_TOL = 1e-8
DENSE_LIMIT = 4000


@dataclass
class SpectrumResult:
    """Computed eigenvalues with certified residuals.

    Attributes
    ----------
    eigenvalues : complex ndarray
    residuals : ndarray
        ``|A v - lambda v| / |v|`` for an eigenvector obtained by inverse
        iteration.
    method : str
        ``"dense-QR"`` or ``"shift-invert-Arnoldi"``.
    window : dict or None
        Search region (center, radius) of a windowed computation.
    converged : bool
        False when QR hit its iteration limit or Arnoldi broke down
        before ``k`` values were found.
    """

    eigenvalues: np.ndarray
    residuals: np.ndarray
    method: str
    window: dict | None = None
    converged: bool = True
    n_unconverged: int = 0
    notes: list = field(default_factory=list)

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def max_residual(self):
        return float(self.residuals.max()) if len(self.residuals) else 0.0


@dataclass(frozen=True)
class BandFit:
    C_band: float
    margin: float
    excluded: np.ndarray
    binding: complex
    retained: int

    @property
    def excluded_count(self):
        return len(self.excluded)


def _inverse_iteration(A, lam, rng, iters=3):
    """Eigenvector of sparse ``A`` for the approximate eigenvalue ``lam``.

    Returns the vector and the residual ``|A v - lam v| / |v|``.
    """
    n = A.shape[0]
    shifted = (A - lam * sp.identity(n, format="csc")).tocsc()
    try:
        lu = spla.splu(shifted)
    except RuntimeError:
        # exactly singular: perturb the shift at round-off level
        lu = spla.splu((shifted - (1e-14 * max(1.0, abs(lam))) * sp.identity(n, format="csc")).tocsc())
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    res = np.inf
    for _ in range(iters):
        w = lu.solve(v)
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0:
            break
        v = w / nw
        res = np.linalg.norm(A @ v - lam * v)
        if res <= 1e-3 * RESIDUAL_TOL:
            break
    return v, float(res)


def _certify(A, eigenvalues, rng):
    """Residuals for all eigenvalues; conjugate partners share one solve."""
    res = np.empty(len(eigenvalues))
    done = {}
    for i, lam in enumerate(eigenvalues):
        key = (round(lam.real, 12), round(abs(lam.imag), 12))
        if key in done and lam.imag != 0:
            res[i] = done[key]
            continue
        _, r = _inverse_iteration(A, lam, rng)
        res[i] = r
        done[key] = r
    return res


def _sort(ev):
    # by modulus, then imaginary part so conjugate pairs are adjacent (- first)
    return ev[np.lexsort((ev.imag, np.round(np.abs(ev), 10)))]


def eigen_full(gen, dense_limit=DENSE_LIMIT, seed=0, maxit=30):
    """All eigenvalues of ``A_h`` by in-repo Hessenberg QR.

    Each eigenvalue is certified by inverse iteration on the sparse
    generator; the residual ``|A v - lambda v| / |v|`` must not exceed 1e-8.

    Parameters
    ----------
    gen : WaveGenerator
    dense_limit : int
        Largest ``2N`` accepted.
    seed : int
        Seed for the inverse-iteration start vectors.
    maxit : int
        QR iterations per eigenvalue before the result is flagged partial.
    """
    n2 = 2 * gen.N
    if n2 > dense_limit:
        raise DimensionError(f"2N={n2} exceeds dense_limit={dense_limit}; use eigen_window")
    ev, nfail = eigvals_real(gen.A_h, maxit=maxit)
    ok = np.isfinite(ev)
    ev = _sort(ev[ok])
    rng = np.random.default_rng(seed)
    res = _certify(gen.A, ev, rng)
    notes = []
    bad = res > RESIDUAL_TOL
    if bad.any():
        notes.append(f"{int(bad.sum())} eigenvalues failed the residual certificate and were dropped")
        ev, res = ev[~bad], res[~bad]
    return SpectrumResult(ev, res, "dense-QR", None, converged=nfail == 0, n_unconverged=int(nfail), notes=notes)


def _arnoldi(op, v0, m, start=None):
    """Arnoldi with full reorthogonalization; returns (V, H, breakdown_step)."""
    n = v0.shape[0]
    V = np.zeros((n, m + 1), dtype=complex)
    H = np.zeros((m + 1, m), dtype=complex)
    V[:, 0] = v0 / np.linalg.norm(v0)
    for j in range(m):
        w = op(V[:, j])
        for _ in range(2):
            h = V[:, : j + 1].conj().T @ w
            w = w - V[:, : j + 1] @ h
            H[: j + 1, j] += h
        beta = np.linalg.norm(w)
        H[j + 1, j] = beta
        if beta <= 1e-12 * np.abs(H[: j + 2, j]).max():
            return V[:, : j + 1], H[: j + 1, : j + 1], j + 1
        V[:, j + 1] = w / beta
    return V, H, None


def eigen_window(gen, center, radius, k, ncv=None, max_restarts=20, seed=0):
    """The ``k`` eigenvalues nearest ``center`` by shift-invert Arnoldi.

    The inner solves use the factored reduced resolvent system (one LU per
    call).  Ritz pairs are certified against ``A_h`` directly; values with
    ``|lambda - center| > radius`` are still returned but noted.

    Raises
    ------
    NearEigenvalueError
        When ``center`` is numerically an eigenvalue.
    """
    center = as_complex_scalar(center, "center")
    check_positive(radius, "radius")
    k = check_int(k, "k", minimum=0)
    window = {"center": center, "radius": float(radius)}
    if k == 0:
        return SpectrumResult(np.empty(0, complex), np.empty(0), "shift-invert-Arnoldi", window)
    n2 = 2 * gen.N
    k = min(k, n2)
    solver = ResolventSolver(gen, center)
    m = min(n2, ncv or max(2 * k + 10, 20))
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n2) + 1j * rng.standard_normal(n2)
    A = gen.A
    notes = []
    found, resid = [], []
    for _ in range(max_restarts + 1):
        V, H, brk = _arnoldi(solver.solve_array, v0, m)
        mm = H.shape[1]
        theta, Y = np.linalg.eig(H[:mm, :mm])
        order = np.argsort(-np.abs(theta))
        theta, Y = theta[order], Y[:, order]
        keep = min(k, len(theta))
        found, resid, vecs = [], [], []
        for t, y in zip(theta[:keep], Y[:, :keep].T):
            if t == 0:
                continue
            lam = center + 1.0 / t
            x = V[:, :mm] @ y
            x /= np.linalg.norm(x)
            r = np.linalg.norm(A @ x - lam * x)
            if r > RESIDUAL_TOL:
                # one Rayleigh-quotient correction before giving up on this restart
                lam_rq = np.vdot(x, A @ x)
                r_rq = np.linalg.norm(A @ x - lam_rq * x)
                if r_rq < r:
                    lam, r = lam_rq, r_rq
            found.append(lam)
            resid.append(r)
            vecs.append(x)
        if len(found) >= k and max(resid) <= RESIDUAL_TOL:
            break
        if brk is not None:
            notes.append(f"Arnoldi breakdown after {brk} steps")
            break
        v0 = np.sum(vecs, axis=0) if vecs else rng.standard_normal(n2) + 0j
    found = np.array(found, dtype=complex)
    resid = np.array(resid, dtype=float)
    good = resid <= RESIDUAL_TOL
    if not good.all():
        notes.append(f"{int((~good).sum())} Ritz values failed certification")
    found, resid = found[good], resid[good]
    order = np.argsort(np.abs(found - center))
    found, resid = found[order], resid[order]
    outside = np.abs(found - center) > radius
    if outside.any():
        notes.append(f"{int(outside.sum())} of the nearest eigenvalues lie outside the radius")
    return SpectrumResult(found, resid, "shift-invert-Arnoldi", window, converged=len(found) >= k, notes=notes)


def band_margin(eigenvalues, C):
    """Per-eigenvalue margin ``-Re lambda - exp(-C |Im lambda|) / C``."""
    ev = np.asarray(eigenvalues, dtype=complex)
    return -ev.real - np.exp(-C * np.abs(ev.imag)) / C


def _smallest_constant(g, lower=1.0, tol=1e-6):
    """Smallest ``C >= lower`` with ``g(C) >= 0`` for a nondecreasing ``g``."""
    if g(lower) >= 0:
        return lower
    hi = 2.0 * lower
    while g(hi) < 0:
        hi *= 2.0
        if hi > 1e300:
            raise ConvergenceError("no finite constant satisfies the envelope")
    lo = lower
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if g(mid) >= 0:
            hi = mid
        else:
            lo = mid
    # polish to round-off, then step up until the constraint holds
    try:
        c = brentq(g, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps)
    except ValueError:
        c = hi
    while g(c) < 0:
        c = np.nextafter(c, np.inf)
    return float(c)


def band_fit(spec, zero_radius=1e-6):
    """Fit the smallest ``C >= 1`` with ``Re lambda <= -exp(-C |Im lambda|) / C``.

    Eigenvalues with ``|lambda| <= zero_radius`` are excluded (steady states).
    ``C`` is located by bisection to 1e-6 and then polished to round-off so
    that the reported margin is nonnegative and tight.

    Raises
    ------
    BandViolationError
        When a retained eigenvalue has ``Re lambda >= 0``.
    """
    ev = np.asarray(spec.eigenvalues if isinstance(spec, SpectrumResult) else spec, dtype=complex)
    check_positive(zero_radius, "zero_radius", strict=False)
    small = np.abs(ev) <= zero_radius
    kept, excluded = ev[~small], ev[small]
    if kept.size == 0:
        raise ValueError("spectrum is empty after excluding the zero ball")
    bad = kept.real >= 0
    if bad.any():
        raise BandViolationError(
            f"{int(bad.sum())} eigenvalue(s) with Re >= 0 outside |lambda| <= {zero_radius}",
            offending=list(kept[bad]),
        )
    C = _smallest_constant(lambda c: band_margin(kept, c).min())
    margins = band_margin(kept, C)
    i = int(np.argmin(margins))
    return BandFit(C, float(margins[i]), excluded, complex(kept[i]), int(kept.size))
