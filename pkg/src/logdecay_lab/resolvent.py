"""Resolvent norms in the discrete energy space and their growth fits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import as_complex_scalar, check_int, check_positive
from .errors import BandViolationError, ConvergenceError, NearEigenvalueError
from .operator import ResolventSolver
from .spectrum import _smallest_constant

__all__ = [
    "ResolventSample",
    "GrowthFit",
    "weighted_resolvent_norm",
    "resolvent_norm",
    "sweep_imaginary_axis",
    "fit_growth",
    "probe_band",
]

DENSE_LIMIT = 1000
CERT_TOL = 1e-8
SINGULAR_TOL = 1e-14


@dataclass(frozen=True)
class ResolventSample:
    lambda_spec: complex
    norm: float
    method: str
    certificate: float
    perturbed: bool = False

    @property
    def tau(self):
        return self.lambda_spec.imag


@dataclass(frozen=True)
class GrowthFit:
    """Fitted envelope ``norm <= C_res exp(C_res |Im lambda|)``."""

    C_res: float
    samples: tuple
    max_ratio: float

    def envelope(self, tau):
        return self.C_res * np.exp(self.C_res * np.abs(tau))

    def verify(self):
        """Re-check the envelope on every sample."""
        return all(s.norm <= self.envelope(s.tau) for s in self.samples)


def _near(lam, sigma_rel):
    return NearEigenvalueError(
        f"smallest singular value {sigma_rel:.3e} (relative) at lambda={lam:.12g}", lambda_spec=lam, rcond=sigma_rel
    )


def weighted_resolvent_norm(A, W, lambda_spec):
    """``|(A - lambda)^{-1}|`` in the norm ``|x|_W = sqrt(x^H W x)`` by dense SVD.

    With ``W = L L^H`` the norm equals ``1 / sigma_min(L^H (A - lambda) L^{-H})``.

    Returns
    -------
    norm : float
    certificate : float
        Residual of the extremal singular triple relative to ``sigma_max``.
    """
    lam = as_complex_scalar(lambda_spec)
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    W = W.toarray() if sp.issparse(W) else np.asarray(W)
    n = A.shape[0]
    L = sla.cholesky(W, lower=True)
    S = A - lam * np.eye(n)
    T = L.conj().T @ S
    T = sla.solve_triangular(L, T.conj().T, lower=True).conj().T  # T @ L^{-H}
    U, s, Vh = sla.svd(T)
    smin, smax = s[-1], s[0]
    if smax == 0 or smin / smax < SINGULAR_TOL:
        raise _near(lam, smin / smax if smax else 0.0)
    u, v = U[:, -1], Vh[-1].conj()
    cert = max(np.linalg.norm(T @ v - smin * u), np.linalg.norm(T.conj().T @ u - smin * v)) / smax
    return float(1.0 / smin), float(cert)


def _inverse_iteration_norm(gen, lam, tol=1e-12):
    """Largest eigenvalue of the pencil ``(R^H W R, W)`` with ``R = (A - lam)^{-1}``."""
    solver = ResolventSolver(gen, lam)
    W = gen.W.tocsc()
    n2 = W.shape[0]
    wlu = spla.splu(W)

    def winv(x):
        return wlu.solve(x.real) + 1j * wlu.solve(x.imag) if np.iscomplexobj(x) else wlu.solve(x)

    def normal(x):
        x = np.ravel(x)
        return solver.solve_adjoint_array(W @ solver.solve_array(x))

    op = spla.LinearOperator((n2, n2), matvec=normal, dtype=complex)
    minv = spla.LinearOperator((n2, n2), matvec=lambda x: winv(np.ravel(x).astype(complex)), dtype=complex)
    v0 = np.ones(n2, dtype=complex)
    try:
        vals, vecs = spla.eigsh(op, k=1, M=W.astype(complex), Minv=minv, which="LM", tol=tol, v0=v0, ncv=min(n2, 20))
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"Lanczos did not converge at lambda={lam:.6g}") from exc
    mu = float(vals[0].real)
    x = vecs[:, 0]
    wx = W @ x
    cert = np.linalg.norm(normal(x) - mu * wx) / (mu * np.linalg.norm(wx))
    norm = np.sqrt(mu)
    opnorm = abs(gen.A).sum(axis=1).max() + abs(lam)
    if 1.0 / (norm * opnorm) < SINGULAR_TOL:
        raise _near(lam, 1.0 / (norm * opnorm))
    return float(norm), float(cert)


def resolvent_norm(gen, lambda_spec, method=None, dense_limit=DENSE_LIMIT):
    """Operator norm of ``(A_h - lambda)^{-1}`` in the discrete ``H`` norm.

    Parameters
    ----------
    method : {"dense-SVD", "inverse-iteration"}, optional
        Default: dense SVD when ``2N <= dense_limit``.

    Raises
    ------
    NearEigenvalueError
        When the shifted operator is numerically singular.
    ConvergenceError
        When the singular-triple certificate exceeds 1e-8.
    """
    lam = as_complex_scalar(lambda_spec)
    if method is None:
        method = "dense-SVD" if 2 * gen.N <= dense_limit else "inverse-iteration"
    if method == "dense-SVD":
        norm, cert = weighted_resolvent_norm(gen.A, gen.W, lam)
    elif method == "inverse-iteration":
        norm, cert = _inverse_iteration_norm(gen, lam)
    else:
        raise ValueError(f"unknown method {method!r}")
    if cert > CERT_TOL:
        raise ConvergenceError(f"singular triple certificate {cert:.3e} exceeds {CERT_TOL} at lambda={lam:.6g}")
    return ResolventSample(lam, norm, method, cert)


def fit_growth(samples):
    """Smallest ``C >= 1`` with ``norm <= C exp(C |Im lambda|)`` on all samples."""
    samples = tuple(samples)
    if not samples:
        raise ValueError("no samples to fit")
    taus = np.array([abs(s.tau) for s in samples])
    logn = np.log([s.norm for s in samples])
    C = _smallest_constant(lambda c: np.min(np.log(c) + c * taus - logn))
    norms = np.array([s.norm for s in samples])
    # the fit works in log space; step up past round-off in the direct form
    for _ in range(64):
        if np.all(norms <= C * np.exp(C * taus)):
            break
        C = float(np.nextafter(C, np.inf))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = (logn - np.log(C)) / taus
    ratios = ratios[np.isfinite(ratios)]
    fit = GrowthFit(C, samples, float(ratios.max()) if ratios.size else float("nan"))
    if not fit.verify():
        raise ConvergenceError("growth envelope failed re-verification")
    return fit


def sweep_imaginary_axis(gen, tau_min, tau_max, steps, method=None, dense_limit=DENSE_LIMIT):
    """Sample ``lambda = i tau`` on a uniform grid and fit the growth constant.

    A sample that hits a near-eigenvalue is retried once at
    ``i (tau + step / 10)``; a second failure propagates.  ``steps = 1``
    samples ``tau_min`` alone.
    """
    check_positive(tau_min, "tau_min")
    if tau_min < 1:
        raise ValueError("tau_min must be >= 1")
    steps = check_int(steps, "steps", minimum=1)
    if steps == 1:
        taus, step = np.array([float(tau_min)]), 0.1
    else:
        if tau_max <= tau_min:
            raise ValueError("tau_max must exceed tau_min")
        taus = np.linspace(tau_min, tau_max, steps)
        step = taus[1] - taus[0]
    samples = []
    for tau in taus:
        try:
            s = resolvent_norm(gen, 1j * tau, method, dense_limit)
        except NearEigenvalueError:
            s = resolvent_norm(gen, 1j * (tau + step / 10), method, dense_limit)
            s = ResolventSample(s.lambda_spec, s.norm, s.method, s.certificate, perturbed=True)
        samples.append(s)
    return fit_growth(samples)


def probe_band(gen, C, taus, method=None, dense_limit=DENSE_LIMIT):
    """Resolvent norms on the band edge ``lambda = -exp(-C tau) / C + i tau``.

    Raises
    ------
    BandViolationError
        Listing every ``tau`` at which the edge is numerically spectrum;
        the solvable samples are attached as ``samples``.
    """
    check_positive(C, "C")
    if C < 1:
        raise ValueError("C must be >= 1")
    samples, offending = [], []
    for tau in taus:
        if tau < 1:
            raise ValueError("taus must be >= 1")
        lam = complex(-np.exp(-C * tau) / C, tau)
        try:
            samples.append(resolvent_norm(gen, lam, method, dense_limit))
        except NearEigenvalueError:
            offending.append(float(tau))
    if offending:
        raise BandViolationError(
            f"band edge at C={C:.6g} meets the spectrum at tau={offending}", offending=offending, samples=samples
        )
    return samples
