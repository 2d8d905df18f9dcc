"""Implicit-midpoint evolution, energy traces and the logarithmic decay fit."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import check_positive
from .errors import ConvergenceError, InstabilityError, UndefinedFitError
from .operator import StateVector, _as_state, apply_generator, energy, h_norm

__all__ = [
    "EnergyTrace",
    "DecayFit",
    "MidpointStepper",
    "step_midpoint",
    "evolve",
    "decay_fit",
    "graph_norm",
    "remove_equilibrium",
]

STEP_TOL = 1e-12
DENSE_RECORD_UNTIL = 10.0
SUBSAMPLE = 10


@dataclass(frozen=True)
class EnergyTrace:
    times: np.ndarray
    h_norm: np.ndarray
    energy: np.ndarray
    dissipated: np.ndarray
    graph_norm0: float
    final_state: StateVector
    dt: float

    def __len__(self):
        return len(self.times)

    def energy_defect(self):
        """``|E(0) - E(t) - dissipated(t)| / E(0)`` per record (0 for zero energy)."""
        e0 = self.energy[0]
        d = np.abs(e0 - self.energy - self.dissipated)
        return d / e0 if e0 > 0 else d

    def prefix(self, t_max):
        keep = self.times <= t_max + 1e-12
        return EnergyTrace(
            self.times[keep], self.h_norm[keep], self.energy[keep], self.dissipated[keep],
            self.graph_norm0, self.final_state, self.dt,
        )


@dataclass(frozen=True)
class DecayFit:
    C_dec: float
    argmax_t: float
    graph_norm0: float

    def bound(self, t):
        return self.C_dec * self.graph_norm0 / np.log(2.0 + np.asarray(t))


def graph_norm(gen, x):
    """``sqrt(|x|_H^2 + |A x|_H^2)``."""
    return float(np.hypot(h_norm(gen, x), h_norm(gen, apply_generator(gen, x))))


class MidpointStepper:
    """Implicit midpoint map ``(I - dt/2 A) x+ = (I + dt/2 A) x`` with one sparse LU."""

    def __init__(self, gen, dt):
        if dt == 0 or not np.isfinite(dt):
            raise ValueError("dt must be finite and nonzero")
        self.gen, self.dt = gen, float(dt)
        n2 = 2 * gen.N
        I = sp.identity(n2, format="csc")
        self._lhs = (I - 0.5 * dt * gen.A).tocsc()
        self._rhs = (I + 0.5 * dt * gen.A).tocsr()
        try:
            self._lu = spla.splu(self._lhs)
        except RuntimeError as exc:
            raise InstabilityError(f"step matrix I - dt/2 A is singular for dt={dt}") from exc

    def step_array(self, x):
        b = self._rhs @ x
        y = self._lu.solve(b)
        r = np.linalg.norm(self._lhs @ y - b)
        nb = np.linalg.norm(b)
        if r > STEP_TOL * nb:
            y = y + self._lu.solve(b - self._lhs @ y)
            r = np.linalg.norm(self._lhs @ y - b)
            if r > STEP_TOL * max(nb, 1e-300) and nb > 0:
                raise ConvergenceError(f"midpoint solve residual {r / nb:.3e} exceeds {STEP_TOL}")
        return y


def step_midpoint(gen, x, dt):
    """One implicit midpoint step of size ``dt`` (negative ``dt`` runs backwards)."""
    x = _as_state(x, gen.N)
    return StateVector.from_array(MidpointStepper(gen, dt).step_array(x.to_array()))


def evolve(gen, x0, T, dt, subsample=True):
    """Integrate ``x' = A_h x`` from ``x0`` over ``|T|`` with step ``dt``.

    A negative ``dt`` integrates backwards in time (``T`` is still given as a
    positive duration).  Records every step up to ``t = 10`` and every 10th
    step afterwards when ``subsample`` is set, plus the final time.  The
    cumulative dissipation uses the midpoint velocity, for which the discrete
    energy balance is exact.
    """
    check_positive(T, "T")
    if dt == 0:
        raise ValueError("dt must be nonzero")
    x0 = _as_state(x0, gen.N)
    nsteps = int(round(T / abs(dt)))
    if nsteps < 1 or abs(nsteps * abs(dt) - T) > 1e-9 * T:
        raise ValueError(f"T={T} is not an integer multiple of |dt|={abs(dt)}")
    stepper = MidpointStepper(gen, dt)
    n = gen.N
    b = gen.b_diag
    x = x0.to_array()
    times, hn, en, dis = [0.0], [h_norm(gen, x0)], [energy(gen, x0)], [0.0]
    cum = 0.0
    for k in range(1, nsteps + 1):
        y = stepper.step_array(x)
        um = 0.5 * (x[n:] + y[n:])
        cum += dt * float(np.real(np.vdot(um, b * um)))
        x = y
        t = k * abs(dt)
        if not subsample or t <= DENSE_RECORD_UNTIL + 1e-12 or k % SUBSAMPLE == 0 or k == nsteps:
            if not np.all(np.isfinite(x)):
                raise InstabilityError(f"non-finite state at t={t}")
            s = StateVector.from_array(x)
            times.append(t)
            hn.append(h_norm(gen, s))
            en.append(energy(gen, s))
            dis.append(cum)
    if not np.all(np.isfinite(x)):
        raise InstabilityError("non-finite final state")
    return EnergyTrace(
        np.array(times), np.array(hn), np.array(en), np.array(dis),
        graph_norm(gen, x0), StateVector.from_array(x), float(dt),
    )


def decay_fit(trace, t_max=None):
    """``C_dec = max_t ln(2 + t) h_norm(t) / graph_norm0`` over the recorded times."""
    if t_max is not None:
        trace = trace.prefix(t_max)
    if len(trace) == 0:
        raise UndefinedFitError("empty trace")
    if not trace.graph_norm0 > 0:
        raise UndefinedFitError("initial graph norm is zero; the decay constant is undefined")
    vals = np.log(2.0 + trace.times) * trace.h_norm / trace.graph_norm0
    i = int(np.argmax(vals))
    return DecayFit(float(vals[i]), float(trace.times[i]), float(trace.graph_norm0))


def remove_equilibrium(gen, x, method="conserved"):
    """Remove the steady-state component ``c (1, 0)`` from ``x``.

    ``method="conserved"`` uses the quantity ``1^T M u1 + 1^T B u0``, which
    the flow conserves when damping is present; the corrected state then
    converges to zero.  ``method="mean"`` subtracts the mass-weighted mean
    of ``u0`` only (the only option without damping).
    """
    x = _as_state(x, gen.N)
    m, b = gen.mass, gen.b_diag
    if method == "conserved" and b.any():
        c = (np.sum(m * x.u1) + np.sum(b * x.u0)) / np.sum(b)
    elif method in ("mean", "conserved"):
        c = np.sum(m * x.u0) / np.sum(m)
    else:
        raise ValueError(f"unknown method {method!r}")
    return StateVector(x.u0 - c, x.u1.copy())
