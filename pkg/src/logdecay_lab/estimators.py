"""Estimator-style wrappers: each ``fit`` takes a generator and stores fitted constants.

Parameters live in ``__init__`` and fitted quantities carry a trailing
underscore, so ``get_params``/``set_params``/``clone`` behave as usual.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .operator import StateVector, WaveGenerator
from .resolvent import DENSE_LIMIT, probe_band, sweep_imaginary_axis
from .semigroup import decay_fit, evolve, remove_equilibrium
from .spectrum import band_fit, eigen_full

__all__ = ["BandEstimator", "ResolventGrowthEstimator", "LogDecayEstimator", "default_initial_state"]


def _check_gen(gen):
    if not isinstance(gen, WaveGenerator):
        raise TypeError(f"expected a WaveGenerator, got {type(gen).__name__}")
    return gen


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


def default_initial_state(gen):
    """Smooth reference data ``u0 = cos(pi x) cos(pi y) + x^2 y``, ``u1 = 0`` (``y`` absent in 1D)."""
    x = gen.domain.nodes
    if gen.domain.dim == 1:
        u0 = np.cos(np.pi * x[:, 0]) + x[:, 0] ** 2
    else:
        u0 = np.cos(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]) + x[:, 0] ** 2 * x[:, 1]
    return StateVector(u0, np.zeros_like(u0))


class BandEstimator(BaseEstimator):
    """Full spectrum and the logarithmic band constant ``C_band``."""

    def __init__(self, zero_radius=1e-6, dense_limit=4000, seed=0):
        self.zero_radius = zero_radius
        self.dense_limit = dense_limit
        self.seed = seed

    def fit(self, gen, y=None):
        gen = _check_gen(gen)
        self.spectrum_ = eigen_full(gen, dense_limit=self.dense_limit, seed=self.seed)
        fit = band_fit(self.spectrum_, zero_radius=self.zero_radius)
        self.band_ = fit
        self.C_band_ = fit.C_band
        self.margin_ = fit.margin
        self.eigenvalues_ = self.spectrum_.eigenvalues
        return self

    def score(self, gen=None, y=None):
        """Smallest band margin (nonnegative by construction)."""
        _check_fitted(self, "margin_")
        return float(self.margin_)


class ResolventGrowthEstimator(BaseEstimator):
    """Growth constant ``C_res`` of the resolvent along ``i [tau_min, tau_max]``."""

    def __init__(self, tau_min=1.0, tau_max=30.0, steps=59, method=None, dense_limit=DENSE_LIMIT):
        self.tau_min = tau_min
        self.tau_max = tau_max
        self.steps = steps
        self.method = method
        self.dense_limit = dense_limit

    def fit(self, gen, y=None):
        gen = _check_gen(gen)
        self.growth_ = sweep_imaginary_axis(gen, self.tau_min, self.tau_max, self.steps, self.method, self.dense_limit)
        self.C_res_ = self.growth_.C_res
        self.samples_ = self.growth_.samples
        return self

    def probe(self, gen, C, taus):
        """Resolvent norms on the band edge of constant ``C``."""
        return probe_band(_check_gen(gen), C, taus, self.method, self.dense_limit)

    def predict(self, tau):
        """Growth envelope ``C e^{C |tau|}``."""
        _check_fitted(self, "growth_")
        return self.growth_.envelope(np.asarray(tau, dtype=float))


class LogDecayEstimator(BaseEstimator):
    """Decay constant ``C_dec`` in ``h_norm(t) ln(2 + t) <= C_dec |x0|_{D(A)}``."""

    def __init__(self, T=200.0, dt=0.05, t_max=None, equilibrium="conserved"):
        self.T = T
        self.dt = dt
        self.t_max = t_max
        self.equilibrium = equilibrium

    def fit(self, gen, x0=None):
        gen = _check_gen(gen)
        x0 = default_initial_state(gen) if x0 is None else x0
        if self.equilibrium is not None:
            x0 = remove_equilibrium(gen, x0, method=self.equilibrium)
        self.trace_ = evolve(gen, x0, self.T, self.dt)
        fit = decay_fit(self.trace_, self.t_max)
        self.fit_ = fit
        self.C_dec_ = fit.C_dec
        self.argmax_t_ = fit.argmax_t
        self.graph_norm0_ = fit.graph_norm0
        return self

    def predict(self, t):
        """Decay envelope ``C_dec |x0|_{D(A)} / ln(2 + t)``."""
        _check_fitted(self, "fit_")
        return self.fit_.bound(np.asarray(t, dtype=float))
