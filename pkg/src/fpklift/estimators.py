"""Estimator-style wrappers: a chart transformer and two simulators with ``get_params``/``set_params``.

Input measures may be :class:`ParticleMeasure` objects or raw ``(n, d)`` point
arrays (taken as equal-weight probability clouds).
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .detflow import SolverConfig, simulate_nlfpk
from .exceptions import InvalidArgumentError
from .generator import CoefficientField, preset
from .measure import ParticleMeasure, chart_G, chart_H
from .stochflow import simulate_snlfpk
from .testfn import enumerate_family


def _as_measure(obj, dim=None):
    if isinstance(obj, ParticleMeasure):
        return obj
    pts = np.asarray(obj, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    return ParticleMeasure(pts, np.full(n, 1.0 / n) if n else None, dim=dim)


def _model(model, params):
    if isinstance(model, CoefficientField):
        return model
    return preset(model, **(params or {}))


class ChartEmbedding(TransformerMixin, BaseEstimator):
    """Maps measures to their first ``n_coords`` chart coordinates.

    ``chart="H"`` gives the normalized coordinates (each bounded by ``2^-i``),
    ``chart="G"`` the raw bump integrals.
    """

    def __init__(self, dim=1, depth=4, r0=2.0, n_coords=32, chart="H", grid_steps=200):
        self.dim = dim
        self.depth = depth
        self.r0 = r0
        self.n_coords = n_coords
        self.chart = chart
        self.grid_steps = grid_steps

    def fit(self, X=None, y=None):
        if self.chart not in ("G", "H"):
            raise InvalidArgumentError(f"chart must be 'G' or 'H', got {self.chart!r}")
        self.family_ = enumerate_family(self.dim, self.depth, self.r0, max_size=self.n_coords,
                                        steps_per_radius=self.grid_steps)
        self.n_features_out_ = len(self.family_)
        return self

    def transform(self, X):
        check_is_fitted(self, "family_")
        chart = chart_H if self.chart == "H" else chart_G
        rows = [chart(_as_measure(m, self.dim), self.family_) for m in X]
        return np.array(rows).reshape(len(rows), self.n_features_out_)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "family_")
        prefix = "z" if self.chart == "H" else "g"
        return np.array([f"{prefix}_{i + 1}" for i in range(self.n_features_out_)], dtype=object)


class _SimulatorBase(BaseEstimator):
    def _solver(self):
        return SolverConfig(self.n_particles, self.dt, self.t_final, self.seed, self.save_stride)


class McKeanVlasovSimulator(_SimulatorBase):
    """Particle solver for the nonlinear equation; ``fit(mu0)`` stores the measure path in ``path_``."""

    def __init__(self, model="ou", model_params=None, n_particles=1000, dt=1e-3, t_final=1.0, seed=0,
                 save_stride=1):
        self.model = model
        self.model_params = model_params
        self.n_particles = n_particles
        self.dt = dt
        self.t_final = t_final
        self.seed = seed
        self.save_stride = save_stride

    def fit(self, mu0, y=None):
        self.coefficients_ = _model(self.model, self.model_params)
        self.path_ = simulate_nlfpk(self.coefficients_, _as_measure(mu0, self.coefficients_.dim), self._solver())
        return self

    def predict(self, embedding):
        check_is_fitted(self, "path_")
        return embedding.transform(self.path_.measures)


class CommonNoiseSimulator(_SimulatorBase):
    """Conditional-law particle solver; ``fit(mu0)`` stores ``k_paths`` realizations in ``ensemble_``."""

    def __init__(self, model="p1", model_params=None, n_particles=1000, dt=1e-3, t_final=1.0, seed=0,
                 save_stride=1, k_paths=10, n_jobs=1):
        self.model = model
        self.model_params = model_params
        self.n_particles = n_particles
        self.dt = dt
        self.t_final = t_final
        self.seed = seed
        self.save_stride = save_stride
        self.k_paths = k_paths
        self.n_jobs = n_jobs

    def fit(self, mu0, y=None):
        self.coefficients_ = _model(self.model, self.model_params)
        self.ensemble_ = simulate_snlfpk(self.coefficients_, _as_measure(mu0, self.coefficients_.dim),
                                         self._solver(), self.k_paths, n_jobs=self.n_jobs)
        return self

    def predict(self, embedding):
        """Array of shape ``(k_paths, n_times, n_coords)``."""
        check_is_fitted(self, "ensemble_")
        return np.stack([embedding.transform(p.measures) for p in self.ensemble_.paths])
