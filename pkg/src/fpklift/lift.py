"""Finite-mixture laws on the measure space, the lifted continuity equation and the superposition audit."""

from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from .cylinder import PathIntegrals, audit_battery
from .detflow import ResidualCurve, family_residual
from .exceptions import InvalidArgumentError
from .generator import cumulative_trapezoid
from .measure import MeasurePath, chart_G

WEIGHT_TOL = 1e-12


def _check_weights(weights):
    p = np.asarray(weights, dtype=float).reshape(-1)
    if p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > WEIGHT_TOL:
        raise InvalidArgumentError(f"weights must be >= 0 and sum to 1, got {p.tolist()}")
    p.flags.writeable = False
    return p


@dataclass(frozen=True)
class EnsembleLaw:
    """``Gamma = sum_k p_k delta_{mu^k}``."""

    weights: np.ndarray
    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "weights", _check_weights(self.weights))
        object.__setattr__(self, "members", tuple(self.members))
        if len(self.members) != self.weights.size:
            raise InvalidArgumentError("one weight per member required")
        if len({m.dim for m in self.members}) != 1:
            raise InvalidArgumentError("ensemble members must share a dimension")

    def expect(self, F, fam):
        """``int F dGamma``."""
        return float(sum(p * F(mu, fam) for p, mu in zip(self.weights, self.members)))


@dataclass(frozen=True)
class EnsemblePathLaw:
    """``eta = sum_k p_k delta_{(mu^k_t)_t}`` on paths sharing one grid."""

    weights: np.ndarray
    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "weights", _check_weights(self.weights))
        object.__setattr__(self, "members", tuple(self.members))
        if len(self.members) != self.weights.size:
            raise InvalidArgumentError("one weight per member required")
        t0 = self.members[0].times
        for m in self.members[1:]:
            if not np.array_equal(m.times, t0):
                raise InvalidArgumentError("member paths must share one time grid")

    @property
    def times(self):
        return self.members[0].times

    def marginal(self, k):
        """``eta o e_{t_k}^{-1}``."""
        return EnsembleLaw(self.weights, tuple(m[k] for m in self.members))

    def marginals(self):
        return [self.marginal(k) for k in range(len(self.times))]


def _as_path_law(gamma, times=None):
    """Accept an :class:`EnsemblePathLaw` or a list of :class:`EnsembleLaw` plus its time grid."""
    if isinstance(gamma, EnsemblePathLaw):
        return gamma
    gamma = list(gamma)
    w0 = gamma[0].weights
    for g in gamma[1:]:
        if not np.array_equal(g.weights, w0) or len(g.members) != len(gamma[0].members):
            raise InvalidArgumentError("time-varying weights or layouts are not admitted")
    if times is None:
        raise InvalidArgumentError("a list of ensembles needs its time grid")
    paths = [MeasurePath(times, [g.members[k] for g in gamma]) for k in range(len(w0))]
    return EnsemblePathLaw(w0, tuple(paths))


def ce_residual(gamma, c, F, fam, integrals=None, times=None):
    """Residual of the lifted continuity equation for cylinder function(s) ``F``.

    ``R(t) = sum_k p_k [F(mu^k_t) - F(mu^k_0) - int_0^t Lbold F(mu^k_s) ds]``.
    ``integrals`` may hold precomputed :class:`PathIntegrals`, one per member.
    """
    eta = _as_path_law(gamma, times)
    Fs = [F] if not isinstance(F, (list, tuple)) else list(F)
    if not Fs:
        return ResidualCurve(eta.times, np.zeros((len(eta.times), 0)), [])
    if integrals is None:
        n = max(max(f.indices) for f in Fs)
        integrals = [PathIntegrals(c, m, fam, n, Fs[0].which, with_noise=False) for m in eta.members]
    dt = eta.members[0].dt
    cols = []
    for f in Fs:
        total = np.zeros(len(eta.times))
        for p, ints in zip(eta.weights, integrals):
            vals, gen = ints.cylinder_terms(f)
            total += p * (vals - vals[0] - cumulative_trapezoid(gen, dt))
        cols.append(total)
    return ResidualCurve(eta.times, np.column_stack(cols), [f.name for f in Fs])


def transfer_coords(gamma, fam, times=None):
    """Push every member through chart G: per time node, weights and points in R^N."""
    eta = _as_path_law(gamma, times)
    return [(eta.weights, np.stack([chart_G(m[k], fam) for m in eta.members])) for k in range(len(eta.times))]


def rinfty_ode_residual(zpath, c, source_path, fam):
    """Coordinate ODE residual ``z_i(t) - z_i(0) - int_0^t B_i(s, mu_s) ds`` (G-chart, all N coordinates).

    ``B`` is evaluated on ``source_path``; ``zpath`` must be its G-chart image.
    """
    if len(zpath.times) != len(source_path) or not np.array_equal(zpath.times, source_path.times):
        raise InvalidArgumentError("coordinate path and source path must share one grid")
    n = zpath.coords.shape[1]
    ints = PathIntegrals(c, source_path, fam, n, "g", with_noise=False)
    z = zpath.coords
    res = z - z[0] - cumulative_trapezoid(ints.drift, source_path.dt)
    return ResidualCurve(zpath.times, res, [f"z_{i + 1}" for i in range(n)])


def superposition_assemble(members, weights):
    """Build ``eta`` from member paths and its marginals ``Gamma_t``; re-verifies the marginal identity."""
    eta = EnsemblePathLaw(weights, tuple(members))
    gammas = eta.marginals()
    if not marginal_identity(eta, gammas):
        raise AssertionError("marginal identity failed")  # bookkeeping bug, not a numerical outcome
    return eta, gammas


def marginal_identity(eta, gammas):
    """Bit-exact check ``eta o e_t^{-1} == Gamma_t`` at every node."""
    if len(gammas) != len(eta.times):
        return False
    for k, g in enumerate(gammas):
        if not np.array_equal(g.weights, eta.weights):
            return False
        for path, mu in zip(eta.members, g.members):
            if not (np.array_equal(path[k].points, mu.points) and np.array_equal(path[k].weights, mu.weights)):
                return False
    return True


def superposition_audit(eta, c, fam, tol=0.05, n_check=5, battery=None, gammas=None, n_jobs=1):
    """Constructive check that ``eta`` is concentrated on solutions and its marginals solve the lift.

    Returns a dict with the eta-mass fraction of members whose weak residual
    (first ``n_check`` raw bumps) stays within ``tol``, the per-member maxima,
    the battery table of lifted residuals and the marginal identity flag.
    """
    battery = audit_battery(n_check) if battery is None else list(battery)
    per_member = parallel_map(lambda m: family_residual(m, c, fam, n_check).max_abs, eta.members, n_jobs)
    good = np.array([r <= tol for r in per_member])
    fraction = float(np.sum(eta.weights[good]))
    table = []
    if battery:
        n = max(max(f.indices) for f in battery)
        which = battery[0].which
        ints = parallel_map(lambda m: PathIntegrals(c, m, fam, n, which, with_noise=False), eta.members, n_jobs)
        ce = ce_residual(eta, c, battery, fam, integrals=ints)
        table = [{"F": lab, "max_residual": float(v)} for lab, v in zip(ce.labels, ce.max_per_index())]
    gammas = eta.marginals() if gammas is None else gammas
    return {
        "tol": tol,
        "mass_fraction": fraction,
        "member_max_residual": [float(r) for r in per_member],
        "member_weights": eta.weights.tolist(),
        "battery": table,
        "battery_max": max((row["max_residual"] for row in table), default=0.0),
        "marginal_identity": marginal_identity(eta, gammas),
    }
