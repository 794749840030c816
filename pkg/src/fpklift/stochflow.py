"""Common-noise particle systems for the stochastic nonlinear FPK equation and their martingale checks."""

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _rng
from ._parallel import parallel_map
from .cylinder import PathIntegrals
from .detflow import ResidualCurve, _advance, _as_list, _finite_or_raise, initial_particles
from .exceptions import InvalidArgumentError
from .generator import cumulative_trapezoid, node_integrals
from .measure import MeasurePath, ParticleMeasure
from .testfn import cutoff_sequence

SE_FACTOR = 4.0


@dataclass(frozen=True)
class NoisePath:
    """Wiener path ``W`` (shape ``(K, d1)``) on the saved time grid, ``W[0] = 0``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.values, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if w.shape[0] != len(self.times):
            raise InvalidArgumentError("noise path and time grid differ in length")
        if np.any(w[0] != 0.0):
            raise InvalidArgumentError("W_0 must be 0")
        object.__setattr__(self, "values", w)

    @property
    def increments(self):
        return np.diff(self.values, axis=0)

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t"] + [f"W_{a + 1}" for a in range(self.values.shape[1])])
            for t, row in zip(self.times, self.values):
                wr.writerow([repr(float(t))] + [repr(float(v)) for v in row])


@dataclass
class StochasticEnsemble:
    """K realizations ``(mu path, W path)`` of one model on one grid."""

    paths: list
    noises: list
    seeds: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.paths or len(self.paths) != len(self.noises):
            raise InvalidArgumentError("need K >= 1 realizations with one noise path each")
        t0 = self.paths[0].times
        for p, w in zip(self.paths, self.noises):
            if not (np.array_equal(p.times, t0) and np.array_equal(w.times, t0)):
                raise InvalidArgumentError("realizations must share one time grid")

    def __len__(self):
        return len(self.paths)

    @property
    def times(self):
        return self.paths[0].times


def _realization(c, mu0, cfg, r, increments=None):
    n, d1 = cfg.n_particles, c.noise_dim
    x, w = initial_particles(mu0, n, _rng.stream(cfg.seed, _rng.INIT, r))
    w.flags.writeable = False
    rng = _rng.stream(cfg.seed, _rng.PARTICLE, r)
    if increments is None:
        increments = np.sqrt(cfg.dt) * _rng.stream(cfg.seed, _rng.COMMON, r).standard_normal((cfg.n_steps, d1))
    else:
        increments = np.asarray(increments, dtype=float).reshape(cfg.n_steps, d1)
    saved = [ParticleMeasure._trusted(x.copy(), w)]
    for k in range(cfg.n_steps):
        t = k * cfg.dt
        mu = ParticleMeasure._trusted(x, w)
        xi = rng.standard_normal((n, c.dim))
        x_new = _advance(c, t, mu, x, cfg.dt, xi, common_noise=True)
        if d1:
            x_new = x_new + np.einsum("nia,a->ni", c.sigma(t, mu, x), increments[k])
        x = x_new
        _finite_or_raise(x, k + 1, (k + 1) * cfg.dt)
        if (k + 1) % cfg.save_stride == 0:
            saved.append(ParticleMeasure._trusted(x.copy(), w))
    W = np.vstack([np.zeros((1, d1)), np.cumsum(increments, axis=0)])[:: cfg.save_stride]
    times = cfg.save_times()
    return MeasurePath(times, saved), NoisePath(times, W)


def simulate_snlfpk(c, mu0, cfg, k_paths, noise_increments=None, n_jobs=1):
    """K realizations of ``dX^m = b dt + tau dB^m + sigma dW`` with ``tau tau^T = 2a - sigma sigma^T``.

    Coefficients see the current empirical measure. Realization ``r`` draws from the
    streams ``(cfg.seed, INIT|PARTICLE|COMMON, r)``. ``noise_increments`` of shape
    ``(K, n_steps, d1)`` replaces the common-noise draws.
    """
    if mu0.dim != c.dim:
        raise InvalidArgumentError(f"dimension mismatch: mu0 {mu0.dim}, field {c.dim}")
    if k_paths < 1:
        raise InvalidArgumentError("k_paths must be >= 1")
    if noise_increments is not None and len(noise_increments) != k_paths:
        raise InvalidArgumentError("one increment array per realization required")
    out = parallel_map(
        lambda r: _realization(c, mu0, cfg, r, None if noise_increments is None else noise_increments[r]),
        range(k_paths), n_jobs)
    seeds = {"master": cfg.seed, "rule": "SeedSequence(seed, spawn_key=(role, r)) -> Philox",
             "roles": {"init": _rng.INIT, "particle": _rng.PARTICLE, "common": _rng.COMMON}}
    return StochasticEnsemble([o[0] for o in out], [o[1] for o in out], seeds)


def stochastic_weak_residual(path, W, c, phi, labels=None):
    """``mu_t(phi) - mu_0(phi) - int mu_s(L phi) ds - sum mu_s(sigma . grad phi) dW`` (left-point Ito sum)."""
    if not np.array_equal(path.times, W.times):
        raise InvalidArgumentError("path and noise must share one grid")
    funcs = _as_list(phi)
    rows = [node_integrals(c, t, mu, funcs) for t, mu in zip(path.times, path.measures)]
    vals = np.stack([r.values for r in rows])
    drift = np.stack([r.drift for r in rows])
    noise = np.stack([r.noise for r in rows])
    return ResidualCurve(path.times, _residual(vals, drift, noise, W.increments, path.dt), labels or [])


def _residual(vals, drift, noise, dW, dt):
    ito = np.zeros_like(vals)
    if len(dW):
        ito[1:] = np.cumsum(np.einsum("kma,ka->km", noise[:-1], dW), axis=0)
    return vals - vals[0] - cumulative_trapezoid(drift, dt) - ito


def coordinate_sde_residual(path, W, c, fam, i):
    """Residual of the SDE for the H-coordinate ``z_i = mu(h_i)`` (``i`` starts at 1)."""
    if not 1 <= i <= len(fam):
        raise InvalidArgumentError(f"coordinate index {i} outside 1..{len(fam)}")
    return stochastic_weak_residual(path, W, c, fam.h[i - 1], [f"z_{i}"])


@dataclass
class CoordinateSeries:
    """H-coordinates, drift ``B`` and noise ``Sigma`` of one realization, stacked over time."""

    z: np.ndarray
    B: np.ndarray
    Sigma: np.ndarray
    dt: float

    @cached_property
    def M(self):
        """``M_i(t) = z_i(t) - z_i(0) - int_0^t B_i ds``."""
        return self.z - self.z[0] - cumulative_trapezoid(self.B, self.dt)

    @cached_property
    def int_A(self):
        """Running ``int_0^t A_ij ds`` with ``A_ij = <Sigma_i, Sigma_j>``, shape ``(K, n, n)``."""
        A = np.einsum("kia,kja->kij", self.Sigma, self.Sigma)
        return cumulative_trapezoid(A, self.dt)


def ensemble_series(ens, c, fam, n, n_jobs=1):
    def one(path):
        ints = PathIntegrals(c, path, fam, n, "h", with_noise=True)
        return CoordinateSeries(ints.values, ints.drift, ints.noise, path.dt)

    return parallel_map(one, ens.paths, n_jobs)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    k = x.shape[0]
    if k < 2:
        raise InvalidArgumentError("need K >= 2 realizations for a standard error")
    return float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(k))


def default_statistics():
    """Bounded functionals of the coordinates at the earlier time."""
    return [
        ("1", lambda z: 1.0),
        ("z_1(s)", lambda z: z[0]),
        ("z_2(s)", lambda z: z[1]),
        ("z_3(s)", lambda z: z[2]),
        ("tanh(z_1(s))", lambda z: np.tanh(z[0])),
    ]


def _node(times, t):
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise InvalidArgumentError(f"time {t!r} is not a grid node")
    return k


def _entry(est, se, **labels):
    return {**labels, "estimate": est, "se": se, "pass": bool(abs(est) <= SE_FACTOR * se)}


@dataclass
class MartingaleReport:
    orthogonality: list = field(default_factory=list)
    covariation: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e["pass"] for e in self.orthogonality + self.covariation)

    def to_dict(self):
        return {"orthogonality": self.orthogonality, "covariation": self.covariation, "pass": self.passed}


def mgp_test(ens, c, fam, i_max=3, times=None, statistics=None, series=None, n_jobs=1):
    """Monte-Carlo estimates of ``E[(M_i(t) - M_i(s)) psi(z_s)]`` with standard errors; pass at 4 SE.

    ``times`` defaults to ``(T/2, T)``.
    """
    statistics = default_statistics() if statistics is None else statistics
    grid = ens.times
    s, t = (grid[len(grid) // 2], grid[-1]) if times is None else times
    ks, kt = _node(grid, s), _node(grid, t)
    if not ks < kt:
        raise InvalidArgumentError("need s < t")
    n = max(i_max, 3)
    series = ensemble_series(ens, c, fam, n, n_jobs) if series is None else series
    report = MartingaleReport()
    for i in range(1, i_max + 1):
        dM = np.array([sr.M[kt, i - 1] - sr.M[ks, i - 1] for sr in series])
        for name, psi in statistics:
            samples = dM * np.array([psi(sr.z[ks]) for sr in series])
            est, se = _mean_se(samples)
            report.orthogonality.append(_entry(est, se, i=i, psi=name, s=float(s), t=float(t)))
    return report


def covariation_test(ens, c, fam, i, j, t=None, series=None, n_jobs=1):
    """``E[M_i(t) M_j(t) - int_0^t A_ij ds]`` with its standard error; pass at 4 SE."""
    grid = ens.times
    kt = len(grid) - 1 if t is None else _node(grid, t)
    series = ensemble_series(ens, c, fam, max(i, j), n_jobs) if series is None else series
    samples = []
    for sr in series:
        M = sr.M
        samples.append(M[kt, i - 1] * M[kt, j - 1] - sr.int_A[kt, i - 1, j - 1])
    est, se = _mean_se(samples)
    return _entry(est, se, i=i, j=j, t=float(grid[kt]))


def martingale_report(ens, c, fam, i_max=3, times=None, n_jobs=1):
    """Orthogonality battery plus covariation for all ``i, j <= i_max``."""
    series = ensemble_series(ens, c, fam, max(i_max, 3), n_jobs)
    report = mgp_test(ens, c, fam, i_max, times, series=series)
    for i in range(1, i_max + 1):
        for j in range(1, i_max + 1):
            report.covariation.append(covariation_test(ens, c, fam, i, j, series=series))
    return report


def lifted_fpk_residual(ens, c, fam, F, check_times=None, n_jobs=1):
    """Monte-Carlo residual of the second-order lifted equation for a cylinder function.

    Per realization ``r(t) = F(mu_t) - F(mu_0) - int_0^t L2 F(mu_s) ds``; the mean over
    realizations is compared to 4 SE at ``check_times`` (default: every node after t_0).
    Also reports ``E[F(mu_t)]`` with its SE for comparison with closed forms.
    """
    n = max(F.indices)
    per = parallel_map(lambda p: PathIntegrals(c, p, fam, n, F.which, with_noise=True), ens.paths, n_jobs)
    dt = ens.paths[0].dt
    res, vals = [], []
    for ints in per:
        v, g = ints.cylinder_terms(F, second_order=True)
        vals.append(v)
        res.append(v - v[0] - cumulative_trapezoid(g, dt))
    res, vals = np.array(res), np.array(vals)
    grid = ens.times
    ks = range(1, len(grid)) if check_times is None else [_node(grid, t) for t in check_times]
    rows = []
    for k in ks:
        est, se = _mean_se(res[:, k])
        ev, evse = _mean_se(vals[:, k])
        rows.append({**_entry(est, se, t=float(grid[k])), "mean_F": ev, "mean_F_se": evse})
    return {"F": F.name, "rows": rows, "pass": all(r["pass"] for r in rows),
            "max_z": max((abs(r["estimate"]) / r["se"] if r["se"] > 0 else 0.0 for r in rows), default=0.0)}


def shift_expectation(F, mu0, fam, t, sigma=1.0, n_nodes=80):
    """``E[F(mu0 shifted by sigma W_t)]`` for ``W_t ~ N(0, t)`` by Gauss-Hermite quadrature (d = 1)."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_nodes)
    weights = weights / weights.sum()
    total = 0.0
    for z, wq in zip(nodes, weights):
        shifted = ParticleMeasure._trusted(mu0.points + sigma * np.sqrt(t) * z, mu0.weights)
        total += wq * F(shifted, fam)
    return float(total)


def stochastic_mass_check(ens, c, l_values=(2, 4, 8)):
    """Exact mass drift over all realizations and the cutoff-sequence residual trend."""
    drift = max(float(np.max(np.abs(p.masses() - p.masses()[0]))) for p in ens.paths)
    rows = []
    for l in l_values:
        phi = cutoff_sequence(int(l), ens.paths[0].dim)
        worst = max(stochastic_weak_residual(p, w, c, phi).max_abs for p, w in zip(ens.paths, ens.noises))
        rows.append({"l": int(l), "max_residual": worst})
    seq = [r["max_residual"] for r in rows]
    return {
        "mass_drift": drift,
        "probability": all(abs(p.masses()[0] - 1.0) <= 1e-12 for p in ens.paths) and drift == 0.0,
        "cutoff": rows,
        "decreasing": bool(all(b <= a for a, b in zip(seq, seq[1:]))),
    }

