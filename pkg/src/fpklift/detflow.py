"""McKean-Vlasov particle solver for the nonlinear FPK equation and its weak-form checks."""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .cylinder import PathIntegrals
from .exceptions import ConfigError, InvalidArgumentError, NumericalError
from .generator import cumulative_trapezoid, diffusion_sqrt, node_integrals
from .measure import MeasurePath, ParticleMeasure
from .testfn import TestFunction, cutoff_sequence


@dataclass(frozen=True)
class SolverConfig:
    n_particles: int = 1000
    dt: float = 1e-3
    t_final: float = 1.0
    seed: int = 0
    save_stride: int = 1

    def __post_init__(self):
        if isinstance(self.n_particles, bool) or not isinstance(self.n_particles, (int, np.integer)) \
                or self.n_particles < 1:
            raise ConfigError("solver.n_particles", f"must be an integer >= 1, got {self.n_particles!r}")
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ConfigError("solver.dt", f"must be > 0, got {self.dt!r}")
        if not np.isfinite(self.t_final) or self.t_final < self.dt:
            raise ConfigError("solver.t_final", f"must be >= solver.dt, got {self.t_final!r}")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(steps, 1.0):
            raise ConfigError("solver.dt", f"must divide solver.t_final={self.t_final!r}")
        if self.save_stride < 1 or round(steps) % self.save_stride:
            raise ConfigError("solver.save_stride", f"must be >= 1 and divide the step count {round(steps)}")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))

    def save_times(self):
        k = np.arange(0, self.n_steps + 1, self.save_stride)
        return k * self.dt


@dataclass
class ResidualCurve:
    """Residual per time node (rows) and test-function index (columns)."""

    times: np.ndarray
    values: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if not self.labels:
            self.labels = [str(i + 1) for i in range(self.values.shape[1])]

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.values), initial=0.0))

    def max_per_index(self):
        return np.max(np.abs(self.values), axis=0, initial=0.0)

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "idx", "residual"])
            for t, row in zip(self.times, self.values):
                for lab, v in zip(self.labels, row):
                    w.writerow([repr(float(t)), lab, repr(float(v))])


def initial_particles(mu0, n, rng):
    """``n`` equal-weight atoms for ``mu0``.

    A cloud that already has ``n`` equal-weight atoms is used verbatim;
    otherwise atoms are drawn i.i.d. from ``mu0 / mu0(R^d)``.
    """
    if len(mu0) == n and np.all(mu0.weights == mu0.weights[0]):
        return mu0.points.copy(), mu0.weights.copy()
    mass = mu0.mass
    w = np.full(n, mass / n)
    if len(mu0) == 0:
        raise InvalidArgumentError("cannot sample particles from an empty cloud")
    p = mu0.weights / mass if mass > 0 else np.full(len(mu0), 1.0 / len(mu0))
    idx = rng.choice(len(mu0), size=n, p=p)
    return mu0.points[idx].copy(), w


def _finite_or_raise(x, k, t):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite particle state at step {k} (t={t!r})")


def _advance(c, t, law, x, dt, xi, common_noise):
    tau = diffusion_sqrt(c, t, law, x, common_noise=common_noise)
    step = c.b(t, law, x) * dt
    if c.dim == 1:
        step = step + tau[:, :, 0] * (np.sqrt(dt) * xi)
    else:
        step = step + np.einsum("nij,nj->ni", tau, np.sqrt(dt) * xi)
    return x + step


def simulate_nlfpk(c, mu0, cfg, stream_index=0):
    """Euler-Maruyama for ``dX = b(t, mu_t, X) dt + sqrt(2 a(t, mu_t, X)) dB`` with ``mu_t`` the empirical measure.

    ``sigma`` is ignored. Random draws use the streams ``(cfg.seed, INIT|PARTICLE, stream_index)``.
    """
    if mu0.dim != c.dim:
        raise InvalidArgumentError(f"dimension mismatch: mu0 {mu0.dim}, field {c.dim}")
    x, w = initial_particles(mu0, cfg.n_particles, _rng.stream(cfg.seed, _rng.INIT, stream_index))
    rng = _rng.stream(cfg.seed, _rng.PARTICLE, stream_index)
    w.flags.writeable = False
    saved = [ParticleMeasure._trusted(x.copy(), w)]
    for k in range(cfg.n_steps):
        t = k * cfg.dt
        mu = ParticleMeasure._trusted(x, w)
        xi = rng.standard_normal((cfg.n_particles, c.dim))
        x = _advance(c, t, mu, x, cfg.dt, xi, common_noise=False)
        _finite_or_raise(x, k + 1, (k + 1) * cfg.dt)
        if (k + 1) % cfg.save_stride == 0:
            saved.append(ParticleMeasure._trusted(x.copy(), w))
    return MeasurePath(cfg.save_times(), saved)


def simulate_coupled(c, mu0, nu0, cfg, nu_seed=None):
    """Joint simulation of the nonlinear equation for ``mu`` and the linear equation for ``nu``.

    The ``nu`` cloud feels coefficients evaluated at the current ``mu`` empirical
    measure. With ``nu_seed`` unset both clouds use the same streams.
    """
    if mu0.dim != c.dim or nu0.dim != c.dim:
        raise InvalidArgumentError("dimension mismatch between initial data and field")
    nu_seed = cfg.seed if nu_seed is None else nu_seed
    n = cfg.n_particles
    x, w = initial_particles(mu0, n, _rng.stream(cfg.seed, _rng.INIT, 0))
    y, v = initial_particles(nu0, n, _rng.stream(nu_seed, _rng.INIT, 0))
    rx = _rng.stream(cfg.seed, _rng.PARTICLE, 0)
    ry = _rng.stream(nu_seed, _rng.PARTICLE, 0)
    mus = [ParticleMeasure._trusted(x.copy(), w)]
    nus = [ParticleMeasure._trusted(y.copy(), v)]
    for k in range(cfg.n_steps):
        t = k * cfg.dt
        mu = ParticleMeasure._trusted(x, w)
        xi, eta = rx.standard_normal((n, c.dim)), ry.standard_normal((n, c.dim))
        x_new = _advance(c, t, mu, x, cfg.dt, xi, common_noise=False)
        y = _advance(c, t, mu, y, cfg.dt, eta, common_noise=False)
        x = x_new
        _finite_or_raise(x, k + 1, (k + 1) * cfg.dt)
        _finite_or_raise(y, k + 1, (k + 1) * cfg.dt)
        if (k + 1) % cfg.save_stride == 0:
            mus.append(ParticleMeasure._trusted(x.copy(), w))
            nus.append(ParticleMeasure._trusted(y.copy(), v))
    times = cfg.save_times()
    return MeasurePath(times, mus), MeasurePath(times, nus)


def _as_list(phi):
    return [phi] if isinstance(phi, TestFunction) else list(phi)


def weak_residual(path, c, phi, labels=None):
    """``R(t) = mu_t(phi) - mu_0(phi) - int_0^t mu_s(L_{s,mu_s} phi) ds`` (trapezoid on the path grid).

    ``phi`` may be a single test function or a sequence (one residual column each).
    """
    funcs = _as_list(phi)
    rows = [node_integrals(c, t, mu, funcs, with_noise=False) for t, mu in zip(path.times, path.measures)]
    vals = np.stack([r.values for r in rows])
    drift = np.stack([r.drift for r in rows])
    res = vals - vals[0] - cumulative_trapezoid(drift, path.dt)
    return ResidualCurve(path.times, res, labels or [])


def family_residual(path, c, fam, n_check=5, which="g"):
    """Weak residual tested against the first ``n_check`` dictionary members."""
    funcs = fam.basis(which)[:n_check]
    return weak_residual(path, c, funcs, [f"{which}_{i + 1}" for i in range(len(funcs))])


def mass_check(path, c, l_values=(2, 4, 8)):
    """Exact total-mass drift plus the cutoff-sequence residual trend.

    For each ``l`` reports ``max_t |R|`` for ``phi = cutoff_sequence(l)`` and the
    generator magnitude ``int_0^T mu_s(|L phi_l|) ds``.
    """
    masses = path.masses()
    rows = []
    for l in l_values:
        phi = cutoff_sequence(int(l), path.dim)
        res = weak_residual(path, c, phi)
        gen = []
        for t, mu in zip(path.times, path.measures):
            if len(mu) == 0:
                gen.append(0.0)
                continue
            _, g, h = phi.derivatives(mu.points)
            lv = np.einsum("nij,nij->n", c.a(t, mu, mu.points), h) + np.einsum("ni,ni->n", c.b(t, mu, mu.points), g)
            gen.append(np.sum(mu.weights * np.abs(lv)))
        rows.append({"l": int(l), "max_residual": res.max_abs,
                     "generator_l1": float(cumulative_trapezoid(np.array(gen), path.dt)[-1])})
    res_seq = [r["max_residual"] for r in rows]
    return {
        "mass_drift": float(np.max(np.abs(masses - masses[0]))),
        "probability": bool(np.all(masses == masses[0]) and abs(masses[0] - 1.0) <= 1e-12),
        "cutoff": rows,
        "decreasing": bool(all(b <= a for a, b in zip(res_seq, res_seq[1:]))),
    }


def coupled_product_residual(mu_path, nu_path, c, phi, F, fam):
    """Residual of the coupled linear equation tested on ``Phi(x, mu) = phi(x) F(mu)``.

    ``R(t) = nu_t(phi) F(mu_t) - nu_0(phi) F(mu_0)
    - int [F(mu_s) nu_s(L_{s,mu_s} phi) + nu_s(phi) Lbold_s F(mu_s)] ds``.
    """
    if len(mu_path) != len(nu_path) or not np.array_equal(mu_path.times, nu_path.times):
        raise InvalidArgumentError("mu and nu paths must share one time grid")
    ints = PathIntegrals(c, mu_path, fam, max(F.indices), F.which, with_noise=False)
    Fv, LF = ints.cylinder_terms(F)
    nu_rows = [node_integrals(c, t, nu, [phi], with_noise=False, law=mu)
               for t, nu, mu in zip(nu_path.times, nu_path.measures, mu_path.measures)]
    nv = np.array([r.values[0] for r in nu_rows])
    nl = np.array([r.drift[0] for r in nu_rows])
    integrand = Fv * nl + nv * LF
    res = nv * Fv - nv[0] * Fv[0] - cumulative_trapezoid(integrand, mu_path.dt)
    return ResidualCurve(mu_path.times, res, [F.name])
