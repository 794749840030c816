"""Coefficient fields (a, b, sigma), the operator L_{t,mu} and the coordinate fields B, Sigma, A."""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_points
from .exceptions import InvalidArgumentError, ModelInconsistencyError, NumericalError

A_PSD_TOL = -1e-10
DIFFUSION_PSD_TOL = -1e-8


class CoefficientField:
    """The triple ``(a, b, sigma)`` as vectorised maps of ``(t, mu, X)``.

    ``a(t, mu, X)`` has shape ``(n, d, d)``, ``b`` ``(n, d)`` and ``sigma``
    ``(n, d, d1)`` for ``X`` of shape ``(n, d)``. Evaluators must be pure.
    The declared bounds are entrywise suprema; ``sup_sigma`` must be finite.
    """

    def __init__(self, a, b, sigma=None, dim=1, noise_dim=0, sup_a=np.inf, sup_b=np.inf,
                 sup_sigma=0.0, name="custom", params=None):
        if noise_dim < 0:
            raise InvalidArgumentError("noise_dim must be >= 0")
        if not np.isfinite(sup_sigma):
            raise InvalidArgumentError("sigma must be bounded (finite sup_sigma)")
        self._a = a
        self._b = b
        self._sigma = sigma
        self.dim = int(dim)
        self.noise_dim = int(noise_dim)
        self.sup_a = float(sup_a)
        self.sup_b = float(sup_b)
        self.sup_sigma = float(sup_sigma)
        self.name = name
        self.params = dict(params or {})

    def __repr__(self):
        return f"CoefficientField(name={self.name!r}, dim={self.dim}, noise_dim={self.noise_dim})"

    def _finite(self, arr, what, t):
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite {what} at t={t!r} ({self.name})")
        return arr

    def a(self, t, mu, x):
        return self._finite(np.asarray(self._a(t, mu, x), dtype=float), "a", t)

    def b(self, t, mu, x):
        return self._finite(np.asarray(self._b(t, mu, x), dtype=float), "b", t)

    def sigma(self, t, mu, x):
        if self._sigma is None or self.noise_dim == 0:
            return np.zeros((len(x), self.dim, self.noise_dim))
        return self._finite(np.asarray(self._sigma(t, mu, x), dtype=float), "sigma", t)

    @property
    def drift_constant(self):
        """``d**2 sup|a| + d sup|b|``: bound on ``|B_i| * 2**i`` in the H-chart."""
        return self.dim**2 * self.sup_a + self.dim * self.sup_b

    def without_drift(self):
        """Copy with ``a`` and ``b`` set to zero (negative controls)."""
        d = self.dim
        return CoefficientField(lambda t, mu, x: np.zeros((len(x), d, d)),
                                lambda t, mu, x: np.zeros((len(x), d)),
                                self._sigma, d, self.noise_dim, 0.0, 0.0, self.sup_sigma,
                                name=self.name + "-nodrift", params=self.params)


def _const_a(d, value):
    mat = np.asarray(value, dtype=float) * np.eye(d) if np.ndim(value) == 0 else np.asarray(value, dtype=float)
    return mat, (lambda t, mu, x: np.broadcast_to(mat, (len(x), d, d)))


def null_model(d=1):
    return constant_model(np.zeros((d, d)), np.zeros(d), name="null")


def constant_model(a, b, sigma=None, name="constant"):
    b = np.atleast_1d(np.asarray(b, dtype=float))
    d = b.shape[0]
    amat, afn = _const_a(d, a)
    if sigma is None:
        smat = np.zeros((d, 0))
    else:
        smat = np.asarray(sigma, dtype=float).reshape(d, -1)
    d1 = smat.shape[1]
    return CoefficientField(afn, lambda t, mu, x: np.broadcast_to(b, (len(x), d)),
                            lambda t, mu, x: np.broadcast_to(smat, (len(x), d, d1)),
                            d, d1, sup_a=np.abs(amat).max(initial=0.0), sup_b=np.abs(b).max(initial=0.0),
                            sup_sigma=np.abs(smat).max(initial=0.0), name=name,
                            params={"a": amat.tolist(), "b": b.tolist(), "sigma": smat.tolist()})


def ou_model(d=1, diffusion=0.5, rate=1.0):
    """Ornstein-Uhlenbeck: ``b = -rate x``, ``a = diffusion * Id``. The drift is unbounded."""
    _, afn = _const_a(d, diffusion)
    return CoefficientField(afn, lambda t, mu, x: -rate * x, None, d, 0,
                            sup_a=abs(diffusion), sup_b=np.inf, name="ou",
                            params={"diffusion": diffusion, "rate": rate})


def mean_field_model(d=1, diffusion=0.5):
    """Mean-reverting interaction ``b = -(x - mean(mu))``; preserves the mean exactly."""
    _, afn = _const_a(d, diffusion)
    return CoefficientField(afn, lambda t, mu, x: -(x - mu.mean()), None, d, 0,
                            sup_a=abs(diffusion), sup_b=np.inf, name="mean-field",
                            params={"diffusion": diffusion})


def porous_model(d=1, scale=0.5):
    """Degenerate, mass-dependent diffusion ``a = scale * mu(R^d) * Id``, no drift."""
    eye = np.eye(d)
    return CoefficientField(lambda t, mu, x: np.broadcast_to(scale * mu.mass * eye, (len(x), d, d)),
                            lambda t, mu, x: np.zeros((len(x), d)), None, d, 0,
                            sup_a=abs(scale), sup_b=0.0, name="porous", params={"scale": scale})


def tanh_drift_model(d=1, diffusion=0.5):
    """Bounded confining drift ``b = -tanh(x)``."""
    _, afn = _const_a(d, diffusion)
    return CoefficientField(afn, lambda t, mu, x: -np.tanh(x), None, d, 0,
                            sup_a=abs(diffusion), sup_b=1.0, name="tanh-drift",
                            params={"diffusion": diffusion})


def pure_common_noise_model(sigma=1.0):
    """Preset P1: ``d = d1 = 1``, ``b = 0``, ``a = sigma**2/2``; the solution is a rigid shift by ``sigma W``."""
    s = float(sigma)
    return CoefficientField(lambda t, mu, x: np.full((len(x), 1, 1), 0.5 * s * s),
                            lambda t, mu, x: np.zeros((len(x), 1)),
                            lambda t, mu, x: np.full((len(x), 1, 1), s), 1, 1,
                            sup_a=0.5 * s * s, sup_b=0.0, sup_sigma=abs(s), name="p1",
                            params={"sigma": s})


def common_noise_ou_model(rho=1.0, tau=0.5, rate=1.0):
    """Preset P2: ``b = -rate x``, ``sigma = rho``, ``a = (tau**2 + rho**2)/2`` in d = 1."""
    a = 0.5 * (tau * tau + rho * rho)
    return CoefficientField(lambda t, mu, x: np.full((len(x), 1, 1), a),
                            lambda t, mu, x: -rate * x,
                            lambda t, mu, x: np.full((len(x), 1, 1), float(rho)), 1, 1,
                            sup_a=a, sup_b=np.inf, sup_sigma=abs(rho), name="p2",
                            params={"rho": rho, "tau": tau, "rate": rate})


PRESETS = {
    "null": null_model,
    "ou": ou_model,
    "mean-field": mean_field_model,
    "porous": porous_model,
    "tanh-drift": tanh_drift_model,
    "p1": pure_common_noise_model,
    "p2": common_noise_ou_model,
}


def preset(name, **params):
    try:
        factory = PRESETS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown model preset {name!r}; known: {sorted(PRESETS)}") from None
    return factory(**params)


def _L_values(a, b, grad, hess):
    return np.einsum("nij,nij->n", a, hess) + np.einsum("ni,ni->n", b, grad)


def apply_L(c, t, mu, phi, x):
    """``sum_ij a_ij d_ij phi + sum_i b_i d_i phi`` at the point(s) ``x``."""
    single = np.ndim(x) <= 1 and (np.ndim(x) == 0 or np.size(x) == c.dim)
    x = check_points(x, c.dim)
    if phi.dim != c.dim:
        raise InvalidArgumentError(f"dimension mismatch: field {c.dim}, function {phi.dim}")
    _, g, h = phi.derivatives(x)
    out = _L_values(c.a(t, mu, x), c.b(t, mu, x), g, h)
    return float(out[0]) if single else out


@dataclass
class NodeIntegrals:
    """Particle integrals of a list of test functions at one ``(t, mu)``.

    ``values[k] = mu(f_k)``, ``drift[k] = mu(L f_k)``, ``noise[k, alpha] = mu(sigma^alpha . grad f_k)``.
    """

    values: np.ndarray
    drift: np.ndarray
    noise: np.ndarray


def node_integrals(c, t, mu, funcs, with_noise=True, law=None):
    """Integrate against ``mu``; coefficients are evaluated at ``law`` (default ``mu``)."""
    law = mu if law is None else law
    if mu.dim != c.dim:
        raise InvalidArgumentError(f"dimension mismatch: measure {mu.dim}, field {c.dim}")
    m = len(funcs)
    if len(mu) == 0:
        return NodeIntegrals(np.zeros(m), np.zeros(m), np.zeros((m, c.noise_dim)))
    x, w = mu.points, mu.weights
    a, b = c.a(t, law, x), c.b(t, law, x)
    s = c.sigma(t, law, x) if with_noise else None
    vals, drift, noise = np.zeros(m), np.zeros(m), np.zeros((m, c.noise_dim))
    for k, f in enumerate(funcs):
        v, g, h = f.derivatives(x)
        vals[k] = np.sum(w * v)
        drift[k] = np.sum(w * _L_values(a, b, g, h))
        if with_noise and c.noise_dim:
            noise[k] = np.sum(w[:, None] * np.einsum("nia,ni->na", s, g), axis=0)
    return NodeIntegrals(vals, drift, noise)


def _member(fam, i, which):
    funcs = fam.basis(which)
    if not 1 <= i <= len(funcs):
        raise InvalidArgumentError(f"coordinate index {i} outside 1..{len(funcs)}")
    return funcs[i - 1]


def B_coordinate(c, t, mu, fam, i, which="h"):
    """``B_i(t, mu) = integral of L_{t,mu} f_i d mu`` (``i`` starts at 1)."""
    return float(node_integrals(c, t, mu, [_member(fam, i, which)], with_noise=False).drift[0])


def Sigma_coordinate(c, t, mu, fam, i, which="h"):
    """``Sigma^alpha_i(t, mu) = integral of sigma^alpha . grad h_i d mu``, one entry per alpha."""
    return node_integrals(c, t, mu, [_member(fam, i, which)]).noise[0].copy()


def A_coordinate(c, t, mu, fam, i, j, which="h"):
    ints = node_integrals(c, t, mu, [_member(fam, i, which), _member(fam, j, which)])
    return float(np.sum(ints.noise[0] * ints.noise[1]))


def coordinate_fields(c, t, mu, fam, n, which="h"):
    """All of ``B_1..B_n``, ``Sigma_1..Sigma_n`` and the Gram matrix ``A``."""
    ints = node_integrals(c, t, mu, fam.basis(which)[:n])
    sig = ints.noise
    return ints.drift, sig, np.einsum("ia,ja->ij", sig, sig)


def diffusion_sqrt(c, t, mu, x, common_noise=True):
    """Symmetric PSD root ``tau`` with ``tau tau^T = 2a - sigma sigma^T``.

    With ``common_noise=False`` sigma is ignored and ``tau = sqrt(2a)``.
    Raises :class:`ModelInconsistencyError` when an eigenvalue is below -1e-8.
    """
    x = check_points(x, c.dim)
    m = 2.0 * c.a(t, mu, x)
    if common_noise and c.noise_dim:
        s = c.sigma(t, mu, x)
        m = m - np.einsum("nia,nja->nij", s, s)
    if c.dim == 1:
        ev = m[:, 0, 0]
        if np.any(ev < DIFFUSION_PSD_TOL):
            raise ModelInconsistencyError(f"2a >= sigma sigma^T violated (min eigenvalue {ev.min():.3g})")
        return np.sqrt(np.maximum(ev, 0.0)).reshape(-1, 1, 1)
    m = 0.5 * (m + np.swapaxes(m, 1, 2))
    ev, vec = np.linalg.eigh(m)
    if np.any(ev < DIFFUSION_PSD_TOL):
        raise ModelInconsistencyError(f"2a >= sigma sigma^T violated (min eigenvalue {ev.min():.3g})")
    root = np.sqrt(np.maximum(ev, 0.0))
    return np.einsum("nik,nk,njk->nij", vec, root, vec)


def check_coefficients(c, t, mu, x):
    """Verify symmetry/PSD of ``a`` and the declared bounds at sample points; returns the worst violations."""
    x = check_points(x, c.dim)
    a, b, s = c.a(t, mu, x), c.b(t, mu, x), c.sigma(t, mu, x)
    asym = float(np.abs(a - np.swapaxes(a, 1, 2)).max(initial=0.0))
    min_ev = float(np.linalg.eigvalsh(0.5 * (a + np.swapaxes(a, 1, 2))).min(initial=0.0))
    return {
        "asymmetry": asym,
        "min_eigenvalue": min_ev,
        "ok": asym <= 1e-12 and min_ev >= A_PSD_TOL
        and np.abs(a).max(initial=0.0) <= c.sup_a
        and np.abs(b).max(initial=0.0) <= c.sup_b
        and np.abs(s).max(initial=0.0) <= c.sup_sigma,
    }


def _trapezoid(y, dt):
    y = np.asarray(y, dtype=float)
    if y.shape[0] < 2:
        return np.zeros(y.shape[1:])
    return dt * (0.5 * y[0] + y[1:-1].sum(axis=0) + 0.5 * y[-1])


def cumulative_trapezoid(y, dt):
    """Running trapezoid integral with a leading zero, along axis 0."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if y.shape[0] > 1:
        out[1:] = np.cumsum(0.5 * dt * (y[1:] + y[:-1]), axis=0)
    return out


@dataclass
class IntegrabilityReport:
    a: np.ndarray
    b: np.ndarray
    sigma_sq: np.ndarray
    threshold: float
    passed: bool = field(init=False)

    def __post_init__(self):
        vals = np.concatenate([self.a.ravel(), self.b.ravel(), self.sigma_sq.ravel()])
        self.passed = bool(np.all(np.isfinite(vals)) and np.all(vals <= self.threshold))

    def to_dict(self):
        return {"a": self.a.tolist(), "b": self.b.tolist(), "sigma_sq": self.sigma_sq.tolist(),
                "threshold": self.threshold, "pass": self.passed}


def integrability_report(c, path, threshold=1e6):
    """Time-integrated ``mu_t(|a_ij|)``, ``mu_t(|b_i|)``, ``mu_t(|sigma_ik|^2)`` (trapezoid)."""
    d, d1 = c.dim, c.noise_dim
    ia, ib, isg = [], [], []
    for t, mu in zip(path.times, path.measures):
        if len(mu) == 0:
            ia.append(np.zeros((d, d))), ib.append(np.zeros(d)), isg.append(np.zeros((d, d1)))
            continue
        w, x = mu.weights, mu.points
        ia.append(np.sum(w[:, None, None] * np.abs(c.a(t, mu, x)), axis=0))
        ib.append(np.sum(w[:, None] * np.abs(c.b(t, mu, x)), axis=0))
        isg.append(np.sum(w[:, None, None] * c.sigma(t, mu, x) ** 2, axis=0))
    dt = path.dt
    return IntegrabilityReport(_trapezoid(ia, dt), _trapezoid(ib, dt), _trapezoid(isg, dt), threshold)
