"""Cylinder functions ``F(mu) = f(mu(h_{i_1}), ..., mu(h_{i_n}))`` and the operators acting on them.

Coordinate indices are 1-based, matching ``h_i = 2**-i g_i / ||g_i||``.
"""

import numpy as np

from .exceptions import InvalidArgumentError
from .generator import node_integrals


class CylinderFunction:
    """Outer function ``f`` on R^n composed with measure coordinates.

    ``f``, ``grad`` and ``hess`` take a length-n vector ``u`` and return a
    scalar, an ``(n,)`` and an ``(n, n)`` array. ``which`` selects the base
    dictionary (``"h"`` by default, ``"g"`` for the raw bumps).
    """

    def __init__(self, indices, f, grad, hess, which="h", name="F", bounds=None):
        idx = tuple(int(i) for i in indices)
        if not idx or min(idx) < 1:
            raise InvalidArgumentError(f"indices must be non-empty and >= 1, got {indices!r}")
        self.indices = idx
        self.f = f
        self.grad = grad
        self.hess = hess
        self.which = which
        self.name = name
        self.bounds = bounds or {}

    def __repr__(self):
        return f"CylinderFunction({self.name}, indices={self.indices}, which={self.which!r})"

    def _funcs(self, fam):
        basis = fam.basis(self.which)
        if max(self.indices) > len(basis):
            raise InvalidArgumentError(f"index {max(self.indices)} exceeds family size {len(basis)}")
        return [basis[i - 1] for i in self.indices]

    def coords(self, mu, fam):
        funcs = self._funcs(fam)
        if len(mu) == 0:
            return np.zeros(len(funcs))
        return np.array([np.sum(mu.weights * f.value(mu.points)) for f in funcs])

    def __call__(self, mu, fam):
        return float(self.f(self.coords(mu, fam)))


def linear(k, which="h"):
    n = 1
    return CylinderFunction([k], lambda u: u[0], lambda u: np.ones(n), lambda u: np.zeros((n, n)),
                            which, f"u_{k}", {"f": 1.0, "df": 1.0, "d2f": 0.0})


def product(k, l, which="h"):
    if k == l:
        return square(k, which)
    return CylinderFunction([k, l], lambda u: u[0] * u[1], lambda u: np.array([u[1], u[0]]),
                            lambda u: np.array([[0.0, 1.0], [1.0, 0.0]]), which, f"u_{k}*u_{l}")


def square(k, which="h", scale=1.0):
    return CylinderFunction([k], lambda u: scale * u[0] ** 2, lambda u: np.array([2.0 * scale * u[0]]),
                            lambda u: np.array([[2.0 * scale]]), which,
                            f"u_{k}^2" if scale == 1.0 else f"{scale:g}*u_{k}^2")


def tanh(k, which="h"):
    def grad(u):
        return np.array([1.0 - np.tanh(u[0]) ** 2])

    def hess(u):
        th = np.tanh(u[0])
        return np.array([[-2.0 * th * (1.0 - th * th)]])

    return CylinderFunction([k], lambda u: np.tanh(u[0]), grad, hess, which, f"tanh(u_{k})",
                            {"f": 1.0, "df": 1.0, "d2f": 4.0 / (3.0 * np.sqrt(3.0))})


def constant(value, k=1, which="h"):
    return CylinderFunction([k], lambda u: float(value), lambda u: np.zeros(1), lambda u: np.zeros((1, 1)),
                            which, f"const({value:g})")


def audit_battery(n=5, which="h"):
    """All ``u_k``, ``u_k u_l`` (k <= l) and ``tanh(u_k)`` for ``k, l <= n``."""
    out = [linear(k, which) for k in range(1, n + 1)]
    out += [product(k, l, which) for k in range(1, n + 1) for l in range(k, n + 1)]
    out += [tanh(k, which) for k in range(1, n + 1)]
    return out


def grad_SP(F, mu, fam):
    """The tangent vector field ``x -> sum_k d_k f(coords) grad h_{i_k}(x)``."""
    funcs = F._funcs(fam)
    df = np.asarray(F.grad(F.coords(mu, fam)), dtype=float)

    def field(x):
        out = 0.0
        for w, f in zip(df, funcs):
            out = out + w * f.grad(x)
        return out

    return field


def apply_Lbold(F, c, t, mu, fam):
    """``<a grad + b, grad_SP F(mu)>_{L^2(mu)}`` in its expanded form ``sum_k d_k f * B_{i_k}``."""
    ints = node_integrals(c, t, mu, F._funcs(fam), with_noise=False)
    return float(np.sum(np.asarray(F.grad(ints.values)) * ints.drift))


def _field_values(field, x):
    if callable(field):
        return np.asarray(field(x), dtype=float)
    return np.asarray(field, dtype=float)


def hess_SP(F, mu, fam, sigma1, sigma2):
    """``sum_kl d_kl f * mu(sigma1 . grad h_l) * mu(sigma2 . grad h_k)``.

    ``sigma1``/``sigma2`` are callables ``(n, d) -> (n, d)`` or arrays of
    values at the particle locations of ``mu``.
    """
    funcs = F._funcs(fam)
    if len(mu) == 0:
        return 0.0
    x, w = mu.points, mu.weights
    s1, s2 = _field_values(sigma1, x), _field_values(sigma2, x)
    p1 = np.empty(len(funcs))
    p2 = np.empty(len(funcs))
    for k, f in enumerate(funcs):
        g = f.grad(x)
        p1[k] = np.sum(w * np.einsum("nd,nd->n", s1, g))
        p2[k] = np.sum(w * np.einsum("nd,nd->n", s2, g))
    d2f = np.asarray(F.hess(F.coords(mu, fam)), dtype=float)
    return float(np.einsum("kl,l,k->", d2f, p1, p2))


def apply_L2(F, c, t, mu, fam):
    """Second-order lifted generator ``Lbold F + 1/2 sum_alpha Hess(F)(sigma^alpha, sigma^alpha)``."""
    out = apply_Lbold(F, c, t, mu, fam)
    if c.noise_dim == 0 or len(mu) == 0:
        return out
    s = c.sigma(t, mu, mu.points)
    for alpha in range(c.noise_dim):
        col = s[:, :, alpha]
        out += 0.5 * hess_SP(F, mu, fam, col, col)
    return out


class PathIntegrals:
    """Node integrals of the first ``n`` basis members along a path, stacked over time.

    ``values``/``drift`` have shape ``(K, n)``; ``noise`` ``(K, n, d1)``.
    """

    def __init__(self, c, path, fam, n, which="h", with_noise=True, law_path=None):
        funcs = fam.basis(which)[:n]
        laws = path.measures if law_path is None else law_path.measures
        rows = [node_integrals(c, t, mu, funcs, with_noise, law)
                for t, mu, law in zip(path.times, path.measures, laws)]
        self.times = path.times
        self.which = which
        self.values = np.stack([r.values for r in rows])
        self.drift = np.stack([r.drift for r in rows])
        self.noise = np.stack([r.noise for r in rows])

    def cylinder_terms(self, F, second_order=False):
        """``F(mu_t)`` and ``Lbold F(mu_t)`` (``L2 F`` if ``second_order``) at every node."""
        if F.which != self.which:
            raise InvalidArgumentError(f"cylinder uses basis {F.which!r}, integrals use {self.which!r}")
        cols = [i - 1 for i in F.indices]
        if max(cols) >= self.values.shape[1]:
            raise InvalidArgumentError(f"index {max(cols) + 1} not precomputed")
        u, drift, noise = self.values[:, cols], self.drift[:, cols], self.noise[:, cols]
        vals = np.empty(len(u))
        gen = np.empty(len(u))
        for k in range(len(u)):
            vals[k] = F.f(u[k])
            gen[k] = np.sum(np.asarray(F.grad(u[k])) * drift[k])
            if second_order and noise.shape[2]:
                gram = np.einsum("ka,la->kl", noise[k], noise[k])
                gen[k] += 0.5 * np.sum(np.asarray(F.hess(u[k])) * gram)
        return vals, gen


def path_terms(F, c, path, fam, second_order=False):
    """Convenience wrapper computing :meth:`PathIntegrals.cylinder_terms` for one cylinder."""
    ints = PathIntegrals(c, path, fam, max(F.indices), F.which, with_noise=second_order)
    return ints.cylinder_terms(F, second_order)
