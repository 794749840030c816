"""Compactly supported C^2 test functions and the countable dictionaries built from them.

Two concrete kinds are provided:

* :class:`Bump` -- ``A * exp(1 - 1/(1 - |x-c|^2/r^2))`` inside the ball, zero outside.
* :class:`Cutoff` -- ``chi(|x|/l)`` with ``chi`` the quintic smoothstep plateau
  (1 on [0, 1], 0 on [2, inf)), used for mass-conservation checks.

All evaluators are vectorised over an ``(n, d)`` array of points and return
``(n,)``, ``(n, d)`` and ``(n, d, d)`` arrays.
"""

import itertools
import json
from functools import lru_cache

import numpy as np

from ._validation import check_points, check_positive, check_positive_int
from .exceptions import InvalidArgumentError

# exp(1 - 1/q) underflows to exactly 0.0 below this, so masking is exact.
_Q_FLOOR = 1e-3


class TestFunction:
    """Base class: a C^2 function of compact support with exact derivatives.

    Subclasses implement :meth:`derivatives`.
    """

    __test__ = False  # not a pytest class

    dim: int
    center: np.ndarray
    support_radius: float

    def derivatives(self, x, order=2):
        """Return ``(value, grad, hess)``; entries above ``order`` are ``None``."""
        raise NotImplementedError

    def value(self, x):
        return self.derivatives(x, order=0)[0]

    def grad(self, x):
        return self.derivatives(x, order=1)[1]

    def hess(self, x):
        return self.derivatives(x, order=2)[2]

    def __call__(self, x):
        return self.value(x)

    def _grid_sups(self, grid_step):
        """Sup of |value|, max_i |d_i|, max_ij |d_ij| over the support grid."""
        d = self.dim
        k = int(np.ceil(self.support_radius / grid_step))
        axis = np.arange(-k, k + 1) * grid_step
        sups = np.zeros(3)
        # chunk over the first axis so large d stays within memory
        rest = [axis] * (d - 1)
        for x0 in axis:
            if d == 1:
                pts = np.array([[x0]])
            else:
                mesh = np.meshgrid(*rest, indexing="ij")
                pts = np.column_stack([np.full(mesh[0].size, x0)] + [m.ravel() for m in mesh])
            pts = pts + self.center
            v, g, h = self.derivatives(pts)
            sups = np.maximum(sups, [np.abs(v).max(), np.abs(g).max(), np.abs(h).max()])
        return sups


class Bump(TestFunction):
    """Smooth bump ``amplitude * exp(1 - 1/(1 - |x-c|^2/r^2))`` supported in the open ball."""

    def __init__(self, center, radius, amplitude=1.0):
        check_positive(float(radius), "radius")
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if c.ndim != 1:
            raise InvalidArgumentError(f"center must be a vector, got shape {c.shape}")
        self.center = c
        self.center.flags.writeable = False
        self.dim = c.shape[0]
        self.radius = float(radius)
        self.support_radius = self.radius
        self.amplitude = float(amplitude)

    def __repr__(self):
        return f"Bump(center={self.center.tolist()}, radius={self.radius!r}, amplitude={self.amplitude!r})"

    def scaled(self, factor):
        return Bump(self.center, self.radius, self.amplitude * factor)

    def derivatives(self, x, order=2):
        x = check_points(x, self.dim)
        r2 = self.radius * self.radius
        u = x - self.center
        s = np.einsum("nd,nd->n", u, u) / r2
        q = 1.0 - s
        inside = q > _Q_FLOOR
        qs = np.where(inside, q, 1.0)
        phi = np.where(inside, self.amplitude * np.exp(1.0 - 1.0 / qs), 0.0)
        if order < 1:
            return phi, None, None
        g = -2.0 / (r2 * qs * qs)
        grad = (phi * g)[:, None] * u
        if order < 2:
            return phi, grad, None
        alpha = 4.0 / (r2 * r2 * qs**4) - 8.0 / (r2 * r2 * qs**3)
        hess = alpha[:, None, None] * (u[:, :, None] * u[:, None, :])
        hess = hess + g[:, None, None] * np.eye(self.dim)
        hess = phi[:, None, None] * hess
        return phi, grad, hess

    def _grid_sups(self, grid_step):
        # Radial symmetry: every extremal configuration of |d_i| and |d_ij|
        # (on-axis, diagonal, perpendicular) lies in a coordinate 2-plane.
        if self.dim <= 2:
            return super()._grid_sups(grid_step)
        plane = Bump(self.center[:2], self.radius, self.amplitude)
        return plane._grid_sups(grid_step)


class Cutoff(TestFunction):
    """Radial plateau ``chi(|x|/l)``: 1 on the ball of radius l, 0 outside radius 2l."""

    def __init__(self, level, dim=1):
        self.level = check_positive(float(level), "level")
        self.dim = check_positive_int(dim, "dim")
        self.center = np.zeros(self.dim)
        self.support_radius = 2.0 * self.level

    def __repr__(self):
        return f"Cutoff(level={self.level!r}, dim={self.dim})"

    @staticmethod
    def _chi(s):
        u = np.clip(s - 1.0, 0.0, 1.0)
        val = 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u * u)
        d1 = -30.0 * u * u * (1.0 - u) ** 2
        d2 = -60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
        return val, d1, d2

    def derivatives(self, x, order=2):
        x = check_points(x, self.dim)
        l = self.level
        rho = np.sqrt(np.einsum("nd,nd->n", x, x))
        val, d1, d2 = self._chi(rho / l)
        if order < 1:
            return val, None, None
        # derivatives vanish for rho <= l, so rho is bounded away from 0 where used
        rs = np.where(rho > 0.5 * l, rho, 1.0)
        e = x / rs[:, None]
        grad = (d1 / l)[:, None] * e
        if order < 2:
            return val, grad, None
        ee = e[:, :, None] * e[:, None, :]
        hess = (d2 / (l * l))[:, None, None] * ee
        hess = hess + (d1 / (l * rs))[:, None, None] * (np.eye(self.dim) - ee)
        return val, grad, hess


def make_bump(center, radius, amplitude=1.0):
    return Bump(center, radius, amplitude)


def cutoff_sequence(l, dim=1):
    """The l-th member of the cutoff sequence increasing pointwise to 1."""
    check_positive_int(l, "l")
    return Cutoff(l, dim)


def c2b_norm(f, grid_step):
    """Grid estimate of max(sup|f|, sup|d_i f|, sup|d_ij f|) over the support of ``f``."""
    check_positive(float(grid_step), "grid_step")
    return float(np.max(f._grid_sups(grid_step)))


@lru_cache(maxsize=None)
def _unit_bump_sups(dim, steps_per_radius):
    return tuple(Bump(np.zeros(dim), 1.0)._grid_sups(1.0 / steps_per_radius))


def _bump_norm(radius, dim, steps_per_radius):
    # Grid with step r/k on a radius-r bump is the unit grid rescaled.
    v, g, h = _unit_bump_sups(dim, steps_per_radius)
    return max(v, g / radius, h / radius**2)


def lattice_count(d, depth, r0=2.0):
    """Closed-form size of :func:`enumerate_family`."""
    total = 0
    for level in range(depth):
        per_axis = 2 * int(np.floor((2.0**level) / (2.0**-level * r0) + 1e-9)) + 1
        total += per_axis**d
    return total


class TestFamily:
    """Ordered dictionary ``g_1, ..., g_N`` with its normalised, weighted copy ``h_i``.

    ``h_i = 2**-i * g_i / ||g_i||_{C^2_b}``, indices starting at 1.
    """

    __test__ = False

    def __init__(self, functions, norms, params=None):
        if len(functions) == 0:
            raise InvalidArgumentError("a test family needs at least one function")
        norms = np.asarray(norms, dtype=float)
        if np.any(norms <= 0):
            raise InvalidArgumentError("family members must not vanish identically")
        dims = {f.dim for f in functions}
        if len(dims) != 1:
            raise InvalidArgumentError(f"family members have mixed dimensions {dims}")
        self.dim = dims.pop()
        self.g = tuple(functions)
        self.norms = norms
        self.norms.flags.writeable = False
        self.weights = np.array([2.0 ** -(i + 1) / n for i, n in enumerate(norms)])
        self.h = tuple(f.scaled(w) for f, w in zip(self.g, self.weights))
        self.params = dict(params or {})

    def __len__(self):
        return len(self.g)

    def truncate(self, n):
        n = check_positive_int(n, "n")
        return TestFamily(self.g[:n], self.norms[:n], {**self.params, "n_coords": n})

    def basis(self, which="h"):
        if which == "h":
            return self.h
        if which == "g":
            return self.g
        raise InvalidArgumentError(f"basis must be 'g' or 'h', got {which!r}")

    def evaluate(self, x, indices=None, which="h", order=2):
        """Stack derivatives of the selected members (0-based ``indices``) at ``x``.

        Returns arrays of shape ``(m, n)``, ``(m, n, d)``, ``(m, n, d, d)``.
        """
        funcs = self.basis(which)
        if indices is None:
            indices = range(len(funcs))
        x = check_points(x, self.dim)
        out = [funcs[i].derivatives(x, order) for i in indices]
        vals = np.stack([o[0] for o in out]) if out else np.zeros((0, len(x)))
        grads = np.stack([o[1] for o in out]) if order >= 1 and out else None
        hess = np.stack([o[2] for o in out]) if order >= 2 and out else None
        return vals, grads, hess

    def manifest(self):
        return {
            "params": self.params,
            "centers": [f.center.tolist() for f in self.g],
            "radii": [f.radius for f in self.g],
            "norms": self.norms.tolist(),
        }

    def to_json(self):
        return json.dumps(self.manifest(), indent=2)


def enumerate_family(d, depth, r0=2.0, max_size=None, steps_per_radius=200):
    """Dyadic bump dictionary.

    Level ``l = 0..depth-1`` contributes bumps of radius ``2**-l * r0`` centred on
    the lattice of the same spacing inside ``[-2**l, 2**l]^d``; levels are listed
    in order and centres lexicographically within a level. ``max_size`` keeps the
    first members only.
    """
    d = check_positive_int(d, "d")
    depth = check_positive_int(depth, "depth")
    check_positive(float(r0), "r0")
    funcs, norms = [], []
    for level in range(depth):
        spacing = 2.0**-level * r0
        k = int(np.floor((2.0**level) / spacing + 1e-9))
        axis = [j * spacing for j in range(-k, k + 1)]
        norm = _bump_norm(spacing, d, steps_per_radius)
        for c in itertools.product(axis, repeat=d):
            funcs.append(Bump(np.array(c), spacing))
            norms.append(norm)
            if max_size is not None and len(funcs) >= max_size:
                break
        if max_size is not None and len(funcs) >= max_size:
            break
    params = {"d": d, "depth": depth, "r0": float(r0), "steps_per_radius": steps_per_radius}
    if max_size is not None:
        params["n_coords"] = int(max_size)
    return TestFamily(funcs, norms, params)
