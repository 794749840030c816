"""Particle representation of subprobability measures and their coordinate charts."""

import csv
import json
from dataclasses import dataclass

import numpy as np

from ._validation import check_points, check_same_dim
from .exceptions import InvalidArgumentError

MASS_TOL = 1e-12


class ParticleMeasure:
    """Finite weighted point cloud ``sum_m w_m delta_{x_m}`` with ``w >= 0``, ``sum w <= 1``."""

    __slots__ = ("points", "weights", "dim")

    def __init__(self, points, weights=None, dim=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1) if dim in (None, 1) else pts.reshape(-1, dim)
        if pts.ndim != 2:
            raise InvalidArgumentError(f"points must have shape (n, d), got {pts.shape}")
        if dim is not None and pts.shape[1] != dim:
            raise InvalidArgumentError(f"points have dimension {pts.shape[1]}, expected {dim}")
        n = pts.shape[0]
        if weights is None:
            w = np.full(n, 1.0 / n) if n else np.zeros(0)
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != n:
            raise InvalidArgumentError(f"{n} points but {w.shape[0]} weights")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise InvalidArgumentError("points and weights must be finite")
        if np.any(w < 0):
            raise InvalidArgumentError("weights must be non-negative")
        if w.sum() > 1.0 + MASS_TOL:
            raise InvalidArgumentError(f"total mass {w.sum()!r} exceeds 1")
        self._set(pts, w)

    def _set(self, pts, w):
        pts.flags.writeable = False
        w.flags.writeable = False
        self.points = pts
        self.weights = w
        self.dim = pts.shape[1]

    @classmethod
    def _trusted(cls, points, weights):
        """Skip validation; used by solvers that maintain the invariants themselves."""
        obj = cls.__new__(cls)
        obj._set(points, weights)
        return obj

    @classmethod
    def zero(cls, dim=1):
        return cls(np.zeros((0, dim)), np.zeros(0), dim=dim)

    @classmethod
    def dirac(cls, x, mass=1.0):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls(x.reshape(1, -1), [mass], dim=x.shape[0])

    def __len__(self):
        return self.points.shape[0]

    def __repr__(self):
        return f"ParticleMeasure(n={len(self)}, dim={self.dim}, mass={self.mass:.6g})"

    @property
    def mass(self):
        return float(self.weights.sum())

    def mean(self):
        """Normalised first moment; zero for the zero measure."""
        m = self.mass
        if m == 0.0:
            return np.zeros(self.dim)
        return self.weights @ self.points / m

    def pushforward(self, fn):
        """Image measure under ``x -> fn(x)`` (vectorised over rows)."""
        return ParticleMeasure(fn(self.points), self.weights.copy(), dim=self.dim)

    def to_dict(self):
        return {"dim": self.dim, "points": self.points.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, data):
        d = int(data["dim"])
        pts = np.asarray(data["points"], dtype=float).reshape(-1, d)
        return cls(pts, data["weights"], dim=d)

    def __eq__(self, other):
        if not isinstance(other, ParticleMeasure):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(self.weights, other.weights)

    __hash__ = None


def _check_grid(times):
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size == 0:
        raise InvalidArgumentError("time grid must be non-empty")
    if t.size > 1:
        dt = np.diff(t)
        if np.any(dt <= 0):
            raise InvalidArgumentError("time grid must be strictly increasing")
        if np.max(np.abs(dt - dt[0])) > 1e-12 * max(abs(t[-1]), abs(dt[0]), 1.0) * t.size:
            raise InvalidArgumentError("time grid must be uniform")
    t.flags.writeable = False
    return t


class MeasurePath:
    """Measures on a uniform time grid; ``path[k]`` is the measure at ``times[k]``."""

    def __init__(self, times, measures):
        self.times = _check_grid(times)
        self.measures = tuple(measures)
        if len(self.measures) != self.times.size:
            raise InvalidArgumentError(f"{self.times.size} times but {len(self.measures)} measures")
        dims = {m.dim for m in self.measures}
        if len(dims) != 1:
            raise InvalidArgumentError(f"path mixes dimensions {sorted(dims)}")
        self.dim = dims.pop()

    def __len__(self):
        return len(self.measures)

    def __getitem__(self, k):
        return self.measures[k]

    def __iter__(self):
        return iter(self.measures)

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if len(self) > 1 else 0.0

    def masses(self):
        return np.array([m.mass for m in self.measures])

    def to_dict(self):
        return {
            "dim": self.dim,
            "times": self.times.tolist(),
            "measures": [{"points": m.points.tolist(), "weights": m.weights.tolist()} for m in self.measures],
        }

    @classmethod
    def from_dict(cls, data):
        d = int(data["dim"])
        ms = [ParticleMeasure(np.asarray(m["points"], dtype=float).reshape(-1, d), m["weights"], dim=d)
              for m in data["measures"]]
        return cls(data["times"], ms)

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class CoordinatePath:
    times: np.ndarray
    coords: np.ndarray  # (K, N)

    def save_csv(self, path):
        n = self.coords.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"z_{i + 1}" for i in range(n)])
            for t, row in zip(self.times, self.coords):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def integrate(mu, f):
    """``mu(f) = sum_m w_m f(x_m)``."""
    if f.dim != mu.dim:
        raise InvalidArgumentError(f"dimension mismatch: measure {mu.dim}, function {f.dim}")
    if len(mu) == 0:
        return 0.0
    return float(mu.weights @ f.value(mu.points))


def total_mass(mu):
    return mu.mass


def _chart(mu, funcs, dim):
    if mu.dim != dim:
        raise InvalidArgumentError(f"dimension mismatch: measure {mu.dim}, family {dim}")
    if len(mu) == 0:
        return np.zeros(len(funcs))
    return np.array([mu.weights @ f.value(mu.points) for f in funcs])


def chart_G(mu, fam):
    """Coordinates ``(mu(g_i))_i`` truncated to the family size."""
    return _chart(mu, fam.g, fam.dim)


def chart_H(mu, fam):
    """Coordinates ``(mu(h_i))_i``; component i is bounded by ``2**-i`` for subprobabilities."""
    return _chart(mu, fam.h, fam.dim)


def vague_distance(mu, nu, fam):
    """Euclidean distance between H-coordinates; metrises vague convergence as N grows."""
    check_same_dim(mu, nu)
    return float(np.linalg.norm(chart_H(mu, fam) - chart_H(nu, fam)))


def path_chart(path, fam, which="H"):
    if which not in ("G", "H"):
        raise InvalidArgumentError(f"which must be 'G' or 'H', got {which!r}")
    chart = chart_G if which == "G" else chart_H
    return CoordinatePath(path.times, np.stack([chart(m, fam) for m in path.measures]))


def random_cloud(rng, n, dim=1, mass=1.0, scale=1.5):
    """Random cloud with Gaussian points and Dirichlet weights of the given total mass."""
    pts = rng.normal(scale=scale, size=(n, dim))
    w = rng.dirichlet(np.ones(n)) * mass
    return ParticleMeasure(check_points(pts, dim), w, dim=dim)
