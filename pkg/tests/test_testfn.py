import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpklift.exceptions import InvalidArgumentError
from fpklift.testfn import Bump, c2b_norm, cutoff_sequence, enumerate_family, lattice_count, make_bump

H = 1e-4


def fd_grad(f, x):
    d = x.shape[0]
    out = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = H
        out[i] = (f.value(x + e)[0] - f.value(x - e)[0]) / (2 * H)
    return out


def fd_hess(f, x):
    d = x.shape[0]
    out = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = H
        out[i] = (f.grad(x + e)[0] - f.grad(x - e)[0]) / (2 * H)
    return out


def test_bump_value_at_center():
    assert make_bump([0.0], 1.0, 1.0).value(np.zeros((1, 1)))[0] == 1.0


@pytest.mark.parametrize("d", [1, 2, 3])
def test_bump_vanishes_on_sphere(d):
    b = make_bump(np.full(d, 0.3), 0.7)
    u = np.random.default_rng(d).normal(size=(20, d))
    x = b.center + 0.7 * u / np.linalg.norm(u, axis=1, keepdims=True)
    v, g, h = b.derivatives(x)
    assert np.all(v == 0) and np.all(g == 0) and np.all(h == 0)


def test_bump_gradient_matches_central_difference():
    b = make_bump([0.0], 1.0, 1.0)
    x = np.array([0.5])
    h = 1e-5
    fd = (b.value(x + h)[0] - b.value(x - h)[0]) / (2 * h)
    assert abs(b.grad(x)[0, 0] - fd) <= 1e-8


coords = st.floats(-2, 2, allow_nan=False)


@given(d=st.integers(1, 3), radius=st.floats(0.5, 2.0), data=st.data())
def test_bump_derivatives_match_finite_differences(d, radius, data):
    c = np.array(data.draw(st.lists(coords, min_size=d, max_size=d)))
    b = Bump(c, radius, data.draw(st.floats(0.1, 2.0)))
    rel = np.array(data.draw(st.lists(st.floats(-0.7, 0.7), min_size=d, max_size=d)))
    x = c + radius * rel / max(1.0, np.linalg.norm(rel) / 0.9)
    # FD truncation error scales with the third and fourth derivatives ~ r^-3, r^-4
    tol_g = 10 * H**2 * 50 / radius**3
    tol_h = 10 * H**2 * 500 / radius**4
    assert np.allclose(b.grad(x)[0], fd_grad(b, x), atol=tol_g, rtol=0)
    hs = b.hess(x)[0]
    assert np.allclose(hs, fd_hess(b, x), atol=tol_h, rtol=0)
    assert np.array_equal(hs, hs.T)


@given(d=st.integers(1, 3), data=st.data())
def test_bump_zero_outside_support(d, data):
    b = Bump(np.zeros(d), 1.0)
    u = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=d, max_size=d)))
    if np.linalg.norm(u) == 0:
        u[0] = 1.0
    x = u / np.linalg.norm(u) * data.draw(st.floats(1.0, 10.0))
    v, g, h = b.derivatives(x)
    assert v[0] == 0 and not g.any() and not h.any()


def test_zero_function_norm():
    assert c2b_norm(make_bump([0.0], 1.0, 0.0), 0.01) == 0.0


def test_unit_bump_norm_lower_bound_and_refinement():
    b = make_bump([0.0], 1.0)
    coarse = c2b_norm(b, 1 / 200)
    fine = c2b_norm(b, 1 / 2000)
    assert coarse >= 1.0
    assert abs(coarse - fine) / fine < 0.01


def test_three_dim_norm_uses_planar_reduction_consistently():
    b3 = make_bump(np.zeros(3), 1.0)
    b2 = make_bump(np.zeros(2), 1.0)
    assert c2b_norm(b3, 0.02) == c2b_norm(b2, 0.02)


@pytest.mark.parametrize("l", [1, 2, 4])
def test_cutoff_plateau_and_support(l):
    phi = cutoff_sequence(l)
    inner = np.linspace(-l, l, 101)[:, None]
    outer = np.concatenate([np.linspace(2 * l, 5 * l, 50), -np.linspace(2 * l, 5 * l, 50)])[:, None]
    assert np.all(phi.value(inner) == 1.0)
    assert np.all(phi.value(outer) == 0.0)


def test_cutoff_gradient_scales_inversely():
    sups = []
    for l in (1, 2, 4):
        x = np.linspace(-3 * l, 3 * l, 60001)[:, None]
        sups.append(np.abs(cutoff_sequence(l).grad(x)).max())
    assert sups[0] * 1 == pytest.approx(sups[1] * 2, rel=1e-3)
    assert sups[0] * 1 == pytest.approx(sups[2] * 4, rel=1e-3)


def test_cutoff_derivatives_in_two_dimensions():
    phi = cutoff_sequence(1, dim=2)
    for x in np.array([[1.2, 0.3], [0.4, -1.5], [-1.1, -0.9]]):
        assert np.allclose(phi.grad(x)[0], fd_grad(phi, x), atol=1e-6)
        assert np.allclose(phi.hess(x)[0], fd_hess(phi, x), atol=1e-5)


def test_family_first_member():
    fam = enumerate_family(1, 1, 2.0)
    assert len(fam) == 1
    assert fam.g[0].center.tolist() == [0.0] and fam.g[0].radius == 2.0


def brute_force_lattice(d, depth, r0):
    out = []
    for level in range(depth):
        s = 2.0**-level * r0
        axis = [j * s for j in range(-1000, 1001) if abs(j * s) <= 2.0**level + 1e-12]
        out += [(c, s) for c in itertools.product(axis, repeat=d)]
    return out


@pytest.mark.parametrize("d,depth", [(1, 2), (1, 4), (2, 2), (2, 3), (3, 2)])
def test_family_size_matches_lattice(d, depth):
    fam = enumerate_family(d, depth, 2.0, steps_per_radius=40)
    brute = brute_force_lattice(d, depth, 2.0)
    assert len(fam) == lattice_count(d, depth, 2.0) == len(brute)
    assert [(tuple(f.center), f.radius) for f in fam.g] == brute


def test_family_entries_distinct_and_deterministic():
    a = enumerate_family(2, 3, 2.0, steps_per_radius=40)
    b = enumerate_family(2, 3, 2.0, steps_per_radius=40)
    keys = [(tuple(f.center), f.radius) for f in a.g]
    assert len(set(keys)) == len(keys)
    assert a.to_json() == b.to_json()


def test_family_normalisation(fam):
    assert np.all(fam.norms > 0)
    for i, (h, g) in enumerate(zip(fam.h, fam.g), start=1):
        n = c2b_norm(h, g.radius / 200)
        assert n == pytest.approx(2.0**-i, rel=1e-12)


def test_family_known_norms(fam):
    assert fam.norms[0] == pytest.approx(5.266, abs=2e-3)
    assert fam.norms[1] == pytest.approx(21.066, abs=2e-3)


def test_family_truncate_and_basis(fam):
    t = fam.truncate(5)
    assert len(t) == 5 and t.g == fam.g[:5]
    with pytest.raises(InvalidArgumentError):
        fam.basis("x")


def test_evaluate_shapes(fam2):
    v, g, h = fam2.evaluate(np.zeros((3, 2)), indices=[0, 1], which="g")
    assert v.shape == (2, 3) and g.shape == (2, 3, 2) and h.shape == (2, 3, 2, 2)


def test_invalid_radius():
    with pytest.raises(ValueError):
        Bump([0.0], 0.0)
