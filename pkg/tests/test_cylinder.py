import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpklift import cylinder as cyl
from fpklift.generator import B_coordinate, constant_model, node_integrals, ou_model, preset
from fpklift.measure import MeasurePath, random_cloud


@pytest.mark.parametrize("F", [cyl.linear(1), cyl.product(1, 3), cyl.square(2), cyl.tanh(1)],
                         ids=lambda F: F.name)
@given(u=st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_outer_derivatives(F, u):
    u = np.array(u[: len(F.indices)])
    h = 1e-5
    n = len(u)
    H = np.asarray(F.hess(u))
    assert np.array_equal(H, H.T)
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        assert F.grad(u)[k] == pytest.approx((F.f(u + e) - F.f(u - e)) / (2 * h), abs=10 * h * h * 10)
        assert np.allclose(H[k], (np.asarray(F.grad(u + e)) - np.asarray(F.grad(u - e))) / (2 * h), atol=1e-8)


def test_grad_sp_examples(fam, rng):
    mu = random_cloud(rng, 20)
    x = rng.normal(size=(7, 1))
    assert not np.any(cyl.grad_SP(cyl.constant(3.0), mu, fam)(x))
    assert np.array_equal(cyl.grad_SP(cyl.linear(1), mu, fam)(x), fam.h[0].grad(x))


def test_grad_sp_chain_rule(fam, rng):
    mu = random_cloud(rng, 60, scale=1.0)
    sigma = lambda x: np.sin(x) + 0.3
    eps = 1e-4
    for F in (cyl.square(1, scale=50.0), cyl.product(2, 3), cyl.tanh(2)):
        plus = mu.pushforward(lambda x: x + eps * sigma(x))
        minus = mu.pushforward(lambda x: x - eps * sigma(x))
        fd = (F(plus, fam) - F(minus, fam)) / (2 * eps)
        field = cyl.grad_SP(F, mu, fam)(mu.points)
        inner = np.sum(mu.weights * np.sum(field * sigma(mu.points), axis=1))
        assert fd == pytest.approx(inner, rel=1e-6, abs=1e-12)


def test_lbold_examples(fam, rng):
    mu = random_cloud(rng, 30)
    assert cyl.apply_Lbold(cyl.square(1), constant_model(0.0, [0.0]), 0.0, mu, fam) == 0.0
    c = ou_model()
    for i in (1, 4):
        assert cyl.apply_Lbold(cyl.linear(i), c, 0.0, mu, fam) == B_coordinate(c, 0.0, mu, fam, i)


def test_lbold_quadratic_brute_force(fam, rng):
    mu = random_cloud(rng, 25)
    c = ou_model(diffusion=0.4)
    F = cyl.product(2, 5)
    h2, h5 = fam.h[1], fam.h[4]
    u2 = sum(w * h2.value(x[None])[0] for x, w in zip(mu.points, mu.weights))
    u5 = sum(w * h5.value(x[None])[0] for x, w in zip(mu.points, mu.weights))
    total = 0.0
    for x, w in zip(mu.points, mu.weights):
        _, g2, H2 = h2.derivatives(x[None])
        _, g5, H5 = h5.derivatives(x[None])
        total += w * u5 * (0.4 * H2[0, 0, 0] - x[0] * g2[0, 0])
        total += w * u2 * (0.4 * H5[0, 0, 0] - x[0] * g5[0, 0])
    assert cyl.apply_Lbold(F, c, 0.0, mu, fam) == pytest.approx(total, rel=1e-12)


def test_hess_sp_examples(fam, rng):
    mu = random_cloud(rng, 30)
    s1 = lambda x: np.cos(x)
    s2 = lambda x: x**2 - 0.5
    assert cyl.hess_SP(cyl.linear(1), mu, fam, s1, s2) == 0.0
    half_sq = cyl.square(1, scale=0.5)
    p = np.sum(mu.weights * (s1(mu.points) * fam.h[0].grad(mu.points))[:, 0])
    assert cyl.hess_SP(half_sq, mu, fam, s1, s1) == pytest.approx(p * p, rel=1e-12)


@given(seed=st.integers(0, 10_000))
def test_hess_sp_symmetric(fam, seed):
    r = np.random.default_rng(seed)
    mu = random_cloud(r, 15)
    v1, v2 = r.normal(size=(15, 1)), r.normal(size=(15, 1))
    for F in (cyl.product(1, 2), cyl.tanh(3), cyl.square(2)):
        assert cyl.hess_SP(F, mu, fam, v1, v2) == pytest.approx(cyl.hess_SP(F, mu, fam, v2, v1), rel=1e-13,
                                                                abs=1e-300)


def test_l2_examples(fam, rng):
    mu = random_cloud(rng, 30)
    c = ou_model()
    assert cyl.apply_L2(cyl.square(1), c, 0.0, mu, fam) == cyl.apply_Lbold(cyl.square(1), c, 0.0, mu, fam)
    p1 = preset("p1")
    assert cyl.apply_L2(cyl.linear(2), p1, 0.0, mu, fam) == cyl.apply_Lbold(cyl.linear(2), p1, 0.0, mu, fam)


def test_l2_quadratic_common_noise_brute_force(fam, rng):
    mu = random_cloud(rng, 20)
    c = preset("p1")
    F = cyl.product(1, 2)
    ints = node_integrals(c, 0.0, mu, [fam.h[0], fam.h[1]])
    u, B = ints.values, ints.drift
    s = [sum(w * fam.h[k].grad(x[None])[0, 0] for x, w in zip(mu.points, mu.weights)) for k in (0, 1)]
    expect = u[1] * B[0] + u[0] * B[1] + 0.5 * (s[0] * s[1] + s[1] * s[0])
    assert cyl.apply_L2(F, c, 0.0, mu, fam) == pytest.approx(expect, rel=1e-12)


def test_path_terms_agree_with_pointwise(fam, rng):
    times = [0.0, 0.1, 0.2]
    path = MeasurePath(times, [random_cloud(rng, 10) for _ in times])
    c = preset("p2")
    F = cyl.tanh(2)
    vals, gen = cyl.path_terms(F, c, path, fam, second_order=True)
    for k, (t, mu) in enumerate(zip(times, path)):
        assert vals[k] == pytest.approx(F(mu, fam), rel=1e-14)
        assert gen[k] == pytest.approx(cyl.apply_L2(F, c, t, mu, fam), rel=1e-12)


def test_index_validation(fam, rng):
    with pytest.raises(ValueError):
        cyl.linear(0)
    with pytest.raises(ValueError):
        cyl.linear(len(fam) + 1)(random_cloud(rng, 3), fam)
