import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from fpklift.exceptions import InvalidArgumentError
from fpklift.measure import (MeasurePath, ParticleMeasure, chart_G, chart_H, integrate, path_chart, random_cloud,
                             total_mass, vague_distance)
from fpklift.testfn import make_bump


def clouds(dim=1, max_n=30):
    return st.integers(1, max_n).flatmap(lambda n: st.tuples(
        hnp.arrays(float, (n, dim), elements=st.floats(-6, 6)),
        hnp.arrays(float, n, elements=st.floats(0, 1)),
        st.floats(0, 1),
    )).map(lambda t: ParticleMeasure(t[0], t[1] / t[1].sum() * t[2] if t[1].sum() > 0 else t[1], dim=dim))


def test_integrate_examples():
    b = make_bump([0.0], 1.0)
    assert integrate(ParticleMeasure.dirac([0.0]), b) == 1.0
    assert integrate(ParticleMeasure([[0.0], [0.3]], [0.0, 0.0]), b) == 0.0
    x1, x2 = np.array([0.2]), np.array([-0.55])
    mu = ParticleMeasure(np.vstack([x1, x2]), [0.5, 0.5])
    assert integrate(mu, b) == pytest.approx(0.5 * b.value(x1)[0] + 0.5 * b.value(x2)[0], rel=1e-15)


def test_total_mass_examples():
    assert total_mass(ParticleMeasure.dirac([0.0])) == 1.0
    assert total_mass(ParticleMeasure.zero()) == 0.0
    assert total_mass(ParticleMeasure([[0.0], [1.0]], [0.2, 0.3])) == pytest.approx(0.5)


def test_measure_validation():
    with pytest.raises(InvalidArgumentError):
        ParticleMeasure([[0.0], [1.0]], [0.7, 0.7])
    with pytest.raises(InvalidArgumentError):
        ParticleMeasure([[0.0], [1.0]], [-0.1, 0.2])
    with pytest.raises(InvalidArgumentError):
        ParticleMeasure([[0.0]], [0.1, 0.2])
    with pytest.raises(InvalidArgumentError):
        ParticleMeasure([[np.nan]], [0.5])


def test_chart_of_zero_and_far_dirac(fam):
    assert not chart_G(ParticleMeasure.zero(), fam).any()
    assert not chart_H(ParticleMeasure.zero(), fam).any()
    assert not chart_G(ParticleMeasure.dirac([100.0]), fam).any()


def test_chart_g_matches_independent_sum(fam, rng):
    mu = random_cloud(rng, 100)
    expect = []
    for g in fam.g:
        total = 0.0
        for x, w in zip(mu.points[:, 0], mu.weights):
            q = 1 - ((x - g.center[0]) / g.radius) ** 2
            total += w * (np.exp(1 - 1 / q) if q > 0 else 0.0)
        expect.append(total)
    assert np.allclose(chart_G(mu, fam), expect, rtol=1e-12, atol=1e-15)


def test_chart_h_is_rescaled_g(fam, rng):
    mu = random_cloud(rng, 100)
    scale = 2.0 ** -np.arange(1, len(fam) + 1) / fam.norms
    assert np.allclose(chart_H(mu, fam), scale * chart_G(mu, fam), rtol=1e-13, atol=0)


@given(mu=clouds())
def test_chart_h_bound(fam, mu):
    z = chart_H(mu, fam)
    assert np.all(np.abs(z) <= 2.0 ** -np.arange(1, len(fam) + 1) + 1e-12)


@given(mu=clouds(), nu=clouds(), rho=clouds())
def test_vague_distance_is_pseudometric(fam, mu, nu, rho):
    assert vague_distance(mu, mu, fam) == 0.0
    assert vague_distance(mu, nu, fam) == vague_distance(nu, mu, fam)
    assert vague_distance(mu, rho, fam) <= vague_distance(mu, nu, fam) + vague_distance(nu, rho, fam) + 1e-15


def test_vague_distance_triangle_random_triples(fam, rng):
    for _ in range(50):
        a, b, c = (random_cloud(rng, 20, mass=rng.uniform(0, 1)) for _ in range(3))
        assert vague_distance(a, c, fam) <= vague_distance(a, b, fam) + vague_distance(b, c, fam) + 1e-15


def test_path_chart_examples(fam, rng):
    mu, nu = random_cloud(rng, 10), random_cloud(rng, 10)
    const = path_chart(MeasurePath([0.0, 0.1, 0.2], [mu] * 3), fam)
    assert np.all(const.coords == const.coords[0])
    single = path_chart(MeasurePath([0.0], [mu]), fam, "G")
    assert np.array_equal(single.coords[0], chart_G(mu, fam))
    two = path_chart(MeasurePath([0.0, 0.5], [mu, nu]), fam)
    assert np.array_equal(two.coords, np.stack([chart_H(mu, fam), chart_H(nu, fam)]))


def test_path_validation(rng):
    mu = random_cloud(rng, 5)
    with pytest.raises(InvalidArgumentError):
        MeasurePath([0.0, 0.1, 0.3], [mu] * 3)
    with pytest.raises(InvalidArgumentError):
        MeasurePath([0.0, 0.0], [mu] * 2)
    with pytest.raises(InvalidArgumentError):
        MeasurePath([0.0, 0.1], [mu, random_cloud(rng, 5, dim=2)])


def test_path_json_roundtrip(tmp_path, rng):
    path = MeasurePath([0.0, 0.25, 0.5], [random_cloud(rng, 7, mass=0.6) for _ in range(3)])
    path.save_json(tmp_path / "p.json")
    back = MeasurePath.load_json(tmp_path / "p.json")
    assert np.array_equal(back.times, path.times)
    assert all(a == b for a, b in zip(back, path))


def test_coordinate_csv(tmp_path, fam, rng):
    cp = path_chart(MeasurePath([0.0, 0.5], [random_cloud(rng, 5)] * 2), fam)
    cp.save_csv(tmp_path / "z.csv")
    header = (tmp_path / "z.csv").read_text().splitlines()[0]
    assert header.split(",")[:3] == ["t", "z_1", "z_2"]


def test_pushforward_and_mean():
    mu = ParticleMeasure([[1.0], [3.0]], [0.25, 0.25])
    assert mu.mean()[0] == 2.0
    assert mu.pushforward(lambda x: x + 1).mean()[0] == 3.0
