import numpy as np
import pytest

from fpklift import cylinder as cyl
from fpklift.detflow import SolverConfig, simulate_nlfpk, weak_residual
from fpklift.exceptions import InvalidArgumentError
from fpklift.generator import null_model, ou_model
from fpklift.lift import (EnsembleLaw, EnsemblePathLaw, ce_residual, marginal_identity, rinfty_ode_residual,
                          superposition_assemble, superposition_audit, transfer_coords)
from fpklift.measure import MeasurePath, ParticleMeasure, chart_G, path_chart, random_cloud


@pytest.fixture(scope="module")
def ou_members():
    rng = np.random.default_rng(0)
    cfg = SolverConfig(2000, 1e-2, 0.5, seed=1)
    return [simulate_nlfpk(ou_model(), ParticleMeasure(m + 0.5 * rng.standard_normal((2000, 1))), cfg, k)
            for k, m in enumerate((1.0, -0.5))]


def test_weights_validation(rng):
    mu = random_cloud(rng, 4)
    with pytest.raises(InvalidArgumentError):
        EnsembleLaw([0.5, 0.6], [mu, mu])
    with pytest.raises(InvalidArgumentError):
        EnsembleLaw([1.0], [mu, mu])
    with pytest.raises(InvalidArgumentError):
        EnsembleLaw([0.5, 0.5], [mu, random_cloud(rng, 4, dim=2)])


def test_ce_dirac_linear_is_weak_residual(fam, ou_members):
    path = ou_members[0]
    eta = EnsemblePathLaw([1.0], [path])
    ce = ce_residual(eta, ou_model(), cyl.linear(3), fam)
    wr = weak_residual(path, ou_model(), fam.h[2])
    assert np.allclose(ce.values, wr.values, rtol=0, atol=1e-15)


def test_ce_constant_is_zero(fam, ou_members):
    eta = EnsemblePathLaw([0.5, 0.5], ou_members)
    assert ce_residual(eta, ou_model(), cyl.constant(2.0), fam).max_abs == 0.0


def test_ce_accepts_marginal_list(fam, ou_members):
    eta = EnsemblePathLaw([0.3, 0.7], ou_members)
    a = ce_residual(eta, ou_model(), cyl.tanh(1), fam)
    b = ce_residual(eta.marginals(), ou_model(), cyl.tanh(1), fam, times=eta.times)
    assert np.array_equal(a.values, b.values)


def test_time_varying_weights_rejected(ou_members):
    g0 = EnsembleLaw([0.5, 0.5], [m[0] for m in ou_members])
    g1 = EnsembleLaw([0.4, 0.6], [m[1] for m in ou_members])
    with pytest.raises(InvalidArgumentError):
        ce_residual([g0, g1], ou_model(), cyl.linear(1), None, times=[0.0, 0.01])


def test_transfer_coords(fam, ou_members):
    path = ou_members[0]
    const = EnsemblePathLaw([1.0], [MeasurePath(path.times[:3], [path[0]] * 3)])
    pts = transfer_coords(const, fam)
    assert all(np.array_equal(p[1], pts[0][1]) for p in pts)
    eta = EnsemblePathLaw([0.5, 0.5], ou_members)
    swapped = EnsemblePathLaw([0.5, 0.5], ou_members[::-1])
    for (w, a), (_, b), k in zip(transfer_coords(eta, fam), transfer_coords(swapped, fam), range(100)):
        assert sorted(map(tuple, a)) == sorted(map(tuple, b))
        assert np.array_equal(a[1], chart_G(ou_members[1][k], fam))


def test_rinfty_matches_weak_residual(fam, ou_members):
    path = ou_members[1]
    z = path_chart(path, fam, "G")
    r = rinfty_ode_residual(z, ou_model(), path, fam)
    w = weak_residual(path, ou_model(), fam.g)
    assert np.allclose(r.values, w.values, rtol=0, atol=1e-12)
    assert rinfty_ode_residual(path_chart(MeasurePath(path.times, [path[0]] * len(path)), fam, "G"),
                               null_model(), MeasurePath(path.times, [path[0]] * len(path)), fam).max_abs == 0.0


def test_assemble_examples(fam, ou_members):
    eta, gammas = superposition_assemble(ou_members[:1], [1.0])
    assert all(g.members == (m,) for g, m in zip(gammas, ou_members[0]))
    eta, gammas = superposition_assemble(ou_members, [1.0, 0.0])
    F = cyl.product(1, 2)
    assert gammas[-1].expect(F, fam) == F(ou_members[0][-1], fam)
    eta, gammas = superposition_assemble(ou_members, [0.25, 0.75])
    assert gammas[7].expect(F, fam) == pytest.approx(
        0.25 * F(ou_members[0][7], fam) + 0.75 * F(ou_members[1][7], fam), rel=1e-14)
    assert marginal_identity(eta, gammas)
    assert not marginal_identity(eta, gammas[::-1])


def test_audit_and_frozen_control(fam, ou_members):
    eta = EnsemblePathLaw([0.5, 0.5], ou_members)
    rep = superposition_audit(eta, ou_model(), fam, battery=[])
    assert rep["mass_fraction"] == 1.0 and rep["marginal_identity"] and rep["battery"] == []
    frozen = MeasurePath(ou_members[1].times, [ou_members[1][0]] * len(ou_members[1]))
    bad = superposition_audit(EnsemblePathLaw([0.5, 0.5], [ou_members[0], frozen]), ou_model(), fam, battery=[])
    assert bad["member_max_residual"][1] > 0.05
    assert bad["mass_fraction"] == 0.5


def test_audit_parallel_is_identical(fam, ou_members):
    eta = EnsemblePathLaw([0.5, 0.5], ou_members)
    a = superposition_audit(eta, ou_model(), fam, n_check=3, n_jobs=1)
    b = superposition_audit(eta, ou_model(), fam, n_check=3, n_jobs=4)
    assert a == b
