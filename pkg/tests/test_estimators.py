import numpy as np
import pytest
from sklearn.base import clone

from fpklift.estimators import ChartEmbedding, CommonNoiseSimulator, McKeanVlasovSimulator
from fpklift.exceptions import InvalidArgumentError
from fpklift.measure import ParticleMeasure, chart_G, chart_H


def test_chart_embedding_matches_charts(fam):
    emb = ChartEmbedding(n_coords=32).fit()
    mus = [ParticleMeasure(np.random.default_rng(k).normal(size=(20, 1))) for k in range(3)]
    assert np.array_equal(emb.transform(mus), np.stack([chart_H(m, fam) for m in mus]))
    g = ChartEmbedding(chart="G").fit().transform(mus)
    assert np.array_equal(g, np.stack([chart_G(m, fam) for m in mus]))
    assert emb.get_feature_names_out()[0] == "z_1"


def test_chart_embedding_params():
    emb = ChartEmbedding(depth=2, n_coords=5)
    assert emb.get_params()["n_coords"] == 5
    assert clone(emb).set_params(chart="G").chart == "G"
    with pytest.raises(InvalidArgumentError):
        ChartEmbedding(chart="Q").fit()


def test_simulators_fit_predict():
    emb = ChartEmbedding(n_coords=4).fit()
    x0 = np.random.default_rng(1).normal(size=100)
    sim = McKeanVlasovSimulator(n_particles=100, dt=0.1, t_final=0.5).fit(x0)
    assert sim.predict(emb).shape == (6, 4)
    again = clone(sim).fit(x0)
    assert np.array_equal(again.predict(emb), sim.predict(emb))
    cn = CommonNoiseSimulator(n_particles=100, dt=0.1, t_final=0.5, k_paths=3).fit(x0)
    assert cn.predict(emb).shape == (3, 6, 4)
