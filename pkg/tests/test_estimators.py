import numpy as np
import pytest
from sklearn.base import clone
from sklearn.decomposition import PCA

from sangernet.estimators import DistributedSangerPCA, ExactPCA, GeneralizedHebbianPCA


@pytest.fixture(scope="module")
def samples():
    rng = np.random.default_rng(0)
    d = 8
    scales = np.sqrt(3.0 * 0.6 ** np.arange(d))
    return (scales[:, None] * rng.standard_normal((d, 2000))).T  # (n_samples, n_features)


def column_cosines(A, B):
    A = A / np.linalg.norm(A, axis=1, keepdims=True)
    B = B / np.linalg.norm(B, axis=1, keepdims=True)
    return np.abs(np.einsum("kd,kd->k", A, B))


class TestExactPCA:
    def test_matches_sklearn(self, samples):
        ours = ExactPCA(n_components=3).fit(samples)
        ref = PCA(n_components=3).fit(samples)
        assert np.all(column_cosines(ours.components_, ref.components_) > 1 - 1e-8)

    def test_transform_shape(self, samples):
        est = ExactPCA(n_components=2).fit(samples)
        assert est.transform(samples[:5]).shape == (5, 2)


class TestGeneralizedHebbianPCA:
    def test_recovers_components(self, samples):
        est = GeneralizedHebbianPCA(n_components=2, alpha=0.05, n_iter=2000).fit(samples)
        truth = ExactPCA(n_components=2).fit(samples)
        assert np.all(column_cosines(est.components_, truth.components_) > 1 - 1e-6)

    def test_get_set_params(self):
        est = GeneralizedHebbianPCA(n_components=3, alpha=0.02)
        params = est.get_params()
        assert params["n_components"] == 3
        cloned = clone(est)
        assert cloned.get_params() == params

    def test_fit_transform(self, samples):
        out = GeneralizedHebbianPCA(n_components=2, n_iter=200).fit_transform(samples)
        assert out.shape == (samples.shape[0], 2)


class TestDistributedSangerPCA:
    def test_recovers_components(self, samples):
        est = DistributedSangerPCA(
            n_components=2, n_nodes=5, topology="complete", alpha=0.05, n_iter=1500
        ).fit(samples)
        truth = ExactPCA(n_components=2).fit(samples)
        assert np.all(column_cosines(est.components_, truth.components_) > 1 - 1e-4)

    def test_exposes_trajectory(self, samples):
        est = DistributedSangerPCA(n_components=1, n_nodes=4, topology="cycle", n_iter=50).fit(samples)
        assert len(est.trajectory_) == 51
        assert est.node_estimates_.shape == (4, samples.shape[1], 1)

    def test_components_unit_norm(self, samples):
        est = DistributedSangerPCA(n_components=2, n_nodes=4, topology="star", n_iter=300).fit(samples)
        assert np.allclose(np.linalg.norm(est.components_, axis=1), 1.0, atol=1e-12)

    def test_unknown_topology(self, samples):
        with pytest.raises(ValueError):
            DistributedSangerPCA(topology="mesh").fit(samples)

    def test_clone(self):
        est = DistributedSangerPCA(n_components=2, n_nodes=6)
        assert clone(est).get_params() == est.get_params()
