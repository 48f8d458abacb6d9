"""Estimator-style wrappers over the Hebbian and network solvers.

These follow the scikit-learn protocol: ``(n_samples, n_features)`` input,
``fit`` / ``transform`` / ``fit_transform``, ``get_params`` / ``set_params``,
fitted attributes with trailing underscores. Internally everything is
features-by-samples, so inputs are transposed once at the boundary.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .datamodel import center, covariance, partition
from .distributed import dsa_run
from .hebbian import gha_run, orthogonal_iteration
from .topology import Graph, complete, cycle, erdos_renyi, star


def _topology(name: str, M: int, p: float, seed: int) -> Graph:
    builders = {
        "cycle": lambda: cycle(M),
        "star": lambda: star(M),
        "complete": lambda: complete(M),
        "erdos_renyi": lambda: erdos_renyi(M, p, seed),
    }
    if name not in builders:
        raise ValueError(f"unknown topology {name!r}")
    return builders[name]()


class GeneralizedHebbianPCA(TransformerMixin, BaseEstimator):
    """Top-K PCA by full-batch generalized Hebbian iteration.

    Unlike an eigensolver-backed PCA this recovers the individual leading
    eigenvectors by gradient-style iteration; ``components_`` converges to them
    when ``alpha`` is small enough and ``n_iter`` large enough.
    """

    def __init__(self, n_components: int = 1, alpha: float = 0.05, n_iter: int = 1000,
                 random_state: int = 0):
        self.n_components = n_components
        self.alpha = alpha
        self.n_iter = n_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        data = center(X.T)
        C = covariance(data)
        run = gha_run(C, self.n_components, self.alpha, self.n_iter, seed=self.random_state)
        self.components_ = run.final.T  # (n_components, n_features)
        self.flags_ = set(run.flags)
        self.mean_ = X.mean(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) @ self.components_.T


class DistributedSangerPCA(TransformerMixin, BaseEstimator):
    """Top-K PCA where the samples are split over a simulated network.

    ``fit`` partitions the rows of X across ``n_nodes``, runs the synchronous
    combine-and-update iteration over the chosen topology, and exposes the
    network-average estimate. ``trajectory_`` carries the full error /
    consensus history for inspection.
    """

    def __init__(self, n_components: int = 1, n_nodes: int = 10, topology: str = "erdos_renyi",
                 p: float = 0.5, alpha: float = 0.1, n_iter: int = 1000, random_state: int = 0):
        self.n_components = n_components
        self.n_nodes = n_nodes
        self.topology = topology
        self.p = p
        self.alpha = alpha
        self.n_iter = n_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        data = center(X.T)
        parts = partition(data, M=self.n_nodes)
        graph = _topology(self.topology, self.n_nodes, self.p, self.random_state)
        traj = dsa_run(
            parts, graph, self.n_components, self.alpha, self.n_iter,
            seed=self.random_state,
        )
        final = traj.snapshots[max(traj.snapshots)]  # (M, d, K)
        xbar = final.mean(axis=0)
        # report unit-norm components; the iteration's implicit normalization
        # only drives column norms to 1 in the limit
        xbar = xbar / np.linalg.norm(xbar, axis=0, keepdims=True)
        self.components_ = xbar.T
        self.trajectory_ = traj
        self.node_estimates_ = final
        self.flags_ = set(traj.flags)
        self.mean_ = X.mean(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) @ self.components_.T


class ExactPCA(TransformerMixin, BaseEstimator):
    """Reference top-K PCA via orthogonal iteration; ground truth for the others."""

    def __init__(self, n_components: int = 1):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        C = covariance(center(X.T))
        basis = orthogonal_iteration(C, self.n_components)
        self.components_ = basis.vectors.T
        self.explained_variance_ = basis.values
        self.mean_ = X.mean(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) @ self.components_.T
