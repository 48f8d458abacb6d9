"""Synchronous round-based simulation of DSA and its distributed baselines.

All per-node quantities are stored stacked: estimates as an ``(M, d, K)`` array
and local covariances as ``(M, d, d)``, so one round is a couple of batched
matmuls. Steps are written state-in, state-out; every node reads its neighbors'
pre-step iterates, which makes the result independent of node ordering.

Communication accounting: one unit is one d x K matrix sent by every node to
its neighbors in one round. DSA and DPGD therefore accrue one unit per round;
the sequential power method accrues ``Tc / K`` per power step (its messages are
single d-vectors).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .datamodel import Covariance, combine_covariances, covariance
from .errors import DegenerateIterateError, DisconnectedGraphError
from .hebbian import (
    FLAG_STEP_SIZE,
    EigenBasis,
    orthogonal_iteration,
    orthonormal_init,
)
from .metrics import Trajectory, avg_angle_error, consensus_deviation
from .topology import Graph, MixingMatrix, is_connected, metropolis_weights


@dataclass(frozen=True)
class NetworkState:
    """Stacked per-node estimates and covariances plus round counters."""

    estimates: np.ndarray  # (M, d, K)
    covariances: np.ndarray  # (M, d, d)
    sample_counts: np.ndarray  # (M,)
    mixing: MixingMatrix
    iteration: int = 0
    comm_units: float = 0.0

    @property
    def n_nodes(self) -> int:
        return int(self.estimates.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.estimates.shape[1], self.estimates.shape[2]


@dataclass(frozen=True)
class AverageView:
    """Network-average estimate and the mean Sanger-direction offset h."""

    xbar: np.ndarray  # (d, K)
    h: np.ndarray  # (d, K)


def make_state(
    parts: Sequence[np.ndarray],
    mixing: MixingMatrix,
    K: int,
    init: np.ndarray,
) -> NetworkState:
    """Build the initial state; every node starts from the same init matrix."""
    covs = [covariance(p) for p in parts]
    d = covs[0].d
    if init.shape != (d, K):
        raise ValueError(f"init must be {d}x{K}, got {init.shape}")
    M = len(parts)
    if mixing.n_nodes != M:
        raise ValueError("mixing matrix size does not match the number of nodes")
    return NetworkState(
        estimates=np.broadcast_to(init, (M, d, K)).copy(),
        covariances=np.stack([c.matrix for c in covs]),
        sample_counts=np.array([c.n_samples for c in covs]),
        mixing=mixing,
    )


def local_sanger_directions(covs: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Batched H_i(C_i, X_i) over all nodes."""
    CX = covs @ X
    gram = np.einsum("mdk,mdl->mkl", X, CX)
    return CX - X @ np.triu(gram)


def dsa_step(state: NetworkState, alpha: float) -> NetworkState:
    """One combine-and-update round: X_i <- sum_j w_ij X_j + alpha H_i(C_i, X_i)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    W = state.mixing.weights
    mixed = np.tensordot(W, state.estimates, axes=(1, 0))
    updated = mixed + alpha * local_sanger_directions(state.covariances, state.estimates)
    return replace(
        state,
        estimates=updated,
        iteration=state.iteration + 1,
        comm_units=state.comm_units + 1.0,
    )


def dpgd_step(state: NetworkState, alpha: float) -> NetworkState:
    """Distributed projected gradient ascent on the trace objective.

    X_i <- QR(sum_j w_ij X_j + 2 alpha C_i X_i), with the R diagonal sign-fixed
    positive so the projection is deterministic. Iterates stay orthonormal.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    W = state.mixing.weights
    raw = np.tensordot(W, state.estimates, axes=(1, 0)) + 2.0 * alpha * (
        state.covariances @ state.estimates
    )
    projected = np.empty_like(raw)
    for i in range(state.n_nodes):
        q, r = np.linalg.qr(raw[i])
        diag = np.diag(r)
        if np.any(np.abs(diag) < 1e-12):
            raise DegenerateIterateError(f"rank-deficient combine result at node {i}")
        projected[i] = q * np.sign(diag)
    return replace(
        state,
        estimates=projected,
        iteration=state.iteration + 1,
        comm_units=state.comm_units + 1.0,
    )


def average_view(state: NetworkState) -> AverageView:
    """Exact mean iterate and h columns from the current state.

    Column k of h is the mean over nodes of H_i evaluated at the node iterate
    minus H_i at the network average, holding each node's deflation columns at
    its own iterate.
    """
    X = state.estimates
    covs = state.covariances
    M, d, K = X.shape
    xbar = X.mean(axis=0)
    h = np.zeros((d, K))
    for i in range(M):
        h += _columnwise_sanger(covs[i], X[i], X[i]) - _columnwise_sanger(covs[i], X[i], xbar)
    return AverageView(xbar, h / M)


def _columnwise_sanger(Ci: np.ndarray, Xi: np.ndarray, V: np.ndarray) -> np.ndarray:
    """H_i applied per column of V, deflating against the columns of Xi."""
    CV = Ci @ V
    out = CV - V * np.einsum("dk,dk->k", V, CV)
    K = V.shape[1]
    for k in range(1, K):
        out[:, k] -= Xi[:, :k] @ (Xi[:, :k].T @ CV[:, k])
    return out


def _prepare(parts, graph: Graph, K: int, seed: int):
    if not is_connected(graph):
        raise DisconnectedGraphError("distributed runs require a connected graph")
    mixing = metropolis_weights(graph)
    global_cov = combine_covariances([covariance(p) for p in parts])
    truth = orthogonal_iteration(global_cov, K)
    init = orthonormal_init(global_cov.d, K, seed)
    return mixing, global_cov, truth, init


def _trajectory_from_rows(rows, flags, snapshots) -> Trajectory:
    arr = np.array(rows, dtype=float)
    return Trajectory(
        iteration=arr[:, 0].astype(int),
        comm_units=arr[:, 1],
        error=arr[:, 2],
        consensus_dev=arr[:, 3],
        flags=frozenset(flags),
        snapshots=snapshots,
    )


def dsa_run(
    parts: Sequence[np.ndarray],
    graph: Graph,
    K: int,
    alpha: float,
    T: int,
    seed: int,
    snapshot_stride: int = 10,
    truth: EigenBasis | None = None,
) -> Trajectory:
    """T rounds of DSA with one error/consensus row per round.

    The recommended step-size ceiling ``min_i w_ii / (3 lambda_1 (2K - 1))`` is
    checked against the oracle's lambda_1; violations flag the run but do not
    stop it.
    """
    mixing, global_cov, oracle, init = _prepare(parts, graph, K, seed)
    if truth is None:
        truth = oracle
    state = make_state(parts, mixing, K, init)
    flags = set()
    bound = mixing.min_self_weight() / (3.0 * oracle.values[0] * (2 * K - 1))
    if alpha > bound:
        flags.add(FLAG_STEP_SIZE)
    rows = []
    snapshots = {0: state.estimates.copy()}
    rows.append((0, 0.0, avg_angle_error(state.estimates, truth), consensus_deviation(state.estimates)))
    for t in range(1, T + 1):
        state = dsa_step(state, alpha)
        rows.append(
            (t, state.comm_units, avg_angle_error(state.estimates, truth), consensus_deviation(state.estimates))
        )
        if t % snapshot_stride == 0 or t == T:
            snapshots[t] = state.estimates.copy()
    return _trajectory_from_rows(rows, flags, snapshots)


def dpgd_run(
    parts: Sequence[np.ndarray],
    graph: Graph,
    K: int,
    alpha: float,
    T: int,
    seed: int,
    snapshot_stride: int = 10,
    truth: EigenBasis | None = None,
) -> Trajectory:
    """T rounds of DPGD (combine, ascend the trace objective, re-orthonormalize)."""
    mixing, global_cov, oracle, init = _prepare(parts, graph, K, seed)
    if truth is None:
        truth = oracle
    state = make_state(parts, mixing, K, init)
    rows = [(0, 0.0, avg_angle_error(state.estimates, truth), consensus_deviation(state.estimates))]
    snapshots = {0: state.estimates.copy()}
    for t in range(1, T + 1):
        state = dpgd_step(state, alpha)
        rows.append(
            (t, state.comm_units, avg_angle_error(state.estimates, truth), consensus_deviation(state.estimates))
        )
        if t % snapshot_stride == 0 or t == T:
            snapshots[t] = state.estimates.copy()
    return _trajectory_from_rows(rows, set(), snapshots)


def gha_local_run(
    parts: Sequence[np.ndarray],
    K: int,
    alpha: float,
    T: int,
    seed: int,
    snapshot_stride: int = 10,
    truth: EigenBasis | None = None,
) -> Trajectory:
    """No-collaboration baseline: every node runs GHA on its own covariance.

    Communication stays at zero; the error is still measured against the global
    truth, which is what exposes the cost of not talking.
    """
    covs = np.stack([covariance(p).matrix for p in parts])
    global_cov = combine_covariances([covariance(p) for p in parts])
    if truth is None:
        truth = orthogonal_iteration(global_cov, K)
    M, d = covs.shape[0], covs.shape[1]
    X = np.broadcast_to(orthonormal_init(d, K, seed), (M, d, K)).copy()
    rows = [(0, 0.0, avg_angle_error(X, truth), consensus_deviation(X))]
    snapshots = {0: X.copy()}
    for t in range(1, T + 1):
        X = X + alpha * local_sanger_directions(covs, X)
        rows.append((t, 0.0, avg_angle_error(X, truth), consensus_deviation(X)))
        if t % snapshot_stride == 0 or t == T:
            snapshots[t] = X.copy()
    return _trajectory_from_rows(rows, set(), snapshots)


def seqdistpm_run(
    parts: Sequence[np.ndarray],
    graph: Graph,
    K: int,
    Tc: int,
    outer_iters: int,
    seed: int,
    truth: EigenBasis | None = None,
) -> Trajectory:
    """Sequential distributed power method with consensus-averaged products.

    One eigenvector at a time: each node repeatedly multiplies its (deflated,
    sample-count-scaled) local covariance into its current vector, the products
    are averaged over ``Tc`` mixing rounds, and each node normalizes locally.
    Finished columns are frozen at each node's converged estimate and deflated
    out with that node's local Rayleigh value; columns not yet started stay at
    their initial values, which is why early error is dominated by them.
    """
    if Tc < 1:
        raise ValueError("Tc must be at least 1")
    if Tc * outer_iters * K > 10_000_000:
        raise ValueError("Tc * outer_iters * K is unreasonably large")
    mixing, global_cov, oracle, init = _prepare(parts, graph, K, seed)
    if truth is None:
        truth = oracle
    W = mixing.weights
    covs = np.stack([covariance(p).matrix for p in parts])
    counts = np.array([p.shape[1] for p in parts], dtype=float)
    M, d = covs.shape[0], covs.shape[1]
    # scale so the plain node-average of local matrices equals the global covariance
    scaled = covs * (M * counts / counts.sum())[:, None, None]

    estimates = np.broadcast_to(init, (M, d, K)).copy()
    deflated = scaled.copy()
    rows = [(0, 0.0, avg_angle_error(estimates, truth), consensus_deviation(estimates))]
    snapshots = {0: estimates.copy()}
    step = 0
    for k in range(K):
        v = estimates[:, :, k].copy()  # (M, d)
        for _ in range(outer_iters):
            u = np.einsum("mde,me->md", deflated, v)
            for _ in range(Tc):
                u = W @ u
            norms = np.linalg.norm(u, axis=1, keepdims=True)
            if np.any(norms < 1e-300):
                raise DegenerateIterateError("power iterate collapsed to zero")
            v = u / norms
            estimates[:, :, k] = v
            step += 1
            rows.append(
                (step, step * Tc / K, avg_angle_error(estimates, truth), consensus_deviation(estimates))
            )
        estimates[:, :, k] = v
        snapshots[step] = estimates.copy()
        # deflate with each node's local Rayleigh estimate of lambda_k
        lam_local = np.einsum("md,mde,me->m", v, scaled, v)
        deflated = deflated - lam_local[:, None, None] * np.einsum("md,me->mde", v, v)
    return _trajectory_from_rows(rows, set(), snapshots)
