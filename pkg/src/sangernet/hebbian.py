"""Centralized eigensolvers built on the Sanger (generalized Hebbian) direction.

The Sanger direction for a covariance C and estimate matrix X is

    H(C, X) = C X - X upper(X^T C X)

where ``upper`` zeroes the strictly-lower triangle. Column k of H expands to

    C x_k - (x_k^T C x_k) x_k - sum_{p<k} x_p x_p^T C x_k,

i.e. a power step with an implicit normalization term and a Gram-Schmidt-style
deflation against the earlier columns. Running ``X <- X + alpha H(C, X)`` is
full-batch generalized Hebbian learning; it converges to the individual top-K
eigenvectors (not just their span) when the top-K eigenvalues are distinct.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datamodel import Covariance
from .errors import ConvergenceError, DegenerateSpectrumError

FLAG_STEP_SIZE = "step-size-above-bound"
FLAG_ORTHOGONAL_INIT = "init-orthogonal-to-target"


def _matrix(C: np.ndarray | Covariance) -> np.ndarray:
    if isinstance(C, Covariance):
        return C.matrix
    return np.asarray(C, dtype=float)


def upper_triangular(m: np.ndarray) -> np.ndarray:
    """Zero all entries strictly below the diagonal."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("input must be square")
    return np.triu(m)


def sanger_direction(C: np.ndarray | Covariance, X: np.ndarray) -> np.ndarray:
    """H(C, X) = C X - X upper(X^T C X)."""
    C = _matrix(C)
    X = np.asarray(X, dtype=float)
    CX = C @ X
    return CX - X @ np.triu(X.T @ CX)


def orthonormal_init(d: int, K: int, seed: int) -> np.ndarray:
    """Seeded random d x K matrix with orthonormal columns (sign-fixed QR)."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, K)))
    return q * np.sign(np.diag(r))


def step_size_bound(lambda1: float, K: int) -> float:
    """Largest step size for which the iterate norms stay below sqrt(3)."""
    return 1.0 / (3.0 * lambda1 * (2 * K - 1))


def largest_eigenvalue(C: np.ndarray | Covariance, iters: int = 200) -> float:
    """Deterministic power-iteration estimate of lambda_1 for step-size checks."""
    C = _matrix(C)
    v = np.ones(C.shape[0]) / np.sqrt(C.shape[0])
    for _ in range(iters):
        w = C @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    return float(v @ C @ v)


@dataclass
class HebbianRun:
    """Iterate history of a centralized Hebbian run. ``iterates[0]`` is the init."""

    iterates: list[np.ndarray]
    flags: frozenset[str] = field(default_factory=frozenset)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]


def gha_run(
    C: np.ndarray | Covariance,
    K: int,
    alpha: float,
    T: int,
    init: np.ndarray | None = None,
    seed: int = 0,
) -> HebbianRun:
    """Run T full-batch generalized Hebbian steps ``X <- X + alpha H(C, X)``.

    A step size above ``step_size_bound`` is flagged, not rejected: the bound is
    sufficient for the sqrt(3) norm guarantee, not necessary for convergence.
    """
    C = _matrix(C)
    if init is None:
        init = orthonormal_init(C.shape[0], K, seed)
    X = np.array(init, dtype=float)
    flags = set()
    if alpha > step_size_bound(largest_eigenvalue(C), K):
        flags.add(FLAG_STEP_SIZE)
    iterates = [X.copy()]
    for _ in range(T):
        X = X + alpha * sanger_direction(C, X)
        iterates.append(X.copy())
    return HebbianRun(iterates, frozenset(flags))


def modified_gha_run(
    C: np.ndarray | Covariance,
    K: int,
    alpha: float,
    T: int,
    truth: "EigenBasis",
    init: np.ndarray | None = None,
    seed: int = 0,
) -> HebbianRun:
    """Hebbian run with deflation by the *true* leading eigenvectors.

    Column k follows ``x_k <- x_k + alpha (C x_k - (x_k^T C x_k) x_k
    - sum_{p<k} q_p q_p^T C x_k)``. Not implementable in practice (it needs the
    answer), but its per-column dynamics decouple, which makes it the analysis
    oracle the plain and distributed runs are compared against. Column 1
    coincides exactly with ``gha_run``'s first column.
    """
    C = _matrix(C)
    d = C.shape[0]
    if init is None:
        init = orthonormal_init(d, K, seed)
    X = np.array(init, dtype=float)
    Q = truth.vectors[:, : K - 1] if K > 1 else np.zeros((d, 0))
    flags = set()
    if alpha > step_size_bound(largest_eigenvalue(C), K):
        flags.add(FLAG_STEP_SIZE)
    for k in range(K):
        if abs(truth.vectors[:, k] @ X[:, k]) < 1e-12:
            flags.add(FLAG_ORTHOGONAL_INIT)
    # deflation projectors q_p q_p^T C, accumulated per column count
    QtC = Q.T @ C
    iterates = [X.copy()]
    for _ in range(T):
        CX = C @ X
        rayleigh = np.einsum("dk,dk->k", X, CX)
        deflate = np.zeros_like(X)
        for k in range(1, K):
            deflate[:, k] = Q[:, :k] @ (QtC[:k] @ X[:, k])
        X = X + alpha * (CX - X * rayleigh - deflate)
        iterates.append(X.copy())
    return HebbianRun(iterates, frozenset(flags))


@dataclass(frozen=True)
class EigenBasis:
    """Orthonormal eigenvector estimates with descending positive eigenvalues."""

    vectors: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vectors", np.asarray(self.vectors, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def K(self) -> int:
        return int(self.vectors.shape[1])


def orthogonal_iteration(
    C: np.ndarray | Covariance,
    K: int,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    seed: int = 0,
) -> EigenBasis:
    """Ground-truth top-K eigenpairs via QR-based orthogonal iteration.

    Signs are fixed so the largest-magnitude entry of each column is positive.
    Raises ``DegenerateSpectrumError`` when the top-K eigenvalues are tied or
    zero (the eigenvectors are then not individually identifiable).
    """
    C = _matrix(C)
    d = C.shape[0]
    if not 1 <= K <= d:
        raise ValueError(f"K must be in [1, {d}], got {K}")
    # one extra column (when available) to expose the lambda_K vs lambda_{K+1} gap
    cols = min(K + 1, d)
    Q = orthonormal_init(d, cols, seed)
    for _ in range(max_iter):
        Z = C @ Q
        Q, _ = np.linalg.qr(Z)
        vals = np.einsum("dk,dk->k", Q, C @ Q)
        order = np.argsort(vals)[::-1]
        Q, vals = Q[:, order], vals[order]
        residual = np.linalg.norm(C @ Q[:, :K] - Q[:, :K] * vals[:K], axis=0)
        if np.all(residual < tol):
            break
    else:
        gaps = -np.diff(vals[: K + 1]) if cols > K else -np.diff(vals)
        if vals[K - 1] <= 1e-12 or (gaps.size and np.min(gaps) < 1e-12):
            raise DegenerateSpectrumError(
                "orthogonal iteration stalled: top eigenvalues tied or zero"
            )
        raise ConvergenceError(f"orthogonal iteration: tol {tol} not reached in {max_iter} steps")
    if vals[K - 1] <= 1e-12:
        raise DegenerateSpectrumError("top-K eigenvalues must be nonzero")
    checked = vals[: K + 1] if cols > K else vals[:K]
    if np.any(-np.diff(checked) < 1e-12):
        raise DegenerateSpectrumError("top-K eigenvalues must be distinct")
    Q = Q[:, :K]
    signs = np.sign(Q[np.argmax(np.abs(Q), axis=0), np.arange(K)])
    return EigenBasis(Q * signs, vals[:K])


def oi_run(C: np.ndarray | Covariance, K: int, T: int, seed: int = 0) -> HebbianRun:
    """Record T orthogonal-iteration steps (baseline trajectory, no tolerance)."""
    C = _matrix(C)
    Q = orthonormal_init(C.shape[0], K, seed)
    iterates = [Q.copy()]
    for _ in range(T):
        Q, _ = np.linalg.qr(C @ Q)
        vals = np.einsum("dk,dk->k", Q, C @ Q)
        order = np.argsort(vals)[::-1]
        Q = Q[:, order]
        iterates.append(Q.copy())
    return HebbianRun(iterates)


def coefficients(x: np.ndarray, basis: np.ndarray | EigenBasis) -> np.ndarray:
    """Expansion coefficients ``z = Q^T x`` in a full orthonormal basis."""
    Q = basis.vectors if isinstance(basis, EigenBasis) else np.asarray(basis, dtype=float)
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    if Q.shape != (d, d):
        raise ValueError(f"basis must be {d}x{d} to expand a length-{d} vector")
    if np.max(np.abs(Q.T @ Q - np.eye(d))) > 1e-10:
        raise ValueError("basis columns are not orthonormal")
    return Q.T @ x


def extend_basis(Q: np.ndarray) -> np.ndarray:
    """Complete d x K orthonormal columns to a full d x d orthonormal basis."""
    Q = np.asarray(Q, dtype=float)
    d, k = Q.shape
    if k == d:
        return Q.copy()
    full, _ = np.linalg.qr(np.hstack([Q, np.eye(d)]))
    return np.hstack([Q, full[:, k:d]])
