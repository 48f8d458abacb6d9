"""Error and diagnostic measures for eigenvector-estimation trajectories."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, UndefinedAngleError
from .hebbian import EigenBasis, coefficients, extend_basis


def _stack(estimates) -> np.ndarray:
    """Accept a single (d, K) matrix, a list of them, or an (M, d, K) array."""
    if isinstance(estimates, np.ndarray) and estimates.ndim == 2:
        return estimates[None, :, :]
    return np.asarray(estimates, dtype=float)


def avg_angle_error(estimates, truth: EigenBasis | np.ndarray) -> float:
    """Mean over nodes and columns of ``1 - cos^2(x_{i,k}, q_k)``.

    Lies in [0, 1]; invariant to per-column sign flips and to positive
    rescalings of the estimate columns.
    """
    X = _stack(estimates)
    Q = truth.vectors if isinstance(truth, EigenBasis) else np.asarray(truth, dtype=float)
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        raise UndefinedAngleError("zero-norm estimate column")
    cosines = np.einsum("mdk,dk->mk", X, Q) / norms
    # rounding can push a perfect cosine a few ulps past 1; the metric is 0 there
    return float(np.mean(np.clip(1.0 - cosines**2, 0.0, None)))


def consensus_deviation(estimates, reduce: str = "max") -> float:
    """Distance of node iterates from the network average, per column.

    ``reduce='max'`` reports the worst node (the conservative statistic);
    ``reduce='mean'`` averages over nodes and columns.
    """
    X = _stack(estimates)
    dev = np.linalg.norm(X - X.mean(axis=0, keepdims=True), axis=1)
    if reduce == "max":
        return float(dev.max())
    if reduce == "mean":
        return float(dev.mean())
    raise ValueError(f"unknown reduce {reduce!r}")


def subspace_distance(estimates, truth: EigenBasis | np.ndarray) -> float:
    """Sine of the largest principal angle between the mean span and the truth span.

    Diagnostic only: per-column angles are the primary accuracy measure, since a
    perfect subspace can still pair individual columns with the wrong
    eigenvectors.
    """
    X = _stack(estimates).mean(axis=0)
    Q = truth.vectors if isinstance(truth, EigenBasis) else np.asarray(truth, dtype=float)
    qx, _ = np.linalg.qr(X)
    return float(np.linalg.norm(Q - qx @ (qx.T @ Q), 2))


def rayleigh(C, x: np.ndarray) -> float:
    """Unnormalized quadratic form ``x^T C x``."""
    C = getattr(C, "matrix", C)
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) == 0.0:
        raise ValueError("x must be nonzero")
    return float(x @ np.asarray(C, dtype=float) @ x)


@dataclass
class Trajectory:
    """Per-iteration rows of a simulation run plus strided estimate snapshots."""

    iteration: np.ndarray
    comm_units: np.ndarray
    error: np.ndarray
    consensus_dev: np.ndarray
    flags: frozenset[str] = field(default_factory=frozenset)
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.iteration = np.asarray(self.iteration, dtype=int)
        self.comm_units = np.asarray(self.comm_units, dtype=float)
        self.error = np.asarray(self.error, dtype=float)
        self.consensus_dev = np.asarray(self.consensus_dev, dtype=float)
        if np.any(np.diff(self.iteration) <= 0):
            raise ValueError("iteration indices must be strictly increasing")
        if np.any(np.diff(self.comm_units) < 0):
            raise ValueError("comm_units must be non-decreasing")
        if np.any((self.error < 0) | (self.error > 1)):
            raise ValueError("error values must lie in [0, 1]")

    def __len__(self) -> int:
        return int(self.iteration.size)

    @property
    def final_error(self) -> float:
        return float(self.error[-1])

    def to_csv(self, path: str | Path, trial: int = 0) -> None:
        flag_text = "|".join(sorted(self.flags))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial", "iter", "comm_units", "error", "consensus_dev", "flags"])
            for it, cu, err, dev in zip(
                self.iteration, self.comm_units, self.error, self.consensus_dev
            ):
                writer.writerow([trial, it, f"{cu:.10g}", f"{err:.17g}", f"{dev:.17g}", flag_text])


def fit_decay_rate(values: np.ndarray, burn_in: int = 0) -> float:
    """Least-squares per-step ratio of a (presumed) geometric series.

    Fits log(values) against the step index over the post-burn-in region and
    returns exp(slope). Entries at or below 1e-300 are dropped.
    """
    values = np.asarray(values, dtype=float)[burn_in:]
    keep = values > 1e-300
    if keep.sum() < 2:
        raise InsufficientDataError("need at least two positive values to fit a rate")
    idx = np.arange(values.size)[keep]
    slope = np.polyfit(idx, np.log(values[keep]), 1)[0]
    return float(np.exp(slope))


@dataclass
class ProbeSeries:
    name: str
    values: np.ndarray
    bound: np.ndarray | float | None
    passed: bool


@dataclass
class ProbeReport:
    series: list[ProbeSeries]
    iterations: np.ndarray

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.series)

    def failed_names(self) -> list[str]:
        return [s.name for s in self.series if not s.passed]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration"] + [s.name for s in self.series])
            for row_i, it in enumerate(self.iterations):
                writer.writerow([it] + [f"{s.values[row_i]:.17g}" for s in self.series])


def lemma_probes(
    trajectory: Trajectory,
    truth: EigenBasis,
    alpha: float,
    mixing_beta: float | None = None,
    lambda1: float | None = None,
    C=None,
    covariances: np.ndarray | None = None,
    burn_in_fraction: float = 0.5,
) -> ProbeReport:
    """Evaluate the trajectory's snapshots against the analysis bounds.

    Probes (each a series with a pass/fail verdict):

    - ``max_col_norm``      vs sqrt(3)
    - ``max_rayleigh``      x^T C x vs 1/alpha (needs ``C``)
    - ``lower_coeff_sum``   non-increasing after burn-in, decay ratio < 1
    - ``upper_coeff_ratio`` per-snapshot decay vs rho_k = ((1+a*l_{k+1})/(1+a*l_k))^2
    - ``h_norm_margin``     ||h_k|| vs 3(k+2) lambda_1 max_i||x_{i,k} - xbar_k|| (multi-node)

    Bounds with purely existential constants are checked as decay/plateau
    shapes, not as literal constants.
    """
    if not trajectory.snapshots:
        raise InsufficientDataError("trajectory has no estimate snapshots")
    iters = np.array(sorted(trajectory.snapshots), dtype=int)
    states = [_stack(trajectory.snapshots[i]) for i in iters]
    n_nodes, d, K = states[0].shape
    series: list[ProbeSeries] = []

    norms = np.array([np.linalg.norm(s, axis=1).max() for s in states])
    series.append(ProbeSeries("max_col_norm", norms, np.sqrt(3.0), bool(np.all(norms < np.sqrt(3.0)))))

    if C is not None:
        Cm = np.asarray(getattr(C, "matrix", C), dtype=float)
        ray = np.array([np.einsum("mdk,de,mek->mk", s, Cm, s).max() for s in states])
        series.append(ProbeSeries("max_rayleigh", ray, 1.0 / alpha, bool(np.all(ray < 1.0 / alpha))))

    full_q = extend_basis(truth.vectors)
    burn = int(len(states) * burn_in_fraction)
    means = [s.mean(axis=0) for s in states]
    z = np.stack([full_q.T @ m for m in means])  # (T, d, K)
    lower = np.array([sum((z[t, :k, k] ** 2).sum() for k in range(K)) for t in range(len(states))])
    # shape check: geometric decay while above the eventual floor, then a
    # stable plateau (no regrowth past 3x the floor)
    lower_ok = True
    if K > 1:
        floor = max(float(lower.min()), 1e-30)
        decaying = lower > 10.0 * floor
        if decaying[burn:].sum() >= 3:
            try:
                lower_ok = fit_decay_rate(lower[burn:][decaying[burn:]]) < 1.0
            except InsufficientDataError:
                pass
        post = lower[int(np.argmin(lower)) :]
        lower_ok = lower_ok and bool(np.all(post <= 3.0 * floor + 1e-12))
    series.append(ProbeSeries("lower_coeff_sum", lower, None, lower_ok))

    if lambda1 is None:
        lambda1 = float(truth.values[0])
    lam = np.concatenate([truth.values, np.zeros(max(0, d - truth.values.size))])
    upper_ok = True
    upper = np.zeros(len(states))
    stride = int(iters[1] - iters[0]) if len(iters) > 1 else 1
    for k in range(K):
        if k + 1 >= d:
            continue
        rho_k = ((1.0 + alpha * lam[k + 1]) / (1.0 + alpha * lam[k])) ** 2
        # normalized by z_{k,k}^2: each term then contracts by rho_k per step
        s_k = (z[:, k + 1 :, k] ** 2).sum(axis=1) / np.maximum(z[:, k, k] ** 2, 1e-300)
        upper = np.maximum(upper, s_k)
        # the contraction only binds while the series is clear of its plateau
        # (plateau = deflation/consensus floor) and of numerical noise; 1.5x
        # slack absorbs the transient before the per-step rate settles
        floor = max(float(s_k.min()), 1e-25)
        active = s_k[:-1] > 10.0 * floor
        active[: max(1, burn)] = False
        ratios = s_k[1:] / np.maximum(s_k[:-1], 1e-300)
        upper_ok = upper_ok and bool(np.all(ratios[active] <= 1.5 * rho_k**stride + 1e-10))
    series.append(ProbeSeries("upper_coeff_ratio", upper, None, upper_ok))

    if covariances is not None and n_nodes > 1:
        covs = np.asarray(covariances, dtype=float)
        margins = np.zeros(len(states))
        h_ok = True
        for t, s in enumerate(states):
            h = _h_columns(s, covs)
            xbar = s.mean(axis=0)
            dev = np.linalg.norm(s - xbar[None], axis=1).max(axis=0)  # per column
            for k in range(K):
                bound_k = 3.0 * (k + 3) * lambda1 * dev[k] + 1e-9
                margins[t] = max(margins[t], np.linalg.norm(h[:, k]) - bound_k)
            h_ok = h_ok and margins[t] <= 0.0
        series.append(ProbeSeries("h_norm_margin", margins, 0.0, h_ok))

    dev_series = np.array([consensus_deviation(s) for s in states])
    series.append(ProbeSeries("consensus_dev", dev_series, None, True))

    return ProbeReport(series, iters)


def _h_columns(X: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """(1/M) sum_i (H_i(x_{i,k}) - H_i(xbar_k)), deflating with each node's own columns."""
    M, d, K = X.shape
    xbar = X.mean(axis=0)
    h = np.zeros((d, K))
    for i in range(M):
        Ci = covs[i]
        for k in range(K):
            h[:, k] += _sanger_col(Ci, X[i], X[i, :, k], k) - _sanger_col(Ci, X[i], xbar[:, k], k)
    return h / M


def _sanger_col(Ci: np.ndarray, Xi: np.ndarray, v: np.ndarray, k: int) -> np.ndarray:
    Cv = Ci @ v
    out = Cv - (v @ Cv) * v
    for p in range(k):
        out -= (Xi[:, p] @ Cv) * Xi[:, p]
    return out


__all__ = [
    "avg_angle_error",
    "consensus_deviation",
    "subspace_distance",
    "rayleigh",
    "Trajectory",
    "fit_decay_rate",
    "lemma_probes",
    "ProbeReport",
    "ProbeSeries",
]
