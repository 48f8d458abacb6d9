"""Data generation, ingestion, centering, partitioning, and covariance formation.

Conventions
-----------
- A data matrix is a ``(d, N)`` float64 array: rows are features, columns are
  samples.
- ``covariance`` returns a :class:`Covariance` carrying the symmetric ``(d, d)``
  matrix together with the sample count, so that per-node covariances can be
  recombined exactly: ``N * C == sum_i N_i * C_i`` for any column partition.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InfeasiblePartitionError, InvalidSpectrumError

_BINARY_MAGIC = b"DPCA"


@dataclass(frozen=True)
class SpectrumSpec:
    """A descending list of nonnegative eigenvalues for a population covariance.

    ``eigengap(K)`` is the ratio ``lambda_{K+1} / lambda_K``; the smaller it is,
    the easier the top-K eigenvectors are to separate.
    """

    eigenvalues: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise InvalidSpectrumError("spectrum must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(vals)):
            raise InvalidSpectrumError("spectrum contains non-finite values")
        if np.any(vals < 0):
            raise InvalidSpectrumError("eigenvalues must be nonnegative")
        if np.any(np.diff(vals) > 0):
            raise InvalidSpectrumError("eigenvalues must be in descending order")
        object.__setattr__(self, "eigenvalues", vals)

    @property
    def d(self) -> int:
        return int(self.eigenvalues.size)

    def eigengap(self, k: int) -> float:
        """Ratio of the (k+1)-th to the k-th eigenvalue (1-based ``k < d``)."""
        if not 1 <= k < self.d:
            raise ValueError(f"k must be in [1, {self.d - 1}], got {k}")
        lam_k = self.eigenvalues[k - 1]
        if lam_k <= 0:
            raise InvalidSpectrumError("eigengap undefined for a zero eigenvalue")
        return float(self.eigenvalues[k] / lam_k)

    def require_distinct_top(self, k: int, tol: float = 1e-12) -> None:
        """Raise unless the top-k eigenvalues are strictly decreasing and positive."""
        top = self.eigenvalues[: k + 1] if k < self.d else self.eigenvalues[:k]
        if np.any(self.eigenvalues[:k] <= 0):
            raise InvalidSpectrumError(f"top {k} eigenvalues must be strictly positive")
        if np.any(-np.diff(top) <= tol):
            raise InvalidSpectrumError(f"top {k} eigenvalues must be strictly decreasing")

    @classmethod
    def geometric(cls, d: int, ratio: float, top: float = 1.0) -> "SpectrumSpec":
        """Spectrum ``top * ratio**l`` for ``l = 0..d-1``.

        Every consecutive eigengap equals ``ratio``, so a single number fixes
        the difficulty of the whole estimation problem.
        """
        if not 0 < ratio < 1:
            raise InvalidSpectrumError(f"ratio must lie in (0, 1), got {ratio}")
        if top <= 0:
            raise InvalidSpectrumError("top eigenvalue must be positive")
        return cls(top * ratio ** np.arange(d, dtype=float))


def _orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    """Random orthogonal matrix via QR with the sign of diag(R) fixed positive."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def population_basis(d: int, seed: int) -> np.ndarray:
    """The orthogonal rotation that :func:`generate_gaussian` applies for this seed.

    Column ``l`` is the population eigenvector paired with the l-th entry of the
    spectrum, which makes ground truth available without any eigensolve.
    """
    return _orthogonal(np.random.default_rng(seed), d)


def generate_gaussian(d: int, N: int, spectrum: SpectrumSpec, seed: int) -> np.ndarray:
    """Draw ``N`` i.i.d. zero-mean Gaussian samples with the given population spectrum.

    The diagonal spectrum is rotated by a seeded random orthogonal matrix
    (see :func:`population_basis`); output is bit-reproducible per seed.
    """
    if d < 1 or N < 1:
        raise ValueError("d and N must be positive")
    if spectrum.d != d:
        raise InvalidSpectrumError(f"spectrum has {spectrum.d} eigenvalues, expected {d}")
    rng = np.random.default_rng(seed)
    rotation = _orthogonal(rng, d)
    scales = np.sqrt(spectrum.eigenvalues)
    return rotation @ (scales[:, None] * rng.standard_normal((d, N)))


def center(data: np.ndarray) -> np.ndarray:
    """Subtract the per-row (feature) mean. Idempotent."""
    data = np.asarray(data, dtype=float)
    return data - data.mean(axis=1, keepdims=True)


def partition(
    data: np.ndarray,
    M: int | None = None,
    sizes: Sequence[int] | None = None,
    shuffle_seed: int | None = None,
) -> list[np.ndarray]:
    """Split sample columns into per-node blocks.

    Exactly one of ``M`` (near-equal split) or ``sizes`` (explicit column counts
    summing to N) must be given. Columns are assigned contiguously; pass
    ``shuffle_seed`` to permute columns first, for when contiguous blocks would
    not look like uniform draws from the data distribution.
    """
    data = np.asarray(data, dtype=float)
    n = data.shape[1]
    if (M is None) == (sizes is None):
        raise ValueError("specify exactly one of M or sizes")
    if sizes is None:
        if M < 1:
            raise InfeasiblePartitionError("M must be at least 1")
        if M > n:
            raise InfeasiblePartitionError(f"cannot split {n} samples over {M} nodes")
        base, extra = divmod(n, M)
        sizes = [base + (1 if i < extra else 0) for i in range(M)]
    else:
        sizes = [int(s) for s in sizes]
        if any(s < 1 for s in sizes):
            raise InfeasiblePartitionError("partition sizes must be positive")
        if sum(sizes) != n:
            raise InfeasiblePartitionError(f"sizes sum to {sum(sizes)}, expected {n}")
    if shuffle_seed is not None:
        data = data[:, np.random.default_rng(shuffle_seed).permutation(n)]
    bounds = np.cumsum([0] + list(sizes))
    return [data[:, bounds[i] : bounds[i + 1]].copy() for i in range(len(sizes))]


@dataclass(frozen=True)
class Covariance:
    """Symmetric PSD sample covariance with the sample count it was formed from."""

    matrix: np.ndarray
    n_samples: int = field(default=1)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("covariance matrix must be square")

    @property
    def d(self) -> int:
        return int(self.matrix.shape[0])


def covariance(data: np.ndarray) -> Covariance:
    """Sample covariance ``(1/N) Y Y^T``, symmetrized against round-off."""
    data = np.asarray(data, dtype=float)
    if not np.all(np.isfinite(data)):
        raise ValueError("data contains non-finite entries")
    n = data.shape[1]
    c = data @ data.T / n
    return Covariance((c + c.T) / 2.0, n)


def combine_covariances(parts: Sequence[Covariance]) -> Covariance:
    """Sample-count-weighted recombination of per-node covariances."""
    total = sum(p.n_samples for p in parts)
    merged = sum(p.n_samples * p.matrix for p in parts) / total
    return Covariance((merged + merged.T) / 2.0, total)


def save_binary(path: str | Path, data: np.ndarray) -> None:
    """Write the exact binary format: magic, u32 d, u32 N, column-major float64."""
    data = np.asarray(data, dtype="<f8")
    d, n = data.shape
    with open(path, "wb") as fh:
        fh.write(_BINARY_MAGIC)
        fh.write(struct.pack("<II", d, n))
        fh.write(b"\x00" * 4)  # pad header to 16 bytes
        fh.write(np.asfortranarray(data).tobytes(order="F"))


def load_binary(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) < 16 or header[:4] != _BINARY_MAGIC:
            raise ValueError(f"{path}: not a DPCA matrix file")
        d, n = struct.unpack("<II", header[4:12])
        payload = np.frombuffer(fh.read(), dtype="<f8")
    if payload.size != d * n:
        raise ValueError(f"{path}: expected {d * n} values, found {payload.size}")
    return payload.reshape((d, n), order="F").copy()


def load_csv(path: str | Path) -> np.ndarray:
    """Read a CSV where rows are features and columns are samples.

    A first row that does not parse as numbers is treated as a header.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        rows = rows[1:]
    return np.array([[float(v) for v in row] for row in rows], dtype=float)
