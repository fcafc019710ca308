"""Nearest-subspace classification over learned features."""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyClass, LengthMismatch
from .rate import Partition

ORTHONORMAL_TOL = 1e-10


def _flatten(Z) -> np.ndarray:
    """Feature stack of any shape with trailing sample axis -> (n, m) columns."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        return Z[:, None]
    return Z.reshape(-1, Z.shape[-1])


@dataclass(frozen=True)
class SubspaceModel:
    """Per-class orthonormal bases; prediction is the least-residual class."""

    bases: tuple  # k matrices, each (n, r_j)

    def __post_init__(self):
        for U in self.bases:
            gram = U.T @ U
            if np.max(np.abs(gram - np.eye(U.shape[1]))) > ORTHONORMAL_TOL:
                raise ValueError("basis columns must be orthonormal")

    @property
    def k(self) -> int:
        return len(self.bases)

    @property
    def ranks(self) -> tuple:
        return tuple(U.shape[1] for U in self.bases)


def fit_subspaces(Z, partition: Partition, energy: float = 0.95) -> SubspaceModel:
    """Top singular subspace of each class, keeping >= `energy` of the
    squared singular value mass (at least one direction per class)."""
    if not 0.0 < energy <= 1.0:
        raise ValueError("energy must lie in (0, 1]")
    Zf = _flatten(Z)
    if Zf.shape[1] != partition.m:
        raise ValueError(f"partition covers {partition.m} samples, features have {Zf.shape[1]}")
    bases = []
    for j in range(partition.k):
        mask = partition.mask(j)
        if not mask.any():
            raise EmptyClass(f"class {j} has no samples")
        U, s, _ = np.linalg.svd(Zf[:, mask], full_matrices=False)
        power = s**2
        total = power.sum()
        if total == 0.0:
            raise EmptyClass(f"class {j} features are all zero")
        r = int(np.searchsorted(np.cumsum(power) / total, energy) + 1)
        r = min(max(r, 1), U.shape[1])
        bases.append(U[:, :r].copy())
    return SubspaceModel(bases=tuple(bases))


def predict(z, model: SubspaceModel):
    """Class with the smallest projection residual; ties go to the lowest index.

    A 1-d input is a single feature vector and returns an int; anything
    else is a stack with trailing sample axis and returns (m,) ints.
    """
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    Zf = z[:, None] if single else _flatten(z)
    sq = np.sum(Zf**2, axis=0)
    residuals = np.empty((model.k, Zf.shape[1]))
    for j, U in enumerate(model.bases):
        proj = U.T @ Zf
        residuals[j] = sq - np.sum(proj**2, axis=0)
    labels = np.argmin(residuals, axis=0)
    return int(labels[0]) if single else labels


def evaluate(preds, labels) -> float:
    """Fraction of matching entries."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise LengthMismatch(f"got {preds.shape} predictions for {labels.shape} labels")
    if preds.size == 0:
        raise LengthMismatch("nothing to evaluate")
    return float(np.mean(preds == labels))
