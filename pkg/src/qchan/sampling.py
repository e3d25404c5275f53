"""Seeded random matrices for test ensembles and generators.

All functions take an explicit ``numpy.random.Generator``; nothing here draws
from ambient entropy.
"""

from __future__ import annotations

import numpy as np

from .linalg import dagger

MAX_SEED = 2**64 - 1


def rng_from_seed(seed: int) -> np.random.Generator:
    if not 0 <= int(seed) <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.default_rng(int(seed))


def ginibre(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary (QR of a Ginibre matrix with the R-phase fix)."""
    q, r = np.linalg.qr(ginibre(dim, dim, rng))
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    if cols > rows:
        raise ValueError(f"no {rows}x{cols} isometry exists")
    return haar_unitary(rows, rng)[:, :cols]


def random_density_matrix(
    dim: int, rng: np.random.Generator, rank: int | None = None, min_eigenvalue: float = 0.0
) -> np.ndarray:
    """Random mixed state of the given rank.

    Eigenvalues are Dirichlet(1) on ``rank`` entries, shifted so that every
    nonzero one is at least ``min_eigenvalue``; eigenvectors are Haar.
    """
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise ValueError(f"rank must lie in [1, {dim}], got {rank}")
    if min_eigenvalue * rank >= 1.0:
        raise ValueError("min_eigenvalue too large for the requested rank")
    w = rng.dirichlet(np.ones(rank))
    w = min_eigenvalue + (1.0 - min_eigenvalue * rank) * w
    v = haar_unitary(dim, rng)[:, :rank]
    return (v * w) @ dagger(v)


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = ginibre(dim, dim, rng)
    return 0.5 * (g + dagger(g))
