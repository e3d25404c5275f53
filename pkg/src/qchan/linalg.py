"""Dense complex linear algebra kernels and entropy primitives.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Every public
function accepts anything ``np.asarray`` understands and validates shape and
finiteness up front.

Conventions shared by the whole package:

* Tensor products use the lexicographic index ``i_a * rows_b + i_b``.
* Eigenvalues and singular values come back in descending order. Ties keep
  the solver's original order (stable sort).
* Each eigenvector / left singular vector is rotated so that its first
  component with modulus above ``PHASE_CUTOFF`` is real and positive.
* Entropies are measured in bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

DEFAULT_TOL = 1e-9
PHASE_CUTOFF = 1e-10
ENTROPY_CUTOFF = 1e-12
COMPLETION_CUTOFF = 1e-8


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce ``m`` to a finite 2-d complex128 array."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _as_square(m, name: str = "matrix") -> np.ndarray:
    a = as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


@dataclass(frozen=True)
class HermitianEigenResult:
    """Eigenvalues (descending) and the matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dagger(v)


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``m = left @ diag(singular_values) @ right^dagger``."""

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ dagger(self.right)


def _column_phases(vectors: np.ndarray) -> np.ndarray:
    """Unit phases that make each column's first significant entry real positive."""
    phases = np.ones(vectors.shape[1], dtype=np.complex128)
    for k in range(vectors.shape[1]):
        col = vectors[:, k]
        idx = np.flatnonzero(np.abs(col) > PHASE_CUTOFF)
        if idx.size:
            z = col[idx[0]]
            phases[k] = np.conj(z) / abs(z)
    return phases


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``."""
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def partial_trace(
    m, dim_first: int, dim_second: int, keep: Literal["first", "second"] = "first"
) -> np.ndarray:
    """Trace out one factor of a bipartite operator on ``C^dim_first ⊗ C^dim_second``."""
    a = _as_square(m)
    n = dim_first * dim_second
    if a.shape != (n, n):
        raise ValueError(
            f"matrix of shape {a.shape} does not act on {dim_first}x{dim_second} = {n} dims"
        )
    t = a.reshape(dim_first, dim_second, dim_first, dim_second)
    if keep == "first":
        return np.einsum("ajbj->ab", t)
    if keep == "second":
        return np.einsum("iaib->ab", t)
    raise ValueError(f"keep must be 'first' or 'second', not {keep!r}")


def hermiticity_residual(m) -> float:
    a = _as_square(m)
    return float(np.linalg.norm(a - dagger(a)))


def hermitian_eig(m, tol: float = DEFAULT_TOL) -> HermitianEigenResult:
    """Eigendecomposition of a Hermitian matrix.

    The input is symmetrized as ``(m + m^dagger)/2`` before solving; a
    Hermiticity residual above ``tol * max(1, ||m||_F)`` is an error.
    """
    a = _as_square(m)
    scale = max(1.0, float(np.linalg.norm(a)))
    resid = hermiticity_residual(a)
    if resid > tol * scale:
        raise ValueError(f"matrix is not Hermitian (residual {resid:.3e})")
    h = 0.5 * (a + dagger(a))
    w, v = np.linalg.eigh(h)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    v = v * _column_phases(v)
    return HermitianEigenResult(eigenvalues=w, eigenvectors=v)


def svd(m) -> SvdResult:
    """Thin singular value decomposition with the package phase convention."""
    a = as_matrix(m)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    # numpy already returns descending singular values; the stable sort pins ties
    order = np.argsort(-s, kind="stable")
    u, s, vh = u[:, order], s[order], vh[order, :]
    v = dagger(vh)
    ph = _column_phases(u)
    return SvdResult(left=u * ph, singular_values=s, right=v * ph)


def unitary_completion(columns, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Extend orthonormal columns to a square unitary.

    The input columns are kept verbatim as the leading columns. Remaining
    columns come from Gram-Schmidt over the standard basis ``e_0, e_1, ...``
    in order; candidates whose residual norm falls below 1e-8 are skipped.
    """
    c = np.asarray(columns, dtype=np.complex128)
    if c.ndim != 2 or c.shape[0] < 1 or not np.all(np.isfinite(c)):
        raise ValueError(f"columns must be a finite 2-d matrix, got shape {c.shape}")
    n, k = c.shape
    if k > n:
        raise ValueError(f"cannot complete {k} columns in dimension {n}")
    gram_err = float(np.linalg.norm(dagger(c) @ c - np.eye(k)))
    if gram_err > tol * max(1.0, np.sqrt(k)):
        raise ValueError(f"input columns are not orthonormal (residual {gram_err:.3e})")
    out = np.zeros((n, n), dtype=np.complex128)
    out[:, :k] = c
    filled = k
    for idx in range(n):
        if filled == n:
            break
        cand = np.zeros(n, dtype=np.complex128)
        cand[idx] = 1.0
        basis = out[:, :filled]
        # two passes of classical Gram-Schmidt keep the result orthogonal to ~eps
        for _ in range(2):
            cand = cand - basis @ (dagger(basis) @ cand)
        norm = np.linalg.norm(cand)
        if norm < COMPLETION_CUTOFF:
            continue
        out[:, filled] = cand / norm
        filled += 1
    if filled != n:
        raise ValueError("standard basis failed to complete the unitary")
    return out


def psd_sqrt(m, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Hermitian square root of a positive semi-definite matrix.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything lower raises.
    """
    eig = hermitian_eig(m, tol)
    w = eig.eigenvalues
    if w.size and w[-1] < -tol:
        raise ValueError(f"matrix is not positive semi-definite (min eigenvalue {w[-1]:.3e})")
    root = np.sqrt(np.clip(w, 0.0, None))
    v = eig.eigenvectors
    return (v * root) @ dagger(v)


def min_eigenvalue(m) -> float:
    a = _as_square(m)
    return float(np.linalg.eigvalsh(0.5 * (a + dagger(a)))[0])


def shannon_entropy(probs) -> float:
    """Shannon entropy in bits, with ``0 log 0 = 0``."""
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def von_neumann_entropy(rho, tol: float = DEFAULT_TOL) -> float:
    """``-Tr rho log2 rho`` for a unit-trace PSD matrix.

    Eigenvalues below 1e-12 count as zero.
    """
    a = _as_square(rho, "rho")
    tr = np.trace(a)
    if abs(tr - 1.0) > tol * max(1.0, a.shape[0]):
        raise ValueError(f"density matrix trace is {tr.real:.12g}, expected 1")
    w = np.linalg.eigvalsh(0.5 * (a + dagger(a)))
    if w[0] < -max(tol, ENTROPY_CUTOFF):
        raise ValueError(f"density matrix has negative eigenvalue {w[0]:.3e}")
    return shannon_entropy(w[w > ENTROPY_CUTOFF])


def frobenius_distance(a, b) -> float:
    x = as_matrix(a, "a")
    y = as_matrix(b, "b")
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.linalg.norm(x - y))


def numerical_rank(m, cutoff: float = DEFAULT_TOL) -> int:
    """Number of eigenvalues of a Hermitian matrix strictly above ``cutoff``."""
    a = _as_square(m)
    w = np.linalg.eigvalsh(0.5 * (a + dagger(a)))
    return int(np.sum(w > cutoff))


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros((dim, 1), dtype=np.complex128)
    v[index, 0] = 1.0
    return v


def matrix_unit(i: int, j: int, dim: int) -> np.ndarray:
    """``|i><j|`` in dimension ``dim``."""
    e = np.zeros((dim, dim), dtype=np.complex128)
    e[i, j] = 1.0
    return e
