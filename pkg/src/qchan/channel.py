"""Completely positive maps in Kraus form.

Choi convention (fixed): ``J(E) = sum_ij |i><j| ⊗ E(|i><j|)``, input factor
first. With this ordering ``partial_trace(J, p, q, keep="first") = I_p``
exactly when ``E`` is trace preserving.

Transfer matrices use row-major vectorization, ``vec(rho)[i*p + j] =
rho[i, j]``, so the transfer matrix of ``{A_k}`` is ``sum_k A_k ⊗ conj(A_k)``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    as_matrix,
    dagger,
    frobenius_distance,
    hermitian_eig,
    hermiticity_residual,
    min_eigenvalue,
    partial_trace,
    psd_sqrt,
)
from .sampling import ginibre, haar_unitary, random_density_matrix, rng_from_seed

MAX_KRAUS = 256
KRAUS_CUTOFF = 1e-12

PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULIS = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)


class KrausChannel:
    """A CP map ``rho -> sum_k A_k rho A_k^dagger`` from ``C^dim_in`` to ``C^dim_out``.

    Kraus operators are stored as read-only ``dim_out x dim_in`` arrays.
    """

    __slots__ = ("_kraus", "dim_in", "dim_out", "name")

    def __init__(
        self,
        kraus: Iterable,
        dim_in: int | None = None,
        dim_out: int | None = None,
        name: str | None = None,
    ):
        ops = [as_matrix(k, "Kraus operator") for k in kraus]
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        q, p = ops[0].shape
        dim_in = p if dim_in is None else int(dim_in)
        dim_out = q if dim_out is None else int(dim_out)
        for idx, op in enumerate(ops):
            if op.shape != (dim_out, dim_in):
                raise ValueError(
                    f"Kraus operator {idx} has shape {op.shape}, expected {(dim_out, dim_in)}"
                )
        stacked = np.array(ops)
        stacked.setflags(write=False)
        self._kraus = stacked
        self.dim_in = dim_in
        self.dim_out = dim_out
        self.name = name

    @property
    def kraus(self) -> np.ndarray:
        """Kraus operators stacked as an ``(n, dim_out, dim_in)`` array."""
        return self._kraus

    def __len__(self) -> int:
        return self._kraus.shape[0]

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<KrausChannel{label} {self.dim_in}->{self.dim_out}, {len(self)} Kraus>"

    def __call__(self, rho) -> np.ndarray:
        return apply(self, rho)


def apply(e: KrausChannel, rho) -> np.ndarray:
    """``sum_k A_k rho A_k^dagger``; linear, so any square ``rho`` is accepted."""
    r = as_matrix(rho, "rho")
    if r.shape != (e.dim_in, e.dim_in):
        raise ValueError(f"input of shape {r.shape} does not match dim_in={e.dim_in}")
    a = e.kraus
    return np.einsum("kai,ij,kbj->ab", a, r, a.conj())


def kraus_gram(e: KrausChannel) -> np.ndarray:
    """``sum_k A_k^dagger A_k``."""
    a = e.kraus
    return np.einsum("kai,kaj->ij", a.conj(), a)


def is_trace_preserving(e: KrausChannel, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Return ``(tp, residual)`` with residual ``||sum A^dagger A - I||_F``."""
    resid = float(np.linalg.norm(kraus_gram(e) - np.eye(e.dim_in)))
    return resid <= tol * np.sqrt(e.dim_in), resid


def choi(e: KrausChannel) -> np.ndarray:
    """Choi matrix ``sum_ij |i><j| ⊗ E(|i><j|)`` of side ``dim_in * dim_out``."""
    n = len(e)
    vecs = e.kraus.transpose(0, 2, 1).reshape(n, e.dim_in * e.dim_out)
    return vecs.T @ vecs.conj()


def choi_is_cp(j, tol: float = DEFAULT_TOL) -> bool:
    return hermiticity_residual(j) <= tol * max(1.0, np.linalg.norm(j)) and min_eigenvalue(j) >= -tol


def choi_tp_residual(j, dim_in: int, dim_out: int) -> float:
    return float(np.linalg.norm(partial_trace(j, dim_in, dim_out, keep="first") - np.eye(dim_in)))


def kraus_from_choi(j, dim_in: int, dim_out: int, cutoff: float = KRAUS_CUTOFF) -> list[np.ndarray]:
    """Canonical (eigen) Kraus operators of a PSD Choi matrix.

    Eigenvalues at or below ``cutoff`` are dropped.
    """
    eig = hermitian_eig(j)
    ops = []
    for lam, v in zip(eig.eigenvalues, eig.eigenvectors.T):
        if lam <= cutoff:
            continue
        ops.append(np.sqrt(lam) * v.reshape(dim_in, dim_out).T)
    if not ops:
        ops.append(np.zeros((dim_out, dim_in), dtype=np.complex128))
    return ops


def _compressed(ops: Sequence[np.ndarray], dim_in: int, dim_out: int, name=None) -> KrausChannel:
    e = KrausChannel(ops, dim_in, dim_out, name=name)
    if len(e) > MAX_KRAUS:
        e = KrausChannel(kraus_from_choi(choi(e), dim_in, dim_out), dim_in, dim_out, name=name)
    return e


def channels_equal(e1: KrausChannel, e2: KrausChannel, tol: float = DEFAULT_TOL) -> bool:
    if (e1.dim_in, e1.dim_out) != (e2.dim_in, e2.dim_out):
        raise ValueError(
            f"dimension mismatch: {e1.dim_in}->{e1.dim_out} vs {e2.dim_in}->{e2.dim_out}"
        )
    return choi_distance(e1, e2) <= tol


def choi_distance(e1: KrausChannel, e2: KrausChannel) -> float:
    return frobenius_distance(choi(e1), choi(e2))


def compose(d: KrausChannel, e: KrausChannel) -> KrausChannel:
    """The map ``D∘E`` (apply ``e`` first) with Kraus set ``{B_j A_i}``."""
    if e.dim_out != d.dim_in:
        raise ValueError(f"cannot compose: e outputs {e.dim_out} dims, d expects {d.dim_in}")
    prods = np.einsum("jab,ibc->jiac", d.kraus, e.kraus).reshape(-1, d.dim_out, e.dim_in)
    return _compressed(list(prods), e.dim_in, d.dim_out)


def mix(channels: Sequence[tuple[float, KrausChannel]], tol: float = DEFAULT_TOL) -> KrausChannel:
    """Convex combination ``sum_k w_k E_k`` as the Kraus union ``{sqrt(w_k) A_i^(k)}``."""
    if not channels:
        raise ValueError("mix needs at least one channel")
    weights = np.array([float(w) for w, _ in channels])
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError(f"weights must be finite and nonnegative, got {weights}")
    if abs(weights.sum() - 1.0) > tol:
        raise ValueError(f"weights sum to {weights.sum():.15g}, expected 1")
    dims = {(c.dim_in, c.dim_out) for _, c in channels}
    if len(dims) != 1:
        raise ValueError(f"channels have mismatched dimensions {sorted(dims)}")
    (p, q), = dims
    ops = [np.sqrt(w) * a for w, c in channels if w > 0 for a in c.kraus]
    return _compressed(ops, p, q)


def scale(e: KrausChannel, factor: float) -> KrausChannel:
    """The CP map ``factor * E`` (``factor >= 0``)."""
    if factor < 0:
        raise ValueError("scale factor must be nonnegative")
    return KrausChannel(np.sqrt(factor) * e.kraus, e.dim_in, e.dim_out)


def identity_channel(dim: int) -> KrausChannel:
    return KrausChannel([np.eye(dim)], name="identity")


def unitary_channel(u, tol: float = DEFAULT_TOL) -> KrausChannel:
    m = as_matrix(u, "u")
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"unitary must be square, got {m.shape}")
    resid = float(np.linalg.norm(dagger(m) @ m - np.eye(m.shape[0])))
    if resid > tol * np.sqrt(m.shape[0]):
        raise ValueError(f"matrix is not unitary (residual {resid:.3e})")
    return KrausChannel([m])


def depolarizing(lam: float) -> KrausChannel:
    """Qubit depolarizing channel ``(1 - lam) rho + lam I/2``, ``lam`` in [0, 1]."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    w0 = np.sqrt(1.0 - 0.75 * lam)
    w = np.sqrt(lam / 4.0)
    return KrausChannel([w0 * PAULI_I, w * PAULI_X, w * PAULI_Y, w * PAULI_Z], name=f"depolarizing({lam:g})")


def channel_from_unitary_ancilla(u, omega, dim_in: int, mixing=None) -> KrausChannel:
    """Kraus form of ``rho -> U pad(rho ⊗ omega) U^dagger``.

    ``pad`` places ``rho ⊗ omega`` in the leading ``dim_in * dim(omega)``
    coordinates of ``C^q``. The ancilla is presented through
    the columns of ``omega^{1/2} @ mixing``; ``mixing`` must have orthonormal
    rows and defaults to the identity. A ``mixing`` with ``r < dim(omega)``
    rows acts on the top-``r`` eigenvectors of ``omega`` instead, which
    requires ``rank(omega) <= r``.
    """
    u = as_matrix(u, "u")
    omega = as_matrix(omega, "omega")
    q = u.shape[0]
    a = omega.shape[0]
    if dim_in * a > q:
        raise ValueError(f"rho ⊗ omega needs {dim_in * a} dims but U acts on {q}")
    g = psd_sqrt(omega)
    if mixing is not None:
        mixing = as_matrix(mixing, "mixing")
        r = mixing.shape[0]
        if r < a:
            eig = hermitian_eig(omega)
            if eig.eigenvalues[r] > KRAUS_CUTOFF:
                raise ValueError(f"omega has rank above {r}, the number of mixing rows")
            g = eig.eigenvectors[:, :r] * np.sqrt(np.clip(eig.eigenvalues[:r], 0.0, None))
        g = g @ mixing
    head = u[:, : dim_in * a]
    eye = np.eye(dim_in)
    ops = [head @ np.kron(eye, g[:, t : t + 1]) for t in range(g.shape[1])]
    ops = [op for op in ops if np.linalg.norm(op) > KRAUS_CUTOFF] or ops[:1]
    return KrausChannel(ops, dim_in, q)


def random_invertible(
    p: int,
    ancilla_dim: int,
    num_kraus_in_mixture: int,
    seed: int,
    dim_out: int | None = None,
    omega_rank: int | None = None,
) -> tuple[KrausChannel, np.ndarray, np.ndarray]:
    """Random invertible CPTP map together with its ground truth ``(U, omega)``.

    ``E(rho) = U pad(rho ⊗ omega) U^dagger`` with Haar ``U`` on ``C^q``
    (``q = dim_out``, default ``p * ancilla_dim``) and a random mixed
    ``omega``. The Kraus list comes from a random non-eigen decomposition of
    ``omega`` into ``num_kraus_in_mixture`` pure terms.
    """
    rng = rng_from_seed(seed)
    return _random_invertible(p, ancilla_dim, num_kraus_in_mixture, rng, dim_out, omega_rank)


def _random_invertible(p, ancilla_dim, num_kraus, rng, dim_out=None, omega_rank=None):
    if p < 1 or ancilla_dim < 1:
        raise ValueError("dimensions must be positive")
    q = p * ancilla_dim if dim_out is None else int(dim_out)
    if q < p * ancilla_dim:
        raise ValueError(f"dim_out={q} cannot hold {p}x{ancilla_dim}")
    rank = ancilla_dim if omega_rank is None else omega_rank
    if num_kraus < rank:
        raise ValueError(f"need at least {rank} Kraus terms to present a rank-{rank} ancilla")
    u = haar_unitary(q, rng)
    omega = random_density_matrix(ancilla_dim, rng, rank=rank, min_eigenvalue=0.01 / rank)
    mixing = haar_unitary(num_kraus, rng)[: min(ancilla_dim, num_kraus), :]
    e = channel_from_unitary_ancilla(u, omega, p, mixing)
    return KrausChannel(e.kraus, p, q, name="random-invertible"), u, omega


def random_cptp(p: int, q: int, choi_rank: int, seed: int | None = None, rng=None) -> KrausChannel:
    """Random CPTP map from a Ginibre-sampled Choi matrix of the given rank.

    The sample ``J = G G^dagger`` is normalized to trace preservation by
    ``A_k -> A_k (sum A^dagger A)^{-1/2}``.
    """
    if not 1 <= choi_rank <= p * q:
        raise ValueError(f"choi_rank must lie in [1, {p * q}], got {choi_rank}")
    if choi_rank * q < p:
        raise ValueError(f"no trace-preserving map {p}->{q} has Choi rank {choi_rank}")
    if rng is None:
        rng = rng_from_seed(0 if seed is None else seed)
    g = ginibre(p * q, choi_rank, rng)
    ops = kraus_from_choi(g @ dagger(g), p, q)
    gram = sum(dagger(a) @ a for a in ops)
    norm = np.linalg.inv(psd_sqrt(gram))
    return KrausChannel([a @ norm for a in ops], p, q, name="random-cptp")


def transfer_matrix(e: KrausChannel) -> np.ndarray:
    """Superoperator ``S`` with ``vec(E(rho)) = S vec(rho)`` (row-major vec)."""
    a = e.kraus
    s = np.einsum("kai,kbj->abij", a, a.conj())
    return s.reshape(e.dim_out**2, e.dim_in**2)


def choi_from_transfer(s, dim_in: int, dim_out: int) -> np.ndarray:
    """Reshuffle a transfer matrix into the Choi matrix of the same linear map."""
    t = np.asarray(s).reshape(dim_out, dim_out, dim_in, dim_in)
    return t.transpose(2, 0, 3, 1).reshape(dim_in * dim_out, dim_in * dim_out)


def transfer_matrix_inverse(e: KrausChannel, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Inverse of the transfer matrix of a square map, as a linear superoperator.

    Raises ``numpy.linalg.LinAlgError`` when the transfer matrix is singular
    (smallest singular value below ``tol`` times the largest).
    """
    if e.dim_in != e.dim_out:
        raise ValueError("transfer-matrix inverse needs dim_in == dim_out")
    s = transfer_matrix(e)
    sv = np.linalg.svd(s, compute_uv=False)
    if sv[-1] <= tol * sv[0]:
        raise np.linalg.LinAlgError(
            f"transfer matrix is singular (singular values {sv[-1]:.3e} / {sv[0]:.3e})"
        )
    return np.linalg.inv(s)


def validate_density_matrix(rho, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Return ``rho`` as an array after checking Hermitian, PSD and unit trace."""
    r = as_matrix(rho, "rho")
    if r.shape[0] != r.shape[1]:
        raise ValueError(f"density matrix must be square, got {r.shape}")
    if hermiticity_residual(r) > tol:
        raise ValueError("density matrix is not Hermitian")
    if min_eigenvalue(r) < -tol:
        raise ValueError("density matrix is not positive semi-definite")
    if abs(np.trace(r) - 1.0) > tol:
        raise ValueError(f"density matrix has trace {np.trace(r).real:.12g}")
    return r
