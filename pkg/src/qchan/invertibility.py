"""Deciding and constructing inverses of quantum operations.

A CPTP map ``E: L(C^p) -> L(C^q)`` has a CPTP inverse exactly when its Kraus
operators satisfy ``A_i'^dagger A_i = beta_i'i I_p`` for all pairs. In that
case ``E(rho) = U pad(rho ⊗ omega) U^dagger`` for a unitary ``U`` on ``C^q``
and an ancilla state ``omega`` on ``C^floor(q/p)``; the inverse applies
``U^dagger`` and traces the ancilla away.

For CP maps the test generalises to a positive operator ``Q`` with
``Tr(Q E(rho) Q E(sigma)) = c Tr(rho sigma)``, ``c > 0``.

``pad`` embeds ``C^p ⊗ C^a`` (``a = floor(q/p)``) into the first ``p*a``
coordinates of ``C^q``; basis vector ``|l>|k>`` lands on coordinate
``l*a + k``. When ``p`` does not divide ``q`` the trailing coordinates are
never reached by ``E`` and the inverse routes them to ``|0><0|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import (
    KrausChannel,
    apply,
    choi,
    choi_from_transfer,
    compose,
    identity_channel,
    kraus_gram,
    transfer_matrix_inverse,
)
from .linalg import (
    DEFAULT_TOL,
    as_matrix,
    dagger,
    frobenius_distance,
    hermitian_eig,
    hermiticity_residual,
    matrix_unit,
    min_eigenvalue,
    psd_sqrt,
    svd,
    unitary_completion,
)

GAMMA_CUTOFF = 1e-12


class NotInvertibleError(ValueError):
    """Raised when a map fails the invertibility test; carries the failing report."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class DecompositionError(ValueError):
    pass


class NotPsdError(ValueError):
    pass


@dataclass(frozen=True)
class PairwiseConditionReport:
    holds: bool
    m_matrix: np.ndarray
    worst_residual: float
    worst_pair: tuple[int, int] | None = None
    reason: str = ""


@dataclass(frozen=True)
class UnitaryAncillaForm:
    """``E(rho) = U pad(rho ⊗ omega) U^dagger`` with diagonal ``omega``."""

    p: int
    q: int
    ancilla_dim: int
    support_size: int
    u: np.ndarray
    omega: np.ndarray
    embed_map: np.ndarray
    reconstruction_error: float = field(default=0.0, compare=False)

    @property
    def gammas(self) -> np.ndarray:
        """Nonzero ancilla eigenvalues, descending."""
        return np.real(np.diag(self.omega))[: self.support_size].copy()

    def reconstruct(self) -> KrausChannel:
        g = np.real(np.diag(self.omega))
        ops = [
            np.sqrt(g[k]) * self.u[:, self.embed_map[:, k]]
            for k in range(self.ancilla_dim)
            if g[k] > 0
        ]
        if not ops:
            ops = [np.zeros((self.q, self.p), dtype=np.complex128)]
        return KrausChannel(ops, self.p, self.q)


@dataclass(frozen=True)
class CpCriterionReport:
    holds: bool
    c: float | None
    q_operator: np.ndarray | None
    residual: float


def embed_map(p: int, ancilla_dim: int) -> np.ndarray:
    """``embed[l, k]`` is the coordinate of ``|l>|k>`` inside ``C^q``."""
    return np.arange(p * ancilla_dim).reshape(p, ancilla_dim)


def pairwise_condition(e: KrausChannel, tol: float = DEFAULT_TOL) -> PairwiseConditionReport:
    """Check ``A_i'^dagger A_i = beta_i'i I`` for every ordered pair of Kraus operators.

    ``beta_i'i`` is read off as ``Tr(A_i'^dagger A_i) / p`` and the residual
    ``||A_i'^dagger A_i - beta_i'i I||_F`` is compared to
    ``tol * max(1, max |beta|)``.
    """
    a = e.kraus
    p, q, n = e.dim_in, e.dim_out, len(e)
    gram = np.einsum("xai,yaj->xyij", a.conj(), a)
    beta = np.trace(gram, axis1=2, axis2=3) / p
    resid = np.linalg.norm(gram - beta[:, :, None, None] * np.eye(p), axis=(2, 3))
    flat = int(np.argmax(resid))
    worst = (flat // n, flat % n)
    worst_residual = float(resid[worst])
    if p > q:
        return PairwiseConditionReport(
            False, beta, worst_residual, worst, reason=f"input dimension {p} exceeds output {q}"
        )
    bound = tol * max(1.0, float(np.abs(beta).max()))
    if worst_residual > bound:
        return PairwiseConditionReport(
            False,
            beta,
            worst_residual,
            worst,
            reason=f"A_{worst[0]}^† A_{worst[1]} is not proportional to the identity",
        )
    return PairwiseConditionReport(True, beta, worst_residual, worst)


def is_invertible(e: KrausChannel, tol: float = DEFAULT_TOL) -> bool:
    return pairwise_condition(e, tol).holds


def decompose(e: KrausChannel, tol: float = DEFAULT_TOL) -> UnitaryAncillaForm:
    """Recover ``(U, omega)`` with ``E(rho) = U pad(rho ⊗ omega) U^dagger``.

    Steps: diagonalize the beta matrix ``M = V Gamma V^dagger``; mix the Kraus
    operators into ``C_k = sum_i V_ik A_i`` (mutually orthogonal ranges);
    keep ``k`` with ``gamma_k > 1e-12``; each kept ``C_k`` has all singular
    values ``sqrt(gamma_k)`` and its polar isometry ``Y_k X_k^dagger`` fills
    the columns of ``U`` at ancilla slot ``k``. The remaining columns come
    from :func:`~qchan.linalg.unitary_completion`.
    """
    report = pairwise_condition(e, tol)
    if not report.holds:
        raise NotInvertibleError(
            f"pairwise condition fails: {report.reason} (residual {report.worst_residual:.3e})",
            report,
        )
    p, q = e.dim_in, e.dim_out
    anc = q // p
    eig = hermitian_eig(report.m_matrix, tol)
    gam = eig.eigenvalues
    if gam[-1] < -tol * max(1.0, abs(gam[0])):
        raise DecompositionError(f"beta matrix is not PSD (eigenvalue {gam[-1]:.3e})")
    kept = np.flatnonzero(gam > GAMMA_CUTOFF)
    if kept.size > anc:
        raise DecompositionError(
            f"{kept.size} orthogonal Kraus blocks do not fit into floor({q}/{p}) = {anc} slots"
        )
    mixed = np.einsum("ik,iab->kab", eig.eigenvectors, e.kraus)
    emb = embed_map(p, anc)

    known_pos = []
    known_cols = []
    for slot, k in enumerate(kept):
        dec = svd(mixed[k])
        target = np.sqrt(gam[k])
        dev = float(np.max(np.abs(dec.singular_values - target)))
        if dev > tol * max(1.0, target):
            raise DecompositionError(
                f"C_{k} singular values deviate from sqrt(gamma)={target:.6g} by {dev:.3e}"
            )
        block = dec.left @ dagger(dec.right)
        known_pos.extend(emb[:, slot])
        known_cols.append(block)

    if known_cols:
        cols = np.hstack(known_cols)[:, np.argsort(known_pos, kind="stable")]
        known_pos = sorted(known_pos)
    else:
        cols = np.zeros((q, 0), dtype=np.complex128)
    full = unitary_completion(cols, tol)
    taken = set(known_pos)
    rest = [i for i in range(q) if i not in taken]
    u = np.empty((q, q), dtype=np.complex128)
    u[:, known_pos] = full[:, : len(known_pos)]
    u[:, rest] = full[:, len(known_pos) :]

    omega = np.zeros((anc, anc), dtype=np.complex128)
    omega[np.arange(kept.size), np.arange(kept.size)] = gam[kept]
    form = UnitaryAncillaForm(p, q, anc, int(kept.size), u, omega, emb)

    target_choi = choi(e)
    err = frobenius_distance(choi(form.reconstruct()), target_choi)
    if err > tol * max(1.0, float(np.linalg.norm(target_choi))):
        raise DecompositionError(f"reconstruction misses the input by {err:.3e} (Choi distance)")
    return UnitaryAncillaForm(p, q, anc, int(kept.size), u, omega, emb, reconstruction_error=err)


def inverse_channel(form: UnitaryAncillaForm) -> KrausChannel:
    """CPTP inverse: apply ``U^dagger``, trace out the ancilla.

    Coordinates of ``C^q`` outside the padded ``C^p ⊗ C^a`` block are sent to
    ``|0><0|`` by one rank-one Kraus operator each, which keeps the inverse
    trace preserving on all of ``L(C^q)``.
    """
    ud = dagger(form.u)
    p, q, anc = form.p, form.q, form.ancilla_dim
    ops = [ud[form.embed_map[:, s], :] for s in range(anc)]
    for t in range(p * anc, q):
        sink = np.zeros((p, q), dtype=np.complex128)
        sink[0, :] = ud[t, :]
        ops.append(sink)
    return KrausChannel(ops, q, p, name="inverse")


def _validate_q(e: KrausChannel, q_op, tol: float) -> np.ndarray:
    q = as_matrix(q_op, "Q")
    if q.shape != (e.dim_out, e.dim_out):
        raise ValueError(f"Q has shape {q.shape}, expected {(e.dim_out, e.dim_out)}")
    scale = max(1.0, float(np.linalg.norm(q)))
    if hermiticity_residual(q) > tol * scale or min_eigenvalue(q) < -tol * scale:
        raise NotPsdError("Q is not positive semi-definite")
    return 0.5 * (q + dagger(q))


def criterion_evaluate(e: KrausChannel, q_op=None, tol: float = DEFAULT_TOL) -> CpCriterionReport:
    """Test ``Tr(Q E(rho) Q E(sigma)) = c Tr(rho sigma)`` on all matrix-unit pairs.

    Builds ``T[(ij),(kl)] = Tr(Q E(e_ij) Q E(e_kl))`` and compares it with
    ``c * Tr(e_ij e_kl)``. ``c`` is the least-squares fit over the nonzero
    entries of the reference. The criterion holds when ``c > tol`` and the
    relative residual ``||T - c T_ref||_F / ||T||_F`` is at most ``tol``.
    ``q_op=None`` means ``Q = I``.
    """
    p = e.dim_in
    q = np.eye(e.dim_out, dtype=np.complex128) if q_op is None else _validate_q(e, q_op, tol)
    a = e.kraus
    images = np.einsum("kai,kbj->ijab", a, a.conj()).reshape(p * p, e.dim_out, e.dim_out)
    f = q @ images
    t = np.einsum("xab,yba->xy", f, f)
    # Tr(e_ij e_kl) = delta_jk delta_il: the swap permutation on (i, j)
    idx = np.arange(p * p)
    swapped = (idx % p) * p + idx // p
    ref = np.zeros((p * p, p * p))
    ref[idx, swapped] = 1.0
    c = float(np.real(np.sum(t[idx, swapped]))) / (p * p)
    norm_t = float(np.linalg.norm(t))
    residual = float(np.linalg.norm(t - c * ref)) / norm_t if norm_t > 0 else np.inf
    holds = c > tol and residual <= tol
    return CpCriterionReport(holds, c if holds else None, q if holds else None, residual)


def q_from_inverse(e: KrausChannel, d: KrausChannel, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, float]:
    """Derive ``(Q, c)`` from a CP inverse ``d``.

    ``Q = sum_j B_j^dagger B_j`` and ``c = sum |beta_ii'|^2`` with
    ``beta_i'i = Tr(A_i'^dagger Q A_i) / p``. ``d∘e`` must be a positive
    multiple of the identity channel.
    """
    p = e.dim_in
    j = choi(compose(d, e))
    j_id = choi(identity_channel(p))
    s = float(np.real(np.vdot(j_id, j))) / float(np.real(np.vdot(j_id, j_id)))
    dev = frobenius_distance(j, s * j_id)
    if s <= tol or dev > tol * max(1.0, float(np.linalg.norm(j))):
        raise NotInvertibleError(
            f"d∘e is not a positive multiple of the identity (scale {s:.3e}, deviation {dev:.3e})"
        )
    q_op = kraus_gram(d)
    a = e.kraus
    beta = np.einsum("xai,ab,ybj->xyij", a.conj(), q_op, a)
    beta = np.trace(beta, axis1=2, axis2=3) / p
    c = float(np.sum(np.abs(beta) ** 2))
    return q_op, c


def decompose_cp(
    e: KrausChannel, q_op=None, tol: float = DEFAULT_TOL
) -> tuple[UnitaryAncillaForm, KrausChannel]:
    """Unitary-ancilla form of the CP map ``{Q^{1/2} A_i}`` plus a CP inverse of ``e``.

    The returned form describes ``Q^{1/2} E(.) Q^{1/2}``; ``omega`` is PSD
    with trace ``Tr(omega)``. The inverse conjugates by
    ``U^dagger Q^{1/2}``, traces out the ancilla and divides by
    ``Tr(omega)``, so it undoes ``e`` exactly.
    """
    report = criterion_evaluate(e, q_op, tol)
    if not report.holds:
        raise NotInvertibleError(
            f"criterion fails (relative residual {report.residual:.3e})", report
        )
    root = psd_sqrt(report.q_operator, tol)
    primed = KrausChannel(root @ e.kraus, e.dim_in, e.dim_out)
    form = decompose(primed, tol)
    weight = float(np.real(np.trace(form.omega)))
    ud = dagger(form.u)
    ops = [ud[form.embed_map[:, s], :] @ root / np.sqrt(weight) for s in range(form.ancilla_dim)]
    inverse = KrausChannel(ops, e.dim_out, e.dim_in, name="cp-inverse")

    p = e.dim_in
    worst = 0.0
    for i in range(p):
        for k in range(p):
            unit = matrix_unit(i, k, p)
            worst = max(worst, frobenius_distance(apply(inverse, apply(e, unit)), unit))
    if worst > tol * max(1.0, p):
        raise DecompositionError(f"inverse misses matrix units by {worst:.3e}")
    return form, inverse


def linear_inverse_choi(e: KrausChannel, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Choi matrix of the linear inverse of ``e`` (inverse transfer matrix)."""
    s_inv = transfer_matrix_inverse(e, tol)
    return choi_from_transfer(s_inv, e.dim_out, e.dim_in)
