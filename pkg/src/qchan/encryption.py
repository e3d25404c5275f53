"""Perfect encryption of quantum states with a classical key.

A randomization scheme is a distribution ``{p_k, E_k}`` over invertible
operations ``E_k: L(C^d) -> L(C^D)``. It encrypts perfectly when the average
``R = sum_k p_k E_k`` sends every input state to one fixed ``sigma``.

By linearity, perfection is equivalent to ``R(|i><j|) = delta_ij sigma`` on
all matrix units, which is how :func:`verify_perfect` decides it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import (
    PAULIS,
    KrausChannel,
    apply,
    channel_from_unitary_ancilla,
    choi,
    mix,
)
from .invertibility import decompose, pairwise_condition
from .linalg import (
    DEFAULT_TOL,
    dagger,
    frobenius_distance,
    matrix_unit,
    numerical_rank,
    shannon_entropy,
    von_neumann_entropy,
)
from .sampling import haar_unitary, random_density_matrix, rng_from_seed

BOUND_SLACK = 1e-6
RANK_CUTOFF = 1e-9


class InvalidKeyError(ValueError):
    """A key channel is not an invertible operation."""

    def __init__(self, key: int, message: str):
        super().__init__(f"key {key}: {message}")
        self.key = key


class ImperfectSchemeError(ValueError):
    pass


@dataclass(frozen=True)
class RandomizationScheme:
    """Keyed ensemble ``{p_k, E_k}``.

    ``ground_truth`` optionally holds ``(U_k, omega_k)`` per key, with
    ``E_k(rho) = U_k pad(rho ⊗ omega_k) U_k^dagger``.
    """

    dim_in: int
    dim_out: int
    keys: tuple[tuple[float, KrausChannel], ...]
    ground_truth: tuple[tuple[np.ndarray, np.ndarray], ...] | None = None
    name: str | None = None

    @classmethod
    def build(
        cls,
        keys: Sequence[tuple[float, KrausChannel]],
        ground_truth=None,
        name: str | None = None,
        prob_tol: float = 1e-12,
        tol: float = DEFAULT_TOL,
        validate: bool = True,
    ) -> "RandomizationScheme":
        keys = tuple((float(p), c) for p, c in keys)
        if not keys:
            raise ValueError("a scheme needs at least one key")
        probs = np.array([p for p, _ in keys])
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("key probabilities must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > prob_tol:
            raise ValueError(f"key probabilities sum to {probs.sum():.17g}")
        dims = {(c.dim_in, c.dim_out) for _, c in keys}
        if len(dims) != 1:
            raise ValueError(f"key channels have mismatched dimensions {sorted(dims)}")
        if ground_truth is not None:
            ground_truth = tuple(ground_truth)
            if len(ground_truth) != len(keys):
                raise ValueError("ground truth must list one (U, omega) pair per key")
        if validate:
            for k, (_, c) in enumerate(keys):
                rep = pairwise_condition(c, tol)
                if not rep.holds:
                    raise InvalidKeyError(
                        k, f"not invertible ({rep.reason}, residual {rep.worst_residual:.3e})"
                    )
        (d, big_d), = dims
        return cls(d, big_d, keys, ground_truth, name)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for p, _ in self.keys])

    @property
    def n_qubits(self) -> int | None:
        n = int(round(np.log2(self.dim_in)))
        return n if 2**n == self.dim_in else None


@dataclass(frozen=True)
class SchemeAudit:
    is_perfect: bool
    sigma: np.ndarray
    max_offdiag_residual: float
    max_diag_residual: float
    key_entropy_bits: float
    entropy_bound_bits: float
    bound_satisfied: bool
    bell_rank: int | None = None


@dataclass(frozen=True)
class KeyEntropyAudit:
    entropy_bits: float
    bound_bits: float
    satisfied: bool
    slack: float


@dataclass(frozen=True)
class EntropyChainAudit:
    """Both sides of ``m + sum p S(omega) <= S(sigma) <= H(p) + sum p S(omega)``."""

    m: int
    sigma_entropy: float
    key_entropy: float
    mean_ancilla_entropy: float
    mean_output_entropy: float
    mean_mixed_output_entropy: float
    upper_bound: float
    lower_bound: float
    upper_holds: bool
    lower_holds: bool

    @property
    def holds(self) -> bool:
        return self.upper_holds and self.lower_holds


@dataclass(frozen=True)
class BellImage:
    state: np.ndarray
    rank: int


@dataclass(frozen=True)
class ClassicalSchemeAudit:
    scheme: RandomizationScheme
    outputs: tuple[np.ndarray, ...]
    max_pairwise_distance: float
    is_perfect: bool


def average_channel(s: RandomizationScheme) -> KrausChannel:
    """``R = sum_k p_k E_k``."""
    return mix(list(s.keys))


def _unit_images(s: RandomizationScheme) -> np.ndarray:
    """``out[i, j] = R(|i><j|)``."""
    d, big_d = s.dim_in, s.dim_out
    out = np.zeros((d, d, big_d, big_d), dtype=np.complex128)
    for prob, c in s.keys:
        a = c.kraus
        out += prob * np.einsum("kai,kbj->ijab", a, a.conj())
    return out


def entropy_bound(dim_in: int) -> float:
    """Minimum key entropy for perfect encryption of ``dim_in`` levels, ``2 log2 d``."""
    return 2.0 * float(np.log2(dim_in))


def verify_perfect(s: RandomizationScheme, tol: float = DEFAULT_TOL) -> SchemeAudit:
    """Decide perfection on matrix units and report residuals.

    ``sigma = R(|0><0|)``. The scheme is perfect when every
    ``||R(|i><j|)||_F`` with ``i != j`` and every ``||R(|i><i|) - sigma||_F``
    is at most ``tol``.
    """
    images = _unit_images(s)
    d = s.dim_in
    sigma = images[0, 0]
    offdiag = 0.0
    diag = 0.0
    for i in range(d):
        for j in range(d):
            if i == j:
                diag = max(diag, frobenius_distance(images[i, i], sigma))
            else:
                offdiag = max(offdiag, float(np.linalg.norm(images[i, j])))
    perfect = offdiag <= tol and diag <= tol
    h = shannon_entropy(s.probabilities)
    bound = entropy_bound(d)
    return SchemeAudit(
        is_perfect=perfect,
        sigma=sigma,
        max_offdiag_residual=offdiag,
        max_diag_residual=diag,
        key_entropy_bits=h,
        entropy_bound_bits=bound,
        bound_satisfied=perfect and h >= bound - BOUND_SLACK,
    )


def key_entropy_audit(s: RandomizationScheme, tol: float = DEFAULT_TOL) -> KeyEntropyAudit:
    """Compare ``H(p)`` with ``2n`` for a perfect ``n``-qubit scheme."""
    n = s.n_qubits
    if n is None:
        raise ValueError(f"input dimension {s.dim_in} is not a power of two")
    audit = verify_perfect(s, tol)
    if not audit.is_perfect:
        raise ImperfectSchemeError(
            "entropy bound only applies to perfect schemes "
            f"(off-diagonal residual {audit.max_offdiag_residual:.3e}, "
            f"diagonal residual {audit.max_diag_residual:.3e})"
        )
    h = audit.key_entropy_bits
    bound = 2.0 * n
    return KeyEntropyAudit(h, bound, h >= bound - BOUND_SLACK, h - bound)


def pauli_words(n: int) -> list[tuple[str, np.ndarray]]:
    """All ``4**n`` tensor products of I, X, Y, Z, labelled like ``"XZ"``."""
    words = []
    for combo in itertools.product(range(4), repeat=n):
        m = np.ones((1, 1), dtype=np.complex128)
        for idx in combo:
            m = np.kron(m, PAULIS[idx])
        words.append(("".join("IXYZ"[i] for i in combo), m))
    return words


def pauli_otp(n: int) -> RandomizationScheme:
    """Pauli one-time pad on ``n`` qubits: uniform over the ``4**n`` Pauli conjugations."""
    if not 1 <= n <= 6:
        raise ValueError(f"n must lie in [1, 6], got {n}")
    words = pauli_words(n)
    prob = 1.0 / len(words)
    keys = [(prob, KrausChannel([m], name=label)) for label, m in words]
    truth = [(m, np.ones((1, 1), dtype=np.complex128)) for _, m in words]
    return RandomizationScheme.build(keys, truth, name=f"pauli-otp-{n}")


def keyed_ancilla_scheme(
    n: int,
    seed: int,
    ancilla_dim: int = 2,
    ancilla_states: int = 1,
    ancilla_rank: int | None = None,
) -> RandomizationScheme:
    """Pauli one-time pad whose ancilla state and unitary depend on the key.

    Key ``(P, t)`` applies ``U = P ⊗ V`` to ``rho ⊗ omega`` where ``V`` is a
    fresh Haar unitary and ``omega = V^dagger tau_t V``. Every key therefore
    carries its own ancilla state, yet ``V omega V^dagger = tau_t`` does not
    depend on the Pauli part, so the average stays ``I/2^n ⊗ mean(tau)``.

    With ``ancilla_states = 1`` there are ``4**n`` uniform keys and the key
    entropy is exactly ``2n``. Larger values draw that many reference
    ancillas ``tau_t`` (different spectra) and multiply the key space.
    Kraus operators present each ``omega`` through a random non-eigen mixture.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = rng_from_seed(seed)
    d = 2**n
    rank = ancilla_dim if ancilla_rank is None else ancilla_rank
    taus = [
        random_density_matrix(ancilla_dim, rng, rank=rank, min_eigenvalue=0.01 / rank)
        for _ in range(ancilla_states)
    ]
    words = pauli_words(n)
    prob = 1.0 / (len(words) * ancilla_states)
    keys = []
    truth = []
    for t, tau in enumerate(taus):
        for label, pauli in words:
            v = haar_unitary(ancilla_dim, rng)
            omega = dagger(v) @ tau @ v
            omega = 0.5 * (omega + dagger(omega))
            u = np.kron(pauli, v)
            mixing = haar_unitary(rank + 1, rng)[:ancilla_dim, :]
            e = channel_from_unitary_ancilla(u, omega, d, mixing)
            keys.append((prob, KrausChannel(e.kraus, d, d * ancilla_dim, name=f"{label}/{t}")))
            truth.append((u, omega))
    return RandomizationScheme.build(keys, truth, name=f"keyed-ancilla-{n}")


def _key_omegas(s: RandomizationScheme, tol: float) -> list[np.ndarray]:
    if s.ground_truth is not None:
        return [omega for _, omega in s.ground_truth]
    return [decompose(c, tol).omega for _, c in s.keys]


def classical_outputs(s: RandomizationScheme) -> list[np.ndarray]:
    """``R(|b><b|)`` for every basis state ``b``."""
    images = _unit_images(s)
    return [images[b, b] for b in range(s.dim_in)]


def _max_pairwise(mats: Sequence[np.ndarray]) -> float:
    worst = 0.0
    for x, y in itertools.combinations(mats, 2):
        worst = max(worst, frobenius_distance(x, y))
    return worst


def entropy_chain_audit(s: RandomizationScheme, tol: float = DEFAULT_TOL) -> EntropyChainAudit:
    """Evaluate both entropy chains for a scheme that encrypts ``m`` classical bits.

    Upper chain: ``S(sigma) <= H(p) + sum_k p_k S(E_k(|0><0|))`` and
    ``S(E_k(|0><0|)) = S(omega_k)``. Lower chain (concavity):
    ``S(sigma) >= sum_k p_k S(E_k(I/2^m)) = m + sum_k p_k S(omega_k)``.
    Each inequality is accepted with 1e-6 bits of slack. Per-key ancillas
    come from the ground truth when present, otherwise from
    :func:`~qchan.invertibility.decompose`.
    """
    m = s.n_qubits
    if m is None:
        raise ValueError(f"input dimension {s.dim_in} is not a power of two")
    outs = classical_outputs(s)
    spread = _max_pairwise(outs)
    if spread > tol:
        raise ImperfectSchemeError(
            f"scheme does not encrypt the classical basis perfectly (spread {spread:.3e})"
        )
    probs = s.probabilities
    sigma = outs[0]
    omegas = _key_omegas(s, tol)
    anc = np.array([von_neumann_entropy(w / np.trace(w).real) for w in omegas])
    zero = matrix_unit(0, 0, s.dim_in)
    mixed = np.eye(s.dim_in) / s.dim_in
    out0 = np.array([von_neumann_entropy(apply(c, zero)) for _, c in s.keys])
    outm = np.array([von_neumann_entropy(apply(c, mixed)) for _, c in s.keys])
    s_sigma = von_neumann_entropy(sigma)
    h = shannon_entropy(probs)
    mean_anc = float(probs @ anc)
    upper = h + float(probs @ out0)
    lower = float(probs @ outm)
    return EntropyChainAudit(
        m=m,
        sigma_entropy=s_sigma,
        key_entropy=h,
        mean_ancilla_entropy=mean_anc,
        mean_output_entropy=float(probs @ out0),
        mean_mixed_output_entropy=lower,
        upper_bound=upper,
        lower_bound=m + mean_anc,
        upper_holds=s_sigma <= upper + BOUND_SLACK
        and s_sigma <= h + mean_anc + BOUND_SLACK,
        lower_holds=s_sigma >= lower - BOUND_SLACK
        and s_sigma >= m + mean_anc - BOUND_SLACK,
    )


def bell_image(s: RandomizationScheme, n: int | None = None, cutoff: float = RANK_CUTOFF) -> BellImage:
    """``(I ⊗ R)(|Phi><Phi|)`` for the maximally entangled ``|Phi>`` on ``C^d ⊗ C^d``.

    The untouched half comes first in the output ordering. The rank counts
    eigenvalues above ``cutoff``.
    """
    d = s.dim_in
    if n is not None and 2**n != d:
        raise ValueError(f"scheme acts on {d} levels, not {n} qubits")
    state = choi(average_channel(s)) / d
    return BellImage(state, numerical_rank(state, cutoff))


def weyl_operators(d: int) -> list[np.ndarray]:
    """Clock-and-shift operators ``X^x Z^z`` for ``x, z`` in ``range(d)``."""
    shift = np.roll(np.eye(d, dtype=np.complex128), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [
        np.linalg.matrix_power(shift, x) @ np.linalg.matrix_power(clock, z)
        for x in range(d)
        for z in range(d)
    ]


def bell_basis(d: int) -> np.ndarray:
    """Unitary whose column ``b`` is the Bell state ``(I ⊗ W_b)|Phi>``."""
    phi = np.eye(d, dtype=np.complex128).reshape(d * d) / np.sqrt(d)
    cols = [np.kron(np.eye(d), w) @ phi for w in weyl_operators(d)]
    return np.stack(cols, axis=1)


def reduce_to_classical(s: RandomizationScheme, tol: float = DEFAULT_TOL) -> ClassicalSchemeAudit:
    """Turn a scheme for ``d`` levels into one for ``d**2`` classical messages.

    Message ``b`` is encoded as the ``b``-th Bell state on ``C^d ⊗ C^d``, and
    key ``k`` applies ``I ⊗ E_k`` to the second half. The new key channels
    have Kraus operators ``(I ⊗ A_i) B``. Perfect classical encryption means
    every ciphertext state coincides.
    """
    d = s.dim_in
    b = bell_basis(d)
    eye = np.eye(d)
    keys = []
    for prob, c in s.keys:
        ops = [np.kron(eye, a) @ b for a in c.kraus]
        keys.append((prob, KrausChannel(ops, d * d, d * s.dim_out, name=c.name)))
    reduced = RandomizationScheme.build(keys, name=f"classical({s.name})", tol=tol)
    outs = classical_outputs(reduced)
    worst = _max_pairwise(outs)
    return ClassicalSchemeAudit(reduced, tuple(outs), worst, worst <= tol)
