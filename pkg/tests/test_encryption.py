import itertools

import numpy as np
import pytest

from qchan.channel import (
    PAULI_Z,
    PAULIS,
    KrausChannel,
    apply,
    channels_equal,
    depolarizing,
    identity_channel,
    unitary_channel,
)
from qchan.encryption import (
    ImperfectSchemeError,
    InvalidKeyError,
    RandomizationScheme,
    average_channel,
    bell_basis,
    bell_image,
    entropy_chain_audit,
    key_entropy_audit,
    keyed_ancilla_scheme,
    pauli_otp,
    reduce_to_classical,
    verify_perfect,
    weyl_operators,
)
from qchan.invertibility import decompose
from qchan.linalg import von_neumann_entropy
from qchan.sampling import haar_unitary


def unitary_scheme(unitaries, probs=None, name=None):
    probs = [1 / len(unitaries)] * len(unitaries) if probs is None else probs
    keys = [(p, unitary_channel(u)) for p, u in zip(probs, unitaries)]
    return RandomizationScheme.build(keys, name=name)


def drop_key(s, k):
    keep = [(p, c) for i, (p, c) in enumerate(s.keys) if i != k]
    total = sum(p for p, _ in keep)
    return RandomizationScheme.build([(p / total, c) for p, c in keep])


def phi_plus(d):
    v = np.zeros(d * d)
    for i in range(d):
        v[i * d + i] = 1
    return v / np.sqrt(d)


# scheme construction


def test_scheme_build_validation():
    with pytest.raises(ValueError, match="sum"):
        RandomizationScheme.build([(0.5, identity_channel(2))])
    with pytest.raises(ValueError, match="at least one"):
        RandomizationScheme.build([])
    with pytest.raises(ValueError, match="mismatched"):
        RandomizationScheme.build([(0.5, identity_channel(2)), (0.5, identity_channel(3))])
    with pytest.raises(InvalidKeyError) as info:
        RandomizationScheme.build([(0.5, identity_channel(2)), (0.5, depolarizing(0.5))])
    assert info.value.key == 1


# average_channel


def test_average_single_key():
    u = haar_unitary(2, np.random.default_rng(0))
    s = unitary_scheme([u])
    assert channels_equal(average_channel(s), unitary_channel(u))


def test_average_pauli_otp_is_fully_depolarizing():
    assert channels_equal(average_channel(pauli_otp(1)), depolarizing(1.0))


def test_average_phase_damping():
    s = unitary_scheme([np.eye(2), PAULI_Z])
    r = average_channel(s)
    zero = np.diag([1.0, 0.0])
    plus = np.full((2, 2), 0.5)
    np.testing.assert_allclose(apply(r, plus), np.eye(2) / 2, atol=1e-15)
    assert np.linalg.norm(apply(r, zero) - apply(r, plus)) > 0.5


# verify_perfect


def test_pauli_otp_one_qubit_perfect():
    a = verify_perfect(pauli_otp(1))
    assert a.is_perfect
    np.testing.assert_allclose(a.sigma, np.eye(2) / 2, atol=1e-15)
    # brute force over the 4 keys on every matrix unit
    for i, j in itertools.product(range(2), repeat=2):
        unit = np.zeros((2, 2))
        unit[i, j] = 1
        out = sum(0.25 * p @ unit @ p.conj().T for p in PAULIS)
        np.testing.assert_allclose(out, np.eye(2) / 2 if i == j else 0, atol=1e-15)


def test_phase_flip_scheme_is_imperfect():
    a = verify_perfect(unitary_scheme([np.eye(2), PAULI_Z]))
    assert not a.is_perfect
    # R(|0><1|) = 0 but R(|0><0|) = |0><0| and R(|1><1|) = |1><1|
    assert a.max_offdiag_residual == pytest.approx(0, abs=1e-15)
    assert a.max_diag_residual == pytest.approx(np.sqrt(2))
    assert not a.bound_satisfied


def test_keyed_ancilla_perfect():
    for seed in range(5):
        s = keyed_ancilla_scheme(1, seed)
        assert verify_perfect(s).is_perfect


@pytest.mark.parametrize("n", [1, 2])
def test_pauli_otp_key_deletion_breaks_perfection(n):
    s = pauli_otp(n)
    for k in range(len(s.keys)):
        a = verify_perfect(drop_key(s, k))
        assert not a.is_perfect
        assert max(a.max_offdiag_residual, a.max_diag_residual) > 1e-3


def test_pauli_otp_sizes_and_range():
    assert len(pauli_otp(1).keys) == 4
    assert len(pauli_otp(2).keys) == 16
    assert verify_perfect(pauli_otp(2)).is_perfect
    with pytest.raises(ValueError):
        pauli_otp(0)
    with pytest.raises(ValueError):
        pauli_otp(7)


# key entropy


@pytest.mark.parametrize("n", [1, 2, 3])
def test_pauli_otp_entropy_is_tight(n):
    audit = key_entropy_audit(pauli_otp(n))
    assert audit.entropy_bits == pytest.approx(2 * n, abs=1e-12)
    assert audit.bound_bits == 2 * n
    assert audit.satisfied and abs(audit.slack) < 1e-12


def test_split_key_entropy():
    s = pauli_otp(1)
    first_p, first_c = s.keys[0]
    keys = [(first_p / 2, first_c), (first_p / 2, first_c), *s.keys[1:]]
    audit = key_entropy_audit(RandomizationScheme.build(keys))
    # H(1/8, 1/8, 1/4, 1/4, 1/4) = 2.25
    assert audit.entropy_bits == pytest.approx(2.25, abs=1e-12)
    assert audit.satisfied and audit.slack == pytest.approx(0.25)


def test_key_entropy_rejects_imperfect():
    with pytest.raises(ImperfectSchemeError):
        key_entropy_audit(unitary_scheme([np.eye(2), PAULI_Z]))


def test_keyed_ancilla_entropy_2n():
    a = key_entropy_audit(keyed_ancilla_scheme(1, 3))
    assert a.entropy_bits == pytest.approx(2.0, abs=1e-12)


def test_keyed_ancilla_more_states():
    s = keyed_ancilla_scheme(1, 4, ancilla_states=2)
    assert verify_perfect(s).is_perfect
    assert key_entropy_audit(s).entropy_bits == pytest.approx(3.0, abs=1e-12)


def test_keyed_ancilla_decompose_recovers_omegas():
    s = keyed_ancilla_scheme(1, 5)
    for (_, c), (_, omega) in zip(s.keys, s.ground_truth):
        got = decompose(c).gammas
        want = np.sort(np.linalg.eigvalsh(omega))[::-1]
        np.testing.assert_allclose(got, want[: got.size], atol=1e-9)


def test_keyed_ancilla_omegas_differ_per_key():
    s = keyed_ancilla_scheme(1, 6)
    omegas = [w for _, w in s.ground_truth]
    assert min(np.linalg.norm(a - b) for a, b in itertools.combinations(omegas, 2)) > 1e-6


# entropy chain


def test_entropy_chain_pauli_otp():
    c = entropy_chain_audit(pauli_otp(1))
    assert c.holds
    assert c.sigma_entropy == pytest.approx(1.0)
    assert c.mean_ancilla_entropy == 0


def test_entropy_chain_keyed_ancilla():
    c = entropy_chain_audit(keyed_ancilla_scheme(1, 7))
    assert c.holds
    assert c.mean_ancilla_entropy > 0.01
    assert c.sigma_entropy <= c.key_entropy + c.mean_ancilla_entropy + 1e-6


def test_entropy_chain_pure_ancilla():
    s = keyed_ancilla_scheme(1, 8, ancilla_rank=1)
    c = entropy_chain_audit(s)
    assert c.mean_ancilla_entropy == pytest.approx(0, abs=1e-9)
    assert c.lower_bound == pytest.approx(c.m, abs=1e-9)
    assert c.holds


def test_entropy_chain_without_ground_truth():
    s = keyed_ancilla_scheme(1, 9)
    bare = RandomizationScheme.build(list(s.keys))
    a, b = entropy_chain_audit(s), entropy_chain_audit(bare)
    assert b.mean_ancilla_entropy == pytest.approx(a.mean_ancilla_entropy, abs=1e-9)


def test_entropy_chain_classical_only():
    # only X-type keys: encrypts the classical basis, not quantum states
    s = unitary_scheme([np.eye(2), np.array([[0, 1], [1, 0]])])
    assert not verify_perfect(s).is_perfect
    c = entropy_chain_audit(s)
    assert c.holds and c.m == 1
    with pytest.raises(ImperfectSchemeError):
        entropy_chain_audit(unitary_scheme([np.eye(2), PAULI_Z]))


# bell image


@pytest.mark.parametrize("n", [1, 2])
def test_bell_image_pauli_otp(n):
    d = 2**n
    s = pauli_otp(n)
    img = bell_image(s, n)
    assert img.rank == 4**n
    np.testing.assert_allclose(img.state, np.eye(d * d) / d**2, atol=1e-14)
    # oracle: apply I ⊗ R to |Phi><Phi| directly
    phi = phi_plus(d)
    rho = np.outer(phi, phi)
    oracle = sum(
        p * np.kron(np.eye(d), c.kraus[0]) @ rho @ np.kron(np.eye(d), c.kraus[0]).conj().T
        for p, c in s.keys
    )
    np.testing.assert_allclose(img.state, oracle, atol=1e-14)


def test_bell_image_is_mixed_times_sigma():
    for seed in range(5):
        s = keyed_ancilla_scheme(1, seed)
        sigma = verify_perfect(s).sigma
        img = bell_image(s)
        np.testing.assert_allclose(img.state, np.kron(np.eye(2) / 2, sigma), atol=1e-8)


def test_bell_image_rank_bounds_keys():
    rng = np.random.default_rng(0)
    for k in range(1, 6):
        s = unitary_scheme([haar_unitary(2, rng) for _ in range(k)])
        assert bell_image(s).rank <= k


def test_bell_image_wrong_n():
    with pytest.raises(ValueError):
        bell_image(pauli_otp(1), n=2)


# classical reduction


def test_bell_basis_orthonormal():
    for d in (2, 3, 4):
        b = bell_basis(d)
        np.testing.assert_allclose(b.conj().T @ b, np.eye(d * d), atol=1e-12)
    assert len(weyl_operators(3)) == 9


def test_reduce_pauli_otp():
    r = reduce_to_classical(pauli_otp(1))
    assert r.is_perfect and len(r.outputs) == 4
    for out in r.outputs:
        np.testing.assert_allclose(out, np.eye(4) / 4, atol=1e-14)


def test_reduce_keyed_ancilla():
    r = reduce_to_classical(keyed_ancilla_scheme(1, 2))
    assert r.is_perfect and r.max_pairwise_distance <= 1e-8
    chain = entropy_chain_audit(r.scheme)
    assert chain.m == 2 and chain.holds


def test_reduce_imperfect():
    r = reduce_to_classical(unitary_scheme([np.eye(2), PAULI_Z]))
    assert not r.is_perfect and r.max_pairwise_distance > 0.1


# unitary-only perfect schemes need 4^n keys


def weyl_scheme(d):
    return unitary_scheme(weyl_operators(d))


def twirled_otp(n, seed):
    w = haar_unitary(2**n, np.random.default_rng(seed))
    s = pauli_otp(n)
    return unitary_scheme([w @ c.kraus[0] @ w.conj().T for _, c in s.keys])


@pytest.mark.parametrize(
    "scheme", [pauli_otp(1), pauli_otp(2), weyl_scheme(2), weyl_scheme(4), twirled_otp(1, 1), twirled_otp(2, 2)]
)
def test_perfect_unitary_schemes(scheme):
    a = verify_perfect(scheme)
    assert a.is_perfect
    n = scheme.n_qubits
    assert np.sum(scheme.probabilities > 0) >= 4**n
    np.testing.assert_allclose(a.sigma, np.eye(2**n) / 2**n, atol=1e-12)
    assert bell_image(scheme).rank == 4**n
    assert a.key_entropy_bits >= 2 * n - 1e-6
    assert von_neumann_entropy(a.sigma) == pytest.approx(n)


def test_non_uniform_paulis_imperfect():
    s = pauli_otp(1)
    probs = [0.4, 0.2, 0.2, 0.2]
    skewed = RandomizationScheme.build([(p, c) for p, (_, c) in zip(probs, s.keys)])
    assert not verify_perfect(skewed).is_perfect


def test_pure_key_channel_with_kraus_list():
    # a key presented with redundant Kraus operators behaves like its unitary
    u = haar_unitary(2, np.random.default_rng(3))
    e = KrausChannel([u / np.sqrt(2), u / np.sqrt(2)])
    s = RandomizationScheme.build([(1.0, e)])
    assert not verify_perfect(s).is_perfect
