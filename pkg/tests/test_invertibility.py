import numpy as np
import pytest

from qchan.channel import (
    PAULI_X,
    KrausChannel,
    apply,
    channels_equal,
    choi,
    choi_distance,
    compose,
    depolarizing,
    identity_channel,
    random_cptp,
    random_invertible,
    unitary_channel,
)
from qchan.invertibility import (
    NotInvertibleError,
    NotPsdError,
    criterion_evaluate,
    decompose,
    decompose_cp,
    inverse_channel,
    is_invertible,
    linear_inverse_choi,
    pairwise_condition,
    q_from_inverse,
)
from qchan.linalg import matrix_unit
from qchan.sampling import ginibre, haar_unitary, random_density_matrix, random_isometry


def brute_t_matrix(e, q_op):
    """T[(ij),(kl)] = Tr(Q E(e_ij) Q E(e_kl)) by explicit loops over apply."""
    p = e.dim_in
    units = [matrix_unit(i, j, p) for i in range(p) for j in range(p)]
    imgs = [apply(e, u) for u in units]
    return np.array([[np.trace(q_op @ x @ q_op @ y) for y in imgs] for x in imgs])


def sample_channels(count, seed):
    """Half random_invertible, half generic random CPTP, dims in 2..6."""
    rng = np.random.default_rng(seed)
    out = []
    for t in range(count):
        if t % 2 == 0:
            p = int(rng.integers(2, 4))
            anc = int(rng.integers(1, 6 // p + 1))
            q = int(rng.integers(p * anc, 7))
            e, _, _ = random_invertible(p, anc, anc + int(rng.integers(0, 3)), seed=int(rng.integers(2**32)), dim_out=q)
        else:
            p, q = (int(x) for x in rng.integers(2, 7, size=2))
            low = max(2, -(-p // q))
            e = random_cptp(p, q, int(rng.integers(low, p * q + 1)), rng=rng)
        out.append(e)
    return out


# pairwise_condition


def test_pairwise_single_unitary():
    r = pairwise_condition(unitary_channel(haar_unitary(3, np.random.default_rng(0))))
    assert r.holds
    np.testing.assert_allclose(r.m_matrix, [[1]], atol=1e-14)


def test_pairwise_depolarizing_half_fails():
    r = pairwise_condition(depolarizing(0.5))
    assert not r.holds
    assert r.worst_residual > 0.1


def test_pairwise_spectrum_matches_generator():
    e, _, omega = random_invertible(2, 3, 5, seed=3)
    r = pairwise_condition(e)
    assert r.holds
    got = np.sort(np.linalg.eigvalsh(r.m_matrix))[::-1]
    want = np.sort(np.linalg.eigvalsh(omega))[::-1]
    np.testing.assert_allclose(got[: want.size], want, atol=1e-9)
    np.testing.assert_allclose(got[want.size :], 0, atol=1e-9)


def test_pairwise_rejects_shrinking_dims():
    r = pairwise_condition(random_cptp(3, 2, 4, seed=0))
    assert not r.holds and "exceeds" in r.reason


def test_m_matrix_properties_on_tp_channels():
    for seed in range(30):
        e, _, _ = random_invertible(3, 2, 4, seed=seed)
        m = pairwise_condition(e).m_matrix
        np.testing.assert_allclose(m, m.conj().T, atol=1e-9)
        assert np.linalg.eigvalsh(m)[0] >= -1e-9
        assert abs(np.trace(m) - 1) <= 1e-9


# decompose


def test_decompose_identity():
    form = decompose(identity_channel(2))
    assert form.ancilla_dim == 1 and form.support_size == 1
    np.testing.assert_allclose(form.omega, [[1]], atol=1e-14)
    # U equals the identity up to column phases
    np.testing.assert_allclose(np.abs(form.u), np.eye(2), atol=1e-14)


def test_decompose_recovers_three_quarter_ancilla():
    rng = np.random.default_rng(9)
    u0 = haar_unitary(4, rng)
    w = haar_unitary(4, rng)[:2]  # 2x4 coisometry: non-eigen mixture of the ancilla
    kraus = []
    for m in range(4):
        # ω^{1/2} w[:, m] as an ancilla vector
        anc_vec = np.sqrt([0.75, 0.25]) * w[:, m]
        kraus.append(u0 @ np.kron(np.eye(2), anc_vec.reshape(2, 1)))
    e = KrausChannel(kraus)
    form = decompose(e)
    np.testing.assert_allclose(form.gammas, [0.75, 0.25], atol=1e-9)
    assert choi_distance(form.reconstruct(), e) <= 1e-8
    rho = random_density_matrix(2, rng)
    np.testing.assert_allclose(
        apply(e, rho), u0 @ np.kron(rho, np.diag([0.75, 0.25])) @ u0.conj().T, atol=1e-12
    )


def test_decompose_padded_q5_p2():
    rng = np.random.default_rng(10)
    v = random_isometry(5, 4, rng)  # C^2 ⊗ C^2 -> C^5
    omega = np.diag([0.6, 0.4])
    kraus = [np.sqrt(omega[k, k]) * v @ np.kron(np.eye(2), np.eye(2)[:, [k]]) for k in range(2)]
    e = KrausChannel(kraus)
    form = decompose(e)
    assert form.ancilla_dim == 2 and form.q == 5
    np.testing.assert_allclose(form.gammas, [0.6, 0.4], atol=1e-9)
    rho = random_density_matrix(2, rng)
    padded = np.zeros((5, 5), dtype=complex)
    padded[:4, :4] = np.kron(rho, form.omega)
    np.testing.assert_allclose(form.u @ padded @ form.u.conj().T, apply(e, rho), atol=1e-12)
    d = inverse_channel(form)
    assert choi_distance(compose(d, e), identity_channel(2)) <= 1e-8
    assert len(d) == 3  # two ancilla slots plus one sink


def test_decompose_rejects_depolarizing():
    with pytest.raises(NotInvertibleError, match="pairwise"):
        decompose(depolarizing(0.5))


def test_decompose_mixture_invariance():
    rng = np.random.default_rng(11)
    e, _, omega = random_invertible(3, 2, 3, seed=11)
    ref = decompose(e).gammas
    for _ in range(5):
        v = haar_unitary(len(e), rng)
        mixed = KrausChannel(np.einsum("ik,iab->kab", v, e.kraus))
        np.testing.assert_allclose(decompose(mixed).gammas, ref, atol=1e-9)
    np.testing.assert_allclose(ref, np.sort(np.linalg.eigvalsh(omega))[::-1], atol=1e-9)


def test_decompose_omega_trace_one():
    for seed in range(20):
        e, _, _ = random_invertible(2, 2, 3, seed=seed)
        form = decompose(e)
        assert abs(np.trace(form.omega) - 1) <= 1e-9
        np.testing.assert_allclose(form.u.conj().T @ form.u, np.eye(4), atol=1e-9)
        assert np.all(np.diff(form.gammas) <= 0)


def test_decompose_is_deterministic():
    e, _, _ = random_invertible(2, 3, 4, seed=5)
    a, b = decompose(e), decompose(e)
    np.testing.assert_array_equal(a.u, b.u)
    np.testing.assert_array_equal(a.omega, b.omega)


# inverse_channel


def test_inverse_of_identity():
    assert channels_equal(inverse_channel(decompose(identity_channel(3))), identity_channel(3))


def test_inverse_of_bit_flip():
    d = inverse_channel(decompose(unitary_channel(PAULI_X)))
    assert channels_equal(d, unitary_channel(PAULI_X.conj().T))


def test_inverse_is_trace_preserving_on_full_output():
    e, _, _ = random_invertible(2, 2, 3, seed=1, dim_out=7)
    d = inverse_channel(decompose(e))
    gram = sum(b.conj().T @ b for b in d.kraus)
    np.testing.assert_allclose(gram, np.eye(7), atol=1e-12)


# soundness / completeness


def test_decision_procedures_agree():
    channels = sample_channels(500, seed=2024)
    n_inv = 0
    for e in channels:
        pw = pairwise_condition(e).holds
        cr = criterion_evaluate(e).holds
        assert pw == cr
        if pw:
            n_inv += 1
            form = decompose(e)
            assert choi_distance(form.reconstruct(), e) <= 1e-8
            assert choi_distance(compose(inverse_channel(form), e), identity_channel(e.dim_in)) <= 1e-8
        else:
            with pytest.raises(NotInvertibleError):
                decompose(e)
    assert n_inv == 250


# criterion_evaluate


def test_criterion_identity():
    r = criterion_evaluate(identity_channel(2), np.eye(2))
    assert r.holds and r.c == pytest.approx(1.0)


def test_criterion_depolarizing_half():
    assert not criterion_evaluate(depolarizing(0.5), np.eye(2)).holds


def test_criterion_c_equals_purity_of_omega():
    e, _, omega = random_invertible(2, 2, 3, seed=21)
    r = criterion_evaluate(e)
    assert r.holds
    # Tr(E(ρ)E(σ)) = Tr(ρσ) Tr(ω²)
    assert r.c == pytest.approx(float(np.real(np.trace(omega @ omega))), abs=1e-12)


def test_criterion_matches_brute_force():
    rng = np.random.default_rng(22)
    for _ in range(5):
        e = random_cptp(2, 3, 3, rng=rng)
        g = ginibre(3, 3, rng)
        q_op = g @ g.conj().T
        t = brute_t_matrix(e, q_op)
        r = criterion_evaluate(e, q_op)
        ref = np.zeros((4, 4))
        for i in range(2):
            for j in range(2):
                ref[i * 2 + j, j * 2 + i] = 1
        c_fit = np.real(np.sum(t * ref)) / 4
        assert r.residual == pytest.approx(np.linalg.norm(t - c_fit * ref) / np.linalg.norm(t), rel=1e-9)
        assert not r.holds


def test_criterion_rejects_non_psd_q():
    with pytest.raises(NotPsdError):
        criterion_evaluate(identity_channel(2), np.diag([1.0, -1.0]))
    with pytest.raises(ValueError, match="shape"):
        criterion_evaluate(identity_channel(2), np.eye(3))


# q_from_inverse


def test_q_from_tp_inverse_is_identity():
    e, _, omega = random_invertible(2, 2, 3, seed=30)
    d = inverse_channel(decompose(e))
    q_op, c = q_from_inverse(e, d)
    np.testing.assert_allclose(q_op, np.eye(4), atol=1e-9)
    assert c == pytest.approx(float(np.real(np.trace(omega @ omega))), abs=1e-9)


def test_q_from_scaled_inverse():
    e, _, _ = random_invertible(2, 2, 3, seed=31)
    d = inverse_channel(decompose(e))
    half = KrausChannel(np.sqrt(0.5) * d.kraus, d.dim_in, d.dim_out)
    q_op, c = q_from_inverse(e, half)
    np.testing.assert_allclose(q_op, 0.5 * np.eye(4), atol=1e-9)
    r = criterion_evaluate(e, q_op)
    assert r.holds
    assert r.c == pytest.approx(c, rel=1e-9)
    assert c == pytest.approx(0.25 * criterion_evaluate(e).c, rel=1e-9)


def test_q_from_unrelated_channel():
    e, _, _ = random_invertible(2, 2, 3, seed=32)
    d = random_cptp(4, 2, 3, seed=1)
    with pytest.raises(NotInvertibleError, match="multiple of the identity"):
        q_from_inverse(e, d)


# decompose_cp


def test_decompose_cp_specializes_to_decompose():
    e, _, _ = random_invertible(2, 2, 4, seed=40)
    form, d = decompose_cp(e, np.eye(4))
    ref = decompose(e)
    np.testing.assert_allclose(form.u, ref.u, atol=1e-12)
    np.testing.assert_allclose(form.omega, ref.omega, atol=1e-12)
    assert channels_equal(d, inverse_channel(ref))


def test_decompose_cp_scaled_channel():
    e, _, _ = random_invertible(2, 2, 3, seed=41)
    half = KrausChannel(np.sqrt(0.5) * e.kraus, 2, 4)
    form, d = decompose_cp(half)
    assert np.trace(form.omega).real == pytest.approx(0.5, abs=1e-12)
    for i in range(2):
        for j in range(2):
            unit = matrix_unit(i, j, 2)
            np.testing.assert_allclose(apply(d, apply(half, unit)), unit, atol=1e-12)


def test_decompose_cp_distorted_isometry():
    rng = np.random.default_rng(42)
    for _ in range(10):
        v = random_isometry(4, 2, rng)
        g = ginibre(4, 4, rng) + 3 * np.eye(4)  # comfortably invertible distortion
        e = KrausChannel([g @ v])
        assert not pairwise_condition(e).holds
        q_op = np.linalg.inv(g @ g.conj().T)
        assert criterion_evaluate(e, q_op).holds
        _, d = decompose_cp(e, q_op)
        for i in range(2):
            for j in range(2):
                unit = matrix_unit(i, j, 2)
                np.testing.assert_allclose(apply(d, apply(e, unit)), unit, atol=1e-9)


def test_decompose_cp_rejects_depolarizing():
    with pytest.raises(NotInvertibleError, match="criterion"):
        decompose_cp(depolarizing(0.5))


# depolarizing negative case


@pytest.mark.parametrize("lam,expected", [(0.25, -1 / 6), (0.5, -1 / 2)])
def test_linear_inverse_not_positive(lam, expected):
    assert not is_invertible(depolarizing(lam))
    # inverse of (1-λ)ρ + λI/2 is (ρ - λ Tr(ρ) I/2)/(1-λ); its Choi has min eigenvalue -λ/(2(1-λ))
    w = np.linalg.eigvalsh(linear_inverse_choi(depolarizing(lam)))
    assert w[0] == pytest.approx(expected, abs=1e-12)
    assert w[0] == pytest.approx(-lam / (2 * (1 - lam)), abs=1e-12)


def test_linear_inverse_of_fully_depolarizing_is_singular():
    assert not is_invertible(depolarizing(1.0))
    with pytest.raises(np.linalg.LinAlgError, match="singular"):
        linear_inverse_choi(depolarizing(1.0))


def test_linear_inverse_of_invertible_channel_is_cp():
    u = haar_unitary(3, np.random.default_rng(50))
    j = linear_inverse_choi(unitary_channel(u))
    np.testing.assert_allclose(j, choi(unitary_channel(u.conj().T)), atol=1e-12)
