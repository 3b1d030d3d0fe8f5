import cvxpy as cp
import numpy as np
import pytest
import scipy.linalg as sla

from cohdual import conic, linalg as la
from cohdual.discrimination import channel_success
from cohdual.duality import (
    NOT_TIGHT_NOTE, SeeSawOptions, _channel_problem, duality_bound, necessary_condition, post_discrimination_coherence,
    robustness_average_check, saturating_channel, saturating_states, sigma_states,
)
from cohdual.measures import robustness
from cohdual.quantum import (
    QuantumChannel, StateEnsemble, basis_ensemble, is_cptp, is_mio, mcs_ensemble,
)

from helpers import psi, random_density, random_orthogonal_ensemble


def channel_step_oracle(e: StateEnsemble, witnesses: list[np.ndarray]) -> float:
    """One channel step over the full Choi matrix, solved with SCS.

    Perfect discrimination zeroes every label block of N(rho_j) except
    (j, j). For a PSD Choi matrix that holds exactly when J annihilates
    conj(psi_j) (x) |b> (x) C^d for all b != j, so J is parametrized on the
    complement of those vectors; this keeps the program strictly feasible.
    No block structure in the label register is assumed.
    """
    d, k = e.dim, e.k
    kd = k * d
    vecs = e.pure_vectors()
    killed = [la.tensor(np.conj(v)[:, None], la.ket(b, k)[:, None], la.ket(a, d)[:, None]).ravel()
              for j, v in enumerate(vecs) for b in range(k) if b != j for a in range(d)]
    # null_space(A) is orthogonal to the conjugated rows of A
    basis = sla.null_space(np.conj(killed)) if killed else np.eye(d * kd)
    y = cp.Variable((basis.shape[1], basis.shape[1]), hermitian=True)
    j_var = basis @ y @ basis.conj().T

    def block(i, ip):
        return j_var[i * kd:(i + 1) * kd, ip * kd:(ip + 1) * kd]

    def action(rho):
        return sum(rho[i, ip] * block(i, ip) for i in range(d) for ip in range(d))

    cons = [y >> 0]
    # Hermiticity makes the lower-triangle conditions redundant
    for i in range(d):
        for ip in range(i, d):
            cons.append(cp.trace(block(i, ip)) == (1.0 if i == ip else 0.0))
    # entries whose row or column is cut away by the face are zero already
    live = np.linalg.norm(basis, axis=1) > 1e-12
    for m in range(d):
        rows = live[m * kd:(m + 1) * kd]
        for r in range(kd):
            for c in range(r + 1, kd):
                if rows[r] and rows[c]:
                    cons.append(block(m, m)[r, c] == 0)
    objective = 0
    for j, (p, r) in enumerate(e.items):
        out = action(r.matrix)
        objective += p * cp.real(cp.trace(witnesses[j] @ out[j * d:(j + 1) * d, j * d:(j + 1) * d]))
    prob = cp.Problem(cp.Maximize(objective), cons)
    # the restricted program is dual degenerate; the first-order solver copes with that
    prob.solve(solver=cp.SCS, eps=1e-10, max_iters=200000)
    assert prob.status == cp.OPTIMAL
    jv = basis @ y.value @ basis.conj().T
    ch = QuantumChannel(d, (k, d), jv)
    assert channel_success(ch, e) >= 1 - 1e-7
    return prob.value


def readout_channel(d: int) -> QuantumChannel:
    """Measure in the computational basis, write the outcome to B and |0> to the reference."""
    ref = la.basis_projector(0, d)
    choi = sum(la.tensor(la.basis_projector(i, d), la.basis_projector(i, d), ref) for i in range(d))
    return QuantumChannel(d, (d, d), choi)


def check_report(rep, e):
    assert rep.c_lower >= -1e-9
    assert rep.c_lower <= duality_bound(e) + 1e-5
    assert rep.gap == pytest.approx(rep.bound - rep.c_lower)
    assert is_cptp(rep.channel) and is_mio(rep.channel, 1e-7)
    assert channel_success(rep.channel, e) >= 1 - 1e-7
    assert all(b >= a - 1e-9 for a, b in zip(rep.history, rep.history[1:]))


def test_mcs_4_2():
    e = mcs_ensemble(4, 2)
    rep = post_discrimination_coherence(e)
    assert rep.c_lower == pytest.approx(1.0, abs=1e-4)
    assert rep.bound == pytest.approx(1.0, abs=1e-12)
    assert rep.s_vn == pytest.approx(1.0, abs=1e-12)
    assert rep.uniform and rep.note == ""
    check_report(rep, e)


def test_full_basis_preserves_nothing(rng):
    for e in (basis_ensemble(3), random_orthogonal_ensemble(3, 3, rng, uniform=True)):
        rep = post_discrimination_coherence(e)
        assert rep.c_lower <= 1e-4
        check_report(rep, e)


def test_singleton_keeps_all_coherence():
    e = StateEnsemble.from_states([psi(2)])
    rep = post_discrimination_coherence(e)
    assert rep.c_lower == pytest.approx(1.0, abs=1e-4)
    check_report(rep, e)


def test_rejects_non_orthogonal_or_mixed(rng):
    with pytest.raises(ValueError):
        post_discrimination_coherence(StateEnsemble.from_states([la.basis_projector(0, 2), psi(2)]))
    with pytest.raises(ValueError):
        post_discrimination_coherence(StateEnsemble.from_states([random_density(2, rng)]))
    with pytest.raises(ValueError):
        duality_bound(StateEnsemble.from_states([la.basis_projector(0, 2), psi(2)]))


def test_options_validation():
    with pytest.raises(ValueError):
        SeeSawOptions(max_rounds=0)


def test_duality_bound_examples():
    assert duality_bound(mcs_ensemble(4, 2)) == pytest.approx(1.0, abs=1e-12)
    assert duality_bound(basis_ensemble(4)) == 0.0
    e = StateEnsemble.from_states([la.basis_projector(0, 3), la.basis_projector(1, 3)], [0.5, 0.5])
    assert duality_bound(e) == pytest.approx(0.5849625, abs=1e-7)
    assert duality_bound(e) == pytest.approx(np.log2(3) - 1, abs=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_duality_bound_equals_entropy_form_for_uniform(d):
    for k in range(1, d + 1):
        rep_bound = np.log2(d) - np.log2(k)
        assert duality_bound(mcs_ensemble(d, k)) == pytest.approx(rep_bound, abs=1e-12)


def test_saturating_channel_examples():
    _, sigma, _ = saturating_channel(2, 1)
    assert np.allclose(sigma.matrix, psi(2))
    assert robustness(sigma.matrix) == pytest.approx(1, abs=1e-6)
    assert robustness(saturating_channel(4, 2)[1].matrix) == pytest.approx(1, abs=1e-6)
    for d in (2, 3, 4):
        assert np.allclose(saturating_channel(d, d)[1].matrix, np.eye(d) / d)
    with pytest.raises(ValueError):
        saturating_channel(3, 4)
    with pytest.raises(ValueError):
        saturating_states(1, 1)


def test_necessary_condition_examples():
    holds, lhs = necessary_condition(mcs_ensemble(4, 2))
    assert holds and lhs == pytest.approx(2.0, abs=1e-5)
    subset = StateEnsemble.from_states([la.basis_projector(0, 4), la.basis_projector(1, 4)])
    holds, lhs = necessary_condition(subset)
    assert not holds and lhs == pytest.approx(1.0, abs=1e-6)
    holds, lhs = necessary_condition(StateEnsemble.from_states([psi(2)]))
    assert holds and lhs == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(ValueError):
        necessary_condition(basis_ensemble(3))


def test_robustness_average_check_examples():
    lhs, rhs = robustness_average_check(mcs_ensemble(4, 2), saturating_channel(4, 2)[0])
    assert lhs == pytest.approx(1, abs=1e-5) and rhs == pytest.approx(1, abs=1e-5)
    lhs, rhs = robustness_average_check(basis_ensemble(3), readout_channel(3))
    assert lhs == 0 and rhs == 0
    lhs, rhs = robustness_average_check(StateEnsemble.from_states([psi(3)]), saturating_channel(3, 1)[0])
    assert lhs == pytest.approx(np.log2(3), abs=1e-5) and rhs == pytest.approx(np.log2(3), abs=1e-5)


def test_robustness_average_check_rejects_bad_channels():
    with pytest.raises(ValueError):
        robustness_average_check(mcs_ensemble(4, 3), saturating_channel(4, 2)[0])
    # the saturating channel for k = 2 does not separate the swapped ensemble
    swapped = StateEnsemble.from_states(list(reversed([r.matrix for r in mcs_ensemble(4, 2).states])))
    with pytest.raises(ValueError):
        robustness_average_check(swapped, saturating_channel(4, 2)[0])


def test_sigma_states_of_saturating_channel():
    ch, sigma, _ = saturating_channel(4, 2)
    for s in sigma_states(mcs_ensemble(4, 2), ch):
        assert np.allclose(s.matrix, sigma.matrix, atol=1e-9)


def test_monotone_in_k():
    values = [post_discrimination_coherence(mcs_ensemble(4, k)).c_lower for k in range(1, 5)]
    for a, b in zip(values, values[1:]):
        assert a >= b - 1e-5


def test_non_uniform_ensembles(rng):
    gaps = []
    for _ in range(4):
        e = random_orthogonal_ensemble(3, 2, rng)
        rep = post_discrimination_coherence(e)
        check_report(rep, e)
        assert not rep.uniform and rep.note == NOT_TIGHT_NOTE
        assert rep.bound == pytest.approx(np.log2(3) - rep.s_min, abs=1e-12)
        eta = sum(p * robustness(s.matrix) for p, s in zip(rep.probs, rep.sigmas))
        assert eta <= np.max(rep.probs) * (rep.d - rep.k) + 1e-4
        gaps.append(rep.pmax_bound - rep.c_lower)
    assert min(gaps) >= -1e-5


def test_sigmas_are_states_and_obey_the_bound():
    for d, k in ((3, 1), (3, 2), (4, 3)):
        rep = post_discrimination_coherence(mcs_ensemble(d, k))
        eta = 0.0
        for p, s in zip(rep.probs, rep.sigmas):
            assert abs(np.trace(s.matrix) - 1) <= 1e-9
            assert np.linalg.eigvalsh(s.matrix)[0] >= -1e-9
            eta += p * robustness(s.matrix)
        assert eta <= np.max(rep.probs) * (d - k) + 1e-4


def test_first_channel_step_matches_full_choi_program(rng):
    for e in (random_orthogonal_ensemble(3, 2, rng), mcs_ensemble(3, 2), random_orthogonal_ensemble(4, 3, rng)):
        rep = post_discrimination_coherence(e, SeeSawOptions(max_rounds=1, restarts=0))
        witnesses = [np.ones((e.dim, e.dim)) for _ in range(e.k)]
        assert rep.channel_history[0] == pytest.approx(channel_step_oracle(e, witnesses), abs=1e-6)


def test_random_witness_step_matches_full_choi_program(rng):
    # a random rank-one witness of unit diagonal, shared by both states
    e = random_orthogonal_ensemble(3, 2, rng)
    v = np.exp(2j * np.pi * rng.random(3))
    w = np.outer(v, v.conj())
    prob, _, _ = _channel_problem(e.pure_vectors(), e.probs, 3, [w, w])
    ours = conic.solve(prob).value
    assert ours == pytest.approx(channel_step_oracle(e, [w, w]), abs=1e-6)


def test_deterministic_for_fixed_seed(rng):
    e = random_orthogonal_ensemble(3, 2, rng)
    a = post_discrimination_coherence(e, SeeSawOptions(seed=5))
    b = post_discrimination_coherence(e, SeeSawOptions(seed=5))
    assert a.c_lower == b.c_lower and a.history == b.history
