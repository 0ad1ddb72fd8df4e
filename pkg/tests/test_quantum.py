import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from keysec import SizeGuardError
from keysec import probcore as pc
from keysec import quantum as qm


def jacobi_eigenvalues(h, sweeps=100, tol=1e-15):
    """Cyclic Jacobi on the real symmetric embedding [[A, -B], [B, A]] of H = A + iB.

    Every eigenvalue of H appears twice in the embedding; one copy of each is returned.
    """
    a = np.block([[h.real, -h.imag], [h.imag, h.real]]).astype(float)
    n = a.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1)) if theta else 1.0
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q], rot[q, p] = s, -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))[::2]


def bloch(r):
    return qm.DensityMatrix.qubit(r)


def rand_bloch(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v) * rng.random() ** (1 / 3)


# -- eigen route vs oracle ---------------------------------------------------------

@given(st.integers(1, 6), st.integers(0, 10 ** 6))
def test_eigvalsh_matches_jacobi(dim, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = g + g.conj().T
    assert np.allclose(qm.eigvalsh(h), jacobi_eigenvalues(h), atol=1e-9)


@given(st.integers(0, 10 ** 6))
def test_qubit_trace_distance_is_half_bloch_distance(seed):
    rng = np.random.default_rng(seed)
    r0, r1 = rand_bloch(rng), rand_bloch(rng)
    assert qm.trace_distance(bloch(r0), bloch(r1)) == pytest.approx(0.5 * np.linalg.norm(r0 - r1), abs=1e-12)


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        qm.DensityMatrix(np.array([[1, 0], [0, 1]], dtype=complex))
    with pytest.raises(ValueError):
        qm.DensityMatrix(np.array([[1.5, 0], [0, -0.5]], dtype=complex))
    with pytest.raises(ValueError):
        qm.DensityMatrix(np.array([[0.5, 0.5j], [0.5j, 0.5]]))


def test_ensemble_json_roundtrip():
    e = qm.CqEnsemble.random(1, 3, np.random.default_rng(0))
    back = qm.CqEnsemble.from_json(json.loads(json.dumps(e.to_json())))
    assert qm.d_criterion(back) == pytest.approx(qm.d_criterion(e), abs=1e-15)


# -- d criterion ---------------------------------------------------------------------

def test_orthogonal_pair_values():
    e = qm.CqEnsemble(1, (qm.DensityMatrix.pure([1, 0]), qm.DensityMatrix.pure([0, 1])))
    assert qm.d_criterion(e) == pytest.approx(0.5)
    r = qm.eq18_feasibility(e)
    assert r.min_eigenvalue == pytest.approx(-0.125)
    assert not r.feasible


def test_identical_states_give_zero_and_no_witness():
    e = qm.CqEnsemble.identical(2, qm.DensityMatrix.maximally_mixed(3))
    assert qm.d_criterion(e) == pytest.approx(0.0, abs=1e-15)
    assert qm.eq18_feasibility(e).feasible
    with pytest.raises(ValueError):
        qm.statement_A_witness(e)


@given(st.integers(1, 2), st.integers(2, 4), st.integers(0, 10 ** 6))
def test_block_identity_half_convention(n, dim, seed):
    e = qm.CqEnsemble.random(n, dim, np.random.default_rng(seed))
    r = qm.d_block_identity(e)
    assert r.match and r.matching_convention == "half"
    assert r.rhs_without_half == pytest.approx(2 * r.lhs, abs=1e-9)


@given(st.integers(1, 3), st.integers(0, 10 ** 6))
def test_classical_ensembles_reduce_to_statistical_distance(n, seed):
    """Diagonal probe states: d equals the distance between the joint and product distributions."""
    rng = np.random.default_rng(seed)
    dim = 3
    cond = rng.dirichlet(np.ones(dim), size=1 << n)  # P(e | k)
    e = qm.CqEnsemble(n, tuple(qm.DensityMatrix(np.diag(row).astype(complex)) for row in cond))
    joint = cond / (1 << n)
    product = np.outer(np.full(1 << n, 1 / (1 << n)), cond.mean(axis=0))
    assert qm.d_criterion(e) == pytest.approx(0.5 * np.abs(joint - product).sum(), abs=1e-12)


@given(st.integers(1, 2), st.integers(2, 3), st.integers(0, 10 ** 6))
def test_measurement_cannot_increase_distance(n, dim, seed):
    """Average posterior distance to uniform after any POVM is at most d."""
    rng = np.random.default_rng(seed)
    e = qm.CqEnsemble.random(n, dim, rng)
    povm = qm.Povm.random(dim, int(rng.integers(2, 6)), rng)
    cpd = qm.measurement_cpd(e, povm)
    avg = sum(w * pc.stat_distance_to_uniform(d) for w, d in cpd.outcomes)
    assert avg <= qm.d_criterion(e) + 1e-12


def test_near_uniform_hits_target():
    rng = np.random.default_rng(4)
    for target in (1e-5, 1e-3, 0.05):
        assert qm.d_criterion(qm.CqEnsemble.near_uniform(2, 3, target, rng)) == pytest.approx(target, rel=1e-9)


def test_size_guard(monkeypatch):
    monkeypatch.setenv("KEYSEC_MAX_DIM", "4")
    e = qm.CqEnsemble.random(2, 2, np.random.default_rng(0))
    with pytest.raises(SizeGuardError):
        qm.d_criterion(e)


# -- measurements --------------------------------------------------------------------

def test_povm_validation():
    with pytest.raises(ValueError):
        qm.Povm((np.eye(2), np.eye(2)))
    p = qm.Povm.random(3, 5, np.random.default_rng(1))
    assert np.allclose(sum(p.elements), np.eye(3))


@given(st.integers(0, 10 ** 6))
def test_helstrom_formula_and_measurement_agree(seed):
    rng = np.random.default_rng(seed)
    r0, r1 = bloch(rand_bloch(rng)), bloch(rand_bloch(rng))
    e = qm.CqEnsemble(1, (r0, r1))
    measured = pc.guess_prob_whole(qm.measurement_cpd(e, qm.Povm.helstrom(r0, r1)))
    assert measured == pytest.approx(qm.helstrom_guess_prob(r0, r1), abs=1e-12)
    assert measured == pytest.approx(0.5 + 0.5 * qm.trace_distance(r0, r1), abs=1e-12)


def test_helstrom_beats_random_measurements():
    rng = np.random.default_rng(2)
    r0, r1 = qm.DensityMatrix.random(3, rng), qm.DensityMatrix.random(3, rng)
    e = qm.CqEnsemble(1, (r0, r1))
    best = qm.helstrom_guess_prob(r0, r1)
    for i in range(1000):
        povm = qm.Povm.random_projective(3, rng) if i % 2 else qm.Povm.random(3, int(rng.integers(2, 5)), rng)
        assert pc.guess_prob_whole(qm.measurement_cpd(e, povm)) <= best + 1e-12


def test_witness_finds_non_uniform_posterior():
    rng = np.random.default_rng(3)
    e = qm.CqEnsemble.near_uniform(2, 3, 1e-3, rng)
    w = qm.statement_A_witness(e, rng=rng, trials=4)
    assert w.max_deviation > 1e-6
    assert w.outcome_prob > 0


def test_posterior_bound_vacuous_with_many_outcomes():
    rng = np.random.default_rng(5)
    e = qm.CqEnsemble.random(1, 2, rng)
    rep = qm.eq22_bound(e, qm.Povm.random(2, 16, rng))
    assert rep.any_vacuous
    assert all(row.holds for row in rep.rows)


def test_posterior_bound_holds_generally():
    rng = np.random.default_rng(6)
    for _ in range(50):
        e = qm.CqEnsemble.random(int(rng.integers(1, 3)), 3, rng)
        rep = qm.eq22_bound(e, qm.Povm.random(3, 4, rng))
        assert all(row.holds for row in rep.rows)


def test_mixture_split_needs_eps_equal_to_d():
    e = qm.CqEnsemble.random(1, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        qm.eq18_feasibility(e, eps=qm.d_criterion(e) + 0.1)
