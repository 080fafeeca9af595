import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from decohist import ValidationError
from decohist.histories import (
    ProjectorFamily,
    analyze_decoherence,
    basis_family,
    decoherence_functional,
    eigenprojector_family,
    epsilon_max,
    heisenberg_projector,
    marginalize_last,
)
from decohist.models import DecoherenceMatrix
from oracles import naive_dfun

SX = np.array([[0, 1], [1, 0]], dtype=complex)
KET0 = np.diag([1.0, 0.0]).astype(complex)


def random_hermitian(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (A + A.conj().T)


def random_rho(rng, n):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_blocks(rng, n):
    perm = rng.permutation(n)
    cuts = sorted(rng.choice(np.arange(1, n), size=rng.integers(1, n), replace=False))
    return [list(b) for b in np.split(perm, cuts)]


# heisenberg_projector


def test_heisenberg_identity_at_zero():
    rng = np.random.default_rng(0)
    H = random_hermitian(rng, 4)
    P = basis_family(4, [[0, 2], [1, 3]]).members[0]
    assert np.allclose(heisenberg_projector(P, H, 0.0), P, atol=1e-14)


def test_heisenberg_conserved_projector():
    rng = np.random.default_rng(1)
    H = random_hermitian(rng, 5)
    fam = eigenprojector_family(H)
    for P in fam.members:
        assert np.allclose(heisenberg_projector(P, H, 2.7), P, atol=1e-12)


def test_heisenberg_qubit_flip():
    out = heisenberg_projector(KET0, SX, np.pi / 2, 1.0)
    assert np.allclose(out, np.diag([0.0, 1.0]), atol=1e-12)


def test_heisenberg_rejects_bad_inputs():
    with pytest.raises(ValidationError):
        heisenberg_projector(KET0, np.array([[0, 1], [0, 0]], complex), 1.0)
    with pytest.raises(ValidationError):
        heisenberg_projector(np.diag([1.0, 0.5]), SX, 1.0)


@given(st.integers(0, 2**31), st.floats(-5, 5))
def test_heisenberg_result_is_projector(seed, t):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, 4)
    P = basis_family(4, [[0, 1], [2, 3]]).members[1]
    Q = heisenberg_projector(P, H, t, 0.7)
    assert np.abs(Q @ Q - Q).max() <= 1e-10
    assert np.abs(Q - Q.conj().T).max() <= 1e-12


# decoherence_functional


def test_single_identity_family():
    fam = ProjectorFamily([np.eye(3, dtype=complex)], ["1"])
    rng = np.random.default_rng(2)
    D = decoherence_functional(random_hermitian(rng, 3), random_rho(rng, 3), [0.4], [fam])
    assert D.entries.shape == (1, 1)
    assert abs(D.entries[0, 0] - 1) < 1e-12


def test_orthogonal_single_time():
    D = decoherence_functional(SX, KET0, [0.0], [basis_family(2)])
    assert np.allclose(D.entries, np.diag([1.0, 0.0]), atol=1e-15)


def test_qubit_two_times_frozen():
    # sigma_x dynamics, sigma_z projections at pi/4 only; rho = |0><0|
    f = basis_family(2)
    D = decoherence_functional(SX, KET0, [0.0, np.pi / 4], [f, f])
    assert D.history_index == ["0,0", "0,1", "1,0", "1,1"]
    assert np.allclose(D.entries, np.diag([0.5, 0.5, 0.0, 0.0]), atol=1e-14)
    assert np.allclose(D.entries, naive_dfun(SX, KET0, [0.0, np.pi / 4], [f.members] * 2),
                       atol=1e-14)


def test_qubit_interference_frozen():
    # projections at pi/8 and pi/4: c = cos(pi/8), s = sin(pi/8)
    f = basis_family(2)
    D = decoherence_functional(SX, KET0, [np.pi / 8, np.pi / 4], [f, f]).entries
    c2 = np.cos(np.pi / 8) ** 2
    s2 = np.sin(np.pi / 8) ** 2
    assert D[0, 0].real == pytest.approx(c2 * c2, abs=1e-14)
    assert D[2, 2].real == pytest.approx(s2 * s2, abs=1e-14)
    assert D[1, 1].real == pytest.approx(0.125, abs=1e-14)
    assert D[0, 2].real == pytest.approx(-0.125, abs=1e-14)
    assert D[1, 3].real == pytest.approx(0.125, abs=1e-14)
    assert abs(D.sum() - 1) < 1e-14


def test_rejects_invalid_inputs():
    f = basis_family(2)
    with pytest.raises(ValidationError):
        decoherence_functional(SX, np.diag([0.7, 0.7]), [0.0], [f])
    with pytest.raises(ValidationError):
        decoherence_functional(SX, KET0, [1.0, 0.5], [f, f])
    incomplete = ProjectorFamily([KET0], ["0"])
    with pytest.raises(ValidationError):
        decoherence_functional(SX, KET0, [0.0], [incomplete])


@given(st.integers(0, 2**31), st.integers(2, 6), st.integers(1, 3))
def test_dfun_invariants(seed, n, ntimes):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, n)
    rho = random_rho(rng, n)
    times = np.sort(rng.uniform(0, 3, ntimes)) + np.arange(ntimes) * 1e-3
    fams = [basis_family(n, random_blocks(rng, n)) for _ in range(ntimes)]
    D = decoherence_functional(H, rho, times, fams).entries
    assert abs(D.sum() - 1) <= 1e-10
    assert np.abs(D - D.conj().T).max() <= 1e-13
    assert np.all(np.diag(D).real >= -1e-12)
    assert np.abs(np.diag(D).imag).max() == 0.0


@given(st.integers(0, 2**31), st.integers(2, 5))
def test_refinement_consistency(seed, n):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, n)
    rho = random_rho(rng, n)
    f1 = basis_family(n, random_blocks(rng, n))
    f2 = basis_family(n, random_blocks(rng, n))
    full = decoherence_functional(H, rho, [0.3, 1.1], [f1, f2])
    coarse = decoherence_functional(H, rho, [0.3], [f1])
    red = marginalize_last(full, [len(f1.members), len(f2.members)])
    assert np.abs(red.entries - coarse.entries).max() <= 1e-10


@given(st.integers(0, 2**31), st.integers(2, 8), st.integers(1, 3))
def test_brute_force_equivalence(seed, n, ntimes):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, n)
    rho = random_rho(rng, n)
    times = np.cumsum(rng.uniform(0.05, 1.0, ntimes))
    fams = [basis_family(n, random_blocks(rng, n)) for _ in range(ntimes)]
    D = decoherence_functional(H, rho, times, fams, hbar=0.8).entries
    ref = naive_dfun(H, rho, times, [f.members for f in fams], hbar=0.8)
    assert np.abs(D - ref).max() <= 1e-12


@given(st.integers(0, 2**31), st.integers(2, 10))
def test_conserved_families_decohere(seed, n):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, n)
    fam = eigenprojector_family(H)
    D = decoherence_functional(H, random_rho(rng, n), [0.2, 0.9, 1.7], [fam] * 3)
    assert analyze_decoherence(D).epsilon_max <= 1e-12


def test_eigenprojector_family_groups_degeneracy():
    H = np.diag([1.0, 1.0, 2.0]).astype(complex)
    fam = eigenprojector_family(H)
    assert len(fam.members) == 2
    assert np.allclose(fam.members[0], np.diag([1, 1, 0]))


# analyze_decoherence


def _dm(entries):
    n = len(entries)
    return DecoherenceMatrix([str(i) for i in range(n)], np.array(entries, complex), (0.0,))


def test_epsilon_diagonal():
    rep = analyze_decoherence(_dm([[0.5, 0], [0, 0.5]]))
    assert rep.epsilon_max == 0
    assert rep.additivity_defect == 0
    assert rep.decoherent


def test_epsilon_arithmetic():
    rep = analyze_decoherence(_dm([[0.5, 0.1], [0.1, 0.5]]))
    assert rep.epsilon_max == pytest.approx(0.2, abs=1e-15)
    assert rep.additivity_defect == pytest.approx(0.2, abs=1e-15)
    assert rep.normalization == pytest.approx(1.0)
    assert rep.extra["total"] == pytest.approx(1.2)


def test_epsilon_skips_empty_histories():
    e = [[0.5, 0.0, 1e-9], [0.0, 0.5, 0.0], [1e-9, 0.0, 1e-16]]
    assert epsilon_max(np.array(e)) == 0.0


@given(st.integers(0, 2**31), st.integers(2, 6))
def test_report_invariants(seed, n):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, n)
    f = basis_family(n, random_blocks(rng, n))
    D = decoherence_functional(H, random_rho(rng, n), [0.5, 1.0], [f, f])
    rep = analyze_decoherence(D, tol=0.1)
    assert sum(rep.probabilities.values()) == pytest.approx(rep.normalization, abs=1e-12)
    assert rep.epsilon_max >= 0
    assert rep.decoherent == (rep.epsilon_max <= 0.1)
    if rep.epsilon_max == 0:
        assert rep.additivity_defect <= 1e-10
    d = rep.to_dict()
    assert set(d) >= {"normalization", "epsilon_max", "additivity_defect", "probabilities"}
