import itertools
import math
import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from hfcrit import hf_core as hc
from hfcrit import nbody
from hfcrit.errors import ContractViolation, ResourceLimitError, SpectrumClippedWarning
from hfcrit.integrals import random_tables
from oracles import brute_force_hamiltonian, random_orthonormal


def test_determinant_basis_is_lexicographic():
    b = nbody.DeterminantBasis(4, 2)
    assert b.size == 6 == len(b.subsets)
    assert b.subsets == ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
    assert all(list(s) == sorted(set(s)) for s in b.subsets)


@pytest.mark.parametrize("M,N,seed", [(4, 2, 0), (4, 2, 1), (4, 3, 2), (5, 2, 3), (4, 1, 4)])
def test_slater_condon_matches_brute_force(M, N, seed):
    t = random_tables(M, seed=seed, offset=0.0)
    H = nbody.build_hamiltonian(t, N)
    ref = brute_force_hamiltonian(np.array(t.hcore), np.array(t.eri), N)
    np.testing.assert_allclose(H, ref, atol=1e-12)


def test_hamiltonian_is_exactly_symmetric():
    H = nbody.build_hamiltonian(random_tables(6, seed=5), 3)
    np.testing.assert_array_equal(H, H.T)


def test_full_occupation_gives_single_determinant():
    t = random_tables(3, seed=1, offset=0.4)
    H = nbody.build_hamiltonian(t, 3)
    assert H.shape == (1, 1)
    assert H[0, 0] == pytest.approx(hc.hf_energy(hc.OrbitalSet(np.eye(3), t)), abs=1e-12)


def test_diagonal_equals_determinant_energies():
    t = random_tables(5, seed=2)
    H = nbody.build_hamiltonian(t, 2)
    for n, occ in enumerate(nbody.DeterminantBasis(5, 2).subsets):
        C = t.function_coefficients(occ)
        assert H[n, n] == pytest.approx(hc.hf_energy(hc.OrbitalSet(C, t)), abs=1e-12)


def test_non_interacting_spectrum_is_sums_of_levels():
    t = random_tables(6, seed=3, interacting=False, orthonormal=False)
    eps = scipy.linalg.eigh(t.hcore, t.S, eigvals_only=True)
    sums = sorted(sum(c) for c in itertools.combinations(eps, 3))
    lam = nbody.fci_spectrum(t, 3, 20).eigenvalues
    np.testing.assert_allclose(lam, sums, atol=1e-10)


def test_one_particle_levels_are_generalized_eigenvalues():
    t = random_tables(6, seed=4, orthonormal=False)
    eps = scipy.linalg.eigh(t.hcore, t.S, eigvals_only=True)
    np.testing.assert_allclose(nbody.fci_spectrum(t, 1, 6).eigenvalues, eps, atol=1e-12)


def test_rayleigh_ritz_bound_on_random_determinants(rng):
    t = random_tables(4, seed=6)
    lam1 = nbody.fci_spectrum(t, 2).eigenvalues[0]
    for _ in range(50):
        o = hc.OrbitalSet(random_orthonormal(t, 2, rng), t)
        assert lam1 <= hc.hf_energy(o) + 1e-12


@pytest.mark.parametrize("M,N", [(8, 3), (10, 4), (9, 2)])
def test_dense_and_lanczos_paths_agree(M, N):
    t = random_tables(M, seed=M + N)
    dense = nbody.fci_spectrum(t, N, 5, method="dense").eigenvalues
    sparse = nbody.fci_spectrum(t, N, 5, method="sparse").eigenvalues
    np.testing.assert_allclose(sparse, dense, atol=1e-10)
    Hs = nbody.build_hamiltonian(t, N, dense=False)
    np.testing.assert_array_equal(Hs.toarray(), nbody.build_hamiltonian(t, N, dense=True))


def test_spectrum_is_ascending_and_clipped_with_warning():
    t = random_tables(4, seed=7)
    with pytest.warns(SpectrumClippedWarning):
        res = nbody.fci_spectrum(t, 2, 10)
    assert res.eigenvalues.size == res.dimension == 6
    assert np.all(np.diff(res.eigenvalues) >= 0)


def test_dimension_cap():
    t = random_tables(10, seed=0, interacting=False)
    with pytest.raises(ResourceLimitError) as info:
        nbody.build_hamiltonian(t, 5, cap=100)
    assert info.value.size == math.comb(10, 5)


def test_expectation_examples():
    t = random_tables(5, seed=8)
    H = nbody.build_hamiltonian(t, 2)
    e = np.zeros(10)
    e[3] = 1.0
    assert nbody.expectation(e, t, 2) == H[3, 3]
    v = np.random.default_rng(0).normal(size=10)
    v /= np.linalg.norm(v)
    assert nbody.expectation(0.3 * v, t, 2) == pytest.approx(0.09 * nbody.expectation(v, t, 2), rel=1e-13)
    with pytest.raises(ContractViolation):
        nbody.expectation(1.01 * v, t, 2)


def test_slater_vector_of_unit_columns():
    t = random_tables(5, seed=9)
    v = nbody.slater_to_vector(t.function_coefficients([0, 1]), t)
    np.testing.assert_array_equal(v, np.eye(10)[0])


def test_slater_vector_under_frame_rotation(rng):
    t = random_tables(6, seed=10, orthonormal=False)
    o = hc.OrbitalSet(random_orthonormal(t, 2, rng), t)
    v = nbody.slater_to_vector(o)
    U, _ = np.linalg.qr(rng.normal(size=(2, 2)))
    if np.linalg.det(U) < 0:
        U[:, 0] *= -1
    np.testing.assert_allclose(nbody.slater_to_vector(o.C @ U, t), v, atol=1e-13)
    U[:, 0] *= -1
    np.testing.assert_allclose(nbody.slater_to_vector(o.C @ U, t), -v, atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_slater_vector_norm_is_product_of_orbital_norms(seed):
    rng = np.random.default_rng(seed)
    t = random_tables(6, seed=seed % 7, orthonormal=bool(seed % 2))
    n = rng.uniform(0.05, 1.0, 3)
    fam = hc.OrthogonalFamily(random_orthonormal(t, 3, rng) * n, t)
    v = nbody.slater_to_vector(fam)
    assert v @ v == pytest.approx(np.prod(n**2), abs=1e-12)


def test_rank_deficient_columns_give_zero_vector():
    t = random_tables(4, seed=11)
    C = np.ones((4, 2))
    with pytest.warns(nbody.RankDeficientWarning):
        v = nbody.slater_to_vector(C, t)
    assert not v.any()


def test_threshold_non_interacting_filling():
    t = random_tables(6, seed=12, interacting=False)
    eps = np.linalg.eigvalsh(t.hcore)
    rep = nbody.threshold_compare(t, 3)
    assert rep.energies[3] - rep.energies[2] == pytest.approx(eps[2], abs=1e-12)
    assert rep.energies[0] == 0.0


def test_threshold_single_particle():
    rep = nbody.threshold_compare(random_tables(3, seed=1), 1)
    assert rep.threshold == 0.0
    assert rep.reduces_to_single_removal


def test_helium_like_binding(helium_like):
    _, _, t = helium_like
    rep = nbody.threshold_compare(t, 2)
    assert rep.energies[2] < rep.energies[1] < 0.0
    assert rep.binding and rep.reduces_to_single_removal


@settings(max_examples=40, deadline=None)
@given(M=st.integers(3, 8), N=st.integers(1, 3), seed=st.integers(0, 10_000), ortho=st.booleans())
def test_master_identity(M, N, seed, ortho):
    rng = np.random.default_rng(seed)
    t = random_tables(M, seed=seed, orthonormal=ortho, offset=0.25)
    o = hc.OrbitalSet(random_orthonormal(t, N, rng), t)
    assert abs(hc.hf_energy(o) - nbody.expectation(nbody.slater_to_vector(o), t, N)) <= 1e-10
