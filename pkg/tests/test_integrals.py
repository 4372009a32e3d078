import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from hfcrit.errors import (
    ConfigurationError,
    ContractViolation,
    DataIntegrityError,
    FCIDumpParseError,
    UnsupportedFeatureError,
)
from hfcrit.integrals import (
    BasisSet,
    IntegralTables,
    MolecularSystem,
    Shell,
    boys,
    build_gaussian_integrals,
    even_tempered,
    load_fcidump,
    orthonormalizer,
    overlap_kinetic_attraction,
    point_charge_matrix,
    random_tables,
    save_fcidump,
    symmetrize_eri,
)


def s(center, alpha):
    return Shell(center, 0, (alpha,), (1.0,))


def p(center, alpha):
    return Shell(center, 1, (alpha,), (1.0,))


# ------------------------------------------------------------ Boys function


@pytest.mark.parametrize("T", [0.0, 1e-9, 0.3, 0.999, 1.0, 2.5, 17.0, 60.0])
def test_boys_matches_quadrature(T):
    F = boys(6, T)
    for n in range(7):
        ref, _ = integrate.quad(lambda t: t ** (2 * n) * math.exp(-T * t * t), 0.0, 1.0, epsabs=0, epsrel=1e-13)
        assert F[n] == pytest.approx(ref, rel=1e-12)


def test_boys_vectorized_shape():
    T = np.array([[0.1, 4.0], [30.0, 0.0]])
    assert boys(3, T).shape == (2, 2, 4)


# ------------------------------------------------------------ s functions


def test_normalized_s_closed_forms():
    alpha, Z = 0.7, 2.0
    system = MolecularSystem([(Z, (0, 0, 0))], 1)
    t = build_gaussian_integrals(system, BasisSet((s((0, 0, 0), alpha),)))
    assert t.S[0, 0] == pytest.approx(1.0, abs=1e-14)
    S, T, V = overlap_kinetic_attraction(system, BasisSet((s((0, 0, 0), alpha),)))
    assert T[0, 0] == pytest.approx(3 * alpha, rel=1e-13)
    assert V[0, 0] == pytest.approx(-Z * 2 * math.sqrt(2 * alpha / math.pi), rel=1e-13)
    assert t.eri[0, 0, 0, 0] == pytest.approx(2 * math.sqrt(alpha / math.pi), rel=1e-13)


def test_two_center_overlap_closed_form():
    a, b, d = 0.4, 1.3, 1.7
    system = MolecularSystem([(1, (0, 0, 0))], 1)
    S, _, _ = overlap_kinetic_attraction(system, BasisSet((s((0, 0, 0), a), s((0, 0, d), b))))
    ref = (4 * a * b / (a + b) ** 2) ** 0.75 * math.exp(-a * b / (a + b) * d * d)
    assert S[0, 1] == pytest.approx(ref, rel=1e-13)


def test_point_charge_matrix_of_distant_pair_tends_to_inverse_distance():
    basis = BasisSet((s((0, 0, 50.0), 2.0),))
    P = point_charge_matrix(basis, (0, 0, 0))
    assert P[0, 0] == pytest.approx(1 / 50.0, rel=1e-12)


# ------------------------------------------------------------ p functions


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_p_function_matches_center_derivative_of_s(axis):
    # a normalized p function equals d/dA of the normalized s function / sqrt(alpha)
    alpha, h = 0.9, 1e-4
    A = np.array([0.2, -0.1, 0.3])
    e = np.eye(3)[axis]
    B, Cn = (0.5, 0.4, -0.6), (-0.4, 0.2, 0.1)
    system = MolecularSystem([(1.5, Cn)], 1)
    basis = BasisSet((p(A, alpha), s(A + h * e, alpha), s(A - h * e, alpha), s(B, 0.6), s(Cn, 1.4)))
    t = build_gaussian_integrals(system, basis)
    S, T, V = overlap_kinetic_attraction(system, basis)
    ip, ip_, im = axis, 3, 4
    others = [5, 6]
    scale = 2 * h * math.sqrt(alpha)
    for M in (S, T, V):
        for j in others:
            fd = (M[ip_, j] - M[im, j]) / scale
            assert M[ip, j] == pytest.approx(fd, rel=1e-6, abs=1e-9)
    for j, k, l in [(5, 5, 5), (5, 6, 6), (6, 5, 6), (5, 6, 5)]:
        fd = (t.eri[ip_, j, k, l] - t.eri[im, j, k, l]) / scale
        assert t.eri[ip, j, k, l] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_p_shell_self_overlap_is_identity_block():
    t = build_gaussian_integrals(MolecularSystem([(1, (0, 0, 0))], 1), BasisSet((p((0, 0, 0), 1.1),)))
    np.testing.assert_allclose(t.S, np.eye(3), atol=1e-14)


def test_d_shells_are_rejected():
    with pytest.raises(UnsupportedFeatureError, match="FCIDUMP"):
        build_gaussian_integrals(MolecularSystem([(1, (0, 0, 0))], 1), BasisSet((Shell((0, 0, 0), 2, (1.0,), (1.0,)),)))


# ------------------------------------------------------------ invariances


def _mixed_basis(shift=(0, 0, 0), exp_factor=1.0, coord_factor=1.0):
    shells = [
        s((0, 0, 0), 0.5),
        s((0, 0, 1.4), 1.2),
        p((0.3, 0, 0.7), 0.8),
        Shell((0, 0.2, 0), 0, (0.3, 2.0), (0.6, 0.4)),
    ]
    return BasisSet(tuple(sh.scaled(exp_factor, coord_factor, shift) for sh in shells))


def _system(shift=(0, 0, 0), coord_factor=1.0):
    nuc = [(1.0, (0, 0, 0)), (2.0, (0, 0, 1.4))]
    return MolecularSystem(tuple((z, tuple(coord_factor * np.array(r) + shift)) for z, r in nuc), 2)


def test_translation_invariance():
    shift = (1.3, -0.7, 2.2)
    t0 = build_gaussian_integrals(_system(), _mixed_basis())
    t1 = build_gaussian_integrals(_system(shift), _mixed_basis(shift))
    np.testing.assert_allclose(t1.S, t0.S, atol=1e-12)
    np.testing.assert_allclose(t1.hcore, t0.hcore, atol=1e-12)
    np.testing.assert_allclose(t1.eri, t0.eri, atol=1e-12)


def test_length_scaling():
    # exponents * c**2 and coordinates / c: kinetic scales by c**2, Coulomb by c
    c = 1.7
    sys0, sys1 = _system(), _system(coord_factor=1 / c)
    S0, T0, V0 = overlap_kinetic_attraction(sys0, _mixed_basis())
    S1, T1, V1 = overlap_kinetic_attraction(sys1, _mixed_basis(exp_factor=c * c, coord_factor=1 / c))
    np.testing.assert_allclose(S1, S0, atol=1e-12)
    np.testing.assert_allclose(T1, c * c * T0, atol=1e-11)
    np.testing.assert_allclose(V1, c * V0, atol=1e-11)
    g0 = build_gaussian_integrals(sys0, _mixed_basis()).eri
    g1 = build_gaussian_integrals(sys1, _mixed_basis(exp_factor=c * c, coord_factor=1 / c)).eri
    np.testing.assert_allclose(g1, c * g0, atol=1e-11)


def test_kinetic_factor_scales_kinetic_part_only():
    basis = _mixed_basis()
    sys1 = _system()
    sys2 = MolecularSystem(sys1.nuclei, 2, kinetic_factor=0.5)
    _, T, V = overlap_kinetic_attraction(sys1, basis)
    t2 = build_gaussian_integrals(sys2, basis)
    np.testing.assert_allclose(t2.hcore, 0.5 * T + V, atol=1e-13)


def test_gaussian_tables_have_exact_symmetry_and_positive_repulsion():
    t = build_gaussian_integrals(_system(), _mixed_basis())
    assert all(v == 0.0 for v in t.symmetry_violations().values())
    M = t.M
    w = np.linalg.eigvalsh(t.eri.reshape(M * M, M * M))
    assert w.min() > -1e-12


def test_nuclear_repulsion_offset():
    system = _system()
    t = build_gaussian_integrals(system, _mixed_basis(), include_nuclear_repulsion=True)
    assert t.energy_offset == pytest.approx(2.0 / 1.4, rel=1e-15)


def test_basis_smaller_than_electron_count():
    with pytest.raises(ConfigurationError):
        build_gaussian_integrals(MolecularSystem([(2, (0, 0, 0))], 2), BasisSet((s((0, 0, 0), 1.0),)))


# ------------------------------------------------------------ tables


def test_orthonormalizer_conventions():
    np.testing.assert_array_equal(orthonormalizer(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(orthonormalizer(np.diag([4.0, 1.0])), np.diag([0.5, 1.0]), atol=1e-15)


def test_orthonormalizer_prunes_duplicate_function(caplog):
    system = MolecularSystem([(1, (0, 0, 0))], 1)
    basis = BasisSet((s((0, 0, 0), 1.0), s((0, 0, 0), 1.0), s((0, 0, 0), 0.2)))
    with caplog.at_level(logging.WARNING):
        t = build_gaussian_integrals(system, basis)
    assert t.n_pruned == 1
    assert "pruned" in caplog.text
    np.testing.assert_allclose(t.X.T @ t.S @ t.X, np.eye(2), atol=1e-12)
    assert t.orthonormal.M == 2


def test_tables_are_read_only():
    t = random_tables(3)
    with pytest.raises(ValueError):
        t.hcore[0, 0] = 1.0


def test_inconsistent_shapes_rejected():
    with pytest.raises(ConfigurationError):
        IntegralTables(np.eye(2), np.eye(3), np.zeros((2, 2, 2, 2)))


@settings(max_examples=25, deadline=None)
@given(M=st.integers(1, 6), seed=st.integers(0, 10_000))
def test_symmetrize_eri_property(M, seed):
    g = np.random.default_rng(seed).normal(size=(M,) * 4)
    sg = symmetrize_eri(g)
    for perm in [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1), (3, 2, 1, 0)]:
        np.testing.assert_array_equal(sg, sg.transpose(perm))
    np.testing.assert_array_equal(symmetrize_eri(sg), sg)


def test_even_tempered_exponents():
    b = even_tempered((0, 0, 0), 4, 0.5, 3.0)
    assert [sh.exponents[0] for sh in b.shells] == [0.5, 1.5, 4.5, 13.5]


# ------------------------------------------------------------ FCIDUMP


@settings(max_examples=15, deadline=None)
@given(M=st.integers(1, 5), seed=st.integers(0, 10_000))
def test_fcidump_round_trip_is_value_exact(tmp_path_factory, M, seed):
    path = tmp_path_factory.mktemp("dump") / "x.fcidump"
    t = random_tables(M, seed=seed, offset=0.123456789012345678)
    save_fcidump(t, path, n_electrons=1)
    t2, nelec = load_fcidump(path)
    assert nelec == 1
    np.testing.assert_array_equal(t2.hcore, t.hcore)
    np.testing.assert_array_equal(t2.eri, t.eri)
    assert t2.energy_offset == t.energy_offset
    assert t2.is_orthonormal


def test_fcidump_accepts_fortran_exponents_and_permuted_indices(tmp_path):
    path = tmp_path / "a.fcidump"
    path.write_text(
        " &FCI NORB=2,\n  ORBSYM=1,1,\n /\n"
        "  0.5D+00 2 1 1 1\n  0.25 1 2 2 2\n  0.25 2 2 2 1\n"
        " -1.0 1 1 0 0\n -0.5 2 2 0 0\n 0.1 1 2 0 0\n -1.5 1 0 0 0\n 0.75 0 0 0 0\n"
    )
    t, nelec = load_fcidump(path)
    assert nelec is None
    assert t.eri[0, 0, 0, 1] == 0.5 and t.eri[1, 0, 0, 0] == 0.5
    assert t.eri[0, 1, 1, 1] == 0.25
    np.testing.assert_array_equal(t.hcore, [[-1.0, 0.1], [0.1, -0.5]])
    assert t.energy_offset == 0.75


def test_fcidump_conflicting_duplicate(tmp_path):
    path = tmp_path / "b.fcidump"
    path.write_text(" &FCI NORB=1,NELEC=1,\n &END\n 1.0 1 1 1 1\n 1.1 1 1 1 1\n")
    with pytest.raises(DataIntegrityError, match="line 4"):
        load_fcidump(path)


def test_fcidump_consistent_duplicate_is_fine(tmp_path):
    path = tmp_path / "c.fcidump"
    path.write_text(" &FCI NORB=2,NELEC=1,\n &END\n 0.3 1 2 1 1\n 0.3 2 1 1 1\n")
    t, _ = load_fcidump(path)
    assert t.eri[1, 0, 0, 0] == 0.3


@pytest.mark.parametrize(
    "body,line",
    [
        (" &FCI NORB=1,\n &END\n 1.0 1 1 1\n", 3),
        (" &FCI NORB=1,\n &END\n abc 1 1 1 1\n", 3),
        (" &FCI NORB=1,\n &END\n 1.0 2 1 1 1\n", 3),
        (" &FCI NORB=1,\n 1.0 1 1 1 1\n", 2),
        (" &FCI NELEC=1,\n &END\n", 1),
    ],
)
def test_fcidump_parse_errors_carry_line_numbers(tmp_path, body, line):
    path = tmp_path / "d.fcidump"
    path.write_text(body)
    with pytest.raises(FCIDumpParseError) as info:
        load_fcidump(path)
    assert info.value.line_number == line


def test_fcidump_refuses_non_orthonormal_tables(tmp_path):
    t = random_tables(3, orthonormal=False)
    with pytest.raises(ContractViolation):
        save_fcidump(t, tmp_path / "e.fcidump")
    save_fcidump(t.orthonormal, tmp_path / "e.fcidump")
