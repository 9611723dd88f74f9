import itertools

import numpy as np
import pytest

from tps_spectra.errors import DimensionOverflowError, NotInClassError
from tps_spectra.pauli_algebra import (
    I,
    X,
    Y,
    Z,
    OperatorExpr,
    PauliString,
    TICoefficients,
    boundary_coeffs_to_expr,
    build_boundary_class,
    build_class,
    build_ising,
    build_ising_dual,
    dim_local_space,
    expr_to_boundary_coeffs,
    expr_to_ti,
    ising_boundary_coeffs,
    ising_dual_boundary_coeffs,
    ti_to_expr,
)
from tps_spectra.spectra import spectral_distance, spectrum_of

PAULI_2x2 = {
    I: np.eye(2, dtype=complex),
    X: np.array([[0, 1], [1, 0]], dtype=complex),
    Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    Z: np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_string(letters):
    """Independent dense realization by explicit Kronecker products."""
    out = np.array([[1.0 + 0j]])
    for a in letters:
        out = np.kron(out, PAULI_2x2[a])
    return out


def test_dense_matches_kron_products():
    rng = np.random.default_rng(7)
    for _ in range(40):
        n = int(rng.integers(1, 6))
        letters = rng.integers(0, 4, size=n)
        s = PauliString(letters)
        assert np.allclose(s.dense(), kron_string(letters), atol=1e-14)


def test_dense_diagonal_examples():
    zz = PauliString([Z, Z])
    assert np.allclose(np.diag(zz.dense()), [1, -1, -1, 1])
    ident = PauliString.identity(3)
    assert np.allclose(ident.dense(), np.eye(8))


def test_pauli_product_table_against_dense():
    for la, lb in itertools.product(range(4), repeat=2):
        a, b = PauliString([la, 2]), PauliString([lb, 3])
        phase, prod = PauliString.product(a, b)
        assert np.allclose(phase * prod.dense(), a.dense() @ b.dense(), atol=1e-14)


def test_commute_predicate_matches_dense():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a = PauliString(rng.integers(0, 4, size=3))
        b = PauliString(rng.integers(0, 4, size=3))
        comm = a.dense() @ b.dense() - b.dense() @ a.dense()
        assert PauliString.commute(a, b) == bool(np.allclose(comm, 0))


def test_hilbert_schmidt_orthogonality():
    n = 3
    strings = [PauliString(s) for s in itertools.product(range(4), repeat=n)]
    rng = np.random.default_rng(0)
    for _ in range(60):
        i, j = rng.integers(0, len(strings), size=2)
        tr = np.trace(strings[i].dense().conj().T @ strings[j].dense())
        expected = 2**n if i == j else 0.0
        assert abs(tr - expected) < 1e-12


def test_apply_left_and_trace_with_agree_with_dense():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(1, 5))
        s = PauliString(rng.integers(0, 4, size=n))
        mat = rng.standard_normal((2**n, 2**n)) + 1j * rng.standard_normal((2**n, 2**n))
        assert np.allclose(s.apply_left(mat), s.dense() @ mat, atol=1e-12)
        assert abs(s.trace_with(mat) - np.trace(s.dense() @ mat)) < 1e-10


def test_dim_local_space_values():
    assert dim_local_space(10, 2, 2) == 436
    assert dim_local_space(10, 2, 2).less_than_hilbert
    assert dim_local_space(10, 2, 2).hilbert_dim == 1024
    assert dim_local_space(5, 2, 0) == 1
    assert dim_local_space(2, 2, 2) == 16
    assert not dim_local_space(2, 2, 2).less_than_hilbert


def test_dim_local_space_matches_enumeration():
    for n in range(1, 7):
        for k in range(0, n + 1):
            space = build_class("k_local", n, k)
            assert space.dim == dim_local_space(n, 2, k)


def test_klocal_class_shape():
    space = build_class("k_local", 10, 2)
    assert space.dim == 436
    assert space.basis[0].is_identity
    assert build_class("k_local", 2, 2).dim == 16
    with pytest.raises(ValueError):
        build_class("k_local", 2, 3)
    with pytest.raises(ValueError):
        build_class("no_such_family", 4)


def test_nn_chain_adjacency():
    space = build_class("nn_chain_open", 3)
    labels = {e.label() for e in space.basis}
    assert "XXI" in labels
    assert "XIX" not in labels


def test_class_basis_orthogonality_random_classes():
    rng = np.random.default_rng(5)
    for name, n in [("k_local", 4), ("nn_chain_open", 5), ("ti_chain_periodic", 4),
                    ("boundary_class", 5), ("uniform_chain", 4), ("nn_chain_periodic", 4)]:
        space = build_class(name, n, 2 if name == "k_local" else None)
        dim = space.dim
        pairs = rng.integers(0, dim, size=(12, 2))
        for i, j in pairs:
            a = space.basis[i].dense()
            b = space.basis[j].dense()
            tr = np.trace(a.conj().T @ b)
            if i == j:
                assert abs(tr - space.basis[i].norm_sq()) < 1e-9
            else:
                assert abs(tr) < 1e-9


def test_coefficient_round_trip():
    rng = np.random.default_rng(13)
    for name, n in [("k_local", 4), ("nn_chain_open", 6), ("ti_chain_periodic", 5),
                    ("boundary_class", 6), ("uniform_chain", 5)]:
        space = build_class(name, n, 2 if name == "k_local" else None)
        coeffs = rng.standard_normal(space.dim)
        expr = OperatorExpr(space, coeffs)
        back = OperatorExpr.from_dense(space, expr.dense())
        assert np.max(np.abs(back.coeffs - coeffs)) < 1e-12 * max(1.0, np.abs(coeffs).max())


def test_complex_coefficient_round_trip():
    space = build_class("ti_chain_periodic", 4)
    rng = np.random.default_rng(21)
    coeffs = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    expr = OperatorExpr(space, coeffs)
    back = OperatorExpr.from_dense(space, expr.dense())
    assert np.max(np.abs(back.coeffs - coeffs)) < 1e-12
    assert not expr.hermitian


def test_norm_fro_matches_dense():
    rng = np.random.default_rng(2)
    space = build_class("boundary_class", 5)
    expr = OperatorExpr(space, rng.standard_normal(space.dim))
    assert abs(expr.norm_fro() - np.linalg.norm(expr.dense())) < 1e-9


def test_from_dense_rejects_out_of_class():
    space = build_class("nn_chain_open", 3)
    mat = PauliString([X, I, X]).dense()  # non-adjacent pair
    with pytest.raises(NotInClassError):
        OperatorExpr.from_dense(space, mat)


def test_dense_cap(monkeypatch):
    monkeypatch.setenv("TPS_SPECTRA_MAX_N", "3")
    with pytest.raises(DimensionOverflowError):
        PauliString.identity(4).dense()
    monkeypatch.delenv("TPS_SPECTRA_MAX_N")
    PauliString.identity(4).dense()


# ---------------------------------------------------------------------------
# model families


def test_ising_small_spectra():
    assert np.allclose(spectrum_of(build_ising(2, 1, 0).dense()).values, [-1, -1, 1, 1])
    vals = spectrum_of(build_ising(3, 0, 1).dense()).values
    assert np.allclose(vals, [-3, -1, -1, -1, 1, 1, 1, 3])


def test_ising_matches_independent_kron_build():
    n, J, h = 4, 1.0, 0.7
    ref = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n - 1):
        letters = [I] * n
        letters[i] = letters[i + 1] = Z
        ref += J * kron_string(letters)
    for i in range(n):
        letters = [I] * n
        letters[i] = X
        ref += h * kron_string(letters)
    assert np.allclose(build_ising(n, J, h).dense(), ref, atol=1e-13)
    d = spectral_distance(spectrum_of(build_ising(n, J, h).dense()),
                          spectrum_of(ref))
    assert d < 1e-12


def test_ising_dual_zero_couplings():
    expr = build_ising_dual(4, 0.0, 0.0)
    assert np.allclose(expr.dense(), 0)


@pytest.mark.parametrize("n,J,h", [(4, 1.0, 1.0), (6, 1.0, 0.7), (3, -1.3, 0.4)])
def test_ising_dual_isospectral(n, J, h):
    a = spectrum_of(build_ising(n, J, h).dense())
    b = spectrum_of(build_ising_dual(n, J, h).dense())
    assert spectral_distance(a, b) < 1e-10 * a.scale


def test_periodic_ising_class():
    expr = build_ising(4, 1.0, 0.5, open_boundary=False)
    assert expr.space.name == "nn_chain_periodic"
    # four ZZ bonds including the wrap-around one
    zz_terms = [c for letters, c in expr.string_coeffs().items()
                if sum(1 for a in letters if a == Z) == 2]
    assert len(zz_terms) == 4


# ---------------------------------------------------------------------------
# boundary class


def test_boundary_class_dimension():
    assert build_boundary_class(6).dim == 12


def test_boundary_class_zero_operator():
    space = build_boundary_class(4)
    assert np.allclose(OperatorExpr(space, np.zeros(12)).dense(), 0)


def test_ising_lies_in_boundary_class():
    n, J, h = 5, 1.0, 0.7
    space = build_boundary_class(n)
    expr = boundary_coeffs_to_expr(space, *ising_boundary_coeffs(n, J, h))
    assert np.allclose(expr.dense(), build_ising(n, J, h).dense(), atol=1e-13)
    a, b, c, d = expr_to_boundary_coeffs(expr)
    assert np.allclose(a, [0, 0, J])
    assert np.allclose(b, [h, 0, 0])
    assert np.allclose(c, 0)
    assert np.allclose(d, [h, 0, 0])


def test_ising_dual_lies_in_boundary_class():
    n, J, h = 5, 1.0, 0.7
    space = build_boundary_class(n)
    expr = boundary_coeffs_to_expr(space, *ising_dual_boundary_coeffs(n, J, h))
    assert np.allclose(expr.dense(), build_ising_dual(n, J, h).dense(), atol=1e-13)


def test_boundary_class_needs_three_sites():
    with pytest.raises(ValueError):
        build_boundary_class(2)


# ---------------------------------------------------------------------------
# translation-invariant tensors


def test_ti_zz_chain_spectrum():
    tc = TICoefficients.zeros()
    tc.c[3, 2] = 1.0  # sum_i Z_i Z_{i+1}, periodic
    expr = ti_to_expr(tc, 4)
    vals = spectrum_of(expr.dense()).values
    assert np.allclose(sorted(vals), [-4, -4] + [0] * 12 + [4, 4])


def test_ti_zero_and_round_trip():
    assert np.allclose(ti_to_expr(TICoefficients.zeros(), 4).dense(), 0)
    rng = np.random.default_rng(4)
    for _ in range(5):
        tc = TICoefficients(rng.standard_normal((4, 3)))
        back = expr_to_ti(ti_to_expr(tc, 5))
        assert np.max(np.abs(back.c - tc.c)) < 1e-12


def test_expr_to_ti_rejects_non_ti():
    expr = build_ising(4, 1.0, 0.5)  # open chain: not translation invariant
    with pytest.raises(NotInClassError):
        expr_to_ti(expr)


def test_expr_to_ti_projects_from_generic_class():
    n = 4
    tc = TICoefficients(np.random.default_rng(9).standard_normal((4, 3)))
    dense = ti_to_expr(tc, n).dense()
    generic = OperatorExpr.from_dense(build_class("nn_chain_periodic", n), dense)
    back = expr_to_ti(generic)
    assert np.max(np.abs(back.c - tc.c)) < 1e-10


def test_ti_needs_three_sites():
    with pytest.raises(ValueError):
        build_class("ti_chain_periodic", 2)
