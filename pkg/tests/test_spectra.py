import itertools

import numpy as np
import pytest

from tps_spectra.errors import NonHermitianError
from tps_spectra.pauli_algebra import OperatorExpr, build_class, build_ising
from tps_spectra.spectra import (
    DEFECTIVE_CONDITION,
    Spectrum,
    degeneracy_profile,
    eig_general,
    eigh,
    match_values,
    spectral_distance,
    spectrum_of,
)


def random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / 2


def test_eigh_diag():
    sys = eigh(np.diag([1.0, -1.0]))
    assert np.allclose(sys.values, [-1, 1])
    assert abs(abs(sys.right[1, 0]) - 1) < 1e-12  # ground vector is |1>


def test_eigh_pauli_x():
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    sys = eigh(x)
    assert np.allclose(sys.values, [-1, 1])
    v0 = sys.right[:, 0]
    assert abs(abs(v0 @ np.array([1, -1]) / np.sqrt(2)) - 1) < 1e-12


def test_eigh_residual_and_orthonormality():
    h = build_ising(4, 1.0, 0.7).dense()
    sys = eigh(h)
    res = np.linalg.norm(h @ sys.right - sys.right * sys.values[None, :])
    assert res < 1e-10 * np.linalg.norm(h)
    gram = sys.right.conj().T @ sys.right
    assert np.max(np.abs(gram - np.eye(16))) < 1e-10


def test_eigh_rejects_non_hermitian():
    with pytest.raises(NonHermitianError):
        eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_eig_general_jordan_block_flagged():
    sys = eig_general(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert np.allclose(sys.values, 0)
    assert sys.min_condition < DEFECTIVE_CONDITION


def test_eig_general_characteristic_polynomial():
    sys = eig_general(np.array([[0.0, 4.0], [1.0, 0.0]]))
    assert np.allclose(sorted(sys.values.real), [-2, 2])
    assert np.max(np.abs(sys.values.imag)) < 1e-12


def test_eig_general_trace_oracle_and_residuals():
    rng = np.random.default_rng(0)
    for _ in range(10):
        mat = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
        sys = eig_general(mat)
        scale = max(1.0, float(np.abs(sys.values).max()))
        assert abs(sys.values.sum() - np.trace(mat)) < 1e-10 * scale * 12
        res = np.linalg.norm(mat @ sys.right - sys.right * sys.values[None, :])
        assert res < 1e-9 * max(1.0, np.linalg.norm(mat))


def test_left_right_biorthogonality():
    rng = np.random.default_rng(1)
    mat = rng.standard_normal((10, 10))
    sys = eig_general(mat)
    for i in range(10):
        for j in range(10):
            if i != j and abs(sys.values[i] - sys.values[j]) > 1e-3:
                assert abs(sys.left[:, i].conj() @ sys.right[:, j]) < 1e-8


def test_spectral_distance_basics():
    a = Spectrum.from_values(np.array([0.0, 1.0, 2.0]))
    assert spectral_distance(a, a) == 0.0
    b = Spectrum.from_values(np.array([2.0, 0.0, 1.0]))
    assert spectral_distance(a, b) == 0.0  # sorting/matching invariance
    c = Spectrum.from_values(np.array([0.0, 0.0]))
    d = Spectrum.from_values(np.array([0.0, 1.0]))
    assert abs(spectral_distance(c, d) - 1.0) < 1e-15
    with pytest.raises(ValueError):
        spectral_distance(a, c)


def test_matching_optimality_against_brute_force():
    rng = np.random.default_rng(2)
    for trial in range(20):
        n = int(rng.integers(2, 8))
        a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        _, _, dist = match_values(a, b)
        best = min(
            np.linalg.norm(a[list(perm)] - b)
            for perm in itertools.permutations(range(n))
        )
        assert abs(dist - best) < 1e-12


def test_spectral_distance_metric_properties():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = 16
        specs = [
            Spectrum.from_values(
                rng.standard_normal(n) + 1j * rng.standard_normal(n), hermitian=False
            )
            for _ in range(3)
        ]
        dab = spectral_distance(specs[0], specs[1])
        dba = spectral_distance(specs[1], specs[0])
        dbc = spectral_distance(specs[1], specs[2])
        dac = spectral_distance(specs[0], specs[2])
        assert dab >= 0
        assert abs(dab - dba) < 1e-12
        assert dac <= dab + dbc + 1e-12


def test_conjugation_invariance():
    rng = np.random.default_rng(4)
    for n in (8, 32):
        h = random_hermitian(rng, n)
        q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        assert (
            spectral_distance(spectrum_of(h), spectrum_of(q @ h @ q.conj().T))
            < 1e-8 * np.linalg.norm(h)
        )
        g = rng.standard_normal((n, n)) + 0.1 * np.eye(n)  # invertible, non-unitary
        a = rng.standard_normal((n, n))
        sim = g @ a @ np.linalg.inv(g)
        d = spectral_distance(
            spectrum_of(a, hermitian=False), spectrum_of(sim, hermitian=False)
        )
        assert d < 1e-8 * max(1.0, np.linalg.norm(a))


def test_spectrum_trace_consistency():
    rng = np.random.default_rng(5)
    h = random_hermitian(rng, 20)
    spec = spectrum_of(h)
    assert abs(spec.values.sum() - np.trace(h).real) < 1e-10 * spec.scale * 20


def test_spectrum_hermitian_enforcement():
    with pytest.raises(NonHermitianError):
        Spectrum.from_values(np.array([1.0 + 0.1j, 2.0]), hermitian=True)
    spec = Spectrum.from_values(np.array([1.0 + 1e-15j, 0.5]), hermitian=True)
    assert spec.hermitian
    assert spec.values.dtype == np.float64


def test_complex_sorting_is_lexicographic():
    vals = np.array([1 + 1j, 1 - 1j, 0 + 5j])
    spec = Spectrum.from_values(vals, hermitian=False)
    assert np.allclose(spec.values, [5j, 1 - 1j, 1 + 1j])


def test_degeneracy_profile_examples():
    spec = Spectrum.from_values(np.array([1.0, 1.0, 2.0]))
    assert degeneracy_profile(spec, 0.1).sizes == (2, 1)
    # sum of three commuting X fields: binomial degeneracies 1,3,3,1
    from tps_spectra.pauli_algebra import build_ising

    spec = spectrum_of(build_ising(3, 0.0, 1.0).dense())
    assert degeneracy_profile(spec, 1e-8).sizes == (1, 3, 3, 1)
    assert degeneracy_profile(spec, 1e-8).max_multiplicity == 3


def test_degeneracy_profile_random_2local_nondegenerate():
    rng = np.random.default_rng(6)
    space = build_class("k_local", 6, 2)
    coeffs = rng.standard_normal(space.dim)
    coeffs[0] = 0.0
    spec = spectrum_of(OperatorExpr(space, coeffs).dense())
    assert degeneracy_profile(spec, 1e-10).nondegenerate


def test_spectrum_digest_stable():
    a = Spectrum.from_values(np.array([1.0, 2.0]))
    b = Spectrum.from_values(np.array([2.0, 1.0]))
    assert a.digest() == b.digest()
    c = Spectrum.from_values(np.array([1.0, 2.5]))
    assert a.digest() != c.digest()
