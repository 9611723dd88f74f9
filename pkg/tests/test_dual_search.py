import numpy as np
import pytest

from tps_spectra.dual_search import (
    GaugeWitness,
    SearchSpace,
    batch_trials,
    eig_jacobian,
    fd_jacobian,
    gauge_fix,
    gauge_fixed_h0_expr,
    make_search_space,
    objective,
    random_start,
    search_duals,
    ti_gauge_fixed_space,
)
from tps_spectra.equivalence import induced_rotation
from tps_spectra.errors import DefectivePointError, NonHermitianError
from tps_spectra.pauli_algebra import (
    OperatorExpr,
    TICoefficients,
    build_class,
    ti_to_expr,
)
from tps_spectra.spectra import Spectrum, spectral_distance, spectrum_of


def random_ti(rng):
    return TICoefficients(rng.standard_normal((4, 3)))


# ---------------------------------------------------------------------------
# gauge fixing


def test_gauge_fix_already_fixed_is_identity():
    c = np.zeros((4, 3))
    c[0, 2] = 0.5
    c[1, 0] = 1.0
    c[3, 2] = -0.3
    tc = TICoefficients(c)
    fixed, witness = gauge_fix(tc)
    assert np.allclose(fixed.c, c, atol=1e-12)
    assert np.allclose(witness.rotation, np.eye(3), atol=1e-12)


def test_gauge_fix_field_row_norm_preserved():
    c = np.zeros((4, 3))
    c[0] = [0.6, 0.8, 0.0]
    fixed, _ = gauge_fix(TICoefficients(c))
    assert np.allclose(fixed.c[0], [0.0, 0.0, 1.0], atol=1e-12)


def test_gauge_fix_zero_slots_and_isospectral():
    rng = np.random.default_rng(0)
    n = 5
    for _ in range(20):
        tc = random_ti(rng)
        fixed, witness = gauge_fix(tc)
        if witness.stage1_applied:
            assert abs(fixed.c[0, 0]) == 0.0
            assert abs(fixed.c[0, 1]) == 0.0
        if witness.stage2_applied:
            assert abs(fixed.c[1, 1]) == 0.0
        a = spectrum_of(ti_to_expr(tc, n).dense())
        b = spectrum_of(ti_to_expr(fixed, n).dense())
        assert spectral_distance(a, b) < 1e-10 * a.scale


def test_gauge_fix_witness_reproduces_rotation():
    rng = np.random.default_rng(1)
    tc = random_ti(rng)
    fixed, witness = gauge_fix(tc)
    assert np.allclose(induced_rotation(witness.g), witness.rotation, atol=1e-10)
    rot = witness.rotation
    assert np.allclose(rot @ tc.c[0], fixed.c[0], atol=1e-10)
    assert np.allclose(rot @ tc.c[1:] @ rot.T, fixed.c[1:], atol=1e-10)


def test_gauge_fix_degenerate_field_skips_stage1():
    c = np.zeros((4, 3))
    c[1, 0] = 1.0
    c[1, 1] = 0.5
    fixed, witness = gauge_fix(TICoefficients(c))
    assert not witness.stage1_applied
    assert witness.stage2_applied
    assert abs(fixed.c[1, 1]) == 0.0


def test_gauge_fix_infeasible_second_stage_flagged():
    # antisymmetric XY block is invariant under z rotations: no real solution
    c = np.zeros((4, 3))
    c[0, 2] = 1.0  # field already along z
    c[1, 1] = 1.0  # C12
    c[2, 0] = -1.0  # C21
    fixed, witness = gauge_fix(TICoefficients(c))
    assert not witness.stage2_applied
    assert abs(fixed.c[1, 1]) > 0.1


def test_gauge_fix_rejects_complex():
    with pytest.raises(NonHermitianError):
        gauge_fix(TICoefficients(np.zeros((4, 3), dtype=complex) + 1j))


# ---------------------------------------------------------------------------
# objective / jacobian


def test_objective_zero_at_target_params():
    rng = np.random.default_rng(2)
    space = ti_gauge_fixed_space(4, complexified=False)
    params = rng.standard_normal(9)
    h0 = space.to_expr(params)
    target = spectrum_of(h0.dense(), hermitian=True)
    ev = objective(params, target, space)
    assert ev.value < 1e-12 * target.scale


def test_objective_equals_spectral_distance():
    rng = np.random.default_rng(3)
    space = ti_gauge_fixed_space(4, complexified=True)
    params = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    h0 = gauge_fixed_h0_expr(rng.standard_normal(9), 4)
    target = spectrum_of(h0.dense(), hermitian=True)
    ev = objective(params, target, space)
    found = spectrum_of(space.to_expr(params).dense(), hermitian=False)
    tvals = target.values.astype(np.complex128)
    from tps_spectra.spectra import match_values

    _, _, dist = match_values(found.values, tvals)
    assert abs(ev.value - dist) < 1e-10


def test_jacobian_single_qubit_z():
    space = SearchSpace(build_class("k_local", 1, 1), complexified=False)
    params = np.zeros(3)
    params[2] = 0.7  # c * Z
    jac = eig_jacobian(params, space)
    zcol = jac[:, 2]
    assert np.allclose(sorted(zcol), [-1.0, 1.0], atol=1e-10)


def test_jacobian_hermitian_rows_real():
    rng = np.random.default_rng(4)
    space = ti_gauge_fixed_space(4, complexified=False)
    jac = eig_jacobian(rng.standard_normal(9), space)
    assert not np.iscomplexobj(jac)


@pytest.mark.parametrize("complexified", [False, True])
def test_jacobian_matches_finite_differences(complexified):
    rng = np.random.default_rng(5)
    space = ti_gauge_fixed_space(4, complexified=complexified)
    for _ in range(5):
        if complexified:
            params = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        else:
            params = rng.standard_normal(9)
        expr = space.to_expr(params)
        from tps_spectra.spectra import eig_general, eigh

        eigsys = eigh(expr.dense()) if not complexified else eig_general(expr.dense())
        try:
            jac = eig_jacobian(params, space, eigsys)
        except DefectivePointError:
            continue
        fd = fd_jacobian(params, space, eigsys.values, 1e-6)
        denom = max(1.0, float(np.abs(jac).max()))
        assert float(np.abs(jac - fd).max()) / denom < 1e-5


def test_jacobian_defective_point_raises():
    space = SearchSpace(build_class("ti_chain_periodic", 3), complexified=True)
    # nilpotent-ish member: c (X + iY) fields commute and square to zero
    params = np.zeros(12, dtype=complex)
    params[0] = 1.0  # X field
    params[1] = 1.0j  # Y field
    with pytest.raises(DefectivePointError):
        eig_jacobian(params, space)


# ---------------------------------------------------------------------------
# search


def test_search_reconverges_from_perturbed_target():
    rng = np.random.default_rng(6)
    n = 4
    space = ti_gauge_fixed_space(n, complexified=True)
    hits = 0
    trials = 10
    for t in range(trials):
        params = rng.standard_normal(9)
        h0 = gauge_fixed_h0_expr(params, n)
        target = spectrum_of(h0.dense(), hermitian=True)
        p0 = params * (1 + 0.01 * rng.standard_normal(9)) + 0j
        from tps_spectra.dual_search import _gauss_newton_start

        res = _gauss_newton_start(p0, target, space, 1e-8, 500)
        if res.distance < 1e-8 * target.scale:
            hits += 1
    assert hits >= int(0.95 * trials)


def test_search_duals_classifies_trivial():
    rng = np.random.default_rng(7)
    n = 5
    space = ti_gauge_fixed_space(n, complexified=True)
    h0 = gauge_fixed_h0_expr(rng.standard_normal(9), n)
    report = search_duals(h0, space, starts=2, seed=11)
    assert len(report.minima) == 2
    assert len(report.converged) >= 1
    for rec in report.converged:
        assert rec.classification == "trivial_equivalent"
        assert rec.equivalence_witness is not None


def test_search_duals_deterministic():
    rng = np.random.default_rng(8)
    n = 4
    space = ti_gauge_fixed_space(n, complexified=True)
    h0 = gauge_fixed_h0_expr(rng.standard_normal(9), n)
    r1 = search_duals(h0, space, starts=2, seed=3)
    r2 = search_duals(h0, space, starts=2, seed=3)
    for a, b in zip(r1.minima, r2.minima):
        assert np.array_equal(a.params, b.params)
        assert a.distance == b.distance
        assert a.classification == b.classification


def test_batch_trials_determinism_and_aggregate():
    space = ti_gauge_fixed_space(4, complexified=True)
    b1 = batch_trials(2, 1, space, seed=5)
    b2 = batch_trials(2, 1, space, seed=5)
    assert b1.aggregate() == b2.aggregate()
    for t1, t2 in zip(b1.trials, b2.trials):
        assert np.array_equal(t1.h0_coeffs, t2.h0_coeffs)
        assert t1.report.target_digest == t2.report.target_digest


def test_random_start_scaled_to_target_norm():
    rng = np.random.default_rng(9)
    space = ti_gauge_fixed_space(4, complexified=True)
    h0 = gauge_fixed_h0_expr(rng.standard_normal(9), 4)
    p0 = random_start(space, rng, h0.norm_fro())
    assert abs(space.to_expr(p0).norm_fro() - h0.norm_fro()) < 1e-9


def test_search_rejects_non_hermitian_target():
    space = ti_gauge_fixed_space(4, complexified=True)
    bad = space.to_expr(np.ones(9) + 1j * np.ones(9))
    with pytest.raises(NonHermitianError):
        search_duals(bad, space, starts=1, seed=0)


def test_gradient_descent_variant_reduces_objective():
    rng = np.random.default_rng(10)
    n = 3
    space = ti_gauge_fixed_space(n, complexified=False)
    params = rng.standard_normal(9)
    h0 = gauge_fixed_h0_expr(params, n)
    target = spectrum_of(h0.dense(), hermitian=True)
    from tps_spectra.dual_search import _gradient_descent_start

    p0 = params + 0.05 * rng.standard_normal(9)
    start_val = objective(p0, target, space).value
    res = _gradient_descent_start(p0, target, space, 1e-8, 200)
    assert res.distance < start_val


def test_make_search_space_dims():
    assert make_search_space("ti_chain_gauge_fixed", 5, True).parameter_dim == 9
    assert make_search_space("ti_chain_gauge_fixed", 5, True).real_dim == 18
    assert make_search_space("boundary_class", 5).parameter_dim == 12
    # identity is excluded from the parameters of identity-bearing classes:
    # dim(nn_chain_open(4)) = 1 + 12 + 27 = 40
    assert make_search_space("nn_chain_open", 4).parameter_dim == 39
