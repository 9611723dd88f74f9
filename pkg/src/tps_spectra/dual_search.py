"""Spectrum-matching search for duals over (complexified) coefficient spaces.

The inverse-eigenvalue objective is ||spectrum(H(p)) - target|| under the
optimal eigenvalue assignment, a nonlinear least-squares problem whose global
minima are exactly zero at every operator isospectral to the target. The
solver is a damped Gauss-Newton (Levenberg) iteration on the matched residual
vector with the assignment recomputed every evaluation; first-order
eigenvalue derivatives come from left/right eigenvectors and fall back to
central finite differences near defective points. Plain gradient descent is
available behind ``method="gd"`` for fidelity comparisons.

Gauge fixing of the 12-parameter translation-invariant chain to its
9-parameter slice (zero X and Y fields, zero XY bond) is implemented as the
two-stage uniform rotation it comes from: align the single-site field with
the z axis, then rotate about z to kill the XY bond coupling. The second
stage has no real solution for some coefficient tensors (the gauge fixing is
not global); those are flagged and returned partially fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .equivalence import (
    decide_equivalent,
    group_element_from_params,
    rotation_from_params,
)
from .errors import DefectivePointError, NonHermitianError
from .pauli_algebra import (
    LocalityClass,
    OperatorExpr,
    TICoefficients,
    build_class,
    ti_to_expr,
)
from .seeding import derive_seed
from .spectra import (
    DEFECTIVE_CONDITION,
    EigenSystem,
    Spectrum,
    eig_general,
    eigh,
    match_values,
    spectrum_of,
)

DEFAULT_SUCCESS_TOL = 1e-8
DEFAULT_CLASSIFY_TOL = 1e-6
DEFAULT_MAX_ITER = 500
FD_STEP = 1e-6


# ----------------------------------------------------------------------------
# search space


class SearchSpace:
    """A linear parameterization p -> H(p) over a locality-class basis.

    Parameters run over every basis element except a leading identity (an
    identity coefficient only shifts the whole spectrum). ``complexified``
    doubles the real dimension: parameters become complex and H(p) is a
    general (non-Hermitian) member of the complexified class.

    For translation-invariant classes the space also exposes the momentum
    sector decomposition: every member commutes with the translation
    operator, so spectra split into per-sector multisets that the search
    exploits (see ``_SectorContext``).
    """

    def __init__(self, space: LocalityClass, complexified: bool):
        self.space = space
        self.complexified = bool(complexified)
        start = 1 if space.includes_identity else 0
        self.param_indices = tuple(range(start, space.dim))
        self._dense_dirs: list[np.ndarray] | None = None
        self._sector_ctx = None

    @property
    def parameter_dim(self) -> int:
        return len(self.param_indices)

    @property
    def real_dim(self) -> int:
        return self.parameter_dim * (2 if self.complexified else 1)

    @property
    def translation_invariant(self) -> bool:
        return self.space.name in ("ti_chain_periodic", "ti_chain_gauge_fixed")

    def to_expr(self, params: np.ndarray) -> OperatorExpr:
        params = np.asarray(params)
        if params.shape != (self.parameter_dim,):
            raise ValueError(f"expected {self.parameter_dim} parameters")
        dtype = np.complex128 if (self.complexified or np.iscomplexobj(params)) else np.float64
        coeffs = np.zeros(self.space.dim, dtype=dtype)
        coeffs[list(self.param_indices)] = params
        return OperatorExpr(self.space, coeffs)

    def dense_directions(self) -> list[np.ndarray]:
        if self._dense_dirs is None:
            self._dense_dirs = [self.space.basis[j].dense() for j in self.param_indices]
        return self._dense_dirs

    def sector_context(self) -> "_SectorContext | None":
        if not self.translation_invariant:
            return None
        if self._sector_ctx is None:
            self._sector_ctx = _SectorContext(self)
        return self._sector_ctx

    def describe(self) -> dict:
        return {
            "class": self.space.name,
            "n": self.space.n,
            "complexified": self.complexified,
            "parameter_dim": self.parameter_dim,
        }


def make_search_space(name: str, n: int, complexified: bool = False, k: int | None = None) -> SearchSpace:
    return SearchSpace(build_class(name, n, k), complexified)


class _SectorContext:
    """Momentum-sector decomposition of a translation-invariant search space.

    Members of a TI class commute with the translation operator T, so the
    Hilbert space splits into momentum sectors (eigenspaces of T). Matching
    eigenvalues sector by sector instead of as one unstructured multiset
    removes the cross-sector mis-assignments that trap the descent in local
    minima, and shrinks every eigensolve from 2^n to the sector dimensions.

    Trivial-duality group elements permute sector labels at most by momentum
    reversal (reflection and transposition send k to -k; translations and
    uniform conjugations preserve k), so sector targets are matched under
    both label maps and the better one is used each evaluation.
    """

    def __init__(self, sspace: SearchSpace):
        from .equivalence import permutation_unitary

        n = sspace.space.n
        t_op = permutation_unitary(n, [(i + 1) % n for i in range(n)])
        dim = t_op.shape[0]
        omega = np.exp(2j * np.pi / n)
        powers = []
        power = np.eye(dim)
        for _ in range(n):
            powers.append(power)
            power = t_op @ power
        self.bases = []
        for k in range(n):
            proj = sum((omega ** (-k * j)) * powers[j] for j in range(n)) / n
            q, r = np.linalg.qr(proj)
            keep = np.abs(np.diag(r)) > 1e-8
            self.bases.append(np.ascontiguousarray(q[:, keep]))
        dirs = sspace.dense_directions()
        # blocks[k]: (m, d_k, d_k) array of basis directions inside sector k
        self.blocks = [
            np.stack([vk.conj().T @ b @ vk for b in dirs]) for vk in self.bases
        ]
        self.dims = [b.shape[1] for b in self.bases]
        self.n_sectors = n
        maps = [tuple(range(n)), tuple((-k) % n for k in range(n))]
        self.label_maps = list(dict.fromkeys(maps))

    def target_sectors(self, h_dense: np.ndarray) -> list[np.ndarray]:
        """Per-sector Hermitian eigenvalues of a TI target, with a leakage check."""
        blocks = [vk.conj().T @ h_dense @ vk for vk in self.bases]
        total = sum(float(np.linalg.norm(b)) ** 2 for b in blocks)
        full = float(np.linalg.norm(h_dense)) ** 2
        if full > 0 and abs(full - total) > 1e-16 * full * h_dense.shape[0]:
            raise ValueError("target does not commute with translation; not TI")
        return [np.linalg.eigvalsh(b).astype(np.complex128) for b in blocks]


def _sector_values(params, ctx: _SectorContext):
    return [np.linalg.eigvals(np.tensordot(params, blk, axes=1)) for blk in ctx.blocks]


def _sector_match(found: list, tsecs: list, ctx: _SectorContext):
    """Best label map and per-sector matchings; returns (value, residual, perms, map)."""
    best = None
    for lmap in ctx.label_maps:
        total = 0.0
        perms = []
        resids = []
        for k in range(ctx.n_sectors):
            perm, resid, dist = match_values(found[k], tsecs[lmap[k]])
            perms.append(perm)
            resids.append(resid)
            total += dist * dist
        value = math.sqrt(total)
        if best is None or value < best[0]:
            best = (value, np.concatenate(resids), perms, lmap)
    return best


# ----------------------------------------------------------------------------
# gauge fixing of the translation-invariant family


@dataclass
class GaugeWitness:
    rotation: np.ndarray
    g: np.ndarray
    stage1_applied: bool
    stage2_applied: bool


def _rotation_aligning_to_z(u: np.ndarray):
    """Rotation parameters tau with R(tau) u = e_z for a unit vector u."""
    ez = np.array([0.0, 0.0, 1.0])
    c = float(np.dot(u, ez))
    if c > 1.0 - 1e-14:
        return np.zeros(3)
    if c < -1.0 + 1e-14:
        return np.array([-math.pi / 2.0, 0.0, 0.0])  # half angle of a pi turn about x
    axis = np.cross(u, ez)
    axis = axis / np.linalg.norm(axis)
    theta = math.acos(max(-1.0, min(1.0, c)))
    # rotation_from_params(tau) rotates by angle -2|tau| about tau-hat
    return -(theta / 2.0) * axis


def gauge_fix(tc: TICoefficients, tol: float = 1e-12) -> tuple[TICoefficients, GaugeWitness]:
    """Rotate a real TI coefficient tensor into the 9-parameter gauge-fixed slice.

    Stage 1 aligns the single-site field with z (zeroing the X and Y field
    slots); stage 2 is a z-axis rotation chosen so the XY bond coupling
    vanishes. Either stage is skipped, and flagged, when its input is
    degenerate (zero field) or its defining equation has no real solution.
    """
    if np.iscomplexobj(tc.c):
        raise NonHermitianError("gauge fixing operates on real (Hermitian) coefficients")
    fieldv = tc.c[0].astype(np.float64).copy()
    block = tc.c[1:].astype(np.float64).copy()
    scale = max(1.0, float(np.abs(tc.c).max()))

    stage1 = False
    rot1 = np.eye(3)
    fnorm = float(np.linalg.norm(fieldv))
    if fnorm > 1e-14 * scale:
        tau1 = _rotation_aligning_to_z(fieldv / fnorm)
        rot1 = rotation_from_params(tau1)
        stage1 = True
    else:
        tau1 = np.zeros(3)
    fieldv = rot1 @ fieldv
    block = rot1 @ block @ rot1.T

    # z rotations preserve the aligned field; pick the angle where the XY
    # bond entry vanishes: A cos(2t) + B sin(2t) = -D
    a_term = (block[0, 1] + block[1, 0]) / 2.0
    b_term = (block[0, 0] - block[1, 1]) / 2.0
    d_term = (block[0, 1] - block[1, 0]) / 2.0
    rho = math.hypot(a_term, b_term)
    stage2 = False
    tau2 = np.zeros(3)
    if rho >= abs(d_term) and rho > 1e-14 * scale:
        phi = math.atan2(b_term, a_term)
        delta = math.acos(max(-1.0, min(1.0, -d_term / rho)))
        # both roots solve the equation; take the smallest rotation so that
        # already-fixed tensors are fixed points with an identity witness
        candidates = [phi + delta, phi - delta]
        wrapped = [math.remainder(x, 2.0 * math.pi) for x in candidates]
        x = min(wrapped, key=abs)
        theta = x / 2.0
        tau2 = np.array([0.0, 0.0, -theta / 2.0])
        stage2 = True
    rot2 = rotation_from_params(tau2)
    fieldv = rot2 @ fieldv
    block = rot2 @ block @ rot2.T

    out = np.vstack([fieldv, block])
    if stage1:
        if max(abs(out[0, 0]), abs(out[0, 1])) > 1e-10 * scale:
            raise RuntimeError("stage-1 gauge fixing failed to zero the X/Y fields")
        out[0, 0] = 0.0
        out[0, 1] = 0.0
    if stage2:
        if abs(out[1, 1]) > 1e-10 * scale:
            raise RuntimeError("stage-2 gauge fixing failed to zero the XY bond")
        out[1, 1] = 0.0
    g = group_element_from_params(tau2) @ group_element_from_params(tau1)
    witness = GaugeWitness(rot2 @ rot1, g, stage1, stage2)
    return TICoefficients(out), witness


# ----------------------------------------------------------------------------
# objective and Jacobian


@dataclass
class ObjectiveEval:
    value: float
    residual: np.ndarray  # residual[k] = lambda_{perm[k]} - target[k]
    perm: np.ndarray
    eigsys: EigenSystem


def objective(params: np.ndarray, target: Spectrum, space: SearchSpace) -> ObjectiveEval:
    """Matched spectral residual of H(params) against the target spectrum."""
    if target.n_dim != space.space.hilbert_dim:
        raise ValueError("target spectrum dimension does not match the class")
    expr = space.to_expr(params)
    dense = expr.dense()
    hermitian = not space.complexified and expr.hermitian
    eigsys = eigh(dense) if hermitian else eig_general(dense)
    found = eigsys.values
    tvals = target.values
    if not (hermitian and target.hermitian):
        found = found.astype(np.complex128)
        tvals = tvals.astype(np.complex128)
    perm, residual, value = match_values(found, tvals)
    return ObjectiveEval(value, residual, perm, eigsys)


def eig_jacobian(params: np.ndarray, space: SearchSpace, eigsys: EigenSystem | None = None) -> np.ndarray:
    """d lambda_i / d p_j = (w_i . B_j v_i) / (w_i . v_i), rows in eigsys order.

    Raises DefectivePointError when any eigenpair condition estimate is below
    the defectiveness threshold; callers fall back to finite differences.
    """
    if eigsys is None:
        expr = space.to_expr(params)
        dense = expr.dense()
        eigsys = eigh(dense) if (not space.complexified and expr.hermitian) else eig_general(dense)
    if eigsys.min_condition < DEFECTIVE_CONDITION:
        raise DefectivePointError(
            f"eigenpair condition {eigsys.min_condition:.2e} below {DEFECTIVE_CONDITION:.0e}"
        )
    vr = eigsys.right
    wl = eigsys.left
    denom = np.einsum("xi,xi->i", wl.conj(), vr)
    dirs = space.dense_directions()
    n_dim = vr.shape[0]
    jac = np.empty((n_dim, space.parameter_dim), dtype=np.complex128)
    for j, bmat in enumerate(dirs):
        jac[:, j] = np.einsum("xi,xi->i", wl.conj(), bmat @ vr) / denom
    if eigsys.hermitian and not space.complexified:
        return np.ascontiguousarray(jac.real)
    return jac


def fd_jacobian(params: np.ndarray, space: SearchSpace, base_values: np.ndarray, step: float) -> np.ndarray:
    """Central finite differences of the eigenvalues, matched to the base order."""
    m = space.parameter_dim
    complexd = space.complexified
    jac = np.empty((len(base_values), m), dtype=np.complex128 if complexd else np.float64)

    def eigvals_at(p):
        expr = space.to_expr(p)
        dense = expr.dense()
        if not complexd and expr.hermitian:
            return np.linalg.eigvalsh(dense.real if np.abs(dense.imag).max() == 0 else dense)
        return np.linalg.eigvals(dense)

    base = np.asarray(base_values)
    for j in range(m):
        delta = np.zeros(m, dtype=np.complex128 if complexd else np.float64)
        delta[j] = step
        plus = eigvals_at(params + delta)
        minus = eigvals_at(params - delta)
        pp, _, _ = match_values(plus.astype(base.dtype, copy=False), base)
        pm, _, _ = match_values(minus.astype(base.dtype, copy=False), base)
        col = (plus[pp] - minus[pm]) / (2.0 * step)
        jac[:, j] = col if complexd else col.real
    return jac


# ----------------------------------------------------------------------------
# damped Gauss-Newton descent


@dataclass
class StartResult:
    params: np.ndarray
    distance: float
    iterations: int
    converged: bool
    used_fd: bool = False


def _plain_value(params, target: Spectrum, space: SearchSpace):
    """Objective value (and matched residual/permutation) without eigenvectors."""
    expr = space.to_expr(params)
    dense = expr.dense()
    if not space.complexified and expr.hermitian:
        work = dense.real if float(np.abs(dense.imag).max()) == 0.0 else dense
        found = np.linalg.eigvalsh(work)
        tvals = target.values
        if not target.hermitian:
            found = found.astype(np.complex128)
            tvals = tvals.astype(np.complex128)
    else:
        found = np.linalg.eigvals(dense)
        tvals = target.values.astype(np.complex128)
    return match_values(found, tvals)


def _levenberg_step(amat, grad, diag, lam):
    return np.linalg.solve(amat + lam * np.diag(diag), -grad)


def _gauss_newton_start(
    p0: np.ndarray,
    target: Spectrum,
    space: SearchSpace,
    success_tol: float,
    max_iter: int,
) -> StartResult:
    """Damped Gauss-Newton on the matched residual (unstructured matching)."""
    scale = target.scale
    p = np.asarray(p0).copy()
    lam = 1e-3
    used_fd = False
    it = 0
    value = np.inf
    check_value, check_iter = np.inf, 0
    for it in range(1, max_iter + 1):
        ev = objective(p, target, space)
        value = ev.value
        if value <= success_tol * scale:
            break
        # crawling near defective configurations converges like sqrt; hand the
        # remaining budget back to the caller's restart rounds instead
        if it - check_iter >= 25:
            if value > 0.9 * check_value:
                break
            check_value, check_iter = value, it
        try:
            jac = eig_jacobian(p, space, ev.eigsys)
        except DefectivePointError:
            used_fd = True
            jac = fd_jacobian(p, space, ev.eigsys.values, FD_STEP * scale)
        jm = jac[ev.perm, :]
        r = ev.residual
        jh = jm.conj().T
        amat = jh @ jm
        grad = jh @ r
        diag = np.clip(np.abs(np.diag(amat)), 1e-12, None)
        accepted = False
        for _ in range(30):
            try:
                delta = _levenberg_step(amat, grad, diag, lam)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_new = p + delta
            _, _, value_new = _plain_value(p_new, target, space)
            pred = value**2 - float(np.linalg.norm(r + jm @ delta)) ** 2
            act = value**2 - value_new**2
            if act > 0 and pred > 0:
                ratio = act / pred
                if ratio > 0.75:
                    lam = max(lam / 3.0, 1e-12)
                elif ratio < 0.25:
                    lam = min(lam * 2.0, 1e10)
                accepted = True
                break
            lam *= 8.0
            if lam > 1e12:
                break
        if not accepted:
            break  # damping exhausted: stalled at a stationary point
        step_size = float(np.linalg.norm(delta))
        p = p_new
        value = value_new
        if step_size < 1e-14 * (1.0 + float(np.linalg.norm(p))):
            break
    return StartResult(p, value, it, value <= success_tol * scale, used_fd)


def _sector_gn(
    p0: np.ndarray,
    tsecs: list,
    ctx: _SectorContext,
    scale: float,
    success_tol: float,
    max_iter: int,
) -> StartResult:
    """Damped Gauss-Newton on the momentum-sector-matched residual."""
    p = np.asarray(p0).astype(np.complex128).copy()
    lam = 1e-3
    it = 0
    value = np.inf
    used_fd = False
    check_value, check_iter = np.inf, 0
    for it in range(1, max_iter + 1):
        eig_pairs = []
        try:
            for blk in ctx.blocks:
                hk = np.tensordot(p, blk, axes=1)
                lam_k, v_k = np.linalg.eig(hk)
                w_k = np.linalg.inv(v_k)
                eig_pairs.append((lam_k, v_k, w_k))
        except np.linalg.LinAlgError:
            break
        found = [pair[0] for pair in eig_pairs]
        value, resid, perms, lmap = _sector_match(found, tsecs, ctx)
        if value <= success_tol * scale:
            break
        if it - check_iter >= 25:
            if value > 0.9 * check_value:
                break
            check_value, check_iter = value, it
        rows = []
        defective = False
        for k, (lam_k, v_k, w_k) in enumerate(eig_pairs):
            conds = 1.0 / np.maximum(
                np.linalg.norm(w_k, axis=1) * np.linalg.norm(v_k, axis=0), 1e-300
            )
            if conds.min() < DEFECTIVE_CONDITION:
                defective = True
                break
            jac_k = np.einsum("ix,jxy,yi->ij", w_k, ctx.blocks[k], v_k)
            rows.append(jac_k[perms[k], :])
        if defective:
            used_fd = True
            rows = [_sector_fd_jacobian(p, tsecs, ctx, lmap, FD_STEP * scale)]
        jm = np.vstack(rows)
        jh = jm.conj().T
        amat = jh @ jm
        grad = jh @ resid
        diag = np.clip(np.abs(np.diag(amat)), 1e-12, None)
        accepted = False
        for _ in range(30):
            try:
                delta = _levenberg_step(amat, grad, diag, lam)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_new = p + delta
            value_new = _sector_match(_sector_values(p_new, ctx), tsecs, ctx)[0]
            pred = value**2 - float(np.linalg.norm(resid + jm @ delta)) ** 2
            act = value**2 - value_new**2
            if act > 0 and pred > 0:
                ratio = act / pred
                if ratio > 0.75:
                    lam = max(lam / 3.0, 1e-12)
                elif ratio < 0.25:
                    lam = min(lam * 2.0, 1e10)
                accepted = True
                break
            lam *= 8.0
            if lam > 1e12:
                break
        if not accepted:
            break
        step_size = float(np.linalg.norm(delta))
        p = p_new
        value = value_new
        if step_size < 1e-14 * (1.0 + float(np.linalg.norm(p))):
            break
    return StartResult(p, value, it, value <= success_tol * scale, used_fd)


def _sector_fd_jacobian(p, tsecs, ctx, lmap, step):
    """Central differences of sector eigenvalues matched to the current point."""
    base = _sector_values(p, ctx)
    m = len(p)
    cols = []
    for j in range(m):
        dp = np.zeros(m, dtype=np.complex128)
        dp[j] = step
        plus = _sector_values(p + dp, ctx)
        minus = _sector_values(p - dp, ctx)
        col = []
        for k in range(ctx.n_sectors):
            pp, _, _ = match_values(plus[k], base[k])
            pm, _, _ = match_values(minus[k], base[k])
            dcol = (plus[k][pp] - minus[k][pm]) / (2.0 * step)
            perm_base, _, _ = match_values(base[k], tsecs[lmap[k]])
            col.append(dcol[perm_base])
        cols.append(np.concatenate(col))
    return np.stack(cols, axis=1)


#: perturbation sizes (relative) cycled between restart rounds inside one start
RESTART_SIGMAS = (0.1, 0.3, 1.0)


def _run_start(
    p0: np.ndarray,
    target: Spectrum,
    space: SearchSpace,
    success_tol: float,
    max_iter: int,
    rng: np.random.Generator,
    tsecs: list | None = None,
) -> StartResult:
    """One multiround start: descend, and on stalls perturb the best point and retry.

    Complexified translation-invariant spaces descend on the sector-matched
    residual first (whose zeros are a subset of the unstructured objective's
    zeros); any budget left after the sector phase goes to the unstructured
    descent so that isospectral operators without a group-compatible sector
    alignment remain reachable.
    """
    ctx = space.sector_context() if (space.complexified and tsecs is not None) else None
    scale = target.scale
    budget = max_iter
    best_p = np.asarray(p0).copy()
    best_value = np.inf
    total_iters = 0
    used_fd = False
    p = best_p
    p0_norm = max(float(np.linalg.norm(p0)), 1.0)
    round_idx = 0
    sector_budget = int(0.7 * max_iter) if ctx is not None else 0
    while budget > 0:
        in_sector_phase = ctx is not None and total_iters < sector_budget
        if in_sector_phase:
            res = _sector_gn(p, tsecs, ctx, scale, success_tol, min(budget, 100))
        else:
            res = _gauss_newton_start(p, target, space, success_tol, min(budget, 150))
        total_iters += res.iterations
        budget -= max(res.iterations, 1)
        used_fd = used_fd or res.used_fd
        if res.distance < best_value:
            best_value, best_p = res.distance, res.params
        if res.converged:
            return StartResult(res.params, res.distance, total_iters, True, used_fd)
        # escape rounds alternate between perturbing the best point found and
        # drawing a fresh start at the original scale
        if space.complexified:
            noise = rng.standard_normal(space.parameter_dim) + 1j * rng.standard_normal(
                space.parameter_dim
            )
        else:
            noise = rng.standard_normal(space.parameter_dim)
        if round_idx % 2 == 0:
            sigma = RESTART_SIGMAS[(round_idx // 2) % len(RESTART_SIGMAS)]
            unit = noise / max(np.linalg.norm(noise), 1e-300)
            p = best_p + sigma * max(float(np.linalg.norm(best_p)), 1.0) * unit
        else:
            p = noise * (p0_norm / max(float(np.linalg.norm(noise)), 1e-300))
        round_idx += 1
    return StartResult(best_p, best_value, total_iters, False, used_fd)


def _gradient_descent_start(
    p0: np.ndarray,
    target: Spectrum,
    space: SearchSpace,
    success_tol: float,
    max_iter: int,
) -> StartResult:
    """Plain gradient descent with backtracking; kept for fidelity comparisons."""
    scale = target.scale
    p = np.asarray(p0).copy()
    ev = objective(p, target, space)
    step = 0.1
    it = 0
    for it in range(1, max_iter + 1):
        if ev.value <= success_tol * scale:
            break
        try:
            jac = eig_jacobian(p, space, ev.eigsys)
        except DefectivePointError:
            jac = fd_jacobian(p, space, ev.eigsys.values, FD_STEP * scale)
        jm = jac[ev.perm, :]
        grad = jm.conj().T @ ev.residual  # gradient of 1/2 ||r||^2
        gnorm = float(np.linalg.norm(grad))
        if gnorm < 1e-14:
            break
        improved = False
        while step > 1e-16:
            p_new = p - step * grad
            ev_new = objective(p_new, target, space)
            if ev_new.value < ev.value:
                p, ev = p_new, ev_new
                step *= 1.5
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return StartResult(p, ev.value, it, ev.value <= success_tol * scale)


# ----------------------------------------------------------------------------
# multistart search and classification


@dataclass
class MinimumRecord:
    params: np.ndarray
    distance: float
    classification: str  # trivial_equivalent | candidate_dual | non_converged
    iterations: int
    equivalence_witness: dict | None = None


@dataclass
class SearchReport:
    space: dict
    seed: int
    starts: int
    target_digest: str
    minima: list[MinimumRecord] = field(default_factory=list)

    @property
    def converged(self) -> list[MinimumRecord]:
        return [m for m in self.minima if m.classification != "non_converged"]

    @property
    def candidate_duals(self) -> list[MinimumRecord]:
        return [m for m in self.minima if m.classification == "candidate_dual"]

    @property
    def all_converged_trivial(self) -> bool:
        conv = self.converged
        return bool(conv) and all(m.classification == "trivial_equivalent" for m in conv)


def random_start(space: SearchSpace, rng: np.random.Generator, target_norm: float) -> np.ndarray:
    """iid normal parameters rescaled so |H(p)|_F matches the target operator norm."""
    if space.complexified:
        p = rng.standard_normal(space.parameter_dim) + 1j * rng.standard_normal(space.parameter_dim)
    else:
        p = rng.standard_normal(space.parameter_dim)
    norm = space.to_expr(p).norm_fro()
    if norm > 0 and target_norm > 0:
        p = p * (target_norm / norm)
    return p


def search_duals(
    h0: OperatorExpr,
    space: SearchSpace,
    starts: int,
    seed: int,
    success_tol: float = DEFAULT_SUCCESS_TOL,
    classify_tol: float = DEFAULT_CLASSIFY_TOL,
    equiv_tol: float = 1e-6,
    equiv_starts: int = 20,
    max_iter: int = DEFAULT_MAX_ITER,
    method: str = "gauss_newton",
) -> SearchReport:
    """Multistart descent on the spectrum-matching objective, with classification.

    Every start is seeded from (seed, start index) so results do not depend
    on scheduling. A start whose re-diagonalized final distance is below
    classify_tol * scale is classified by the equivalence module as
    trivial_equivalent or candidate_dual; everything else is non_converged.
    """
    if not h0.hermitian:
        raise NonHermitianError("the search target H0 must be Hermitian")
    h0_dense = h0.dense()
    target = spectrum_of(h0_dense, hermitian=True)
    scale = target.scale
    target_norm = h0.norm_fro()
    tsecs = None
    if method == "gauss_newton" and space.complexified and space.translation_invariant:
        tsecs = space.sector_context().target_sectors(h0_dense)
    report = SearchReport(space.describe(), seed, starts, target.digest())
    for s_idx in range(starts):
        rng = np.random.default_rng(derive_seed(seed, s_idx))
        p0 = random_start(space, rng, target_norm)
        if method == "gauss_newton":
            result = _run_start(p0, target, space, success_tol, max_iter, rng, tsecs)
        else:
            result = _gradient_descent_start(p0, target, space, success_tol, max_iter)
        found = space.to_expr(result.params)
        final = spectrum_of(found.dense(), hermitian=not space.complexified and found.hermitian)
        distance = _rematch_distance(final, target)
        classification = "non_converged"
        witness = None
        if distance < classify_tol * scale:
            verdict = decide_equivalent(
                found,
                h0,
                complexified=space.complexified,
                starts=equiv_starts,
                tol=equiv_tol,
                seed=derive_seed(seed, s_idx, 1),
            )
            if verdict.equivalent:
                # a dense-verified witness certifies the trivial relation at
                # any distance below the classification threshold
                classification = "trivial_equivalent"
                witness = verdict.witness
            elif distance < success_tol * scale:
                # duals are exact global minima; a near-miss without a
                # witness is a failed start, not evidence of a dual
                classification = "candidate_dual"
        record = MinimumRecord(result.params, distance, classification,
                               result.iterations, witness)
        report.minima.append(record)
    return report


def _rematch_distance(found: Spectrum, target: Spectrum) -> float:
    from .spectra import spectral_distance

    if found.hermitian == target.hermitian:
        return spectral_distance(found, target)
    fv = found.values.astype(np.complex128)
    tv = target.values.astype(np.complex128)
    _, _, dist = match_values(fv, tv)
    return dist


@dataclass
class TrialOutcome:
    trial: int
    seed: int
    h0_coeffs: np.ndarray
    report: SearchReport


@dataclass
class BatchReport:
    space: dict
    seed: int
    num_trials: int
    starts_per_trial: int
    trials: list[TrialOutcome] = field(default_factory=list)

    def aggregate(self) -> dict:
        total_starts = sum(len(t.report.minima) for t in self.trials)
        converged = sum(len(t.report.converged) for t in self.trials)
        candidates = sum(len(t.report.candidate_duals) for t in self.trials)
        return {
            "trials": len(self.trials),
            "total_starts": total_starts,
            "converged_starts": converged,
            "converged_fraction": converged / total_starts if total_starts else 0.0,
            "trials_all_trivial": sum(
                1 for t in self.trials if t.report.all_converged_trivial
            ),
            "trials_any_candidate_dual": sum(
                1 for t in self.trials if t.report.candidate_duals
            ),
            "trials_any_nonconverged": sum(
                1
                for t in self.trials
                if any(m.classification == "non_converged" for m in t.report.minima)
            ),
            "candidate_dual_starts": candidates,
        }


def sample_hermitian_member(space: SearchSpace, seed: int) -> OperatorExpr:
    """Random Hermitian member of the (un-complexified) class: iid normal coefficients."""
    rng = np.random.default_rng(seed)
    params = rng.standard_normal(space.parameter_dim)
    real_space = SearchSpace(space.space, complexified=False)
    return real_space.to_expr(params)


def batch_trials(
    num_h0: int,
    starts_per_h0: int,
    space: SearchSpace,
    seed: int,
    **search_opts,
) -> BatchReport:
    """Independent search trials on freshly sampled Hermitian targets.

    Trial t uses the derived seed (seed, t) for both the target draw and its
    starts, so any subset of trials can be reproduced in isolation and the
    batch outcome is independent of execution order.
    """
    batch = BatchReport(space.describe(), seed, num_h0, starts_per_h0)
    for t in range(num_h0):
        t_seed = derive_seed(seed, t)
        h0 = sample_hermitian_member(space, t_seed)
        report = search_duals(h0, space, starts_per_h0, t_seed, **search_opts)
        batch.trials.append(TrialOutcome(t, t_seed, h0.coeffs, report))
    return batch


# convenience: the reference experiment space of the TI study


def ti_gauge_fixed_space(n: int, complexified: bool = True) -> SearchSpace:
    return SearchSpace(build_class("ti_chain_gauge_fixed", n), complexified)


def gauge_fixed_h0_expr(params: np.ndarray, n: int) -> OperatorExpr:
    """Hermitian TI operator from 9 gauge-fixed parameters (testing helper)."""
    space = build_class("ti_chain_gauge_fixed", n)
    return OperatorExpr(space, np.asarray(params, dtype=np.float64))
