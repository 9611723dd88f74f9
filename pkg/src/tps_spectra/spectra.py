"""Eigen-decompositions, spectrum containers, and matching-based spectral distance.

Hermitian spectra are stored as ascending real arrays; general complex spectra
are sorted lexicographically by (Re, Im). The distance between two spectra of
equal dimension is the l2 norm under the optimal assignment of eigenvalues,
which is continuous across complex crossings where plain sorting is not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .errors import NonHermitianError, SolverError

HERMITICITY_RTOL = 1e-10
#: eigenpairs with |w.v| / (|w||v|) below this are flagged near-defective
DEFECTIVE_CONDITION = 1e-8


def sort_complex(values: np.ndarray) -> np.ndarray:
    """Indices sorting complex values lexicographically by (Re, Im)."""
    return np.lexsort((values.imag, values.real))


@dataclass(frozen=True)
class Spectrum:
    """A sorted multiset of eigenvalues with its Hermiticity flag."""

    values: np.ndarray
    hermitian: bool

    @property
    def n_dim(self) -> int:
        return len(self.values)

    @property
    def scale(self) -> float:
        """Reference magnitude used to make tolerances relative: max(1, |lambda|max)."""
        if len(self.values) == 0:
            return 1.0
        return max(1.0, float(np.abs(self.values).max()))

    @classmethod
    def from_values(cls, values, hermitian: bool | None = None) -> "Spectrum":
        values = np.asarray(values)
        if hermitian is None:
            hermitian = not np.iscomplexobj(values) or float(
                np.abs(values.imag).max(initial=0.0)
            ) <= 1e-12 * max(1.0, float(np.abs(values).max(initial=0.0)))
        if hermitian:
            if np.iscomplexobj(values):
                scale = max(1.0, float(np.abs(values).max(initial=0.0)))
                if float(np.abs(values.imag).max(initial=0.0)) > 1e-12 * scale:
                    raise NonHermitianError(
                        "imaginary parts too large for a Hermitian spectrum"
                    )
                values = values.real
            return cls(np.sort(values.astype(np.float64)), True)
        values = values.astype(np.complex128)
        return cls(values[sort_complex(values)], False)

    def digest(self) -> str:
        """Short stable hash of the sorted values, for report cross-referencing."""
        import hashlib

        payload = np.ascontiguousarray(self.values).tobytes()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues with right/left eigenvectors and per-pair condition estimates.

    Columns of ``right`` (and ``left``) follow the order of ``values``; in the
    Hermitian case left is right and every condition estimate is 1.
    """

    values: np.ndarray
    right: np.ndarray
    left: np.ndarray
    condition: np.ndarray
    hermitian: bool

    @property
    def spectrum(self) -> Spectrum:
        return Spectrum.from_values(self.values, hermitian=self.hermitian)

    @property
    def min_condition(self) -> float:
        return float(self.condition.min())


def hermiticity_residual(mat: np.ndarray) -> float:
    scale = float(np.linalg.norm(mat))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(mat - mat.conj().T)) / scale


def eigh(mat: np.ndarray) -> EigenSystem:
    """Hermitian eigendecomposition with ascending real eigenvalues."""
    mat = np.asarray(mat)
    if hermiticity_residual(mat) > HERMITICITY_RTOL:
        raise NonHermitianError(
            f"Hermiticity residual {hermiticity_residual(mat):.3e} exceeds {HERMITICITY_RTOL}"
        )
    work = mat
    if np.iscomplexobj(mat) and float(np.abs(mat.imag).max()) == 0.0:
        work = mat.real  # real-symmetric path is noticeably faster
    try:
        values, vectors = np.linalg.eigh(work)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise SolverError(f"eigh failed to converge: {exc}") from exc
    vectors = vectors.astype(np.complex128)
    cond = np.ones(len(values))
    return EigenSystem(values, vectors, vectors, cond, hermitian=True)


def eig_general(mat: np.ndarray) -> EigenSystem:
    """General eigendecomposition with paired left/right eigenvectors.

    Eigenvalues are sorted lexicographically by (Re, Im); the condition entry
    of pair i is |w_i . v_i| for the unit-norm left/right vectors, which is
    near zero exactly at (near-)defective eigenvalues.
    """
    mat = np.asarray(mat, dtype=np.complex128)
    if not np.all(np.isfinite(mat)):
        raise ValueError("matrix has non-finite entries")
    try:
        values, vl, vr = scipy.linalg.eig(mat, left=True, right=True)
    except Exception as exc:  # pragma: no cover - LAPACK failure
        raise SolverError(f"eig failed to converge: {exc}") from exc
    order = sort_complex(values)
    values, vl, vr = values[order], vl[:, order], vr[:, order]
    cond = np.abs(np.einsum("xi,xi->i", vl.conj(), vr))
    return EigenSystem(values, vr, vl, cond, hermitian=False)


def spectrum_of(mat: np.ndarray, hermitian: bool | None = None) -> Spectrum:
    """Eigenvalues only (no vectors), choosing the Hermitian path when valid."""
    mat = np.asarray(mat)
    if hermitian is None:
        hermitian = hermiticity_residual(mat) <= HERMITICITY_RTOL
    if hermitian:
        work = mat
        if np.iscomplexobj(mat) and float(np.abs(mat.imag).max()) == 0.0:
            work = mat.real
        return Spectrum.from_values(np.linalg.eigvalsh(work), hermitian=True)
    return Spectrum.from_values(np.linalg.eigvals(mat), hermitian=False)


def match_values(found: np.ndarray, target: np.ndarray):
    """Minimum-cost assignment of ``found`` onto ``target`` under |a-b|^2 costs.

    Returns (perm, residuals, distance) with residuals[k] = found[perm[k]] - target[k].
    For two real arrays the optimal matching is the sorted pairing, which is
    used directly; complex inputs go through the Hungarian algorithm.
    """
    found = np.asarray(found)
    target = np.asarray(target)
    if found.shape != target.shape:
        raise ValueError(f"dimension mismatch: {found.shape} vs {target.shape}")
    real_case = not np.iscomplexobj(found) and not np.iscomplexobj(target)
    if real_case:
        t_order = np.argsort(target, kind="stable")
        f_order = np.argsort(found, kind="stable")
        perm = np.empty(len(found), dtype=np.intp)
        perm[t_order] = f_order
    else:
        cost = np.abs(found[None, :] - target[:, None]) ** 2
        rows, cols = linear_sum_assignment(cost)
        perm = np.empty(len(found), dtype=np.intp)
        perm[rows] = cols
    residuals = found[perm] - target
    return perm, residuals, float(np.linalg.norm(residuals))


def spectral_distance(a: Spectrum, b: Spectrum) -> float:
    """l2 distance between eigenvalue multisets under the optimal matching."""
    if a.n_dim != b.n_dim:
        raise ValueError(f"dimension mismatch: {a.n_dim} vs {b.n_dim}")
    if a.hermitian and b.hermitian:
        return float(np.linalg.norm(a.values - b.values))
    av = a.values.astype(np.complex128)
    bv = b.values.astype(np.complex128)
    _, _, dist = match_values(av, bv)
    return dist


@dataclass(frozen=True)
class DegeneracyProfile:
    """Cluster sizes of a spectrum, in ascending-value order."""

    sizes: tuple[int, ...]
    max_multiplicity: int

    @property
    def nondegenerate(self) -> bool:
        return self.max_multiplicity <= 1


def degeneracy_profile(spec: Spectrum, tol: float) -> DegeneracyProfile:
    """Cluster sorted eigenvalues whose consecutive gaps are below tol * scale."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    values = spec.values
    if len(values) == 0:
        return DegeneracyProfile((), 0)
    threshold = tol * spec.scale
    sizes = []
    current = 1
    for prev, cur in zip(values[:-1], values[1:]):
        if abs(cur - prev) < threshold:
            current += 1
        else:
            sizes.append(current)
            current = 1
    sizes.append(current)
    return DegeneracyProfile(tuple(sizes), max(sizes))
