"""Pauli-string operators, locality classes, and the named qubit-chain model families.

Conventions used throughout the package:

* single-site letters are integers ``0..3`` meaning ``I, X, Y, Z``;
* site 0 is the leftmost Kronecker factor, i.e. the most significant bit of
  the computational-basis index;
* a Pauli string is realized densely as a signed permutation: for a string
  with bit-flip mask ``f`` (X/Y sites) and sign mask ``z`` (Y/Z sites),
  ``P|x> = i**nY * (-1)**popcount(x & z) |x ^ f>``;
* dense matrices are ``complex128`` of size ``2**n`` and are only built while
  ``n`` is at most the cap from ``TPS_SPECTRA_MAX_N`` (default 12).

Locality classes hold an ordered basis of mutually orthogonal elements, each
element being either a single Pauli string or a group of distinct strings
summed with unit weights (used by the translation-invariant and boundary-term
families, whose natural coordinates multiply whole sums of strings).
"""

from __future__ import annotations

import itertools
import math
import os
from functools import cached_property

import numpy as np

from .errors import DimensionOverflowError, NotInClassError

I, X, Y, Z = 0, 1, 2, 3
LETTER_CHARS = "IXYZ"

#: default cap on the number of sites for dense realizations (N = 2**n)
DEFAULT_MAX_SITES = 12

# single-site product tables: sigma^a sigma^b = i**_PROD_PHASE_EXP[a,b] * sigma^_PROD_LETTER[a,b]
_PROD_LETTER = np.array(
    [
        [0, 1, 2, 3],
        [1, 0, 3, 2],
        [2, 3, 0, 1],
        [3, 2, 1, 0],
    ],
    dtype=np.int8,
)
_PROD_PHASE_EXP = np.zeros((4, 4), dtype=np.int8)
for _a, _b, _e in [(1, 2, 1), (2, 3, 1), (3, 1, 1), (2, 1, 3), (3, 2, 3), (1, 3, 3)]:
    _PROD_PHASE_EXP[_a, _b] = _e

_PAULI_2x2 = (
    np.eye(2, dtype=np.complex128),
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)

_I_POWERS = np.array([1, 1j, -1, -1j], dtype=np.complex128)


def max_sites() -> int:
    """Dense-realization site cap, overridable via the TPS_SPECTRA_MAX_N env var."""
    raw = os.environ.get("TPS_SPECTRA_MAX_N")
    if raw is None:
        return DEFAULT_MAX_SITES
    return int(raw)


def _check_dense_cap(n: int) -> None:
    cap = max_sites()
    if n > cap:
        raise DimensionOverflowError(
            f"dense realization needs n <= {cap} sites (got n={n}); "
            "raise TPS_SPECTRA_MAX_N to override"
        )


def _parity(values: np.ndarray, mask: int) -> np.ndarray:
    return (np.bitwise_count(values & mask) & 1).astype(np.int64)


class PauliString:
    """An n-site word over {I, X, Y, Z} with unit weight.

    Immutable; equality and hashing go by the letter tuple.
    """

    __slots__ = ("n", "letters", "_flip", "_zmask", "_ny")

    def __init__(self, letters):
        letters = tuple(int(a) for a in letters)
        if not letters:
            raise ValueError("a Pauli string needs at least one site")
        if any(a < 0 or a > 3 for a in letters):
            raise ValueError(f"letters must be in 0..3, got {letters}")
        self.n = len(letters)
        self.letters = letters
        flip = 0
        zmask = 0
        ny = 0
        for i, a in enumerate(letters):
            bit = 1 << (self.n - 1 - i)
            if a in (X, Y):
                flip |= bit
            if a in (Y, Z):
                zmask |= bit
            if a == Y:
                ny += 1
        self._flip = flip
        self._zmask = zmask
        self._ny = ny

    @classmethod
    def from_ops(cls, n: int, ops: dict[int, int]) -> "PauliString":
        """Build a string from a {site: letter} mapping; unlisted sites are identity."""
        letters = [I] * n
        for site, a in ops.items():
            letters[site] = a
        return cls(letters)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls((I,) * n)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.letters) if a != I)

    @property
    def weight(self) -> int:
        return sum(1 for a in self.letters if a != I)

    @property
    def n_y(self) -> int:
        return self._ny

    @property
    def transpose_sign(self) -> int:
        """Sign picked up under matrix transposition: (-1)**(#Y letters)."""
        return -1 if self._ny % 2 else 1

    def label(self) -> str:
        return "".join(LETTER_CHARS[a] for a in self.letters)

    def __repr__(self) -> str:
        return f"PauliString({self.label()!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, PauliString) and self.letters == other.letters

    def __hash__(self) -> int:
        return hash(self.letters)

    # -- dense engine ------------------------------------------------------

    def column_phases(self, xs: np.ndarray) -> np.ndarray:
        """P[x ^ flip, x] for the given column indices x."""
        sign = 1.0 - 2.0 * _parity(xs, self._zmask)
        return _I_POWERS[self._ny % 4] * sign

    def dense(self) -> np.ndarray:
        _check_dense_cap(self.n)
        dim = 1 << self.n
        xs = np.arange(dim)
        mat = np.zeros((dim, dim), dtype=np.complex128)
        mat[xs ^ self._flip, xs] = self.column_phases(xs)
        return mat

    def apply_left(self, mat: np.ndarray) -> np.ndarray:
        """P @ mat without building P (row permutation plus phases)."""
        xs = np.arange(mat.shape[0])
        idx = xs ^ self._flip
        return self.column_phases(idx)[:, None] * mat[idx, :]

    def diag_expectations(self, vectors: np.ndarray) -> np.ndarray:
        """<v_i| P |v_i> for the columns v_i of ``vectors``."""
        return np.einsum("xi,xi->i", vectors.conj(), self.apply_left(vectors))

    def trace_with(self, mat: np.ndarray) -> complex:
        """trace(P @ mat) in O(N) via the signed-permutation structure."""
        xs = np.arange(mat.shape[0])
        return complex(np.dot(self.column_phases(xs), mat[xs, xs ^ self._flip]))

    def permuted(self, site_map) -> "PauliString":
        """Move the letter at site i to site site_map[i]."""
        letters = [I] * self.n
        for i, a in enumerate(self.letters):
            letters[site_map[i]] = a
        return PauliString(letters)

    @staticmethod
    def product(a: "PauliString", b: "PauliString") -> tuple[complex, "PauliString"]:
        """Pauli product a @ b = phase * result, with phase in {1, i, -1, -i}."""
        la = np.array(a.letters, dtype=np.int8)
        lb = np.array(b.letters, dtype=np.int8)
        exp = int(_PROD_PHASE_EXP[la, lb].sum()) % 4
        return complex(_I_POWERS[exp]), PauliString(_PROD_LETTER[la, lb])

    @staticmethod
    def commute(a: "PauliString", b: "PauliString") -> bool:
        """True when the two strings commute (even number of clashing sites)."""
        clashes = sum(
            1
            for la, lb in zip(a.letters, b.letters)
            if la != I and lb != I and la != lb
        )
        return clashes % 2 == 0


class BasisElement:
    """One orthogonal basis direction of a locality class.

    Either a single Pauli string or a group of distinct strings summed with
    unit weights (e.g. a translation-invariant bond sum). Elements within one
    class never share strings, which keeps the basis orthogonal under the
    Hilbert-Schmidt inner product.
    """

    __slots__ = ("strings", "n")

    def __init__(self, strings):
        strings = tuple(strings)
        if not strings:
            raise ValueError("empty basis element")
        self.strings = strings
        self.n = strings[0].n
        if len(set(s.letters for s in strings)) != len(strings):
            raise ValueError("basis element contains a repeated string")

    @property
    def num_strings(self) -> int:
        return len(self.strings)

    @property
    def weight(self) -> int:
        return max(s.weight for s in self.strings)

    def norm_sq(self) -> float:
        """Hilbert-Schmidt norm squared of the dense realization."""
        return float(len(self.strings) * (1 << self.n))

    @property
    def is_identity(self) -> bool:
        return len(self.strings) == 1 and self.strings[0].weight == 0

    def label(self) -> str:
        if len(self.strings) == 1:
            return self.strings[0].label()
        return "+".join(s.label() for s in self.strings)

    def __repr__(self) -> str:
        return f"BasisElement({self.label()!r})"

    def dense(self) -> np.ndarray:
        _check_dense_cap(self.n)
        dim = 1 << self.n
        xs = np.arange(dim)
        mat = np.zeros((dim, dim), dtype=np.complex128)
        for s in self.strings:
            mat[xs ^ s._flip, xs] += s.column_phases(xs)
        return mat

    def diag_expectations(self, vectors: np.ndarray) -> np.ndarray:
        out = self.strings[0].diag_expectations(vectors)
        for s in self.strings[1:]:
            out = out + s.diag_expectations(vectors)
        return out

    def trace_with(self, mat: np.ndarray) -> complex:
        return sum(s.trace_with(mat) for s in self.strings)


class ClassSymmetry:
    """Discrete symmetry group descriptor used by the equivalence checks."""

    __slots__ = ("translations", "reflection", "transposition")

    def __init__(self, translations: int, reflection: bool, transposition: bool):
        self.translations = int(translations)
        self.reflection = bool(reflection)
        self.transposition = bool(transposition)

    def __repr__(self):
        return (
            f"ClassSymmetry(translations={self.translations}, "
            f"reflection={self.reflection}, transposition={self.transposition})"
        )


class LocalityClass:
    """An ordered orthogonal basis spanning a subspace of n-qubit Hamiltonians."""

    def __init__(self, name: str, n: int, basis, symmetry: ClassSymmetry, k: int | None = None, d: int = 2):
        self.name = name
        self.n = int(n)
        self.d = int(d)
        self.k = k
        self.basis = tuple(basis)
        self.symmetry = symmetry
        if len({s.letters for e in self.basis for s in e.strings}) != sum(
            e.num_strings for e in self.basis
        ):
            raise ValueError("basis elements share Pauli strings; basis would not be orthogonal")

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def hilbert_dim(self) -> int:
        return self.d**self.n

    @property
    def includes_identity(self) -> bool:
        return self.basis[0].is_identity if self.basis else False

    @cached_property
    def string_index(self) -> dict[tuple, int]:
        """Map from letter tuple to the index of the basis element containing it."""
        out = {}
        for j, elem in enumerate(self.basis):
            for s in elem.strings:
                out[s.letters] = j
        return out

    def __repr__(self):
        extra = f", k={self.k}" if self.k is not None else ""
        return f"LocalityClass({self.name!r}, n={self.n}{extra}, dim={self.dim})"

    def project_string_coeffs(self, string_coeffs: dict[tuple, complex]):
        """Orthogonal projection of a string-coefficient map onto this class.

        Returns (coeffs, residual_norm_sq) where residual_norm_sq is the
        Hilbert-Schmidt norm squared of the part outside the class, in units
        of 2**n (i.e. per normalized string).
        """
        coeffs = np.zeros(self.dim, dtype=np.complex128)
        counts = np.zeros(self.dim, dtype=np.int64)
        resid = 0.0
        for letters, c in string_coeffs.items():
            j = self.string_index.get(letters)
            if j is None:
                resid += abs(c) ** 2
            else:
                coeffs[j] += c
                counts[j] += 1
        sizes = np.array([e.num_strings for e in self.basis], dtype=np.float64)
        coeffs = coeffs / sizes
        # within-group mismatch: strings in one group must share a coefficient
        for letters, c in string_coeffs.items():
            j = self.string_index.get(letters)
            if j is not None:
                resid += abs(c - coeffs[j]) ** 2
        # strings of a group absent from the input contribute their projected value
        for j, elem in enumerate(self.basis):
            missing = elem.num_strings - counts[j]
            if missing:
                resid += missing * abs(coeffs[j]) ** 2
        return coeffs, float(resid)


class OperatorExpr:
    """A coefficient vector over a locality-class basis."""

    def __init__(self, space: LocalityClass, coeffs):
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (space.dim,):
            raise ValueError(f"expected {space.dim} coefficients, got shape {coeffs.shape}")
        if np.iscomplexobj(coeffs):
            coeffs = coeffs.astype(np.complex128)
        else:
            coeffs = coeffs.astype(np.float64)
        self.space = space
        self.coeffs = coeffs

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def hermitian(self) -> bool:
        return not np.iscomplexobj(self.coeffs) or float(np.abs(self.coeffs.imag).max()) == 0.0

    def dense(self) -> np.ndarray:
        _check_dense_cap(self.n)
        dim = 1 << self.n
        xs = np.arange(dim)
        mat = np.zeros((dim, dim), dtype=np.complex128)
        for c, elem in zip(self.coeffs, self.space.basis):
            if c == 0:
                continue
            for s in elem.strings:
                mat[xs ^ s._flip, xs] += c * s.column_phases(xs)
        return mat

    def norm_fro(self) -> float:
        """Frobenius norm of the dense realization, from coefficients."""
        norms = np.array([e.norm_sq() for e in self.space.basis])
        return math.sqrt(float(np.sum(np.abs(self.coeffs) ** 2 * norms)))

    def string_coeffs(self) -> dict[tuple, complex]:
        out = {}
        for c, elem in zip(self.coeffs, self.space.basis):
            if c == 0:
                continue
            for s in elem.strings:
                out[s.letters] = out.get(s.letters, 0.0) + c
        return out

    def with_coeffs(self, coeffs) -> "OperatorExpr":
        return OperatorExpr(self.space, coeffs)

    def __add__(self, other: "OperatorExpr") -> "OperatorExpr":
        if other.space is not self.space:
            raise ValueError("operands live in different locality classes")
        return OperatorExpr(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "OperatorExpr") -> "OperatorExpr":
        if other.space is not self.space:
            raise ValueError("operands live in different locality classes")
        return OperatorExpr(self.space, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "OperatorExpr":
        return OperatorExpr(self.space, self.coeffs * scalar)

    __rmul__ = __mul__

    @classmethod
    def from_dense(cls, space: LocalityClass, mat: np.ndarray, rtol: float = 1e-10) -> "OperatorExpr":
        """Extract coefficients by trace projection; reject out-of-class parts."""
        dim = space.hilbert_dim
        if mat.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix")
        coeffs = np.array(
            [elem.trace_with(mat) / elem.norm_sq() for elem in space.basis],
            dtype=np.complex128,
        )
        expr = cls(space, coeffs)
        scale = float(np.linalg.norm(mat))
        resid = float(np.linalg.norm(mat - expr.dense()))
        if resid > rtol * max(scale, 1e-300):
            raise NotInClassError(
                f"matrix has relative residual {resid / max(scale, 1e-300):.3e} outside class {space.name}"
            )
        if np.abs(coeffs.imag).max() <= rtol * max(1.0, np.abs(coeffs).max()):
            return cls(space, coeffs.real)
        return expr


# ----------------------------------------------------------------------------
# dimension formula


class DimCount(int):
    """Dimension of a k-local space; carries the Hilbert-space comparison."""

    def __new__(cls, s: int, hilbert_dim: int):
        obj = super().__new__(cls, s)
        obj.hilbert_dim = hilbert_dim
        obj.less_than_hilbert = s < hilbert_dim
        return obj


def dim_local_space(n: int, d: int, k: int) -> DimCount:
    """Dimension sum_{j=0..k} C(n,j) (d^2-1)^j of the k-local space, identity included."""
    if not (0 <= k <= n):
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    if d < 2:
        raise ValueError("local dimension d must be at least 2")
    s = sum(math.comb(n, j) * (d * d - 1) ** j for j in range(k + 1))
    return DimCount(s, d**n)


# ----------------------------------------------------------------------------
# class builders


def _single(strings):
    return [BasisElement((s,)) for s in strings]


def _klocal_strings(n: int, k: int):
    """Identity first, then ascending weight, support lexicographic, letters lexicographic."""
    yield PauliString.identity(n)
    for j in range(1, k + 1):
        for support in itertools.combinations(range(n), j):
            for letters in itertools.product((X, Y, Z), repeat=j):
                yield PauliString.from_ops(n, dict(zip(support, letters)))


def _chain_bonds(n: int, periodic: bool):
    bonds = [(i, i + 1) for i in range(n - 1)]
    if periodic:
        bonds.append((n - 1, 0))
    return bonds


def build_class(name: str, n: int, k: int | None = None) -> LocalityClass:
    """Construct a named locality class with its canonical basis order.

    Known names: ``k_local`` (requires ``k``), ``nn_chain_open``,
    ``nn_chain_periodic``, ``ti_chain_periodic``, ``ti_chain_gauge_fixed``,
    ``boundary_class``, ``uniform_chain``.
    """
    if name == "k_local":
        if k is None:
            raise ValueError("k_local requires k")
        if k > n:
            raise ValueError(f"k={k} exceeds n={n}")
        sym = ClassSymmetry(translations=1, reflection=False, transposition=True)
        return LocalityClass(name, n, _single(_klocal_strings(n, k)), sym, k=k)
    if name == "nn_chain_open":
        if n < 2:
            raise ValueError("nearest-neighbor chain needs n >= 2")
        strings = [PauliString.identity(n)]
        for i in range(n):
            for a in (X, Y, Z):
                strings.append(PauliString.from_ops(n, {i: a}))
        for i, j in _chain_bonds(n, periodic=False):
            for a, b in itertools.product((X, Y, Z), repeat=2):
                strings.append(PauliString.from_ops(n, {i: a, j: b}))
        sym = ClassSymmetry(translations=1, reflection=True, transposition=True)
        return LocalityClass(name, n, _single(strings), sym, k=2)
    if name == "nn_chain_periodic":
        if n < 3:
            raise ValueError("periodic chain needs n >= 3 for distinct bonds")
        strings = [PauliString.identity(n)]
        for i in range(n):
            for a in (X, Y, Z):
                strings.append(PauliString.from_ops(n, {i: a}))
        for i, j in _chain_bonds(n, periodic=True):
            for a, b in itertools.product((X, Y, Z), repeat=2):
                strings.append(PauliString.from_ops(n, {i: a, j: b}))
        sym = ClassSymmetry(translations=n, reflection=True, transposition=True)
        return LocalityClass(name, n, _single(strings), sym, k=2)
    if name in ("ti_chain_periodic", "ti_chain_gauge_fixed"):
        return _build_ti_class(n, gauge_fixed=(name == "ti_chain_gauge_fixed"))
    if name == "boundary_class":
        return build_boundary_class(n)
    if name == "uniform_chain":
        return build_uniform_chain_class(n)
    raise ValueError(f"unknown locality class name {name!r}")


#: translation-invariant coefficient slots (a, b): first-site letter a in 0..3,
#: second-site letter b in 1..3, row-major; periodic site n+1 == 1.
TI_SLOTS = tuple((a, b) for a in range(4) for b in (X, Y, Z))
#: slots zeroed by gauge fixing: the X and Y single-site fields and the XY bond
TI_GAUGE_FIXED_ZEROS = ((0, 1), (0, 2), (1, 2))
TI_GAUGE_FREE_SLOTS = tuple(s for s in TI_SLOTS if s not in TI_GAUGE_FIXED_ZEROS)


def _ti_group(n: int, a: int, b: int) -> BasisElement:
    if a == I:
        # sum_i 1_i sigma^b_{i+1} visits each site exactly once
        strings = [PauliString.from_ops(n, {i: b}) for i in range(n)]
    else:
        strings = [
            PauliString.from_ops(n, {i: a, (i + 1) % n: b}) for i in range(n)
        ]
    return BasisElement(strings)


def _build_ti_class(n: int, gauge_fixed: bool) -> LocalityClass:
    if n < 3:
        raise ValueError("translation-invariant chain needs n >= 3 for unambiguous bonds")
    slots = TI_GAUGE_FREE_SLOTS if gauge_fixed else TI_SLOTS
    basis = [_ti_group(n, a, b) for a, b in slots]
    sym = ClassSymmetry(translations=1, reflection=True, transposition=True)
    name = "ti_chain_gauge_fixed" if gauge_fixed else "ti_chain_periodic"
    return LocalityClass(name, n, basis, sym, k=2)


def _uniform_bond_group(n: int, a: int, b: int) -> BasisElement:
    return BasisElement(
        [PauliString.from_ops(n, {i: a, i + 1: b}) for i in range(n - 1)]
    )


def _uniform_field_groups(n: int, p: int):
    first = BasisElement([PauliString.from_ops(n, {0: p})])
    mid = BasisElement([PauliString.from_ops(n, {i: p}) for i in range(1, n - 1)])
    last = BasisElement([PauliString.from_ops(n, {n - 1: p})])
    return first, mid, last


def build_boundary_class(n: int) -> LocalityClass:
    """The 12-parameter uniform-chain-with-boundary-terms family.

    Spanned by, for p in {X, Y, Z}: the bond sums sum_{i<n} s^p_i s^p_{i+1},
    the uniform fields over sites 1..n-1, and the two boundary fields on
    sites 1 and n. Internally the field sector is stored in the orthogonal
    split (site-1 field, mid fields, site-n field); use
    ``boundary_coeffs_to_expr`` / ``expr_to_boundary_coeffs`` for the
    (a_p, b_p, c_p, d_p) coordinates that the family is usually written in.
    """
    if n < 3:
        raise ValueError(
            "boundary class needs n >= 3 (at n=2 the uniform field and the "
            "site-1 boundary field coincide and the family degenerates)"
        )
    basis = [_uniform_bond_group(n, p, p) for p in (X, Y, Z)]
    firsts, mids, lasts = [], [], []
    for p in (X, Y, Z):
        f, m, l = _uniform_field_groups(n, p)
        firsts.append(f)
        mids.append(m)
        lasts.append(l)
    basis += firsts + mids + lasts
    sym = ClassSymmetry(translations=1, reflection=True, transposition=True)
    return LocalityClass("boundary_class", n, basis, sym, k=2)


def build_uniform_chain_class(n: int) -> LocalityClass:
    """Closure of the boundary class under uniform single-qubit conjugation.

    18 parameters: all nine bond sums sum_{i<n} s^q_i s^r_{i+1}, plus the same
    field split as the boundary class.
    """
    if n < 3:
        raise ValueError("uniform chain needs n >= 3")
    basis = [
        _uniform_bond_group(n, q, r) for q, r in itertools.product((X, Y, Z), repeat=2)
    ]
    firsts, mids, lasts = [], [], []
    for p in (X, Y, Z):
        f, m, l = _uniform_field_groups(n, p)
        firsts.append(f)
        mids.append(m)
        lasts.append(l)
    basis += firsts + mids + lasts
    sym = ClassSymmetry(translations=1, reflection=True, transposition=True)
    return LocalityClass("uniform_chain", n, basis, sym, k=2)


# ----------------------------------------------------------------------------
# boundary-class coordinates (a_p, b_p, c_p, d_p)


def boundary_coeffs_to_expr(space: LocalityClass, a, b, c, d) -> OperatorExpr:
    """Coefficients of sum_{i<n}(a_p ss + b_p s_i) + c_p s_1 + d_p s_n as an expr."""
    if space.name != "boundary_class":
        raise ValueError("expected a boundary_class space")
    a, b, c, d = (np.asarray(v, dtype=np.complex128) for v in (a, b, c, d))
    coeffs = np.concatenate([a, b + c, b, d])
    if np.abs(coeffs.imag).max() == 0.0:
        coeffs = coeffs.real
    return OperatorExpr(space, coeffs)


def expr_to_boundary_coeffs(expr: OperatorExpr):
    """Inverse of :func:`boundary_coeffs_to_expr`: returns (a, b, c, d)."""
    if expr.space.name != "boundary_class":
        raise ValueError("expected an expr over boundary_class")
    v = expr.coeffs
    a, first, mid, last = v[0:3], v[3:6], v[6:9], v[9:12]
    return a.copy(), mid.copy(), first - mid, last.copy()


# ----------------------------------------------------------------------------
# named models


def build_ising(n: int, J: float, h: float, open_boundary: bool = True) -> OperatorExpr:
    """Transverse-field Ising chain J sum_{i<n} Z_i Z_{i+1} + h sum_i X_i."""
    if n < 2:
        raise ValueError("Ising chain needs n >= 2")
    space = build_class("nn_chain_open" if open_boundary else "nn_chain_periodic", n)
    coeffs = np.zeros(space.dim)
    idx = space.string_index
    for i in range(n):
        coeffs[idx[PauliString.from_ops(n, {i: X}).letters]] += h
    for i, j in _chain_bonds(n, periodic=not open_boundary):
        coeffs[idx[PauliString.from_ops(n, {i: Z, j: Z}).letters]] += J
    return OperatorExpr(space, coeffs)


def build_ising_dual(n: int, J: float, h: float) -> OperatorExpr:
    """The Kramers-Wannier image of the open Ising chain, written in the new variables.

    J sum_i X_i + h sum_{i<n} Z_i Z_{i+1} - J X_n + h Z_1: the bulk terms swap the
    roles of the bond and field couplings, and the two boundary terms make the
    map an exact operator isomorphism (isospectral to :func:`build_ising`, which
    the tests pin numerically).
    """
    if n < 2:
        raise ValueError("Ising chain needs n >= 2")
    space = build_class("nn_chain_open", n)
    coeffs = np.zeros(space.dim)
    idx = space.string_index
    for i in range(n):
        coeffs[idx[PauliString.from_ops(n, {i: X}).letters]] += J
    coeffs[idx[PauliString.from_ops(n, {n - 1: X}).letters]] -= J
    for i in range(n - 1):
        coeffs[idx[PauliString.from_ops(n, {i: Z, i + 1: Z}).letters]] += h
    coeffs[idx[PauliString.from_ops(n, {0: Z}).letters]] += h
    return OperatorExpr(space, coeffs)


def ising_boundary_coeffs(n: int, J: float, h: float):
    """(a, b, c, d) boundary-class coordinates of the open Ising chain."""
    a = np.array([0.0, 0.0, J])
    b = np.array([h, 0.0, 0.0])
    c = np.zeros(3)
    d = np.array([h, 0.0, 0.0])
    return a, b, c, d


def ising_dual_boundary_coeffs(n: int, J: float, h: float):
    """(a, b, c, d) boundary-class coordinates of the Kramers-Wannier dual."""
    a = np.array([0.0, 0.0, h])
    b = np.array([J, 0.0, 0.0])
    c = np.array([0.0, 0.0, h])
    d = np.zeros(3)
    return a, b, c, d


# ----------------------------------------------------------------------------
# translation-invariant coefficient tensor


class TICoefficients:
    """The 4x3 coefficient array c[a][b] multiplying sum_i sigma^a_i sigma^b_{i+1}.

    Row index a runs over 0..3 (identity row a=0 holds the single-site
    fields), column index b over 1..3 stored at positions 0..2.
    """

    __slots__ = ("c",)

    def __init__(self, c):
        c = np.asarray(c)
        if c.shape != (4, 3):
            raise ValueError(f"expected a 4x3 array, got shape {c.shape}")
        if np.iscomplexobj(c):
            self.c = c.astype(np.complex128)
        else:
            self.c = c.astype(np.float64)

    @classmethod
    def zeros(cls) -> "TICoefficients":
        return cls(np.zeros((4, 3)))

    @property
    def field_row(self) -> np.ndarray:
        """The a=0 row: coefficients of the uniform X, Y, Z fields."""
        return self.c[0]

    @property
    def bond_block(self) -> np.ndarray:
        """The 3x3 block of two-site couplings (rows a=1..3, columns b=1..3)."""
        return self.c[1:]

    @property
    def gauge_fixed(self) -> bool:
        zeros = [self.c[a, b - 1] for a, b in TI_GAUGE_FIXED_ZEROS]
        return max(abs(v) for v in zeros) == 0.0

    def ravel(self) -> np.ndarray:
        return self.c.ravel().copy()

    def __repr__(self):
        return f"TICoefficients({self.c!r})"


def ti_to_expr(tc: TICoefficients, n: int) -> OperatorExpr:
    """Realize a TI coefficient tensor over the 12-dim periodic chain class."""
    space = build_class("ti_chain_periodic", n)
    return OperatorExpr(space, tc.ravel())


def expr_to_ti(expr: OperatorExpr, rtol: float = 1e-10) -> TICoefficients:
    """Project an expr onto the TI subspace; raises if the residual is above tol."""
    name = expr.space.name
    if name == "ti_chain_periodic":
        return TICoefficients(expr.coeffs.reshape(4, 3))
    if name == "ti_chain_gauge_fixed":
        c = np.zeros((4, 3), dtype=expr.coeffs.dtype)
        for (a, b), v in zip(TI_GAUGE_FREE_SLOTS, expr.coeffs):
            c[a, b - 1] = v
        return TICoefficients(c)
    # generic path: project string coefficients onto the periodic TI class
    ti_space = build_class("ti_chain_periodic", expr.n)
    coeffs, resid_sq = ti_space.project_string_coeffs(expr.string_coeffs())
    norm_sq = sum(abs(v) ** 2 for v in expr.string_coeffs().values())
    if resid_sq > (rtol**2) * max(norm_sq, 1e-300) and resid_sq > 1e-28:
        raise NotInClassError(
            f"expr is not translation invariant (residual fraction "
            f"{math.sqrt(resid_sq / max(norm_sq, 1e-300)):.3e})"
        )
    if np.abs(coeffs.imag).max() == 0.0:
        coeffs = coeffs.real
    return TICoefficients(coeffs.reshape(4, 3))


def gauge_fixed_params_to_ti(params: np.ndarray) -> TICoefficients:
    """Expand a 9-vector over the gauge-fixed slots into a full TI tensor."""
    params = np.asarray(params)
    c = np.zeros((4, 3), dtype=np.complex128 if np.iscomplexobj(params) else np.float64)
    for (a, b), v in zip(TI_GAUGE_FREE_SLOTS, params):
        c[a, b - 1] = v
    return TICoefficients(c)


def ti_to_gauge_fixed_params(tc: TICoefficients, tol: float = 1e-12) -> np.ndarray:
    """Collapse a gauge-fixed TI tensor to its 9 free parameters."""
    zeros = [abs(tc.c[a, b - 1]) for a, b in TI_GAUGE_FIXED_ZEROS]
    scale = max(1.0, float(np.abs(tc.c).max()))
    if max(zeros) > tol * scale:
        raise ValueError("tensor is not gauge fixed: fixed slots are nonzero")
    return np.array([tc.c[a, b - 1] for a, b in TI_GAUGE_FREE_SLOTS])
