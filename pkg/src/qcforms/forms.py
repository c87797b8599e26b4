"""Quadratic forms on 3x3 matrices.

A matrix variable ``xi`` is flattened to a 9-vector in the fixed order

    (11, 22, 33, 12, 23, 31, 21, 32, 13)

so the first six slots are the diagonal-plus-forward-cycle entries
(xi11, xi22, xi33, xi12, xi23, xi31) that the interesting families
actually use.  A quadratic form is f(xi) = xi^T M xi with M a symmetric
9x9 coefficient matrix in this ordering; ``QuadraticForm.matrix[:6, :6]``
is then the coefficient block on those six variables.

The same order is used to enumerate the nine 2x2 minors: entry n of a
minor-coefficient vector refers to the signed cofactor of ``xi`` at the
matrix position ``VARIABLE_ORDER[n]``.
"""

from __future__ import annotations

import warnings

import numpy as np

# Canonical flattening order for 3x3 matrix variables (0-based positions).
VARIABLE_ORDER = (
    (0, 0), (1, 1), (2, 2),
    (0, 1), (1, 2), (2, 0),
    (1, 0), (2, 1), (0, 2),
)

VARIABLE_NAMES = tuple(f"xi{i + 1}{j + 1}" for i, j in VARIABLE_ORDER)

_VAR_INDEX = {pos: n for n, pos in enumerate(VARIABLE_ORDER)}

# Unordered index pairs for biquadratic monomials, aligned with the
# diagonal-plus-forward-cycle convention above.
_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0))
_PAIR_INDEX = {frozenset(p) if p[0] != p[1] else (p[0],): n for n, p in enumerate(_PAIRS)}


def _pair_id(i, j):
    return _PAIR_INDEX[(i,)] if i == j else _PAIR_INDEX[frozenset((i, j))]


def mat_to_vec(xi) -> np.ndarray:
    """Flatten a 3x3 matrix to the canonical 9-vector."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-2:] != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {xi.shape}")
    rows = [xi[..., i, j] for i, j in VARIABLE_ORDER]
    return np.stack(rows, axis=-1)


def vec_to_mat(v) -> np.ndarray:
    """Inverse of :func:`mat_to_vec`."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 9:
        raise ValueError(f"expected a 9-vector, got shape {v.shape}")
    xi = np.empty(v.shape[:-1] + (3, 3), dtype=float)
    for n, (i, j) in enumerate(VARIABLE_ORDER):
        xi[..., i, j] = v[..., n]
    return xi


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class QuadraticForm:
    """f(xi) = xi^T M xi with M symmetric 9x9 in the canonical order.

    Construction symmetrizes M: the form only sees the symmetric part.
    Instances are immutable and safe to share across threads.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.array(matrix, dtype=float)
        if m.shape != (9, 9):
            raise ValueError(f"coefficient matrix must be 9x9, got {m.shape}")
        object.__setattr__(self, "matrix", _freeze(0.5 * (m + m.T)))

    def __setattr__(self, name, value):
        raise AttributeError("QuadraticForm is immutable")

    @property
    def scale(self) -> float:
        """Max-abs coefficient; the natural magnitude for tolerances."""
        return float(np.max(np.abs(self.matrix)))

    def evaluate(self, xi) -> float:
        """Value of the form at a 3x3 matrix (or 9-vector)."""
        v = np.asarray(xi, dtype=float)
        if v.shape[-2:] == (3, 3):
            v = mat_to_vec(v)
        return float(np.einsum("...i,ij,...j->...", v, self.matrix, v)) \
            if v.ndim == 1 else np.einsum("...i,ij,...j->...", v, self.matrix, v)

    def evaluate_rank_one(self, x, y) -> float:
        """Value at the rank-one matrix x (outer) y."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.evaluate(np.multiply.outer(x, y) if x.ndim == 1
                             else np.einsum("...i,...j->...ij", x, y))

    def flux(self, xi) -> np.ndarray:
        """J = M xi as a 3x3 matrix; satisfies sum_ij J_ij xi_ij = f(xi)."""
        v = np.asarray(xi, dtype=float)
        if v.shape[-2:] == (3, 3):
            v = mat_to_vec(v)
        return vec_to_mat(v @ self.matrix)

    def acoustic(self) -> "AcousticMatrix":
        """The y-matrix T(y) with x T(y) x^T = f(x outer y)."""
        m = self.matrix
        coeffs = np.empty((3, 3, 3, 3))
        for a in range(3):
            for b in range(3):
                for k in range(3):
                    for l in range(3):
                        coeffs[a, b, k, l] = 0.5 * (
                            m[_VAR_INDEX[a, k], _VAR_INDEX[b, l]]
                            + m[_VAR_INDEX[a, l], _VAR_INDEX[b, k]]
                        )
        return AcousticMatrix(coeffs)

    def biquadratic(self) -> "Biquadratic":
        return to_biquadratic(self)

    # arithmetic: forms make a vector space
    def __add__(self, other):
        if not isinstance(other, QuadraticForm):
            return NotImplemented
        return QuadraticForm(self.matrix + other.matrix)

    def __sub__(self, other):
        if not isinstance(other, QuadraticForm):
            return NotImplemented
        return QuadraticForm(self.matrix - other.matrix)

    def __mul__(self, c):
        return QuadraticForm(float(c) * self.matrix)

    __rmul__ = __mul__

    def __neg__(self):
        return QuadraticForm(-self.matrix)

    def allclose(self, other: "QuadraticForm", tol: float = 1e-12) -> bool:
        """Coefficientwise comparison, tolerance scaled by max-abs coefficient."""
        ref = max(self.scale, other.scale, 1.0)
        return bool(np.max(np.abs(self.matrix - other.matrix)) <= tol * ref)

    def __repr__(self):
        return f"QuadraticForm(scale={self.scale:.3g})"


class AcousticMatrix:
    """3x3 symmetric matrix T(y) whose entries are quadratic forms in y.

    ``coeffs[a, b]`` is the symmetric 3x3 coefficient matrix of the entry
    T(y)[a, b] = y^T coeffs[a, b] y.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=float)
        if c.shape != (3, 3, 3, 3):
            raise ValueError("acoustic coefficients must have shape (3,3,3,3)")
        object.__setattr__(self, "coeffs", _freeze(c))

    def __setattr__(self, name, value):
        raise AttributeError("AcousticMatrix is immutable")

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.einsum("abkl,k,l->ab", self.coeffs, y, y)

    def batch(self, ys) -> np.ndarray:
        """T(y) for a batch of directions, shape (n, 3) -> (n, 3, 3)."""
        ys = np.asarray(ys, dtype=float)
        return np.einsum("abkl,nk,nl->nab", self.coeffs, ys, ys)

    def det(self, y) -> float:
        """det T(y) via closed-form 3x3 cofactor expansion."""
        t = self(y)
        return float(
            t[0, 0] * (t[1, 1] * t[2, 2] - t[1, 2] * t[2, 1])
            - t[0, 1] * (t[1, 0] * t[2, 2] - t[1, 2] * t[2, 0])
            + t[0, 2] * (t[1, 0] * t[2, 1] - t[1, 1] * t[2, 0])
        )

    def det_batch(self, ys) -> np.ndarray:
        t = self.batch(ys)
        return (
            t[:, 0, 0] * (t[:, 1, 1] * t[:, 2, 2] - t[:, 1, 2] * t[:, 2, 1])
            - t[:, 0, 1] * (t[:, 1, 0] * t[:, 2, 2] - t[:, 1, 2] * t[:, 2, 0])
            + t[:, 0, 2] * (t[:, 1, 0] * t[:, 2, 1] - t[:, 1, 1] * t[:, 2, 0])
        )

    def principal_minor(self, y, i: int) -> float:
        """The 2x2 principal minor M_ii obtained by deleting row/column i."""
        t = self(y)
        keep = [a for a in range(3) if a != i]
        s = t[np.ix_(keep, keep)]
        return float(s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0])


class Biquadratic:
    """Coefficients of f(x outer y) on monomials (x_i x_j)(y_k y_l).

    ``coeffs[p, q]`` is the coefficient of the monomial ``mx[p] * my[q]``
    where ``mx = (x1^2, x2^2, x3^2, x1x2, x2x3, x3x1)`` and likewise for y.
    This is the quotient of quadratic forms by the span of the nine 2x2
    minors (null-Lagrangians), so two forms differing by a null-Lagrangian
    have identical Biquadratic.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=float)
        if c.shape != (6, 6):
            raise ValueError("biquadratic coefficients must be 6x6")
        object.__setattr__(self, "coeffs", _freeze(c))

    def __setattr__(self, name, value):
        raise AttributeError("Biquadratic is immutable")

    @staticmethod
    def _monomials(v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.stack(
            [v[..., 0] ** 2, v[..., 1] ** 2, v[..., 2] ** 2,
             v[..., 0] * v[..., 1], v[..., 1] * v[..., 2], v[..., 2] * v[..., 0]],
            axis=-1,
        )

    def evaluate(self, x, y):
        mx = self._monomials(x)
        my = self._monomials(y)
        return np.einsum("...p,pq,...q->...", mx, self.coeffs, my)

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def allclose(self, other: "Biquadratic", tol: float = 1e-12) -> bool:
        ref = max(self.scale, other.scale, 1.0)
        return bool(np.max(np.abs(self.coeffs - other.coeffs)) <= tol * ref)

    def __repr__(self):
        return f"Biquadratic(scale={self.scale:.3g})"


# Index maps between the 9x9 coefficient matrix and the 6x6 monomial table.
_XPAIR = np.empty((9, 9), dtype=int)
_YPAIR = np.empty((9, 9), dtype=int)
for _a, (_ia, _ka) in enumerate(VARIABLE_ORDER):
    for _b, (_ib, _kb) in enumerate(VARIABLE_ORDER):
        _XPAIR[_a, _b] = _pair_id(_ia, _ib)
        _YPAIR[_a, _b] = _pair_id(_ka, _kb)


def to_biquadratic(f: QuadraticForm) -> Biquadratic:
    """Restrict f to rank-one matrices, i.e. quotient by null-Lagrangians."""
    c = np.zeros((6, 6))
    np.add.at(c, (_XPAIR, _YPAIR), f.matrix)
    return Biquadratic(c)


def canonical_lift(b: Biquadratic) -> QuadraticForm:
    """Lift a biquadratic back to a quadratic form.

    The monomial (x_i x_j)(y_k y_l) is placed on the single coefficient
    xi_ik * xi_jl, pairing first x-index with first y-index, so
    ``to_biquadratic(canonical_lift(b)) == b`` exactly.
    """
    m = np.zeros((9, 9))
    for p, (i, j) in enumerate(_PAIRS):
        for q, (k, l) in enumerate(_PAIRS):
            u = _VAR_INDEX[i, k]
            v = _VAR_INDEX[j, l]
            c = b.coeffs[p, q]
            if u == v:
                m[u, u] += c
            else:
                m[u, v] += 0.5 * c
                m[v, u] += 0.5 * c
    return QuadraticForm(m)


# ---------------------------------------------------------------------------
# parametric families

def from_cubic(alpha: float, beta: float, gamma: float) -> QuadraticForm:
    """Three-parameter family whose rank-four tensor has cubic symmetry.

    f = alpha*sum(xi_ii^2) + 2*beta*sum_{i<j}(xi_ii xi_jj)
        + gamma*sum_{i!=j}(xi_ij^2) + 2*gamma*(xi12 xi21 + xi13 xi31 + xi23 xi32)
    """
    m = np.zeros((9, 9))
    for i in range(3):
        m[i, i] = alpha
    for i in range(3):
        for j in range(3):
            if i != j:
                m[i, j] = beta
    for n in range(3, 9):
        m[n, n] = gamma
    # transpose-partner couplings: (12,21), (23,32), (31,13)
    for u, v in ((3, 6), (4, 7), (5, 8)):
        m[u, v] = gamma
        m[v, u] = gamma
    return QuadraticForm(m)


def from_cyclic(a: float, b: float, c: float, d: float) -> QuadraticForm:
    """Four-parameter family with cyclic and axis-reflection symmetry.

    f = a*sum(xi_ii^2) + b*(xi11 xi22 + xi22 xi33 + xi33 xi11)
        + c*(xi12^2 + xi23^2 + xi31^2) + d*(xi21^2 + xi32^2 + xi13^2)
    """
    m = np.zeros((9, 9))
    for i in range(3):
        m[i, i] = a
    for i in range(3):
        for j in range(3):
            if i != j:
                m[i, j] = 0.5 * b
    for n in (3, 4, 5):
        m[n, n] = c
    for n in (6, 7, 8):
        m[n, n] = d
    return QuadraticForm(m)


def extremal_q() -> QuadraticForm:
    """The extremal form Q: cyclic family at (a, b, c, d) = (1, -2, 1, 0)."""
    return from_cyclic(1.0, -2.0, 1.0, 0.0)


def corollary_q(alpha: float, beta: float, gamma: float) -> QuadraticForm:
    """Q's principal part plus alpha*xi12^2 + beta*xi23^2 + gamma*xi31^2."""
    m = from_cyclic(1.0, -2.0, 0.0, 0.0).matrix.copy()
    m[3, 3] = alpha
    m[4, 4] = beta
    m[5, 5] = gamma
    return QuadraticForm(m)


def norm_squared() -> QuadraticForm:
    """The Frobenius norm squared, |xi|^2."""
    return QuadraticForm(np.eye(9))


def zero_form() -> QuadraticForm:
    return QuadraticForm(np.zeros((9, 9)))


# ---------------------------------------------------------------------------
# minors and null-Lagrangians

def _cofactor_products():
    """For each position in VARIABLE_ORDER: ((u1, v1, +s), (u2, v2, -s)).

    The signed cofactor at (r, c) is s*(xi[a1,b1]*xi[a2,b2] - xi[a1,b2]*xi[a2,b1])
    with s = (-1)^(r+c) and (a1, a2), (b1, b2) the remaining rows/columns.
    """
    out = []
    for (r, c) in VARIABLE_ORDER:
        a1, a2 = [i for i in range(3) if i != r]
        b1, b2 = [j for j in range(3) if j != c]
        s = 1.0 if (r + c) % 2 == 0 else -1.0
        out.append((
            (_VAR_INDEX[a1, b1], _VAR_INDEX[a2, b2], s),
            (_VAR_INDEX[a1, b2], _VAR_INDEX[a2, b1], -s),
        ))
    return tuple(out)


_COFACTOR_PRODUCTS = _cofactor_products()


def _build_minor_forms():
    mats = np.zeros((9, 9, 9))
    for n, terms in enumerate(_COFACTOR_PRODUCTS):
        for (u, v, s) in terms:
            mats[n, u, v] += 0.5 * s
            mats[n, v, u] += 0.5 * s
    return _freeze(mats)


# MINOR_FORMS[n] is the symmetric 9x9 matrix N_n with xi^T N_n xi equal to
# the signed cofactor of xi at VARIABLE_ORDER[n].
MINOR_FORMS = _build_minor_forms()


def minors(xi) -> np.ndarray:
    """The nine signed cofactors of xi, enumerated in VARIABLE_ORDER."""
    v = mat_to_vec(xi)
    return np.einsum("...u,nuv,...v->...n", v, MINOR_FORMS, v)


def null_lagrangian(alpha) -> QuadraticForm:
    """The quadratic form sum_n alpha_n * (n-th signed cofactor).

    Vanishes identically on rank-one matrices.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (9,):
        raise ValueError("null-Lagrangian coefficients must be a 9-vector")
    return QuadraticForm(np.tensordot(alpha, MINOR_FORMS, axes=1))


# Gram matrix of the minor basis, for least-squares projection onto its span.
_MINOR_GRAM = np.einsum("nuv,muv->nm", MINOR_FORMS, MINOR_FORMS)
_MINOR_GRAM_INV = np.linalg.inv(_MINOR_GRAM)


def project_minor_span(f: QuadraticForm):
    """Best null-Lagrangian approximation of f.

    Returns ``(alpha, residual)`` where ``null_lagrangian(alpha)`` is the
    Frobenius-orthogonal projection of f onto the minor span and
    ``residual`` is the max-abs coefficient of what is left over.
    """
    b = np.einsum("nuv,uv->n", MINOR_FORMS, f.matrix)
    alpha = _MINOR_GRAM_INV @ b
    rest = f.matrix - np.tensordot(alpha, MINOR_FORMS, axes=1)
    return alpha, float(np.max(np.abs(rest)))


# ---------------------------------------------------------------------------
# variable substitution and symmetry checks

def substitute(f: QuadraticForm, a, b) -> QuadraticForm:
    """The form xi -> f(A xi B^T) for 3x3 matrices A, B.

    On rank-one arguments this realizes f((A x) outer (B y)).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    k = np.empty((9, 9))
    for n in range(9):
        e = np.zeros(9)
        e[n] = 1.0
        k[:, n] = mat_to_vec(a @ vec_to_mat(e) @ b.T)
    return QuadraticForm(k.T @ f.matrix @ k)


_CYCLE = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
_REFLECTIONS = tuple(np.diag(d).astype(float)
                     for d in ((-1, 1, 1), (1, -1, 1), (1, 1, -1)))

SYMMETRY_KINDS = ("swap", "cyclic", "axis-reflection")


def symmetry_check(b: Biquadratic, kind: str, tol: float = 1e-12) -> bool:
    """Whether the biquadratic has swap, cyclic or axis-reflection symmetry."""
    if kind == "swap":
        ref = max(b.scale, 1.0)
        return bool(np.max(np.abs(b.coeffs - b.coeffs.T)) <= tol * ref)
    lifted = canonical_lift(b)
    if kind == "cyclic":
        return b.allclose(to_biquadratic(substitute(lifted, _CYCLE, _CYCLE)), tol)
    if kind == "axis-reflection":
        return all(
            b.allclose(to_biquadratic(substitute(lifted, d, d)), tol)
            for d in _REFLECTIONS
        )
    raise ValueError(f"unknown symmetry kind {kind!r}; expected one of {SYMMETRY_KINDS}")


# ---------------------------------------------------------------------------
# form specification files

FAMILY_ARITY = {"cubic": 3, "cyclic": 4, "extremal_q": 0, "corollary_q": 3}

_FAMILY_BUILDERS = {
    "cubic": from_cubic,
    "cyclic": from_cyclic,
    "extremal_q": extremal_q,
    "corollary_q": corollary_q,
}


def parse_form_spec(spec: dict) -> QuadraticForm:
    """Build a form from its JSON description.

    Accepts either ``{"family": name, "params": [...]}`` with family one of
    cubic / cyclic / extremal_q / corollary_q, or ``{"matrix": 9x9 row-major}``.
    Matrices are symmetrized; asymmetry beyond 1e-9 triggers a warning.
    """
    if not isinstance(spec, dict):
        raise ValueError("form spec must be a JSON object")
    if "family" in spec:
        family = spec["family"]
        if family not in _FAMILY_BUILDERS:
            raise ValueError(f"unknown family {family!r}; expected one of "
                             f"{sorted(_FAMILY_BUILDERS)}")
        params = spec.get("params", [])
        arity = FAMILY_ARITY[family]
        if len(params) != arity:
            raise ValueError(f"family {family!r} takes {arity} parameters, "
                             f"got {len(params)}")
        return _FAMILY_BUILDERS[family](*[float(p) for p in params])
    if "matrix" in spec:
        m = np.asarray(spec["matrix"], dtype=float)
        if m.shape == (81,):
            m = m.reshape(9, 9)
        if m.shape != (9, 9):
            raise ValueError("matrix must be 9x9 (optionally flat row-major)")
        asym = np.max(np.abs(m - m.T))
        if asym > 1e-9 * max(1.0, np.max(np.abs(m))):
            warnings.warn(f"form matrix is asymmetric (max deviation {asym:.3g}); "
                          "symmetrizing", stacklevel=2)
        return QuadraticForm(m)
    raise ValueError("form spec needs a 'family' or 'matrix' key")
