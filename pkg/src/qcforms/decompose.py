"""Constructive decomposition of quasiconvex cubic-symmetric forms.

Within the three-parameter family built by :func:`qcforms.forms.from_cubic`,
quasiconvexity is equivalent to

    alpha >= 0,  gamma >= 0,  -alpha/2 - gamma <= beta + gamma <= alpha + gamma

and every admissible member splits explicitly into weighted squares of linear
forms plus a null-Lagrangian.  The split has two branches depending on the
sign of beta + gamma; the derived weights are nonnegative exactly on the
admissible region, which is what makes the construction a certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forms import QuadraticForm, from_cubic, null_lagrangian, project_minor_span

_NAME_TO_INDEX = {
    "11": 0, "22": 1, "33": 2, "12": 3, "23": 4, "31": 5, "21": 6, "32": 7, "13": 8,
}


def _linear(*terms) -> np.ndarray:
    """9-vector of a linear form given ('entry', coefficient) pairs."""
    v = np.zeros(9)
    for name, c in terms:
        v[_NAME_TO_INDEX[name]] += c
    return v


@dataclass
class DecompositionCertificate:
    """Weighted squares plus a null-Lagrangian reconstructing a cubic form.

    square_terms holds (weight, coeffs) pairs where coeffs is the 9-vector of
    a linear form in xi; null_part holds the nine minor coefficients.  Zero
    weights are kept so the certificate mirrors the two-branch construction
    term for term.
    """

    case: int
    beta_prime: float
    gamma_prime: float
    square_terms: list = field(default_factory=list)
    null_part: np.ndarray = field(default_factory=lambda: np.zeros(9))

    def reconstruct(self) -> QuadraticForm:
        m = np.zeros((9, 9))
        for w, coeffs in self.square_terms:
            m += w * np.outer(coeffs, coeffs)
        return QuadraticForm(m) + null_lagrangian(self.null_part)

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "beta_prime": self.beta_prime,
            "gamma_prime": self.gamma_prime,
            "squares": [{"weight": w, "coeffs": list(c)} for w, c in self.square_terms],
            "null_part": list(self.null_part),
        }


def cubic_admissible(alpha: float, beta: float, gamma: float) -> bool:
    """Quasiconvexity test for the cubic family (exact inequality check)."""
    return (alpha >= 0.0 and gamma >= 0.0
            and -alpha / 2 - gamma <= beta + gamma <= alpha + gamma)


def cubic_margin(alpha: float, beta: float, gamma: float) -> float:
    """Smallest slack among the four admissibility inequalities.

    Positive strictly inside the quasiconvex region, negative outside; a
    convenient sharpness measure for sampling-based tests.
    """
    return min(alpha, gamma,
               (alpha + gamma) - (beta + gamma),
               (beta + gamma) + alpha / 2 + gamma)


def _violated_inequality(alpha, beta, gamma) -> str:
    if alpha < 0:
        return f"alpha >= 0 fails (alpha = {alpha:g})"
    if gamma < 0:
        return f"gamma >= 0 fails (gamma = {gamma:g})"
    if beta + gamma > alpha + gamma:
        return (f"beta + gamma <= alpha + gamma fails "
                f"({beta + gamma:g} > {alpha + gamma:g})")
    return (f"beta + gamma >= -alpha/2 - gamma fails "
            f"({beta + gamma:g} < {-alpha / 2 - gamma:g})")


def decompose_cubic(alpha: float, beta: float, gamma: float) -> DecompositionCertificate:
    """Split an admissible cubic form into squares plus a null-Lagrangian.

    Case 1 (beta + gamma >= 0) uses the trace square and symmetrized
    off-diagonal pairs; Case 2 uses diagonal differences and antisymmetrized
    pairs.  The null part is computed as the projection of the leftover onto
    the minor span and verified to be exact.  Raises ValueError on
    inadmissible parameters, naming the violated inequality.
    """
    if not cubic_admissible(alpha, beta, gamma):
        raise ValueError("parameters are not quasiconvex: "
                         + _violated_inequality(alpha, beta, gamma))
    if alpha + gamma == 0.0:
        # admissibility forces beta = 0: the zero form
        return DecompositionCertificate(case=1, beta_prime=0.0, gamma_prime=0.0)

    bg = beta + gamma
    squares = []
    if bg >= 0.0:
        case = 1
        beta_p = bg * alpha / (alpha + gamma)
        gamma_p = bg * gamma / (alpha + gamma)
        w_diag = max(alpha - beta_p, 0.0)
        w_pair = max(gamma_p, 0.0)
        w_single = max(gamma - gamma_p, 0.0)
        for name in ("11", "22", "33"):
            squares.append((w_diag, _linear((name, 1.0))))
        squares.append((max(beta_p, 0.0),
                        _linear(("11", 1.0), ("22", 1.0), ("33", 1.0))))
        for a, b in (("12", "21"), ("13", "31"), ("23", "32")):
            squares.append((w_pair, _linear((a, 1.0), (b, 1.0))))
        for name in ("12", "21", "13", "31", "23", "32"):
            squares.append((w_single, _linear((name, 1.0))))
    else:
        case = 2
        beta_p = -bg * alpha / (alpha + 2 * gamma)
        gamma_p = -2 * bg * gamma / (alpha + 2 * gamma)
        w_diag = max(alpha - 2 * beta_p, 0.0)
        w_pair = max(gamma_p, 0.0)
        w_single = max(gamma - gamma_p, 0.0)
        for name in ("11", "22", "33"):
            squares.append((w_diag, _linear((name, 1.0))))
        for a, b in (("11", "22"), ("22", "33"), ("33", "11")):
            squares.append((max(beta_p, 0.0), _linear((a, 1.0), (b, -1.0))))
        for a, b in (("12", "21"), ("13", "31"), ("23", "32")):
            squares.append((w_pair, _linear((a, 1.0), (b, -1.0))))
        for name in ("12", "21", "13", "31", "23", "32"):
            squares.append((w_single, _linear((name, 1.0))))

    f = from_cubic(alpha, beta, gamma)
    partial = np.zeros((9, 9))
    for w, coeffs in squares:
        partial += w * np.outer(coeffs, coeffs)
    leftover = QuadraticForm(f.matrix - partial)
    null_part, residual = project_minor_span(leftover)
    scale = max(f.scale, 1.0)
    if residual > 1e-12 * scale:
        raise RuntimeError(
            f"decomposition leftover strays from the minor span by {residual:.3e}")
    return DecompositionCertificate(case=case, beta_prime=beta_p,
                                    gamma_prime=gamma_p, square_terms=squares,
                                    null_part=null_part)


def verify_certificate(f: QuadraticForm, cert: DecompositionCertificate,
                       tol: float = 1e-12) -> bool:
    """Check a certificate against a form.

    True iff all weights are nonnegative and the squares plus the
    null-Lagrangian reproduce f coefficientwise within tol (scaled by the
    max-abs coefficient).
    """
    if any(w < 0.0 for w, _ in cert.square_terms):
        return False
    return cert.reconstruct().allclose(f, tol)
