"""Polyconvexity decisions.

A quadratic form is polyconvex iff some linear combination of the nine 2x2
minors can be subtracted to leave a positive semidefinite form.  ``feasibility``
searches for such a combination by maximizing the concave function
alpha -> lam_min(M - sum alpha_i N_i) with a Polyak-style subgradient method;
``structural_disproof`` implements the rigorous negative route: variables the
form does not involve force linear constraints on alpha, and when those
constraints pin alpha = 0 a single point with a negative value settles the
question.  Non-polyconvexity is only ever asserted through that structural
certificate, never from search failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .forms import MINOR_FORMS, VARIABLE_NAMES, QuadraticForm, vec_to_mat
from .rankone import SearchConfig

# Gram matrix of the minor basis; used to seed the search at the
# least-squares projection of M onto the minor span.
_GRAM_INV = np.linalg.inv(np.einsum("nuv,muv->nm", MINOR_FORMS, MINOR_FORMS))


@dataclass
class PolyVerdict:
    """Outcome of a polyconvexity decision.

    status is 'polyconvex' (alpha holds the minor coefficients and
    lambda_min the residual smallest eigenvalue of M - sum alpha_i N_i),
    'not_polyconvex' (certificate carries the structural disproof) or
    'inconclusive' (best alpha found and its residual eigenvalue).
    """

    status: str
    alpha: Optional[np.ndarray]
    lambda_min: float
    certificate: Optional[dict] = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "alpha": None if self.alpha is None else self.alpha.tolist(),
            "lambda_min": self.lambda_min,
            "certificate": self.certificate,
        }


def minor_matrices() -> list[np.ndarray]:
    """The nine symmetric 9x9 matrices N_i with xi^T N_i xi = i-th cofactor."""
    return [MINOR_FORMS[n].copy() for n in range(9)]


def _residual(m: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    return m - np.tensordot(alpha, MINOR_FORMS, axes=1)


def structural_disproof(f: QuadraticForm, tol: float = 1e-9) -> Optional[PolyVerdict]:
    """Rigorous non-polyconvexity certificate, when one exists.

    Let Z be the variables with identically zero row in M (the form does not
    involve them).  Any PSD matrix with a zero diagonal entry has a zero row,
    so M - sum alpha_i N_i PSD forces sum_i alpha_i N_i[v, :] = 0 for v in Z.
    If those linear constraints admit only alpha = 0 and M itself has a
    direction of negative value, the form cannot be polyconvex.
    """
    m = f.matrix
    scale = max(f.scale, 1.0)
    absent = [v for v in range(9) if np.all(np.abs(m[v, :]) <= 1e-14 * scale)]
    if not absent:
        return None
    rows = []
    for v in absent:
        for w in range(9):
            coeffs = MINOR_FORMS[:, v, w]
            if np.any(coeffs != 0.0):
                rows.append(coeffs)
    if not rows:
        return None
    constraints = np.array(rows)
    sv = np.linalg.svd(constraints, compute_uv=False)
    nullspace_dim = int(np.sum(sv <= 1e-10 * sv[0])) + (9 - len(sv) if len(sv) < 9 else 0)
    if nullspace_dim > 0:
        return None

    # alpha is pinned to zero; any eta with f(eta) < 0 finishes the disproof.
    # The identity matrix is tried first so integer-valued forms keep an
    # exact integer witness value.
    eye = np.eye(3)
    val_eye = f.evaluate(eye)
    if val_eye < -tol * scale:
        eta, val = eye, val_eye
    else:
        w, u = np.linalg.eigh(m)
        if w[0] >= -tol * scale:
            return None  # M itself is PSD: alpha = 0 certifies polyconvexity
        eta, val = vec_to_mat(u[:, 0]), float(w[0])
    return PolyVerdict(
        "not_polyconvex",
        alpha=None,
        lambda_min=val,
        certificate={
            "absent_variables": [VARIABLE_NAMES[v] for v in absent],
            "forced_alpha": "zero",
            "constraint_rank": 9,
            "negative_point": eta.tolist(),
            "value": val,
        },
    )


def _lam_min_and_supergradient(m: np.ndarray, alpha: np.ndarray, gap: float):
    r = _residual(m, alpha)
    w, u = np.linalg.eigh(r)
    scale = max(np.max(np.abs(r)), 1.0)
    k = int(np.sum(w < w[0] + gap * scale))
    # d lam_min / d alpha_i = -v^T N_i v, averaged over the near-eigenspace
    g = np.zeros(9)
    for j in range(k):
        g -= np.einsum("u,nuv,v->n", u[:, j], MINOR_FORMS, u[:, j])
    return float(w[0]), g / k


def _ascend(m: np.ndarray, alpha0: np.ndarray, max_iter: int, tol: float):
    """Polyak-style subgradient ascent of alpha -> lam_min(M - sum alpha N).

    The step targets best-so-far plus a gap that halves whenever progress
    stalls, which converges geometrically on the sharp maxima that arise
    here.  Stops as soon as the feasibility threshold -tol/2 is cleared.
    """
    alpha = alpha0.copy()
    best_val, best_alpha = -np.inf, alpha0.copy()
    delta = 0.5
    stall = 0
    for _ in range(max_iter):
        val, g = _lam_min_and_supergradient(m, alpha, gap=1e-8)
        if val > best_val:
            best_val, best_alpha = val, alpha.copy()
            stall = 0
        else:
            stall += 1
        if best_val >= -0.5 * tol:
            break
        if stall > 40:
            delta *= 0.5
            stall = 0
            alpha = best_alpha.copy()
            if delta < 1e-13:
                break
        gn2 = float(g @ g)
        if gn2 <= 1e-30:
            break
        step = (best_val + delta - val) / gn2
        alpha = alpha + step * g
    return best_val, best_alpha


def feasibility(f: QuadraticForm, cfg: Optional[SearchConfig] = None) -> PolyVerdict:
    """Decide polyconvexity of f.

    Tries the structural disproof first; otherwise maximizes the residual
    smallest eigenvalue over minor coefficients by multistart subgradient
    ascent.  Restarts are seeded at the Frobenius projection of M onto the
    minor span, at zero, and at random Gaussian points.
    """
    if cfg is None:
        cfg = SearchConfig(max_iter=5000, multistarts=20)
    sd = structural_disproof(f, cfg.tol)
    if sd is not None:
        return sd

    scale = f.scale
    if scale == 0.0:
        return PolyVerdict("polyconvex", np.zeros(9), 0.0,
                           diagnostics={"note": "zero form"})
    m = f.matrix / scale
    rng = np.random.default_rng(cfg.seed)
    proj = _GRAM_INV @ np.einsum("nuv,uv->n", MINOR_FORMS, m)
    seeds = [proj, np.zeros(9)]
    seeds += [rng.normal(size=9) for _ in range(max(0, cfg.multistarts - 2))]

    # a seed may already be feasible (alpha = 0 whenever M itself is PSD)
    best_val, best_alpha, best_idx = -np.inf, np.zeros(9), -1
    for idx, seed in enumerate(seeds):
        val, _ = _lam_min_and_supergradient(m, seed, gap=1e-8)
        if val > best_val:
            best_val, best_alpha, best_idx = val, seed.copy(), idx
    if best_val < -0.5 * cfg.tol:
        for idx, seed in enumerate(seeds):
            val, alpha = _ascend(m, seed, cfg.max_iter, cfg.tol)
            if val > best_val:
                best_val, best_alpha, best_idx = val, alpha, idx
            if best_val >= -0.5 * cfg.tol:
                break

    diagnostics = {"restarts": len(seeds), "best_restart": best_idx}
    if best_val >= -cfg.tol:
        return PolyVerdict("polyconvex", best_alpha * scale, best_val * scale,
                           diagnostics=diagnostics)
    return PolyVerdict("inconclusive", best_alpha * scale, best_val * scale,
                       diagnostics=diagnostics)


def convex_split(f: QuadraticForm, alpha, tol: float = 1e-9):
    """Write f - sum alpha_i N_i as a nonnegative combination of squares.

    Returns ``(squares, max_error)`` where squares is a list of
    ``(weight, coeffs)`` pairs with weight >= 0 and coeffs the 9-vector of a
    linear form, and max_error is the max-abs coefficient gap between
    sum w L L^T and the residual.  Raises ValueError when the residual is
    not PSD within tolerance.
    """
    alpha = np.asarray(alpha, dtype=float)
    r = _residual(f.matrix, alpha)
    scale = max(np.max(np.abs(r)), 1.0)
    w, u = np.linalg.eigh(r)
    if w[0] < -tol * scale:
        raise ValueError(
            f"residual form is not positive semidefinite (lambda_min = {w[0]:.3e})")
    squares = [(float(wk), u[:, k].copy())
               for k, wk in enumerate(w) if wk > tol * scale]
    recon = sum(wk * np.outer(v, v) for wk, v in squares) if squares else np.zeros((9, 9))
    return squares, float(np.max(np.abs(recon - r)))
