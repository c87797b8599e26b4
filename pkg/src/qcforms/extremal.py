"""Extremality probing and rank-one equivalence.

A quasiconvex quadratic form is extremal (in the subtract-a-rank-one sense)
when no positive multiple of any squared rank-one pairing (a.x)^2 (b.y)^2 can
be removed without breaking quasiconvexity.  ``max_subtractable`` measures the
removable coefficient in one direction by bisection against the rank-one
certifier; ``probe_def1`` takes the supremum over sampled directions.  A zero
supremum is numerical evidence for extremality, not a proof; a positive one
is a concrete counterexample.

``transform`` and ``diagonal_scaling`` implement the change of variables
(x, y) -> (Ax, By), which preserves quasiconvexity and extremality and maps
the one-parameter-family forms onto each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .forms import Biquadratic, QuadraticForm, canonical_lift, substitute, to_biquadratic
from .rankone import SearchConfig, certify, zero_set

_T_CAP = 1e6
_BRACKET_WIDTH = 1e-6


@dataclass(frozen=True)
class RankOneDirection:
    """Unit pair (a, b) inducing the rank-one form R(xi) = (sum a_i b_j xi_ij)^2."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != (3,) or b.shape != (3,):
            raise ValueError("direction vectors must be 3-vectors")
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            raise ValueError("direction vectors must be nonzero")
        object.__setattr__(self, "a", a / na)
        object.__setattr__(self, "b", b / nb)

    def form(self) -> QuadraticForm:
        from .forms import mat_to_vec
        r = mat_to_vec(np.outer(self.a, self.b))
        return QuadraticForm(np.outer(r, r))


@dataclass(frozen=True)
class EquivalenceMap:
    """Nonsingular pair (A, B) acting on biquadratics by (x, y) -> (Ax, By)."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if a.shape != (3, 3) or b.shape != (3, 3):
            raise ValueError("equivalence maps are pairs of 3x3 matrices")
        if abs(np.linalg.det(a)) < 1e-12 or abs(np.linalg.det(b)) < 1e-12:
            raise ValueError("equivalence maps must be nonsingular")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def compose(self, other: "EquivalenceMap") -> "EquivalenceMap":
        """The map acting as self after other."""
        return EquivalenceMap(self.a @ other.a, self.b @ other.b)

    def inverse(self) -> "EquivalenceMap":
        return EquivalenceMap(np.linalg.inv(self.a), np.linalg.inv(self.b))

    @staticmethod
    def identity() -> "EquivalenceMap":
        return EquivalenceMap(np.eye(3), np.eye(3))


def transform(b: Biquadratic, m: EquivalenceMap) -> Biquadratic:
    """The biquadratic (x, y) -> b(Ax, By)."""
    return to_biquadratic(substitute(canonical_lift(b), m.a, m.b))


def diagonal_scaling(alpha: float, beta: float, gamma: float,
                     alpha2: float, beta2: float, gamma2: float) -> EquivalenceMap:
    """Diagonal change of variables mapping one off-diagonal triple to another.

    Solves A = diag(l1, l2, l3), B = diag(1/l1, 1/l2, 1/l3) with
    alpha l1^2/l2^2 = alpha', beta l2^2/l3^2 = beta', gamma l3^2/l1^2 = gamma',
    normalized by l1 l2 l3 = 1.  Requires all six parameters positive and
    matching products alpha beta gamma = alpha' beta' gamma' (the log-linear
    system is consistent exactly then).
    """
    params = (alpha, beta, gamma, alpha2, beta2, gamma2)
    if any(p <= 0 for p in params):
        raise ValueError("diagonal scaling needs positive parameters")
    p0 = alpha * beta * gamma
    p1 = alpha2 * beta2 * gamma2
    if abs(p0 - p1) > 1e-9 * p0:
        raise ValueError(
            f"parameter products must match: {p0:g} != {p1:g}")
    # unknowns u_i = 2 log(l_i); three ratio equations plus the normalization
    a = np.array([
        [1.0, -1.0, 0.0],
        [0.0, 1.0, -1.0],
        [-1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
    ])
    rhs = np.array([np.log(alpha2 / alpha), np.log(beta2 / beta),
                    np.log(gamma2 / gamma), 0.0])
    u, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    lam = np.exp(u / 2.0)
    return EquivalenceMap(np.diag(lam), np.diag(1.0 / lam))


@dataclass
class ProbeReport:
    """Result of a subtract-a-rank-one extremality probe.

    extremal_def1 is the probe verdict: the supremum of removable
    coefficients over all sampled directions stayed at numerical zero.
    Evidence, not proof; a positive sup_t is a genuine counterexample.
    """

    directions: int
    sup_t: float
    worst_a: np.ndarray
    worst_b: np.ndarray
    extremal_def1: bool
    per_direction: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self, verbose: bool = False) -> dict:
        out = {
            "directions": self.directions,
            "sup_t": self.sup_t,
            "worst_a": self.worst_a.tolist(),
            "worst_b": self.worst_b.tolist(),
            "extremal_def1": self.extremal_def1,
        }
        if verbose:
            out["per_direction"] = [
                {"a": a.tolist(), "b": b.tolist(), "t_star": t}
                for a, b, t in self.per_direction
            ]
        return out


class _Bisector:
    """Shared state for repeated violation queries f - t R.

    Seeds every certification with the zero set of f plus witnesses of
    violations found at larger t, so the shrinking violation region stays
    in view as the bracket tightens.  Once a witness exists, the seeded
    evaluation alone detects any violation above the true threshold, so
    subsequent queries drop to a cheap search budget.
    """

    def __init__(self, f: QuadraticForm, cfg: SearchConfig, seeds):
        self.f = f
        self.cfg = cfg
        self.cheap = SearchConfig(
            grid_size=max(128, cfg.grid_size // 8),
            multistarts=min(4, cfg.multistarts),
            max_iter=min(60, cfg.max_iter),
            tol=cfg.tol, seed=cfg.seed)
        self.have_witness = False
        self.seeds = [np.asarray(s, dtype=float) for s in seeds]

    def violated(self, form: QuadraticForm) -> bool:
        cfg = self.cheap if self.have_witness else self.cfg
        v = certify(form, cfg, extra_seeds=self.seeds if self.seeds else None)
        if v.status == "violated":
            self.seeds.insert(0, v.witness_y)
            del self.seeds[24:]
            self.have_witness = True
            return True
        return False

    def max_subtractable(self, direction: RankOneDirection) -> float:
        r = direction.form()
        if self.violated(self.f - _BRACKET_WIDTH * r):
            return 0.0
        t_lo, t_hi = _BRACKET_WIDTH, 2.0 * _BRACKET_WIDTH
        while not self.violated(self.f - t_hi * r):
            t_lo = t_hi
            t_hi *= 2.0
            if t_hi > _T_CAP:
                return _T_CAP
        while t_hi - t_lo > _BRACKET_WIDTH:
            mid = 0.5 * (t_lo + t_hi)
            if self.violated(self.f - mid * r):
                t_hi = mid
            else:
                t_lo = mid
        return 0.5 * (t_lo + t_hi)


def max_subtractable(f: QuadraticForm, direction: RankOneDirection,
                     cfg: SearchConfig = SearchConfig(),
                     zero_seeds=None) -> float:
    """Largest t with f - t (a.x)^2 (b.y)^2 still rank-one convex.

    Determined by doubling then bisection against the certifier, to an
    absolute bracket width of 1e-6 (capped at 1e6).  Returns 0 when even
    t = 1e-6 already breaks quasiconvexity.  Raises ValueError when f
    itself is not rank-one convex.
    """
    if certify(f, cfg).status == "violated":
        raise ValueError("max_subtractable requires a rank-one convex form")
    if zero_seeds is None:
        zero_seeds = [y for _, y in zero_set(f, cfg)]
    return _Bisector(f, cfg, zero_seeds).max_subtractable(direction)


def probe_def1(f: QuadraticForm, n_directions: int,
               cfg: SearchConfig = SearchConfig(),
               refine_rounds: int = 12) -> ProbeReport:
    """Probe extremality by maximizing the removable coefficient.

    Samples n_directions random unit pairs plus directions aligned with the
    zero set of f (where the subtraction margin is binding), measures t* for
    each, then hill-climbs around the worst direction.  extremal_def1 is True
    when the resulting supremum is <= 1e-6.
    """
    base = certify(f, cfg)
    if base.status == "violated":
        raise ValueError("probe_def1 requires a rank-one convex form")
    zeros = zero_set(f, cfg)
    seeds = [y for _, y in zeros]
    rng = np.random.default_rng(cfg.seed)

    directions = [RankOneDirection(x, y) for x, y in zeros]
    raw = rng.normal(size=(n_directions, 2, 3))
    for pair in raw:
        directions.append(RankOneDirection(pair[0], pair[1]))

    bis = _Bisector(f, cfg, seeds)
    per_direction = []
    sup_t, worst = 0.0, directions[0] if directions else None
    for d in directions:
        t = bis.max_subtractable(d)
        per_direction.append((d.a, d.b, t))
        if t > sup_t:
            sup_t, worst = t, d

    refinements = 0
    if sup_t > _BRACKET_WIDTH and worst is not None:
        for radius in (0.2, 0.05, 0.01):
            for _ in range(refine_rounds // 3):
                cand = RankOneDirection(worst.a + radius * rng.normal(size=3),
                                        worst.b + radius * rng.normal(size=3))
                t = bis.max_subtractable(cand)
                refinements += 1
                per_direction.append((cand.a, cand.b, t))
                if t > sup_t:
                    sup_t, worst = t, cand

    return ProbeReport(
        directions=len(per_direction),
        sup_t=sup_t,
        worst_a=worst.a if worst is not None else np.zeros(3),
        worst_b=worst.b if worst is not None else np.zeros(3),
        extremal_def1=bool(sup_t <= _BRACKET_WIDTH),
        per_direction=per_direction,
        diagnostics={"zero_set_size": len(zeros), "refinements": refinements},
    )
