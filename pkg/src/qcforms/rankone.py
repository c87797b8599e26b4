"""Rank-one convexity certification.

For quadratic forms, rank-one convexity (equivalently quasiconvexity) holds
iff the smallest eigenvalue of the acoustic matrix T(y) is nonnegative for
every unit y.  ``certify`` minimizes that eigenvalue globally over the sphere
with a Fibonacci-lattice scan followed by multistart projected-gradient
descent; ``brute_force_oracle`` is a descent-free cross-check used by tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .forms import AcousticMatrix, QuadraticForm

_TWO_PI_3 = 2.0 * np.pi / 3.0
# eigenvalue gap below which the two smallest eigenvalues are treated as
# degenerate and an averaged subgradient is used
_DEGENERATE_GAP = 1e-8


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the global eigenvalue search.

    tol is the certification tolerance on the form scaled to unit max-abs
    coefficient; seed fixes all randomness so verdicts are reproducible.
    """

    grid_size: int = 2000
    multistarts: int = 20
    max_iter: int = 200
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.grid_size < 12:
            raise ValueError("grid_size must be at least 12")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.multistarts < 0 or self.max_iter < 1:
            raise ValueError("multistarts must be >= 0 and max_iter >= 1")


@dataclass
class Verdict:
    """Outcome of a rank-one convexity search.

    status is 'certified' (minimum clearly positive), 'violated' (witness
    with negative value found) or 'marginal' (minimum within tolerance of
    zero; zero_points lists representative unit pairs (x, y) with
    f(x outer y) ~ 0).  All reported values are in the original scale of
    the form.
    """

    status: str
    min_value: float
    attaining_y: Optional[np.ndarray] = None
    witness_x: Optional[np.ndarray] = None
    witness_y: Optional[np.ndarray] = None
    zero_points: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        witnesses = []
        if self.status == "violated":
            witnesses.append({
                "x": self.witness_x.tolist(),
                "y": self.witness_y.tolist(),
                "value": self.min_value,
            })
        return {
            "status": self.status,
            "min_value": self.min_value,
            "witnesses": witnesses,
            "zero_points": [{"x": x.tolist(), "y": y.tolist()}
                            for x, y in self.zero_points],
        }


# ---------------------------------------------------------------------------
# closed-form symmetric 3x3 eigenvalues

def eigmin_batch(t: np.ndarray) -> np.ndarray:
    """Smallest eigenvalues of a batch of symmetric 3x3 matrices.

    Trigonometric solution of the characteristic cubic; input shape
    (..., 3, 3), output shape (...,).
    """
    t = np.asarray(t, dtype=float)
    d0 = t[..., 0, 0]
    d1 = t[..., 1, 1]
    d2 = t[..., 2, 2]
    p1 = t[..., 0, 1] ** 2 + t[..., 0, 2] ** 2 + t[..., 1, 2] ** 2
    q = (d0 + d1 + d2) / 3.0
    p2 = (d0 - q) ** 2 + (d1 - q) ** 2 + (d2 - q) ** 2 + 2.0 * p1
    p = np.sqrt(np.maximum(p2, 0.0) / 6.0)
    # detB/2 for B = (T - qI)/p; guard p ~ 0 (T is then a multiple of I)
    safe_p = np.where(p > 0.0, p, 1.0)
    b00 = (d0 - q) / safe_p
    b11 = (d1 - q) / safe_p
    b22 = (d2 - q) / safe_p
    b01 = t[..., 0, 1] / safe_p
    b02 = t[..., 0, 2] / safe_p
    b12 = t[..., 1, 2] / safe_p
    detb = (b00 * (b11 * b22 - b12 * b12)
            - b01 * (b01 * b22 - b12 * b02)
            + b02 * (b01 * b12 - b11 * b02))
    r = np.clip(detb / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    lam_min = q + 2.0 * p * np.cos(phi + _TWO_PI_3)
    return np.where(p > 0.0, lam_min, q)


def eig3_all(t: np.ndarray):
    """All three eigenvalues, ascending, same closed form as eigmin_batch."""
    t = np.asarray(t, dtype=float)
    d0, d1, d2 = t[..., 0, 0], t[..., 1, 1], t[..., 2, 2]
    p1 = t[..., 0, 1] ** 2 + t[..., 0, 2] ** 2 + t[..., 1, 2] ** 2
    q = (d0 + d1 + d2) / 3.0
    p2 = (d0 - q) ** 2 + (d1 - q) ** 2 + (d2 - q) ** 2 + 2.0 * p1
    p = np.sqrt(np.maximum(p2, 0.0) / 6.0)
    safe_p = np.where(p > 0.0, p, 1.0)
    b = (t - q[..., None, None] * np.eye(3)) / safe_p[..., None, None]
    detb = np.linalg.det(b)
    r = np.clip(detb / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    top = q + 2.0 * p * np.cos(phi)
    bot = q + 2.0 * p * np.cos(phi + _TWO_PI_3)
    mid = 3.0 * q - top - bot
    lams = np.stack([bot, mid, top], axis=-1)
    return np.where(p[..., None] > 0.0, lams, q[..., None] * np.ones(3))


def _eigvec_for(t: np.ndarray, lam: float) -> np.ndarray:
    """Unit eigenvector of symmetric 3x3 t for eigenvalue lam.

    Cross products of rows of (t - lam I) span the orthogonal complement of
    the eigenspace; degenerate cases fall back to the rank-1 / rank-0 logic.
    """
    scale = max(float(np.max(np.abs(t))), abs(lam), 1e-300)
    b = t - lam * np.eye(3)
    crosses = np.stack([
        np.cross(b[0], b[1]),
        np.cross(b[1], b[2]),
        np.cross(b[2], b[0]),
    ])
    norms = np.linalg.norm(crosses, axis=1)
    k = int(np.argmax(norms))
    if norms[k] > 1e-12 * scale * scale:
        return crosses[k] / norms[k]
    # rank(b) <= 1: eigenspace is the plane orthogonal to the largest row
    row_norms = np.linalg.norm(b, axis=1)
    k = int(np.argmax(row_norms))
    if row_norms[k] > 1e-12 * scale:
        n = b[k] / row_norms[k]
        axis = np.zeros(3)
        axis[int(np.argmin(np.abs(n)))] = 1.0
        v = axis - np.dot(axis, n) * n
        return v / np.linalg.norm(v)
    # t ~ lam * I: anything works
    return np.array([1.0, 0.0, 0.0])


def min_eig(t: AcousticMatrix, y) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue of T(y) and one unit eigenvector.

    Closed-form trigonometric eigensolver; falls back to LAPACK in the rare
    case the cross-product eigenvector misses the 1e-10 residual contract.
    """
    y = np.asarray(y, dtype=float)
    ty = t(y)
    lam = float(eigmin_batch(ty))
    v = _eigvec_for(ty, lam)
    scale = max(float(np.max(np.abs(ty))), 1.0)
    if np.linalg.norm(ty @ v - lam * v) > 1e-10 * scale:
        w, u = np.linalg.eigh(ty)
        lam = float(w[0])
        v = u[:, 0]
    return lam, v


def _cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([
        a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1],
        a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2],
        a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0],
    ], axis=1)


def _eigvecs_batch(ts: np.ndarray, lams: np.ndarray) -> np.ndarray:
    """Unit eigenvectors for a batch of (matrix, eigenvalue) pairs.

    Vectorized row-cross-product extraction; rows where that is unreliable
    (nearly repeated eigenvalues) fall back to the scalar routine.
    """
    n = ts.shape[0]
    b = ts - lams[:, None, None] * np.eye(3)
    crosses = np.stack([
        _cross_rows(b[:, 0], b[:, 1]),
        _cross_rows(b[:, 1], b[:, 2]),
        _cross_rows(b[:, 2], b[:, 0]),
    ], axis=1)
    norms = np.linalg.norm(crosses, axis=2)
    k = np.argmax(norms, axis=1)
    rows = np.arange(n)
    best = crosses[rows, k]
    best_norm = norms[rows, k]
    scale = np.maximum(np.max(np.abs(ts), axis=(1, 2)), np.abs(lams))
    scale = np.maximum(scale, 1e-300)
    good = best_norm > 1e-12 * scale * scale
    out = np.empty((n, 3))
    out[good] = best[good] / best_norm[good, None]
    for i in np.flatnonzero(~good):
        out[i] = _eigvec_for(ts[i], float(lams[i]))
    return out


# ---------------------------------------------------------------------------
# sphere sampling

def fibonacci_sphere(n: int) -> np.ndarray:
    """n nearly-uniform points on the unit sphere (golden-angle lattice)."""
    i = np.arange(n, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    theta = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])


def _random_unit(rng, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# projected gradient descent on the sphere

def _grad_batch(ac: AcousticMatrix, ys: np.ndarray, ts: np.ndarray,
                lams: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Gradient of lam_min(T(y)) by the Hellmann-Feynman formula.

    dT_ab/dy_k = 2 (C_ab y)_k, so dlam/dy_k = v_a v_b dT_ab/dy_k.  Rows whose
    two smallest eigenvalues are within the degeneracy gap get the gradient
    averaged over an orthonormal basis of the (approximate) eigenspace.
    """
    d = 2.0 * np.einsum("abkl,nl->nabk", ac.coeffs, ys)
    g = np.einsum("na,nb,nabk->nk", vs, vs, d)
    scale = np.maximum(np.max(np.abs(ts), axis=(1, 2)), 1.0)
    lams_all = eig3_all(ts)
    degenerate = (lams_all[:, 1] - lams_all[:, 0]) < _DEGENERATE_GAP * scale
    for i in np.flatnonzero(degenerate):
        w, u = np.linalg.eigh(ts[i])
        k = int(np.sum(w < w[0] + _DEGENERATE_GAP * scale[i]))
        gi = np.zeros(3)
        for j in range(k):
            gi += np.einsum("a,b,abk->k", u[:, j], u[:, j], d[i])
        g[i] = gi / k
    return g


def _descent_batch(ac: AcousticMatrix, y0: np.ndarray, max_iter: int,
                   stop_below: Optional[float] = None):
    """Armijo projected-gradient descent of lam_min(T(y)) on the sphere.

    Runs all starts in lockstep.  If stop_below is given the iteration exits
    as soon as any point drops under it (violation already proven).
    Returns (y, lam, v, n_converged).
    """
    y = np.asarray(y0, dtype=float).reshape(-1, 3).copy()
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    n = y.shape[0]
    step = np.full(n, 0.5)
    active = np.ones(n, dtype=bool)

    ts = ac.batch(y)
    lam = eigmin_batch(ts)
    vs = _eigvecs_batch(ts, lam)
    gtol = 1e-12
    lam_checkpoint = lam.copy()

    for it in range(max_iter):
        if stop_below is not None and np.min(lam) < stop_below:
            break
        if not np.any(active):
            break
        if it % 10 == 9:
            # rows no longer making progress are done; the Newton polish
            # afterwards sharpens anything that stalled near a zero
            plateaued = active & (lam_checkpoint - lam < 1e-13)
            active &= ~plateaued
            lam_checkpoint = lam.copy()
            if not np.any(active):
                break
        g = np.zeros((n, 3))
        idx = np.flatnonzero(active)
        g[idx] = _grad_batch(ac, y[idx], ts[idx], lam[idx], vs[idx])
        # project onto the tangent plane of the sphere
        g -= np.einsum("nk,nk->n", g, y)[:, None] * y
        gn2 = np.einsum("nk,nk->n", g, g)
        newly_flat = active & (np.sqrt(gn2) <= gtol * (1.0 + np.abs(lam)))
        active &= ~newly_flat
        if not np.any(active):
            break

        trial = y - step[:, None] * g
        trial /= np.linalg.norm(trial, axis=1, keepdims=True)
        lam_trial = eigmin_batch(ac.batch(trial))
        ok = active & (lam_trial <= lam - 1e-4 * step * gn2)
        if np.any(ok):
            y[ok] = trial[ok]
            ts[ok] = ac.batch(y[ok])
            lam[ok] = lam_trial[ok]
            vs[ok] = _eigvecs_batch(ts[ok], lam[ok])
            step[ok] = np.minimum(step[ok] * 1.5, 100.0)
        shrink = active & ~ok
        step[shrink] *= 0.5
        stalled = shrink & (step < 1e-15)
        active &= ~stalled
    return y, lam, vs, int(np.sum(~active))


def _tangent_basis(y: np.ndarray):
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(y)))] = 1.0
    t1 = np.cross(y, axis)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(y, t1)


def _polish_zero(ac: AcousticMatrix, y0: np.ndarray, max_iter: int = 80):
    """Damped 2D tangent-plane Newton refinement of a near-zero of lam_min.

    Solves grad lam = 0 on the sphere.  Steps are accepted on eigenvalue
    decrease or, once the value sits at the rounding floor (quartically flat
    valleys), on gradient-norm decrease; returns (y, lam).
    """
    y = np.asarray(y0, dtype=float)
    y = y / np.linalg.norm(y)
    h = 1e-5

    def eval_batch(ys):
        ys = ys / np.linalg.norm(ys, axis=1, keepdims=True)
        ts = ac.batch(ys)
        lam = eigmin_batch(ts)
        vs = _eigvecs_batch(ts, lam)
        g = _grad_batch(ac, ys, ts, lam, vs)
        g = g - np.einsum("nk,nk->n", g, ys)[:, None] * ys
        return lam, g

    lam_arr, g_arr = eval_batch(y[None])
    lam, g3 = float(lam_arr[0]), g_arr[0]
    mu = 1e-8
    for _ in range(max_iter):
        t1, t2 = _tangent_basis(y)
        g = np.array([g3 @ t1, g3 @ t2])
        gn = np.linalg.norm(g)
        if lam < 1e-13 and gn < 1e-13:
            break
        # central-difference Hessian of the tangent gradient, one batched call
        stencil = np.array([y + h * t1, y - h * t1, y + h * t2, y - h * t2])
        _, gs = eval_batch(stencil)
        g2 = np.column_stack([gs @ t1, gs @ t2])
        hess = np.empty((2, 2))
        hess[:, 0] = (g2[0] - g2[1]) / (2 * h)
        hess[:, 1] = (g2[2] - g2[3]) / (2 * h)
        hess = 0.5 * (hess + hess.T)
        moved = False
        for _ in range(8):
            try:
                d = np.linalg.solve(hess + mu * np.eye(2), -g)
            except np.linalg.LinAlgError:
                d = -g / max(mu, 1.0)
            norm_d = np.linalg.norm(d)
            if norm_d > 0.1:
                d *= 0.1 / norm_d
            y_new = y + d[0] * t1 + d[1] * t2
            y_new /= np.linalg.norm(y_new)
            lam_new_arr, g_new_arr = eval_batch(y_new[None])
            lam_new, g3_new = float(lam_new_arr[0]), g_new_arr[0]
            gn_new = np.linalg.norm(g3_new)
            if lam_new < lam - 1e-18 or gn_new < gn * (1.0 - 1e-6):
                y, lam, g3 = y_new, lam_new, g3_new
                mu = max(mu / 4.0, 1e-12)
                moved = norm_d > 1e-14
                break
            mu *= 10.0
            if mu > 1e8:
                break
        if not moved:
            break
    return y, lam


# ---------------------------------------------------------------------------
# public operations

def _scaled(f: QuadraticForm):
    s = f.scale
    if s == 0.0:
        return None, 0.0
    return QuadraticForm(f.matrix / s), s


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip v so its first significant component is positive (stable for ties)."""
    big = np.abs(v) > 1e-6 * np.max(np.abs(v))
    k = int(np.argmax(big))
    return -v if v[k] < 0 else v


def _dedup_directions(ys: np.ndarray, min_angle: float) -> np.ndarray:
    """Greedy sign-insensitive angular deduplication, keeping input order."""
    kept = []
    for y in ys:
        y = y / np.linalg.norm(y)
        if all(np.arccos(min(1.0, abs(float(y @ k)))) > min_angle for k in kept):
            kept.append(y)
    return np.array(kept) if kept else np.empty((0, 3))


def certify(f: QuadraticForm, cfg: SearchConfig = SearchConfig(),
            extra_seeds=None) -> Verdict:
    """Certify f(x outer y) >= 0 or exhibit a violating pair.

    The search runs on the form scaled to unit max-abs coefficient; a value
    below -cfg.tol (scaled) is a violation, a global bottom within
    [-tol, tol] is marginal, anything above tol is certified.  extra_seeds
    are additional starting directions (unit 3-vectors) checked before the
    lattice scan; a violation found there returns immediately.
    """
    fh, scale = _scaled(f)
    if fh is None:
        return Verdict("marginal", 0.0,
                       diagnostics={"note": "zero form", "scale": 0.0})
    ac = fh.acoustic()
    tau = cfg.tol
    rng = np.random.default_rng(cfg.seed)
    diagnostics = {"scale": scale, "grid_size": cfg.grid_size}

    def violated(y, lam):
        ty = ac.batch(y[None])[0]
        x = _eigvec_for(ty, lam)
        return Verdict("violated", lam * scale,
                       witness_x=_canonical_sign(x), witness_y=_canonical_sign(y),
                       diagnostics=diagnostics)

    # phase 0: caller-provided seeds, evaluated and briefly descended first
    seeds = None
    if extra_seeds is not None and len(extra_seeds) > 0:
        seeds = np.asarray(extra_seeds, dtype=float).reshape(-1, 3)
        seeds = seeds / np.linalg.norm(seeds, axis=1, keepdims=True)
        lam_seed = eigmin_batch(ac.batch(seeds))
        if np.min(lam_seed) < -tau:
            k = int(np.argmin(lam_seed))
            return violated(seeds[k], float(lam_seed[k]))
        ys, lams, _, _ = _descent_batch(ac, seeds, min(cfg.max_iter, 60),
                                        stop_below=-1.5 * tau)
        if np.min(lams) < -tau:
            k = int(np.argmin(lams))
            return violated(ys[k], float(lams[k]))

    # phase 1: lattice scan
    grid = fibonacci_sphere(cfg.grid_size)
    lam_grid = eigmin_batch(ac.batch(grid))
    k_min = int(np.argmin(lam_grid))
    if lam_grid[k_min] < -tau:
        return violated(grid[k_min], float(lam_grid[k_min]))

    # phase 2: multistart descent from the worst lattice points plus random
    # starts (and the seeds, which may sit in basins the lattice missed)
    order = np.argsort(lam_grid, kind="stable")
    worst = _dedup_directions(grid[order[:4 * cfg.multistarts + 32]], 0.15)
    worst = worst[:max(8, cfg.multistarts)]
    starts = [worst, _random_unit(rng, cfg.multistarts)]
    if seeds is not None:
        starts.append(seeds)
    starts = np.vstack(starts)
    ys, lams, vs, n_stalled = _descent_batch(ac, starts, cfg.max_iter,
                                             stop_below=-1.5 * tau)
    diagnostics["descents"] = int(starts.shape[0])
    diagnostics["stalled"] = n_stalled
    if np.min(lams) < -tau:
        k = int(np.argmin(lams))
        return violated(ys[k], float(lams[k]))

    # polish candidates that look like zeros so marginal minima are sharp
    candidate = lams <= max(1e-4, 10 * tau)
    for i in np.flatnonzero(candidate):
        ys[i], lams[i] = _polish_zero(ac, ys[i])
    bottom = float(min(np.min(lams), np.min(lam_grid)))
    k_bot = int(np.argmin(lams)) if np.min(lams) <= np.min(lam_grid) else None
    y_bot = ys[k_bot] if k_bot is not None else grid[k_min]

    if bottom < -tau:
        return violated(y_bot, bottom)
    if bottom > tau:
        return Verdict("certified", bottom * scale,
                       attaining_y=_canonical_sign(y_bot),
                       diagnostics=diagnostics)

    zeros = _collect_zeros(ac, ys, lams, tau)
    return Verdict("marginal", bottom * scale,
                   attaining_y=_canonical_sign(y_bot),
                   zero_points=zeros, diagnostics=diagnostics)


def _collect_zeros(ac: AcousticMatrix, ys: np.ndarray, lams: np.ndarray,
                   tau: float, cluster_angle: float = 1e-4):
    """Cluster polished near-zero directions into (x, y) representatives."""
    hits = [(float(l), y) for l, y in zip(lams, ys) if abs(l) <= tau]
    hits.sort(key=lambda t: t[0])
    reps = []
    for _, y in hits:
        yc = _canonical_sign(y / np.linalg.norm(y))
        if all(np.arccos(min(1.0, abs(float(yc @ r)))) > cluster_angle
               for _, r in reps):
            ty = ac.batch(yc[None])[0]
            lam = float(eigmin_batch(ty[None])[0])
            x = _canonical_sign(_eigvec_for(ty, lam))
            reps.append((x, yc))
    reps.sort(key=lambda xy: tuple(np.round(xy[1], 6)))
    return reps


def brute_force_oracle(f: QuadraticForm, n: int) -> float:
    """Descent-free minimum of lam_min(T(y)) over an n-point sphere lattice.

    Uses the LAPACK eigensolver so it shares no code path with certify's
    closed-form solver; intended as an independent cross-check in tests.
    """
    if n < 10:
        raise ValueError("lattice needs at least 10 points")
    fh, scale = _scaled(f)
    if fh is None:
        return 0.0
    ys = fibonacci_sphere(n)
    ts = fh.acoustic().batch(ys)
    lam = np.linalg.eigvalsh(ts)[:, 0]
    return float(np.min(lam)) * scale


def det_acoustic(f: QuadraticForm, y) -> float:
    """Determinant of the acoustic matrix T(y)."""
    return f.acoustic().det(np.asarray(y, dtype=float))


def zero_set(f: QuadraticForm, cfg: SearchConfig = SearchConfig()):
    """Representatives of { (x, y) unit : f(x outer y) = 0 }.

    Requires f rank-one convex (certified or marginal); raises ValueError on
    a violated form.  Candidates come from the lattice tail and multistart
    descents and are polished by tangent-plane Newton, then clustered up to
    sign with a 1e-4 angular radius.
    """
    verdict = certify(f, cfg)
    if verdict.status == "violated":
        raise ValueError("zero_set requires a rank-one convex form")
    fh, scale = _scaled(f)
    if fh is None:
        return []
    ac = fh.acoustic()
    tau = cfg.tol
    rng = np.random.default_rng(cfg.seed)

    grid = fibonacci_sphere(cfg.grid_size)
    lam_grid = eigmin_batch(ac.batch(grid))
    order = np.argsort(lam_grid, kind="stable")
    n_tail = min(cfg.grid_size, max(64, 4 * cfg.multistarts))
    tail = _dedup_directions(grid[order[:n_tail]], 0.1)
    starts = np.vstack([tail, _random_unit(rng, max(cfg.multistarts, 16))])

    ys, lams, _, _ = _descent_batch(ac, starts, cfg.max_iter)
    keep = lams <= max(1e-4, 10 * tau)
    ys = ys[keep]
    lams = lams[keep].copy()
    for i in range(len(ys)):
        ys[i], lams[i] = _polish_zero(ac, ys[i])
    return _collect_zeros(ac, ys, lams, tau)
