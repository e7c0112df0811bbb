"""Minimization of (u - v)^T K (u - v) over the probability simplex.

The solver is an active-set scheme in the style of Wolfe's minimum-norm-point
algorithm: the quadratic form is the squared distance, in the kernel metric,
from the point encoded by ``u`` to the convex hull of the kernel columns, so
the minimizer is supported on a small "corral" of columns.  Each major
iteration adds the steepest-descent vertex, re-solves the equality-constrained
quadratic on the corral, and line-searches back to feasibility, which
terminates finitely.  Convergence is certified by the Frank-Wolfe duality gap

    gap(v) = g(v)^T v - min_j g(v)_j,   g(v) = 2 K (v - u),

which upper-bounds the objective suboptimality of the feasible iterate v.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import GramMatrix

__all__ = ["QpSolution", "project_simplex", "solve_qp"]

DEFAULT_QP_TOL = 1e-8
DEFAULT_MAX_ITER = 20_000

# Corral coordinates at or below this weight are treated as inactive.
_DROP_TOL = 1e-12
# Warm-start supports larger than this fall back to a cold vertex start.
_WARM_SUPPORT_CAP = 256


@dataclass(frozen=True)
class QpSolution:
    """Solver output: feasible point, clamped objective, and certificate.

    ``converged`` is True only when the reported iterate's duality gap is at
    most the requested tolerance; otherwise the best iterate found is
    returned and the caller decides what to do with it.
    """

    v_star: np.ndarray
    objective: float
    gap: float
    iterations: int
    converged: bool


def project_simplex(y) -> np.ndarray:
    """Euclidean projection onto {v : v >= 0, sum(v) = 1}.

    Sort-and-threshold rule: find theta with sum(max(y_i - theta, 0)) = 1 and
    return max(y - theta, 0) (Held/Wolfe/Crowder; see also Duchi et al. 2008).
    """
    v = np.asarray(y, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise ValueError("cannot project a vector with non-finite entries")
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    rho = np.nonzero(u + (1.0 - css) / j > 0.0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def solve_qp(
    K: GramMatrix,
    u,
    qp_tol: float = DEFAULT_QP_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> QpSolution:
    """Minimize (u - v)^T K (u - v) over the simplex to duality gap qp_tol."""
    uv = np.asarray(u, dtype=float)
    if uv.shape != (K.size,):
        raise ValueError(f"u must have length {K.size}, got shape {uv.shape}")
    if not np.isfinite(uv).all():
        raise ValueError("u contains non-finite values")
    if qp_tol <= 0:
        raise ValueError("qp_tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    kmat = K.entries
    ku = kmat @ uv
    return _min_norm_point(kmat, uv, ku, float(uv @ ku), qp_tol, max_iter)


def _min_norm_point(
    kmat: np.ndarray,
    u: np.ndarray,
    ku: np.ndarray,
    uku: float,
    qp_tol: float,
    max_iter: int,
    v0: np.ndarray | None = None,
) -> QpSolution:
    """Core solver; ``ku = K u`` and ``uku = u^T K u`` are precomputed.

    ``v0`` optionally warm-starts the corral from a previous solution's
    support; results match a cold start to within the duality-gap tolerance.
    """
    size = ku.shape[0]

    def evaluate(v_s: np.ndarray, s: np.ndarray) -> tuple[float, float]:
        if s.size <= 64:
            kv = kmat[:, s] @ v_s
        else:
            dense = np.zeros(size)
            dense[s] = v_s
            kv = kmat @ dense
        grad = 2.0 * (kv - ku)
        obj = float(v_s @ kv[s]) - 2.0 * float(v_s @ ku[s]) + uku
        gap = float(grad[s] @ v_s - grad.min())
        return obj, gap

    best_v = np.empty(0)
    best_obj = np.inf
    best_gap = np.inf

    def consider(v_s: np.ndarray, s: np.ndarray, obj: float, gap: float) -> None:
        nonlocal best_v, best_obj, best_gap
        if obj < best_obj:
            dense = np.zeros(size)
            dense[s] = v_s
            best_v, best_obj, best_gap = dense, obj, gap

    # The projection of u seeds the best-so-far record, so the reported
    # objective never exceeds the objective there, and it is already optimal
    # whenever u itself is feasible (then the solve costs no iterations).
    seed = project_simplex(u)
    support = np.nonzero(seed > 0.0)[0]
    seed_obj, seed_gap = evaluate(seed[support], support)
    consider(seed[support], support, seed_obj, seed_gap)
    if seed_gap <= qp_tol:
        return QpSolution(best_v, max(best_obj, 0.0), max(best_gap, 0.0), 0, True)

    corral: list[int] = []
    if v0 is not None:
        w0 = project_simplex(v0)
        supp0 = np.nonzero(w0 > 0.0)[0]
        if 0 < supp0.size <= _WARM_SUPPORT_CAP:
            corral = list(supp0)
            weights = w0[supp0] / w0[supp0].sum()
    if not corral:
        j0 = int(np.argmin(np.diag(kmat) - 2.0 * ku))
        corral = [j0]
        weights = np.array([1.0])

    iterations = 0
    prev_obj = np.inf
    stall = 0
    gap_met = False
    while iterations < max_iter:
        iterations += 1
        s = np.asarray(corral)
        obj, gap = evaluate(weights, s)
        consider(weights, s, obj, gap)
        if gap <= qp_tol:
            gap_met = True
            break
        if obj >= prev_obj - 1e-15 * max(1.0, abs(prev_obj)):
            stall += 1
            if stall >= 3:
                break
        else:
            stall = 0
        prev_obj = obj

        grad = 2.0 * (kmat[:, s] @ weights - ku)
        j = int(np.argmin(grad))
        if j not in corral:
            corral.append(j)
            weights = np.append(weights, 0.0)

        # Minor cycles: affine minimizer over the corral, pulled back to the
        # simplex by a line search that drops zeroed coordinates.
        while True:
            s = np.asarray(corral)
            w = _affine_minimizer(kmat, ku, s)
            if w.min() > _DROP_TOL:
                weights = w
                break
            shrink = w <= _DROP_TOL
            denom = weights[shrink] - w[shrink]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(denom > 0.0, weights[shrink] / denom, 1.0)
            theta = float(min(1.0, ratios.min()))
            weights = (1.0 - theta) * weights + theta * w
            keep = weights > _DROP_TOL
            if keep.all():
                keep[int(np.argmin(weights))] = False
            corral = [c for c, kept in zip(corral, keep) if kept]
            weights = weights[keep]
            if not corral:
                raise RuntimeError("corral emptied; inconsistent minor cycle")
            weights = weights / weights.sum()

    # Report the best iterate by objective; convergence is claimed only if
    # that iterate's own certificate meets the tolerance.
    converged = gap_met and best_gap <= qp_tol
    return QpSolution(best_v, max(best_obj, 0.0), max(best_gap, 0.0), iterations, converged)


def _affine_minimizer(kmat: np.ndarray, ku: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Minimize the quadratic over the affine hull of the corral columns.

    Solves the bordered KKT system for min_w (w - u)^T K (w - u) subject to
    sum(w) = 1 with w supported on s (sign-unconstrained).
    """
    k = s.size
    a = np.empty((k + 1, k + 1))
    a[:k, :k] = 2.0 * kmat[np.ix_(s, s)]
    a[:k, k] = 1.0
    a[k, :k] = 1.0
    a[k, k] = 0.0
    b = np.empty(k + 1)
    b[:k] = 2.0 * ku[s]
    b[k] = 1.0
    try:
        sol = np.linalg.solve(a, b)
        if not np.isfinite(sol).all():
            raise np.linalg.LinAlgError("non-finite KKT solution")
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(a, b, rcond=None)[0]
    return sol[:k]
