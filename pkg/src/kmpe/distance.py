"""The empirical distance curve: reconstruction weights u_lambda, the distance
d_hat(lambda) from the reconstructed embedding to the convex hull of kernel
columns, and its central-difference slope.

d_hat is identically zero on [0, 1], non-decreasing and convex on [0, inf),
and grows affinely for large lambda with asymptotic slope equal to the
empirical RKHS distance between the two sample sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import GramMatrix
from .qp import DEFAULT_MAX_ITER, DEFAULT_QP_TOL, QpSolution, _min_norm_point, solve_qp

__all__ = ["DistanceEval", "CurveEvaluator", "make_u", "d_hat", "slope", "curve"]


@dataclass(frozen=True)
class DistanceEval:
    """One point on the empirical distance curve, with its solver record."""

    lam: float
    d_hat: float
    qp: QpSolution


def make_u(lam: float, n: int, m: int) -> np.ndarray:
    """Reconstruction weights: lam/n on the n mixture slots, (1-lam)/m on the
    m component slots.  Entries go negative for lam > 1 by design."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if not np.isfinite(lam) or lam < 0:
        raise ValueError(f"lambda must be finite and >= 0, got {lam}")
    u = np.empty(n + m)
    u[:n] = lam / n
    u[n:] = (1.0 - lam) / m
    return u


def d_hat(
    K: GramMatrix,
    lam: float,
    qp_tol: float = DEFAULT_QP_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> DistanceEval:
    """Distance from the lambda-reconstruction to the sample hull.

    Square root of the simplex-QP objective at u = make_u(lam); solver
    non-convergence is surfaced on the attached QpSolution, not raised.
    """
    qp = solve_qp(K, make_u(lam, K.n, K.m), qp_tol=qp_tol, max_iter=max_iter)
    return DistanceEval(lam=float(lam), d_hat=float(np.sqrt(qp.objective)), qp=qp)


def slope(K: GramMatrix, lambda_curr: float, eps: float) -> float:
    """Central-difference slope (d_hat(l + eps/4) - d_hat(l - eps/4)) / (eps/2).

    May come out slightly negative from solver noise; not clamped, since the
    thresholding estimators compare it directly.
    """
    _check_slope_args(lambda_curr, eps)
    lo = d_hat(K, lambda_curr - eps / 4.0)
    hi = d_hat(K, lambda_curr + eps / 4.0)
    return (hi.d_hat - lo.d_hat) / (eps / 2.0)


def curve(K: GramMatrix, lambdas) -> list[DistanceEval]:
    """Evaluate d_hat at each lambda, preserving input order."""
    ev = CurveEvaluator(K)
    return [ev.d_hat(lam) for lam in lambdas]


def _check_slope_args(lambda_curr: float, eps: float) -> None:
    if eps <= 0 or not np.isfinite(eps):
        raise ValueError(f"eps must be positive and finite, got {eps}")
    if lambda_curr - eps / 4.0 < 0:
        raise ValueError(
            f"lambda_curr - eps/4 must be >= 0, got lambda_curr={lambda_curr}, eps={eps}"
        )


class CurveEvaluator:
    """Cached d_hat evaluations over one Gram matrix.

    Because u_lambda is linear in lambda, K u_lambda is a combination of two
    precomputed block-mean vectors and u^T K u a quadratic polynomial in
    lambda, so each new lambda costs only the QP solve itself.  Solutions at
    nearby lambdas warm-start the solver; results match cold starts to within
    the duality-gap tolerance.
    """

    def __init__(
        self,
        K: GramMatrix,
        qp_tol: float = DEFAULT_QP_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
    ):
        self.K = K
        self.qp_tol = qp_tol
        self.max_iter = max_iter
        k, n = K.entries, K.n
        self._col_mix = k[:, :n].mean(axis=1)
        self._col_comp = k[:, n:].mean(axis=1)
        self._mff = float(k[:n, :n].mean())
        self._mfh = float(k[:n, n:].mean())
        self._mhh = float(k[n:, n:].mean())
        self._cache: dict[float, DistanceEval] = {}
        self.solve_count = 0

    @property
    def evaluations(self) -> dict[float, DistanceEval]:
        return self._cache

    def d_hat(self, lam: float) -> DistanceEval:
        lam = float(lam)
        hit = self._cache.get(lam)
        if hit is not None:
            return hit
        u = make_u(lam, self.K.n, self.K.m)
        ku = lam * self._col_mix + (1.0 - lam) * self._col_comp
        uku = (
            lam * lam * self._mff
            + 2.0 * lam * (1.0 - lam) * self._mfh
            + (1.0 - lam) * (1.0 - lam) * self._mhh
        )
        qp = _min_norm_point(
            self.K.entries,
            u,
            ku,
            uku,
            self.qp_tol,
            self.max_iter,
            v0=self._nearest_solution(lam),
        )
        out = DistanceEval(lam=lam, d_hat=float(np.sqrt(qp.objective)), qp=qp)
        self._cache[lam] = out
        self.solve_count += 1
        return out

    def slope(self, lambda_curr: float, eps: float) -> float:
        _check_slope_args(lambda_curr, eps)
        lo = self.d_hat(lambda_curr - eps / 4.0)
        hi = self.d_hat(lambda_curr + eps / 4.0)
        return (hi.d_hat - lo.d_hat) / (eps / 2.0)

    def _nearest_solution(self, lam: float) -> np.ndarray | None:
        if not self._cache:
            return None
        nearest = min(self._cache, key=lambda key: abs(key - lam))
        return self._cache[nearest].qp.v_star
