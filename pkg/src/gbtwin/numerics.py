"""Dense linear algebra helpers and the box-constrained QP solver.

Every dual problem in this package has the form

    maximize   -1/2 x^T M x + c^T x
    subject to 0 <= x <= upper

with M symmetric positive semidefinite.  It is solved here by cyclic
coordinate ascent with exact one-dimensional maximization: along coordinate
i the objective is a concave parabola, so the best step is the clipped Newton
step, and the objective can never decrease.  Every few sweeps a Newton step
restricted to the current free coordinates (with an exact, box-truncated line
search) is tried as well; once the active set has settled this finishes the
job in one step even when M is badly conditioned, where plain coordinate
ascent would crawl.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DidNotConverge, DimensionMismatch, NotPositiveDefinite

DEFAULT_TOL = 1e-8


def as_matrix(a, name="matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


class SPDFactor:
    """Cholesky factor of ``M + delta*I``, reusable for many right-hand sides."""

    def __init__(self, M, delta: float = 0.0):
        M = as_matrix(M, "M")
        if M.shape[0] != M.shape[1]:
            raise DimensionMismatch(f"M must be square, got {M.shape}")
        if delta < 0:
            raise ValueError("delta must be nonnegative")
        self.n = M.shape[0]
        self.delta = float(delta)
        self.matrix = M + self.delta * np.eye(self.n)
        try:
            self._chol = np.linalg.cholesky(self.matrix)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(
                f"M + {delta:g} I is not positive definite"
            ) from exc

    def solve(self, B) -> np.ndarray:
        B_arr = np.asarray(B, dtype=np.float64)
        if B_arr.shape[0] != self.n:
            raise DimensionMismatch(
                f"right-hand side has {B_arr.shape[0]} rows, expected {self.n}"
            )
        return scipy.linalg.cho_solve((self._chol, True), B_arr)


def solve_spd(M, B, delta: float = 0.0) -> np.ndarray:
    """Solve ``(M + delta I) X = B`` for symmetric positive definite systems."""
    M = as_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"M must be square, got {M.shape}")
    if not np.allclose(M, M.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(M).max(initial=0.0))):
        raise DimensionMismatch("M must be symmetric")
    return SPDFactor(M, delta).solve(B)


@dataclass(frozen=True)
class BoxQP:
    """maximize -1/2 x^T M x + c^T x  subject to 0 <= x <= upper."""

    M: np.ndarray
    c: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        M = as_matrix(self.M, "M")
        c = np.asarray(self.c, dtype=np.float64).ravel()
        upper = np.asarray(self.upper, dtype=np.float64).ravel()
        n = c.size
        if M.shape != (n, n) or upper.size != n:
            raise DimensionMismatch(
                f"inconsistent QP shapes: M {M.shape}, c {c.shape}, upper {upper.shape}"
            )
        scale = max(1.0, np.abs(M).max(initial=0.0))
        if not np.allclose(M, M.T, rtol=1e-10, atol=1e-10 * scale):
            raise ValueError("M must be symmetric")
        if np.any(upper < 0) or not np.all(np.isfinite(upper)) or not np.all(np.isfinite(c)):
            raise ValueError("upper must be finite and nonnegative; c must be finite")
        # symmetrize exactly so the solver's gradient bookkeeping is consistent
        object.__setattr__(self, "M", 0.5 * (M + M.T))
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return self.c.size

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(-0.5 * x @ self.M @ x + self.c @ x)

    def kkt_residual(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return projected_gradient_residual(x, self.c - self.M @ x, self.upper)


@dataclass(frozen=True)
class DualSolution:
    x: np.ndarray
    kkt_residual: float
    iterations: int
    objective_trace: list = field(default_factory=list, repr=False, compare=False)


def projected_gradient_residual(x, g, upper) -> float:
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x - np.clip(x + g, 0.0, upper))))


def _sweeps_py(M, diag, upper, x, g, tol, max_sweeps, check_every):
    """Run coordinate sweeps in place.  Returns (sweeps_done, residual)."""
    n = x.shape[0]
    resid = np.inf
    done = 0
    while done < max_sweeps:
        for _ in range(check_every):
            for i in range(n):
                gi = g[i]
                if diag[i] > 0.0:
                    new = x[i] + gi / diag[i]
                elif gi > 0.0:
                    new = upper[i]
                elif gi < 0.0:
                    new = 0.0
                else:
                    new = x[i]
                if new < 0.0:
                    new = 0.0
                elif new > upper[i]:
                    new = upper[i]
                step = new - x[i]
                if step != 0.0:
                    x[i] = new
                    for j in range(n):
                        g[j] -= M[j, i] * step
            done += 1
            if done >= max_sweeps:
                break
        resid = 0.0
        for i in range(n):
            proj = x[i] + g[i]
            if proj < 0.0:
                proj = 0.0
            elif proj > upper[i]:
                proj = upper[i]
            r = abs(x[i] - proj)
            if r > resid:
                resid = r
        if resid <= tol:
            break
    return done, resid


@functools.cache
def _compiled_sweeps():
    # numba is imported and the kernel compiled on first solve only
    import numba

    return numba.njit(cache=True)(_sweeps_py)


def _face_direction(M_ff, g_f):
    """Ascent direction on a face and its curvature.

    If the gradient has a component in the null space of ``M_ff`` the
    objective grows linearly along it, so that component is followed alone;
    otherwise the Newton direction is returned.
    """
    lam, U = np.linalg.eigh(M_ff)
    cutoff = 1e-12 * max(float(lam[-1]), 1.0)
    coef = U.T @ g_f
    flat = lam <= cutoff
    null_part = U[:, flat] @ coef[flat]
    if np.max(np.abs(null_part), initial=0.0) > 1e-12 * (1.0 + np.max(np.abs(g_f))):
        return null_part, 0.0
    d = U[:, ~flat] @ (coef[~flat] / lam[~flat])
    return d, float(d @ M_ff @ d)


def _subspace_step(problem: BoxQP, x, g):
    """One active-set step: exact maximization along a face direction.

    Coordinates strictly inside the box, or at a bound with the gradient
    pointing inward, start out free; any free coordinate sitting on a bound
    whose direction component points outward is then fixed and the direction
    recomputed, so the step length is positive.  The step is cut back to stay
    in the box; the full step projected onto the box is tried as well.
    The objective never decreases.
    """
    upper = problem.upper
    free = ((x > 0.0) & (x < upper)) | ((x <= 0.0) & (g > 0.0)) | ((x >= upper) & (g < 0.0))
    free &= upper > 0.0
    while True:
        if not free.any():
            return x
        F = np.flatnonzero(free)
        d_f, curv = _face_direction(problem.M[np.ix_(F, F)], g[F])
        blocked = ((x[F] <= 0.0) & (d_f < 0.0)) | ((x[F] >= upper[F]) & (d_f > 0.0))
        if not blocked.any():
            break
        free[F[blocked]] = False
    slope = float(g[F] @ d_f)
    if not slope > 0.0:
        return x
    with np.errstate(divide="ignore", invalid="ignore"):
        to_upper = np.where(d_f > 0, (upper[F] - x[F]) / d_f, np.inf)
        to_lower = np.where(d_f < 0, -x[F] / d_f, np.inf)
    t_max = float(np.min(np.minimum(to_upper, to_lower)))
    t_newton = slope / curv if curv > 0.0 else np.inf
    best, best_val = x, problem.objective(x)
    for t in (min(t_newton, t_max), t_newton):
        if not np.isfinite(t) or t <= 0.0:
            continue
        cand = x.copy()
        cand[F] = np.clip(x[F] + t * d_f, 0.0, upper[F])
        val = problem.objective(cand)
        if val > best_val:
            best, best_val = cand, val
    return best


def solve_box_qp(
    problem: BoxQP,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    x0=None,
    record_every: int = 0,
) -> DualSolution:
    """Maximize the box QP by projected cyclic coordinate ascent.

    ``max_iter`` counts full sweeps over the coordinates and defaults to
    ``10 * n**2`` (at least 100).  With ``record_every > 0`` the objective
    value is recorded every that many sweeps into ``objective_trace``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = problem.n
    if max_iter is None:
        max_iter = max(100, 10 * n * n)
    if n == 0:
        return DualSolution(np.zeros(0), 0.0, 0, [0.0])

    M = np.ascontiguousarray(problem.M)
    upper = problem.upper
    x = np.zeros(n) if x0 is None else np.clip(np.asarray(x0, dtype=np.float64), 0.0, upper).copy()
    g = problem.c - M @ x
    diag = np.ascontiguousarray(np.diag(M)).copy()

    trace = []
    chunk = record_every if record_every > 0 else 10
    if record_every > 0:
        trace.append(problem.objective(x))
    total = 0
    resid = np.inf
    # g is recomputed from scratch between chunks so rounding drift cannot build up
    while total < max_iter:
        budget = min(max_iter - total, chunk)
        done, resid = _compiled_sweeps()(M, diag, upper, x, g, tol, budget, chunk)
        total += done
        g = problem.c - M @ x
        resid = projected_gradient_residual(x, g, upper)
        # active-set refinement: repeat subspace steps while they make progress
        for _ in range(3 * n + 10):
            if resid <= tol:
                break
            x_new = _subspace_step(problem, x, g)
            if x_new is x:
                break
            x = x_new
            g = problem.c - M @ x
            resid = projected_gradient_residual(x, g, upper)
        if record_every > 0:
            trace.append(problem.objective(x))
        if resid <= tol:
            return DualSolution(x, resid, total, trace)
    raise DidNotConverge(
        f"box QP (n={n}) did not reach tol={tol:g} in {max_iter} sweeps "
        f"(residual {resid:.3e})",
        x=x,
        residual=resid,
        iterations=total,
    )
