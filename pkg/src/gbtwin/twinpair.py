"""Training of the two non-parallel planes for one class pair.

For focal classes p (rows A, radii R1) and q (rows B, radii R2) and the rest
(rows C, radii R3), plane 1 is fitted close to A while B is pushed to
f1 <= -(1 + R2) and the rest to f1 <= -(1 - eps + R3); plane 2 mirrors this
around B.  Both problems are solved through their box-constrained duals.

With zero radii and raw points as rows this is exactly the point-based
1-versus-1-versus-rest twin classifier, which is how that baseline is built.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegeneratePair, DidNotConverge, DimensionMismatch
from .kernels import GAUSSIAN, KernelSpec, gram
from .numerics import DEFAULT_TOL, BoxQP, DualSolution, SPDFactor, solve_box_qp

LINEAR_MODE = "linear"
KERNEL_MODE = "kernel"


@dataclass(frozen=True)
class HyperParams:
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c4: float = 1.0
    epsilon: float = 0.1
    # ridge added to the Gram block before inversion; scaled by the mean
    # diagonal of that block when relative_delta is set
    delta: float = 1e-4
    relative_delta: bool = True
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "c4"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")

    @property
    def mode(self) -> str:
        return KERNEL_MODE if self.kernel.kind == GAUSSIAN else LINEAR_MODE

    def to_dict(self):
        return {
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "c4": self.c4,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "relative_delta": self.relative_delta,
            "kernel": self.kernel.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["kernel"] = KernelSpec.from_dict(d.get("kernel", {"kind": "linear"}))
        return cls(**d)


@dataclass(frozen=True)
class PairProblem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    R3: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(self.B, dtype=np.float64))
        d = A.shape[1]
        C = np.asarray(self.C, dtype=np.float64)
        C = C.reshape(-1, d) if C.size else np.zeros((0, d))
        radii = []
        for name, rows in (("R1", A), ("R2", B), ("R3", C)):
            r = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            if r.size != rows.shape[0]:
                raise DimensionMismatch(f"{name} has {r.size} entries for {rows.shape[0]} rows")
            if np.any(r < 0):
                raise ValueError(f"{name} must be nonnegative")
            radii.append(r)
        if A.shape[0] < 1 or B.shape[0] < 1:
            raise ValueError("both focal classes need at least one row")
        if B.shape[1] != d:
            raise DimensionMismatch("A, B and C must share a column count")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "R1", radii[0])
        object.__setattr__(self, "R2", radii[1])
        object.__setattr__(self, "R3", radii[2])

    @classmethod
    def from_points(cls, A, B, C=None):
        """Zero-radius problem on raw points."""
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(B, dtype=np.float64))
        C = np.zeros((0, A.shape[1])) if C is None else np.asarray(C, dtype=np.float64)
        n_c = C.shape[0] if C.size else 0
        return cls(A, B, C, np.zeros(len(A)), np.zeros(len(B)), np.zeros(n_c))

    def swapped(self) -> "PairProblem":
        return PairProblem(self.B, self.A, self.C, self.R2, self.R1, self.R3)

    @property
    def reference(self) -> np.ndarray:
        return np.vstack([self.A, self.B, self.C])


@dataclass(frozen=True)
class PlanePair:
    w1: np.ndarray
    b1: float
    w2: np.ndarray
    b2: float
    kernel: KernelSpec = field(default_factory=KernelSpec)
    reference: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict, repr=False, compare=False)

    def features(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if self.reference is None:
            return Z
        return gram(Z, self.reference, self.kernel)

    def decision(self, Z):
        """Return ``(f1, f2)`` evaluated at each row of Z."""
        F = self.features(Z)
        return F @ self.w1 + self.b1, F @ self.w2 + self.b2

    def to_dict(self):
        return {
            "w1": self.w1.tolist(),
            "b1": self.b1,
            "w2": self.w2.tolist(),
            "b2": self.b2,
            "kernel": self.kernel.to_dict(),
            "reference": None if self.reference is None else self.reference.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        ref = d.get("reference")
        return cls(
            w1=np.asarray(d["w1"], dtype=np.float64),
            b1=float(d["b1"]),
            w2=np.asarray(d["w2"], dtype=np.float64),
            b2=float(d["b2"]),
            kernel=KernelSpec.from_dict(d["kernel"]),
            reference=None if ref is None else np.asarray(ref, dtype=np.float64),
        )


@dataclass(frozen=True)
class DualSystem:
    """One assembled dual plus what is needed to recover its plane.

    ``sign`` is -1 for the first plane (theta = -K^-1 V^T x) and +1 for the
    second (theta = +K^-1 V^T x).
    """

    qp: BoxQP
    factor: SPDFactor
    V: np.ndarray
    sign: float
    n_focal: int
    n_rest: int


def _augment(rows):
    return np.hstack([rows, np.ones((rows.shape[0], 1))])


def _blocks(problem: PairProblem, kernel: KernelSpec, mode: str):
    if mode == KERNEL_MODE:
        D = problem.reference
        return (
            _augment(gram(problem.A, D, kernel)),
            _augment(gram(problem.B, D, kernel)),
            _augment(gram(problem.C, D, kernel)) if len(problem.C) else np.zeros((0, D.shape[0] + 1)),
        )
    if mode != LINEAR_MODE:
        raise ValueError(f"unknown mode {mode!r}")
    return _augment(problem.A), _augment(problem.B), _augment(problem.C)


def _effective_delta(K, hp: HyperParams) -> float:
    if not hp.relative_delta:
        return hp.delta
    scale = float(np.mean(np.diag(K)))
    return hp.delta * (scale if scale > 0 else 1.0)


def _system(focal, pushed, rest, e_pushed, e_rest, upper_pushed, upper_rest, hp, sign):
    K = focal.T @ focal
    factor = SPDFactor(K, _effective_delta(K, hp))
    V = np.vstack([pushed, rest])
    KinvVt = factor.solve(V.T)
    M = V @ KinvVt
    M = 0.5 * (M + M.T)
    c = np.concatenate([e_pushed, e_rest])
    upper = np.concatenate([upper_pushed, upper_rest])
    return DualSystem(BoxQP(M, c, upper), factor, V, sign, len(pushed), len(rest))


def first_system(problem: PairProblem, hp: HyperParams, mode: str = LINEAR_MODE) -> DualSystem:
    H, G, O = _blocks(problem, hp.kernel, mode)
    n_q, n_r = len(problem.B), len(problem.C)
    return _system(
        H, G, O,
        1.0 + problem.R2,
        (1.0 - hp.epsilon) + problem.R3,
        np.full(n_q, hp.c1),
        np.full(n_r, hp.c2),
        hp, -1.0,
    )


def second_system(problem: PairProblem, hp: HyperParams, mode: str = LINEAR_MODE) -> DualSystem:
    H, G, O = _blocks(problem, hp.kernel, mode)
    n_p, n_r = len(problem.A), len(problem.C)
    return _system(
        G, H, O,
        1.0 + problem.R1,
        (1.0 - hp.epsilon) + problem.R3,
        np.full(n_p, hp.c3),
        np.full(n_r, hp.c4),
        hp, +1.0,
    )


def assemble_first_dual(problem: PairProblem, hp: HyperParams, mode: str = LINEAR_MODE) -> BoxQP:
    return first_system(problem, hp, mode).qp


def assemble_second_dual(problem: PairProblem, hp: HyperParams, mode: str = LINEAR_MODE) -> BoxQP:
    return second_system(problem, hp, mode).qp


def recover_plane(dual: DualSolution, system: DualSystem):
    """Map dual multipliers back to ``(w, b)``."""
    theta = system.sign * system.factor.solve(system.V.T @ dual.x)
    return theta[:-1].copy(), float(theta[-1])


def stationarity_residual(system: DualSystem, x, w, b) -> float:
    """Infinity norm of K theta - sign * V^T x, zero at an exact solution."""
    theta = np.append(w, b)
    r = system.factor.matrix @ theta - system.sign * (system.V.T @ x)
    return float(np.max(np.abs(r))) if r.size else 0.0


def _solve(system: DualSystem, tol, max_iter, which):
    try:
        return solve_box_qp(system.qp, tol=tol, max_iter=max_iter)
    except DidNotConverge as exc:
        raise DegeneratePair(f"{which} dual failed: {exc}") from exc


def train_pair(
    problem: PairProblem,
    hp: HyperParams,
    mode: str | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
) -> PlanePair:
    """Fit both planes.  ``mode`` defaults to the one implied by the kernel."""
    mode = hp.mode if mode is None else mode
    s1 = first_system(problem, hp, mode)
    s2 = second_system(problem, hp, mode)
    d1 = _solve(s1, tol, max_iter, "first")
    d2 = _solve(s2, tol, max_iter, "second")
    w1, b1 = recover_plane(d1, s1)
    w2, b2 = recover_plane(d2, s2)
    if not (np.any(w1) or np.any(w2)):
        raise DegeneratePair("both planes came out with zero weights")
    diagnostics = {
        "qp_dims": (s1.qp.n, s2.qp.n),
        "kkt_residuals": (d1.kkt_residual, d2.kkt_residual),
        "stationarity": (
            stationarity_residual(s1, d1.x, w1, b1),
            stationarity_residual(s2, d2.x, w2, b2),
        ),
        "feasible": bool(
            np.all(d1.x >= 0) and np.all(d1.x <= s1.qp.upper)
            and np.all(d2.x >= 0) and np.all(d2.x <= s2.qp.upper)
        ),
        "iterations": (d1.iterations, d2.iterations),
    }
    return PlanePair(
        w1=w1,
        b1=b1,
        w2=w2,
        b2=b2,
        kernel=hp.kernel if mode == KERNEL_MODE else KernelSpec(),
        reference=problem.reference if mode == KERNEL_MODE else None,
        diagnostics=diagnostics,
    )


def swap_roles(hp: HyperParams) -> HyperParams:
    """Penalties for the same pair with the focal classes exchanged."""
    return replace(hp, c1=hp.c3, c2=hp.c4, c3=hp.c1, c4=hp.c2)
