"""Trajectory-projection quadratic program.

Minimize ||q - q*||^2 over the flattened control points q subject to
initial-state equality rows, per-axis actuation boxes on every velocity and
acceleration simplex control point, and an optional linear collision row
g.q <= 0. The Hessian is the identity, so the solve is a Euclidean
projection onto a polytope; a dual active-set method (Goldfarb-Idnani
style, specialized to H = I) gives exact finite termination on these small
dense instances and is deterministic for identical inputs.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError
from .splines import KnotVector, flat_derivative_maps, initial_derivative_rows

MAX_ITER = 500
FEAS_TOL = 1e-8


@dataclass(frozen=True)
class InitialState:
    """Ego-frame initial conditions: position is zero by convention."""

    velocity: np.ndarray
    acceleration: np.ndarray
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("position", "velocity", "acceleration"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,) or not np.isfinite(v).all():
                raise ParameterError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, v)

    @classmethod
    def at_rest(cls) -> "InitialState":
        return cls(velocity=np.zeros(3), acceleration=np.zeros(3))


@dataclass(frozen=True)
class Limits:
    v_max: np.ndarray
    a_max: np.ndarray

    def __post_init__(self):
        for name in ("v_max", "a_max"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape == ():
                v = np.full(3, float(v))
            if v.shape != (3,) or np.any(v <= 0):
                raise ParameterError(f"{name} must be positive (3-vector or scalar)")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class CollisionConstraint:
    """Coefficients of the learned safety row g.q <= 0 over flattened CPs."""

    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 1 or not np.isfinite(g).all():
            raise ParameterError("g must be a finite 1-D vector")
        object.__setattr__(self, "g", g)

    @property
    def vacuous(self) -> bool:
        return not np.any(self.g)


@dataclass(frozen=True)
class QpProblem:
    q_star: np.ndarray
    eq_lhs: np.ndarray  # (p, n)
    eq_rhs: np.ndarray  # (p,)
    ineq_lhs: np.ndarray  # (m, n)
    ineq_rhs: np.ndarray  # (m,)

    @property
    def n(self) -> int:
        return self.q_star.size

    def to_dict(self) -> dict:
        return {
            "q_star": self.q_star.tolist(),
            "eq_lhs": self.eq_lhs.tolist(),
            "eq_rhs": self.eq_rhs.tolist(),
            "ineq_lhs": self.ineq_lhs.tolist(),
            "ineq_rhs": self.ineq_rhs.tolist(),
        }


@dataclass(frozen=True)
class QpSolution:
    q: Optional[np.ndarray]
    objective: float
    status: str  # "optimal" | "infeasible"
    iterations: int = 0
    reason: Optional[str] = None  # set when infeasible: "certificate" | "iteration_limit" | "inconsistent_equalities"


def assemble(
    q_star: np.ndarray,
    x0: InitialState,
    limits: Limits,
    knots: KnotVector,
    g: Optional[CollisionConstraint] = None,
    g_margin: float = 0.0,
) -> QpProblem:
    """Build the projection QP for a trajectory over the given knot vector.

    Flattening order is row-major over (cp index, axis). Equality rows pin
    the curve's initial position/velocity/acceleration; inequality rows are
    +-(component of every derivative simplex CP) <= limit, plus the optional
    collision row g.q <= -g_margin.
    """
    q_star = np.asarray(q_star, dtype=float)
    n_cp = knots.n_cp
    n = 3 * n_cp
    if q_star.shape != (n,):
        raise ParameterError(f"q_star must have shape ({n},), got {q_star.shape}")
    duration = knots.tf - knots.t0

    row_v0, row_a0 = initial_derivative_rows(n_cp, duration)
    eq_lhs = np.zeros((9, n))
    eq_rhs = np.zeros(9)
    for axis in range(3):
        eq_lhs[axis, 3 * 0 + axis] = 1.0  # clamped curve starts at cps[0]
        eq_rhs[axis] = x0.position[axis]
        eq_lhs[3 + axis, axis::3] = row_v0
        eq_rhs[3 + axis] = x0.velocity[axis]
        eq_lhs[6 + axis, axis::3] = row_a0
        eq_rhs[6 + axis] = x0.acceleration[axis]

    vel_map, acc_map = flat_derivative_maps(n_cp, duration)
    blocks = []
    rhs = []
    for per_axis, limit in ((vel_map, limits.v_max), (acc_map, limits.a_max)):
        for axis in range(3):
            rows = np.zeros((per_axis.shape[0], n))
            rows[:, axis::3] = per_axis
            blocks.extend([rows, -rows])
            rhs.extend([np.full(per_axis.shape[0], limit[axis])] * 2)
    ineq_lhs = np.vstack(blocks)
    ineq_rhs = np.concatenate(rhs)

    if g is not None:
        gv = g.g
        if gv.shape != (n,):
            raise ParameterError(f"g must have shape ({n},), got {gv.shape}")
        if not g.vacuous:
            ineq_lhs = np.vstack([ineq_lhs, gv[None, :]])
            ineq_rhs = np.concatenate([ineq_rhs, [-float(g_margin)]])

    return QpProblem(q_star=q_star, eq_lhs=eq_lhs, eq_rhs=eq_rhs, ineq_lhs=ineq_lhs, ineq_rhs=ineq_rhs)


def _lstsq(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(A, b, rcond=None)[0]


def solve(problem: QpProblem, max_iter: int = MAX_ITER) -> QpSolution:
    """Project q_star onto the feasible polytope.

    Works in the null space of the equality rows, where the task reduces to
    least-distance programming, then runs a dual active-set loop: repeatedly
    pick the most violated inequality, take the longest step toward
    satisfying it that keeps all working-set multipliers nonnegative, and
    drop blocking constraints along the way. Infeasibility is certified when
    a violated row lies in the span of the working set with no positive
    multiplier to trade off.
    """
    p = problem.q_star
    C, d = problem.eq_lhs, problem.eq_rhs
    A, b = problem.ineq_lhs, problem.ineq_rhs
    n = p.size

    # projection onto the equality affine set
    if C.shape[0]:
        lam = _lstsq(C @ C.T, d - C @ p)
        x_eq = p + C.T @ lam
        if np.max(np.abs(C @ x_eq - d)) > FEAS_TOL:
            return QpSolution(q=None, objective=np.inf, status="infeasible", reason="inconsistent_equalities")
        _, s, vh = np.linalg.svd(C)
        rank = int(np.sum(s > s[0] * 1e-12)) if s.size else 0
        Z = vh[rank:].T  # orthonormal null-space basis
    else:
        x_eq = p.copy()
        Z = np.eye(n)

    if Z.shape[1] == 0:
        x = x_eq
        if A.shape[0] and np.max(A @ x - b) > FEAS_TOL:
            return QpSolution(q=None, objective=np.inf, status="infeasible", reason="certificate")
        return QpSolution(q=x, objective=float(np.sum((x - p) ** 2)), status="optimal")

    G = A @ Z
    h = b - A @ x_eq
    # normalize rows for uniform tolerance semantics; zero rows are vacuous or infeasible
    norms = np.linalg.norm(G, axis=1)
    keep = norms > 1e-14
    if np.any(~keep & (h < -FEAS_TOL)):
        return QpSolution(q=None, objective=np.inf, status="infeasible", reason="certificate")
    G, h = G[keep] / norms[keep, None], h[keep] / norms[keep]

    k = Z.shape[1]
    y = np.zeros(k)
    work: list[int] = []
    lam: list[float] = []
    iters = 0

    while iters < max_iter:
        iters += 1
        viol = G @ y - h if G.shape[0] else np.zeros(0)
        if viol.size == 0 or viol.max() <= FEAS_TOL:
            x = x_eq + Z @ y
            return QpSolution(q=x, objective=float(np.sum((x - p) ** 2)), status="optimal", iterations=iters)
        pidx = int(np.argmax(viol))
        gp = G[pidx]
        u_acc = 0.0  # multiplier of the incoming row, accumulated over partial steps

        while iters < max_iter:
            iters += 1
            if work:
                Nt = G[work].T  # (k, |W|)
                w = _lstsq(Nt, gp)
                z = gp - Nt @ w
            else:
                w = np.zeros(0)
                z = gp.copy()
            zn = float(z @ z)

            t_full = np.inf
            if zn > 1e-14:
                t_full = (float(gp @ y) - h[pidx]) / zn

            t_block, j_block = np.inf, -1
            for jj, wj in enumerate(w):
                if wj > 1e-12:
                    ratio = max(lam[jj], 0.0) / wj
                    if ratio < t_block:
                        t_block, j_block = ratio, jj

            if not np.isfinite(t_full) and not np.isfinite(t_block):
                return QpSolution(
                    q=None, objective=np.inf, status="infeasible", iterations=iters, reason="certificate"
                )

            t = min(t_full, t_block)
            if zn > 1e-14:
                y = y - t * z
            for jj in range(len(work)):
                lam[jj] -= t * w[jj]
            u_acc += t

            if t_block < t_full:
                work.pop(j_block)
                lam.pop(j_block)
                continue  # retry the same violated row with the reduced set
            work.append(pidx)
            lam.append(u_acc)
            break

    return QpSolution(q=None, objective=np.inf, status="infeasible", iterations=iters, reason="iteration_limit")
