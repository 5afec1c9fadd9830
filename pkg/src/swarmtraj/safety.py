"""Safe-set membership: clearance between trajectory simplices and point clouds.

A trajectory is safe when every per-segment enclosing simplex keeps more
than twice the (diminishing) safety distance from every cloud point. The
distance schedule shrinks linearly from the agent radius at the start of
the trajectory to zero at its end, so early-trajectory clearance dominates.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from . import qp
from .errors import ParameterError
from .splines import PLANNER_N_CP, SplineTrajectory, build_clamped_knots, bspline_to_minvo

MAX_CLOUD_POINTS = 1500

_EDGES = list(combinations(range(4), 2))
_FACES = list(combinations(range(4), 3))


@dataclass(frozen=True)
class PointCloud:
    """Relative hit points, shape (m, 3)."""

    points: np.ndarray
    cap: int = MAX_CLOUD_POINTS

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if len(pts) > self.cap:
            raise ParameterError(f"cloud has {len(pts)} points, cap is {self.cap}")
        if not np.isfinite(pts).all():
            raise ParameterError("non-finite cloud coordinates")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(points=np.zeros((0, 3)))


@dataclass(frozen=True)
class SafetyVerdict:
    safe: bool
    margin: float  # min over (segment, point) of distance - threshold; +inf for empty clouds
    witness: Optional[tuple] = None  # (segment index, point index) achieving the margin


@dataclass(frozen=True)
class SafetyProfile:
    """Diminishing safety distance d(s) over normalized trajectory time."""

    d0: float
    schedule: Callable[[float], float] = None

    def __post_init__(self):
        if self.d0 < 0:
            raise ParameterError("d0 must be nonnegative")
        if self.schedule is None:
            object.__setattr__(self, "schedule", lambda s, d0=self.d0: d0 * (1.0 - s))

    def d(self, s) -> np.ndarray:
        return np.asarray([self.schedule(float(v)) for v in np.atleast_1d(s)])


def points_to_simplex_distance(points: np.ndarray, simplex: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to a closed tetrahedron (0 inside).

    Enumerates closest-feature candidates (edges via clamped projection,
    faces via barycentric tests) and zeroes interior points; exact for
    degenerate (flat, collinear, coincident) simplices, whose features
    collapse onto the edge set.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    vs = np.asarray(simplex, dtype=float)
    if vs.shape != (4, 3):
        raise ParameterError(f"simplex must be (4, 3), got {vs.shape}")
    m = len(pts)
    if m == 0:
        return np.zeros(0)
    best = np.full(m, np.inf)

    for i, j in _EDGES:
        a, ab = vs[i], vs[j] - vs[i]
        ab2 = float(ab @ ab)
        if ab2 > 0:
            t = np.clip((pts - a) @ ab / ab2, 0.0, 1.0)
        else:
            t = np.zeros(m)
        diff = pts - (a + t[:, None] * ab)
        best = np.minimum(best, np.einsum("ij,ij->i", diff, diff))

    scale2 = max(float(np.max(np.sum((vs - vs.mean(axis=0)) ** 2, axis=1))), 1e-300)
    for i, j, k in _FACES:
        a, b, c = vs[i], vs[j], vs[k]
        v0, v1 = b - a, c - a
        d00, d01, d11 = float(v0 @ v0), float(v0 @ v1), float(v1 @ v1)
        denom = d00 * d11 - d01 * d01  # = |v0 x v1|^2 up to rounding
        if denom <= 1e-20 * max(d00 * d11, 1e-300):
            continue  # degenerate face, covered by edges
        nrm = np.cross(v0, v1)
        rel = pts - a
        d20 = rel @ v0
        d21 = rel @ v1
        v = (d11 * d20 - d01 * d21) / denom
        w = (d00 * d21 - d01 * d20) / denom
        inside = (v >= 0) & (w >= 0) & (v + w <= 1)
        plane = (rel @ nrm) ** 2 / float(nrm @ nrm)
        best = np.where(inside, np.minimum(best, plane), best)

    best = np.sqrt(np.maximum(best, 0.0))

    # interior points: consistent side of all four face planes
    vol = float(np.linalg.det(vs[1:] - vs[0]))
    if abs(vol) > 1e-12 * scale2 ** 1.5:
        inside_all = np.ones(m, dtype=bool)
        for idx, (i, j, k) in enumerate(_FACES):
            opp = ({0, 1, 2, 3} - {i, j, k}).pop()
            nrm = np.cross(vs[j] - vs[i], vs[k] - vs[i])
            side_opp = float((vs[opp] - vs[i]) @ nrm)
            side_pts = (pts - vs[i]) @ nrm
            inside_all &= side_pts * side_opp >= 0
        best[inside_all] = 0.0
    return best


def point_to_simplex_distance(point, simplex) -> float:
    return float(points_to_simplex_distance(np.asarray(point, dtype=float)[None, :], simplex)[0])


def classify_trajectory(
    traj: SplineTrajectory, cloud: PointCloud, profile: SafetyProfile
) -> SafetyVerdict:
    """Safe iff every segment simplex clears 2*d(s) from every cloud point,
    with d evaluated at the segment's start fraction (conservative)."""
    if len(cloud) == 0:
        return SafetyVerdict(safe=True, margin=np.inf, witness=None)
    segs = bspline_to_minvo(traj)
    n_seg = len(segs.vertices)
    margin = np.inf
    witness = None
    for j in range(n_seg):
        threshold = 2.0 * profile.schedule(j / n_seg)
        dists = points_to_simplex_distance(cloud.points, segs.vertices[j]) - threshold
        idx = int(np.argmin(dists))
        if dists[idx] < margin:
            margin = float(dists[idx])
            witness = (j, idx)
    return SafetyVerdict(safe=margin > 0, margin=margin, witness=witness)


def sample_random_trajectory(
    x0: qp.InitialState,
    limits: qp.Limits,
    horizon: float,
    rng,
    n_cp: int = PLANNER_N_CP,
) -> SplineTrajectory:
    """Random control points in the reachable box +-v_max*horizon, projected
    through the actuation QP (no collision row) so initial conditions and
    limits hold. Deterministic given the generator state."""
    if horizon <= 0:
        raise ParameterError("horizon must be positive")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    box = limits.v_max * horizon
    guess = rng.uniform(-box, box, size=(n_cp, 3))
    knots = build_clamped_knots(0.0, horizon, n_cp)
    problem = qp.assemble(guess.reshape(-1), x0, limits, knots)
    sol = qp.solve(problem)
    if sol.status != "optimal":
        raise RuntimeError(f"actuation-only projection unexpectedly {sol.status} ({sol.reason})")
    return SplineTrajectory.from_flat(sol.q, 0.0, horizon)
