"""Clamped cubic B-spline trajectories and enclosing-simplex conversions.

A trajectory is a degree-3 clamped B-spline per axis with uniformly spaced
interior knots. All segment-wise machinery (power-basis coefficients,
simplex conversion, derivative control-point maps) is precomputed once per
(n_cp, degree) on the unit time span and rescaled, since the planner rebuilds
trajectories with shifting time spans every tick.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import minvo
from .errors import DomainError, ParameterError

DEGREE = 3
PLANNER_N_CP = 10  # the planner encodes a trajectory by 10 CPs per axis


def build_clamped_knots(t0: float, tf: float, n_cp: int, degree: int = DEGREE) -> "KnotVector":
    if tf <= t0:
        raise ParameterError(f"need tf > t0, got t0={t0}, tf={tf}")
    if n_cp < degree + 1:
        raise ParameterError(f"need n_cp >= degree+1, got n_cp={n_cp}, degree={degree}")
    n_seg = n_cp - degree
    interior = t0 + (tf - t0) * np.arange(1, n_seg) / n_seg
    knots = np.concatenate([np.full(degree + 1, t0), interior, np.full(degree + 1, tf)])
    return KnotVector(knots=knots, degree=degree)


@dataclass(frozen=True, eq=False)
class KnotVector:
    knots: np.ndarray
    degree: int = DEGREE

    @property
    def n_cp(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def n_segments(self) -> int:
        return self.n_cp - self.degree

    @property
    def t0(self) -> float:
        return float(self.knots[0])

    @property
    def tf(self) -> float:
        return float(self.knots[-1])


@dataclass(frozen=True, eq=False)
class SplineTrajectory:
    """Control points (n_cp, 3) of a clamped degree-3 spline on [t0, tf]."""

    cps: np.ndarray
    t0: float
    tf: float
    degree: int = DEGREE

    def __post_init__(self):
        cps = np.asarray(self.cps, dtype=float)
        if cps.ndim != 2 or cps.shape[1] != 3:
            raise ParameterError(f"cps must be (n_cp, 3), got {cps.shape}")
        if cps.shape[0] < self.degree + 1:
            raise ParameterError(f"need at least {self.degree + 1} control points")
        if not np.isfinite(cps).all():
            raise ParameterError("non-finite control points")
        if self.tf <= self.t0:
            raise ParameterError(f"need tf > t0, got t0={self.t0}, tf={self.tf}")
        object.__setattr__(self, "cps", cps)

    @property
    def n_cp(self) -> int:
        return self.cps.shape[0]

    @property
    def n_segments(self) -> int:
        return self.n_cp - self.degree

    @property
    def duration(self) -> float:
        return self.tf - self.t0

    @property
    def knots(self) -> KnotVector:
        return build_clamped_knots(self.t0, self.tf, self.n_cp, self.degree)

    def flat(self) -> np.ndarray:
        """Row-major flattening [x0, y0, z0, x1, ...] of shape (3*n_cp,)."""
        return self.cps.reshape(-1).copy()

    def translated(self, offset) -> "SplineTrajectory":
        return SplineTrajectory(self.cps + np.asarray(offset, dtype=float), self.t0, self.tf, self.degree)

    def to_dict(self) -> dict:
        return {"t0": self.t0, "tf": self.tf, "degree": self.degree, "cps": self.cps.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "SplineTrajectory":
        return cls(np.asarray(d["cps"], dtype=float), float(d["t0"]), float(d["tf"]), int(d.get("degree", DEGREE)))

    @classmethod
    def from_flat(cls, q: np.ndarray, t0: float, tf: float) -> "SplineTrajectory":
        q = np.asarray(q, dtype=float)
        if q.size % 3 != 0:
            raise ParameterError(f"flat CP vector length {q.size} not divisible by 3")
        return cls(q.reshape(-1, 3), t0, tf)


@dataclass(frozen=True)
class MinvoSegments:
    """Per-segment enclosing simplices: vertices (n_seg, 4, 3), intervals (n_seg, 2)."""

    vertices: np.ndarray
    intervals: np.ndarray


@dataclass(frozen=True)
class DerivativeCPs:
    velocity_cps: np.ndarray      # (n_seg, 3, 3) simplex CPs of the velocity curve
    acceleration_cps: np.ndarray  # (n_seg, 2, 3)


def _span_basis_polys(knots: np.ndarray, degree: int, span: int) -> dict:
    """Active basis functions on [knots[span], knots[span+1]] as polynomials
    in local tau in [0, 1] (Cox-de Boor carried out on coefficients)."""
    Poly = np.polynomial.Polynomial
    lo, hi = knots[span], knots[span + 1]
    h = hi - lo
    polys = {span: Poly([1.0])}
    for p in range(1, degree + 1):
        new = {}
        for i in range(span - p, span + 1):
            acc = Poly([0.0])
            left = polys.get(i)
            if left is not None:
                den = knots[i + p] - knots[i]
                if den > 0:
                    acc = acc + left * Poly([(lo - knots[i]) / den, h / den])
            right = polys.get(i + 1)
            if right is not None:
                den = knots[i + p + 1] - knots[i + 1]
                if den > 0:
                    acc = acc + right * Poly([(knots[i + p + 1] - lo) / den, -h / den])
            new[i] = acc
        polys = new
    return polys


def _segment_coeff_tensor(knots: np.ndarray, degree: int, n_cp: int) -> np.ndarray:
    """(n_seg, degree+1, n_cp): maps CPs (per axis) to descending local-tau
    power coefficients of each segment polynomial."""
    n_seg = n_cp - degree
    out = np.zeros((n_seg, degree + 1, n_cp))
    for j in range(n_seg):
        span = degree + j
        for i, poly in _span_basis_polys(knots, degree, span).items():
            coef = np.zeros(degree + 1)
            coef[: len(poly.coef)] = poly.coef
            out[j, :, i] = coef[::-1]
    return out


def _derivative_cp_matrix(knots: np.ndarray, degree: int, n_cp: int) -> np.ndarray:
    """(n_cp-1, n_cp) knot-difference map from CPs to derivative-spline CPs."""
    D = np.zeros((n_cp - 1, n_cp))
    for i in range(n_cp - 1):
        den = knots[i + degree + 1] - knots[i + 1]
        D[i, i] = -degree / den
        D[i, i + 1] = degree / den
    return D


@dataclass(frozen=True)
class _Machinery:
    """Unit-span segment maps for a given (n_cp, degree)."""

    n_cp: int
    degree: int
    pos_coeff: np.ndarray    # (n_seg, d+1, n_cp) CPs -> segment power coeffs
    minvo_pos: np.ndarray    # (n_seg, d+1, n_cp) CPs -> simplex vertices
    minvo_vel: np.ndarray    # (n_seg, d,   n_cp) CPs -> velocity simplex CPs (unit span)
    minvo_acc: np.ndarray    # (n_seg, d-1, n_cp)
    row_v0: np.ndarray       # (n_cp,) first velocity B-spline CP (unit span)
    row_a0: np.ndarray       # (n_cp,) first acceleration B-spline CP (unit span)
    deriv_coeff: tuple       # pos_coeff differentiated 0,1,2 times (local tau)


@lru_cache(maxsize=None)
def _machinery(n_cp: int, degree: int = DEGREE) -> _Machinery:
    kv = build_clamped_knots(0.0, 1.0, n_cp, degree)
    knots = kv.knots
    n_seg = n_cp - degree

    pos_coeff = _segment_coeff_tensor(knots, degree, n_cp)
    d1 = _derivative_cp_matrix(knots, degree, n_cp)
    knots_v = knots[1:-1]
    vel_coeff = _segment_coeff_tensor(knots_v, degree - 1, n_cp - 1)
    d2 = _derivative_cp_matrix(knots_v, degree - 1, n_cp - 1)
    knots_a = knots_v[1:-1]
    acc_coeff = _segment_coeff_tensor(knots_a, degree - 2, n_cp - 2)

    m3i = minvo.basis_matrix_inv(degree)
    m2i = minvo.basis_matrix_inv(degree - 1)
    m1i = minvo.basis_matrix_inv(degree - 2)
    minvo_pos = np.einsum("ab,jbc->jac", m3i, pos_coeff)
    minvo_vel = np.einsum("ab,jbc,cd->jad", m2i, vel_coeff, d1)
    minvo_acc = np.einsum("ab,jbc,cd,de->jae", m1i, acc_coeff, d2, d1)

    # local-tau derivative coefficient tensors for evaluation
    deriv = [pos_coeff]
    for order in (1, 2):
        prev = deriv[-1]
        width = prev.shape[1]
        powers = np.arange(width - 1, 0, -1, dtype=float)
        deriv.append(prev[:, :-1, :] * powers[None, :, None])

    return _Machinery(
        n_cp=n_cp,
        degree=degree,
        pos_coeff=pos_coeff,
        minvo_pos=minvo_pos,
        minvo_vel=minvo_vel,
        minvo_acc=minvo_acc,
        row_v0=d1[0].copy(),
        row_a0=(d2 @ d1)[0].copy(),
        deriv_coeff=tuple(deriv),
    )


def _locate(traj: SplineTrajectory, t: np.ndarray):
    T = traj.duration
    u = (np.asarray(t, dtype=float) - traj.t0) / T
    tol = 1e-9
    if np.any(u < -tol) or np.any(u > 1 + tol):
        raise DomainError(f"time outside [{traj.t0}, {traj.tf}]")
    u = np.clip(u, 0.0, 1.0)
    n_seg = traj.n_segments
    j = np.minimum((u * n_seg).astype(int), n_seg - 1)
    tau = u * n_seg - j
    return j, tau


def sample_spline(traj: SplineTrajectory, ts, deriv: int = 0) -> np.ndarray:
    """Evaluate position/velocity/acceleration at times ts, shape (len(ts), 3)."""
    if deriv not in (0, 1, 2):
        raise ParameterError(f"deriv must be 0, 1 or 2, got {deriv}")
    mach = _machinery(traj.n_cp, traj.degree)
    j, tau = _locate(traj, ts)
    coeff = np.einsum("jac,cx->jax", mach.deriv_coeff[deriv], traj.cps)
    seg = coeff[j]  # (nt, n_coef, 3)
    out = seg[:, 0, :].copy()
    for k in range(1, seg.shape[1]):
        out = out * tau[:, None] + seg[:, k, :]
    # chain rule: d/dt = (n_seg / T) d/dtau per derivative order
    scale = (traj.n_segments / traj.duration) ** deriv
    return out * scale


def eval_spline(traj: SplineTrajectory, t: float, deriv: int = 0) -> np.ndarray:
    """Curve value at a single time t."""
    return sample_spline(traj, np.array([float(t)]), deriv)[0]


def segment_intervals(traj: SplineTrajectory) -> np.ndarray:
    edges = traj.t0 + traj.duration * np.arange(traj.n_segments + 1) / traj.n_segments
    return np.stack([edges[:-1], edges[1:]], axis=1)


def bspline_to_minvo(traj: SplineTrajectory) -> MinvoSegments:
    """Per-segment enclosing-simplex vertices; linear in the control points."""
    mach = _machinery(traj.n_cp, traj.degree)
    vertices = np.einsum("jac,cx->jax", mach.minvo_pos, traj.cps)
    return MinvoSegments(vertices=vertices, intervals=segment_intervals(traj))


def h_v(traj: SplineTrajectory) -> np.ndarray:
    """Velocity simplex control points per segment, shape (n_seg, degree, 3)."""
    mach = _machinery(traj.n_cp, traj.degree)
    return np.einsum("jac,cx->jax", mach.minvo_vel, traj.cps) / traj.duration


def h_a(traj: SplineTrajectory) -> np.ndarray:
    """Acceleration simplex control points per segment, shape (n_seg, degree-1, 3)."""
    mach = _machinery(traj.n_cp, traj.degree)
    return np.einsum("jac,cx->jax", mach.minvo_acc, traj.cps) / traj.duration**2


def derivative_cps(traj: SplineTrajectory) -> DerivativeCPs:
    return DerivativeCPs(velocity_cps=h_v(traj), acceleration_cps=h_a(traj))


def flat_derivative_maps(n_cp: int, duration: float):
    """Per-axis linear maps from the CP column (n_cp,) to all velocity and
    acceleration simplex CP values: shapes (n_seg*degree, n_cp) and
    (n_seg*(degree-1), n_cp). Used to assemble actuation-box constraints."""
    if duration <= 0:
        raise ParameterError("duration must be positive")
    mach = _machinery(n_cp)
    vel = mach.minvo_vel.reshape(-1, n_cp) / duration
    acc = mach.minvo_acc.reshape(-1, n_cp) / duration**2
    return vel, acc


def initial_derivative_rows(n_cp: int, duration: float):
    """Per-axis rows r such that r @ cps[:, axis] gives velocity and
    acceleration of the curve at t0 (clamped end-derivative formulas)."""
    if duration <= 0:
        raise ParameterError("duration must be positive")
    mach = _machinery(n_cp)
    return mach.row_v0 / duration, mach.row_a0 / duration**2
