"""Forward-only inference of the two-branch planner network.

Per agent: a shared per-point encoder digests the scan; the trajectory
branch clusters points into a fixed-size descriptor, the collision branch
max-pools a global one. Both descriptors are concatenated with localization
data and pushed through attention-weighted graph filters whose exchanged
signals are compressed to a few scalars, yielding the trajectory guess and
the collision-constraint coefficients.

Attention scores are computed on the compressed signals, so a decentralized
execution needs nothing beyond the communicated payloads.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError
from .weights import NetConfig, WeightStore


def relu(x):
    return np.maximum(x, 0.0)


def leaky_relu(x, slope):
    return np.where(x >= 0, x, slope * x)


def quat_rotate(quat, points):
    """Rotate row vectors by a unit quaternion (w, x, y, z)."""
    q = np.asarray(quat, dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise ParameterError("zero-norm quaternion")
    w, x, y, z = q / n
    R = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
    return np.asarray(points, dtype=float) @ R.T


@dataclass(frozen=True)
class NormalizedInputs:
    cloud: np.ndarray  # (m, 3) in world orientation, scaled to the unit sphere
    quat: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    goal: np.ndarray

    def localization(self) -> np.ndarray:
        return np.concatenate([self.quat, self.velocity, self.acceleration, self.goal])


@dataclass(frozen=True)
class BranchOutputs:
    q_star: np.ndarray  # (30,)
    g: np.ndarray  # (30,)
    intermediate_maps: tuple  # per-point averages from the point encoder


def normalize_inputs(scan, quat, velocity, acceleration, goal_rel, sensing_range, limits) -> NormalizedInputs:
    """Scale everything into [-1, 1]: scan rotated to world orientation and
    divided by the sensing range, velocity/acceleration by their limits, and
    the relative goal projected onto the sensing sphere when farther."""
    if sensing_range <= 0:
        raise ParameterError("sensing range must be positive")
    scan = np.asarray(scan, dtype=float).reshape(-1, 3)
    cloud = quat_rotate(quat, scan) / sensing_range
    goal = np.asarray(goal_rel, dtype=float)
    dist = np.linalg.norm(goal)
    if dist > sensing_range:
        goal = goal * (sensing_range / dist)
    q = np.asarray(quat, dtype=float)
    return NormalizedInputs(
        cloud=cloud,
        quat=q / np.linalg.norm(q),
        velocity=np.asarray(velocity, dtype=float) / limits.v_max,
        acceleration=np.asarray(acceleration, dtype=float) / limits.a_max,
        goal=goal / sensing_range,
    )


def pointnet_forward(cloud, store: WeightStore, cfg: NetConfig = None):
    """Shared per-point blocks (feature transform, affine map, ReLU); returns
    features (m, 256) and a per-point channel-average map per block."""
    cfg = cfg or NetConfig()
    x = np.asarray(cloud, dtype=float).reshape(-1, 3)
    maps = []
    for b in range(len(cfg.point_widths)):
        x = x @ store[f"point_block{b}.transform"]
        x = relu(x @ store[f"point_block{b}.weight"] + store[f"point_block{b}.bias"])
        maps.append(x.mean(axis=1) if len(x) else np.zeros(0))
    return x, tuple(maps)


def build_point_adjacency(cloud, radius: float) -> np.ndarray:
    """Binary proximity matrix: edge iff 0 < |p_i - p_j| <= radius."""
    if radius <= 0:
        raise ParameterError("radius must be positive")
    pts = np.asarray(cloud, dtype=float).reshape(-1, 3)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    adj = (dist <= radius) & (dist > 0)
    return adj.astype(float)


def dmon_forward(features, adjacency, store: WeightStore, cfg: NetConfig = None):
    """Soft cluster assignments from one graph-convolution layer (mean
    aggregation incl. self) and a learned scalar per pooled cluster."""
    cfg = cfg or NetConfig()
    feats = np.asarray(features, dtype=float)
    m = len(feats)
    if m == 0:
        return np.zeros((0, cfg.n_clusters)), np.full(cfg.n_clusters, 1.0 / cfg.n_clusters)
    A = np.asarray(adjacency, dtype=float) + np.eye(m)
    A = A / A.sum(axis=1, keepdims=True)
    logits = (A @ feats) @ store["cluster.conv_weight"] + store["cluster.conv_bias"]
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    assignments = e / e.sum(axis=1, keepdims=True)
    mass = assignments.sum(axis=0)
    pooled = np.where(mass[:, None] > 0, assignments.T @ feats / np.maximum(mass[:, None], 1e-30), 0.0)
    cluster_vector = pooled @ store["cluster.proj_weight"] + float(store["cluster.proj_bias"])
    return assignments, cluster_vector


def attention(values, adjacency, W, slope: float = 0.01) -> np.ndarray:
    """Row-stochastic attention over neighbors: softmax of the leaky-rectified
    bilinear scores x_i^T W x_j, zero where there is no edge."""
    X = np.asarray(values, dtype=float)
    A = np.asarray(adjacency, dtype=float)
    scores = leaky_relu(X @ W @ X.T, slope)
    mask = A > 0
    E = np.zeros_like(scores)
    for i in range(len(X)):
        nbr = mask[i]
        if not nbr.any():
            continue
        row = scores[i, nbr]
        row = np.exp(row - row.max())
        E[i, nbr] = row / row.sum()
    return E


@dataclass(frozen=True)
class GnnLayerWeights:
    enc_w: np.ndarray
    enc_b: np.ndarray
    dec_w: np.ndarray
    dec_b: np.ndarray
    att: np.ndarray
    taps: tuple  # (H_0, ..., H_K)

    @classmethod
    def from_store(cls, store: WeightStore, branch: str, layer: int, cfg: NetConfig) -> "GnnLayerWeights":
        pre = f"{branch}_gnn{layer}"
        return cls(
            enc_w=store[f"{pre}.enc_w"],
            enc_b=store[f"{pre}.enc_b"],
            dec_w=store[f"{pre}.dec_w"],
            dec_b=store[f"{pre}.dec_b"],
            att=store[f"{pre}.att"],
            taps=tuple(store[f"{pre}.h{k}"] for k in range(cfg.taps + 1)),
        )


def layer_encode(x, lw: GnnLayerWeights) -> np.ndarray:
    """Compress a signal before communication (the transmitted payload)."""
    return relu(np.asarray(x, dtype=float) @ lw.enc_w + lw.enc_b)


def layer_decode(s, lw: GnnLayerWeights) -> np.ndarray:
    return relu(np.asarray(s, dtype=float) @ lw.dec_w + lw.dec_b)


def gnn_ed_layer(values, adjacency, lw: GnnLayerWeights, slope: float = 0.01) -> np.ndarray:
    """Centralized evaluation of one encode/propagate/decode graph layer:
    y = ReLU( sum_k d((E o A)^k e(x)) H_k )."""
    X = np.asarray(values, dtype=float)
    A = np.asarray(adjacency, dtype=float)
    if X.shape[0] != A.shape[0] or A.shape[0] != A.shape[1]:
        raise ParameterError(f"signal/adjacency mismatch: {X.shape} vs {A.shape}")
    if X.shape[1] != lw.enc_w.shape[0]:
        raise ParameterError(f"signal width {X.shape[1]} != layer input {lw.enc_w.shape[0]}")
    S = layer_encode(X, lw)
    E = attention(S, A, lw.att, slope)
    prop = E * (A > 0)
    acc = layer_decode(S, lw) @ lw.taps[0]
    Sk = S
    for k in range(1, len(lw.taps)):
        Sk = prop @ Sk
        acc = acc + layer_decode(Sk, lw) @ lw.taps[k]
    return relu(acc)


def local_features(inp: NormalizedInputs, store: WeightStore, cfg: NetConfig = None):
    """Per-agent pre-communication features: trajectory-branch vector (64),
    collision-branch vector (269), and the encoder's per-point maps."""
    cfg = cfg or NetConfig()
    feats, maps = pointnet_forward(inp.cloud, store, cfg)
    loc = inp.localization()
    if len(feats):
        adj = build_point_adjacency(inp.cloud, cfg.point_adjacency_radius)
        _, cluster_vec = dmon_forward(feats, adj, store, cfg)
        pooled = feats.max(axis=0)
    else:
        cluster_vec = np.full(cfg.n_clusters, 1.0 / cfg.n_clusters)
        pooled = np.zeros(cfg.point_widths[-1])
    return np.concatenate([cluster_vec, loc]), np.concatenate([pooled, loc]), maps


def forward_all(inputs, adjacency, store: WeightStore, cfg: NetConfig = None):
    """Synchronous forward pass for all agents (current-signal semantics)."""
    cfg = cfg or NetConfig()
    A = np.asarray(adjacency, dtype=float)
    n = len(inputs)
    if A.shape != (n, n):
        raise ParameterError(f"adjacency must be ({n}, {n}), got {A.shape}")
    traj_x, coll_x, maps = [], [], []
    for inp in inputs:
        tx, cx, mp = local_features(inp, store, cfg)
        traj_x.append(tx)
        coll_x.append(cx)
        maps.append(mp)
    traj_x = np.stack(traj_x)
    coll_x = np.stack(coll_x)
    for layer in range(len(cfg.traj_widths)):
        traj_x = gnn_ed_layer(traj_x, A, GnnLayerWeights.from_store(store, "traj", layer, cfg), cfg.leaky_slope)
    for layer in range(len(cfg.coll_widths)):
        coll_x = gnn_ed_layer(coll_x, A, GnnLayerWeights.from_store(store, "coll", layer, cfg), cfg.leaky_slope)
    g_all = coll_x @ store["coll_head.weight"] + store["coll_head.bias"]
    return [BranchOutputs(q_star=traj_x[i], g=g_all[i], intermediate_maps=maps[i]) for i in range(n)]
