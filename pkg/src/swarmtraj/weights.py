"""Weight container with a flat binary file format and random initialization.

File layout (all integers unsigned 64-bit little-endian, floats 32-bit
little-endian): tensor count; then per tensor: name length, name bytes
(UTF-8), rank, shape, raw values.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class NetConfig:
    """Architecture dimensions of the two-branch network."""

    point_widths: tuple = (64, 128, 256)
    n_clusters: int = 51
    loc_dim: int = 13  # quat 4 + velocity 3 + acceleration 3 + goal 3
    traj_widths: tuple = (512, 256, 30)
    coll_widths: tuple = (512, 256)
    g_dim: int = 30
    compressed: int = 5  # G: scalars communicated per layer per tap
    taps: int = 1  # K
    leaky_slope: float = 0.01
    point_adjacency_radius: float = 0.1

    @property
    def traj_input(self) -> int:
        return self.n_clusters + self.loc_dim

    @property
    def coll_input(self) -> int:
        return self.point_widths[-1] + self.loc_dim

    @property
    def n_layers(self) -> int:
        return len(self.traj_widths) + len(self.coll_widths)

    @property
    def scalars_per_round(self) -> int:
        return self.n_layers * self.compressed * self.taps

    def gnn_dims(self, branch: str):
        """(f_in, f_out) pairs for the requested branch."""
        if branch == "traj":
            widths, start = self.traj_widths, self.traj_input
        elif branch == "coll":
            widths, start = self.coll_widths, self.coll_input
        else:
            raise ParameterError(f"unknown branch {branch!r}")
        dims = []
        f = start
        for w in widths:
            dims.append((f, w))
            f = w
        return dims


def expected_shapes(cfg: NetConfig) -> dict:
    shapes = {}
    f_in = 3
    for b, width in enumerate(cfg.point_widths):
        shapes[f"point_block{b}.transform"] = (f_in, f_in)
        shapes[f"point_block{b}.weight"] = (f_in, width)
        shapes[f"point_block{b}.bias"] = (width,)
        f_in = width
    feat = cfg.point_widths[-1]
    shapes["cluster.conv_weight"] = (feat, cfg.n_clusters)
    shapes["cluster.conv_bias"] = (cfg.n_clusters,)
    shapes["cluster.proj_weight"] = (feat,)
    shapes["cluster.proj_bias"] = ()
    for branch in ("traj", "coll"):
        for layer, (fi, fo) in enumerate(cfg.gnn_dims(branch)):
            pre = f"{branch}_gnn{layer}"
            shapes[f"{pre}.enc_w"] = (fi, cfg.compressed)
            shapes[f"{pre}.enc_b"] = (cfg.compressed,)
            shapes[f"{pre}.dec_w"] = (cfg.compressed, fi)
            shapes[f"{pre}.dec_b"] = (fi,)
            shapes[f"{pre}.att"] = (cfg.compressed, cfg.compressed)
            for k in range(cfg.taps + 1):
                shapes[f"{pre}.h{k}"] = (fi, fo)
    shapes["coll_head.weight"] = (cfg.coll_widths[-1], cfg.g_dim)
    shapes["coll_head.bias"] = (cfg.g_dim,)
    return shapes


@dataclass
class WeightStore:
    tensors: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise ParameterError(f"missing tensor {name!r}") from None

    def __setitem__(self, name: str, value: np.ndarray):
        self.tensors[name] = np.asarray(value, dtype=np.float32)

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def validate(self, cfg: NetConfig):
        expected = expected_shapes(cfg)
        missing = sorted(set(expected) - set(self.tensors))
        if missing:
            raise ParameterError(f"missing tensors: {missing[:5]}{'...' if len(missing) > 5 else ''}")
        for name, shape in expected.items():
            got = self.tensors[name].shape
            if got != shape:
                raise ParameterError(f"tensor {name!r} has shape {got}, expected {shape}")

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(struct.pack("<Q", len(self.tensors)))
            for name, arr in self.tensors.items():
                raw = name.encode("utf-8")
                fh.write(struct.pack("<Q", len(raw)))
                fh.write(raw)
                fh.write(struct.pack("<Q", arr.ndim))
                for dim in arr.shape:
                    fh.write(struct.pack("<Q", dim))
                fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path, cfg: NetConfig = None) -> "WeightStore":
        def read_u64(fh):
            raw = fh.read(8)
            if len(raw) != 8:
                raise ParameterError("truncated weight file")
            return struct.unpack("<Q", raw)[0]

        store = cls()
        with open(path, "rb") as fh:
            count = read_u64(fh)
            for _ in range(count):
                name = fh.read(read_u64(fh)).decode("utf-8")
                rank = read_u64(fh)
                shape = tuple(read_u64(fh) for _ in range(rank))
                n = int(np.prod(shape)) if shape else 1
                raw = fh.read(4 * n)
                if len(raw) != 4 * n:
                    raise ParameterError(f"truncated data for tensor {name!r}")
                store.tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        if cfg is not None:
            store.validate(cfg)
        return store


def random_init(cfg: NetConfig = None, seed: int = 0) -> WeightStore:
    """Valid store with scaled-normal weights; transforms start near identity."""
    cfg = cfg or NetConfig()
    rng = np.random.default_rng(seed)
    store = WeightStore()
    for name, shape in expected_shapes(cfg).items():
        if name.endswith(".transform"):
            arr = np.eye(shape[0]) + 0.1 * rng.standard_normal(shape)
        elif "bias" in name or name.endswith("_b"):
            arr = 0.01 * rng.standard_normal(shape)
        else:
            fan_in = shape[0] if shape else 1
            arr = rng.standard_normal(shape) / np.sqrt(fan_in)
        store[name] = arr
    return store
