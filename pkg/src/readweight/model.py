"""Shared-bottom network with two 3-layer MLP towers.

Tower ``v`` predicts the probability P of a valid read; tower ``w`` is the
weighted twin producing P'.  Both consume the same shared-bottom output, and
the ranking score is P + P'.  The joint loss is the sum of an unweighted and
a per-instance-weighted binary cross entropy:

    L_v = -sum_pos log P  - sum_neg log(1 - P)
    L_w = -sum_pos w log P' - sum_neg w log(1 - P')
    L   = L_v + L_w

Parameters live as float32 (the checkpoint stores raw float32 tensors, so
save/load is bit-exact); all arithmetic upcasts to float64, which keeps
finite-difference gradient checks meaningful.  Losses and gradients
accumulate in batch order; permutation invariance is up to a canonical
re-sort of the batch (see ``canonical_order``).

Checkpoint format (magic ``VRMT``): version u32, u32 JSON config length +
config JSON (dims, slots with vocabularies, seed), u32 tensor count, then
per tensor: u32 name length + name, u32 rank, u32 dims, row-major
little-endian float32 data.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

PROB_CLAMP = 1e-7

CHECKPOINT_MAGIC = b"VRMT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True, slots=True)
class SlotSpec:
    """One categorical feature slot; index 0 is reserved for out-of-vocab."""

    name: str
    cardinality: int

    def __post_init__(self):
        if self.cardinality < 1:
            raise ValueError(f"slot {self.name} needs cardinality >= 1")


@dataclass(frozen=True, slots=True)
class ModelConfig:
    slots: tuple[SlotSpec, ...]
    dense_dim: int = 0
    embedding_dim: int = 16
    bottom_dim: int = 64
    tower_dims: tuple[int, int] = (64, 32)
    seed: int = 0

    @property
    def input_dim(self) -> int:
        return len(self.slots) * self.embedding_dim + self.dense_dim


@dataclass(frozen=True, slots=True)
class FeatureVector:
    """Features of one (user, item) instance."""

    categorical_slots: tuple[int, ...]
    dense: tuple[float, ...] = ()


@dataclass(frozen=True, slots=True)
class TrainingInstance:
    features: FeatureVector
    y: int
    w: float

    def __post_init__(self):
        if self.y not in (0, 1):
            raise ValueError(f"y must be 0 or 1, got {self.y}")
        if self.w < 0:
            raise ValueError(f"weight must be >= 0, got {self.w}")


@dataclass(slots=True)
class PackedBatch:
    """Column layout of a batch: token indices, dense features, labels, weights."""

    idx: np.ndarray  # (n, n_slots) int32
    dense: np.ndarray  # (n, dense_dim) float64
    y: np.ndarray  # (n,) float64 in {0, 1}
    w: np.ndarray  # (n,) float64

    def __len__(self) -> int:
        return self.idx.shape[0]

    def take(self, rows: np.ndarray) -> "PackedBatch":
        return PackedBatch(self.idx[rows], self.dense[rows], self.y[rows], self.w[rows])


def pack_instances(instances: Sequence[TrainingInstance], dense_dim: int = 0) -> PackedBatch:
    n = len(instances)
    n_slots = len(instances[0].features.categorical_slots) if n else 0
    idx = np.zeros((n, n_slots), dtype=np.int32)
    dense = np.zeros((n, dense_dim), dtype=np.float64)
    y = np.zeros(n, dtype=np.float64)
    w = np.zeros(n, dtype=np.float64)
    for row, inst in enumerate(instances):
        idx[row] = inst.features.categorical_slots
        if dense_dim:
            dense[row] = inst.features.dense
        y[row] = inst.y
        w[row] = inst.w
    return PackedBatch(idx, dense, y, w)


def canonical_order(instances: Sequence[TrainingInstance]) -> list[TrainingInstance]:
    """Deterministic batch ordering; accumulating in this order makes sums
    independent of how the batch was shuffled."""
    return sorted(
        instances,
        key=lambda i: (i.features.categorical_slots, i.features.dense, i.y, i.w),
    )


def _relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class MtlNetwork:
    """Parameter container plus forward/backward passes."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray] | None = None):
        self.config = config
        self.params = params if params is not None else self._init_params(config)
        expected = set(self.param_names(config))
        if set(self.params) != expected:
            raise ValueError("parameter set does not match the configuration")

    @staticmethod
    def param_names(config: ModelConfig) -> list[str]:
        names = [f"emb.{slot.name}" for slot in config.slots]
        names += ["bottom.W", "bottom.b"]
        for tower in ("tower_v", "tower_w"):
            for layer in (1, 2, 3):
                names += [f"{tower}.{layer}.W", f"{tower}.{layer}.b"]
        return names

    @staticmethod
    def _init_params(config: ModelConfig) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(config.seed)

        def glorot(fan_in: int, fan_out: int, shape: tuple[int, ...]) -> np.ndarray:
            s = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-s, s, size=shape).astype(np.float32)

        d_emb = config.embedding_dim
        d_in = config.input_dim
        d_bot = config.bottom_dim
        d1, d2 = config.tower_dims
        params: dict[str, np.ndarray] = {}
        for slot in config.slots:
            params[f"emb.{slot.name}"] = glorot(
                slot.cardinality, d_emb, (slot.cardinality, d_emb)
            )
        # Biases share their layer's uniform law: a layer whose inputs die
        # then sits off the rectifier kink instead of exactly on it.
        params["bottom.W"] = glorot(d_in, d_bot, (d_in, d_bot))
        params["bottom.b"] = glorot(d_in, d_bot, (d_bot,))
        for tower in ("tower_v", "tower_w"):
            params[f"{tower}.1.W"] = glorot(d_bot, d1, (d_bot, d1))
            params[f"{tower}.1.b"] = glorot(d_bot, d1, (d1,))
            params[f"{tower}.2.W"] = glorot(d1, d2, (d1, d2))
            params[f"{tower}.2.b"] = glorot(d1, d2, (d2,))
            params[f"{tower}.3.W"] = glorot(d2, 1, (d2, 1))
            params[f"{tower}.3.b"] = glorot(d2, 1, (1,))
        return params

    def astype(self, dtype) -> "MtlNetwork":
        return MtlNetwork(self.config, {k: v.astype(dtype) for k, v in self.params.items()})

    def _check_indices(self, idx: np.ndarray) -> None:
        for col, slot in enumerate(self.config.slots):
            column = idx[:, col]
            if column.min(initial=0) < 0 or column.max(initial=0) >= slot.cardinality:
                raise IndexError(
                    f"token index out of range for slot {slot.name} "
                    f"(cardinality {slot.cardinality})"
                )

    def _forward_arrays(self, batch: PackedBatch) -> dict[str, np.ndarray]:
        self._check_indices(batch.idx)
        p = self.params
        pieces = [
            p[f"emb.{slot.name}"][batch.idx[:, col]].astype(np.float64)
            for col, slot in enumerate(self.config.slots)
        ]
        if self.config.dense_dim:
            pieces.append(batch.dense)
        x0 = np.concatenate(pieces, axis=1) if pieces else batch.dense
        zb = x0 @ p["bottom.W"].astype(np.float64) + p["bottom.b"].astype(np.float64)
        hb = _relu(zb)
        cache: dict[str, np.ndarray] = {"x0": x0, "zb": zb, "hb": hb}
        for tower in ("tower_v", "tower_w"):
            h = hb
            for layer in (1, 2):
                z = h @ p[f"{tower}.{layer}.W"].astype(np.float64) + p[
                    f"{tower}.{layer}.b"
                ].astype(np.float64)
                cache[f"{tower}.z{layer}"] = z
                h = _relu(z)
                cache[f"{tower}.h{layer}"] = h
            z3 = h @ p[f"{tower}.3.W"].astype(np.float64) + p[f"{tower}.3.b"].astype(np.float64)
            cache[f"{tower}.z3"] = z3[:, 0]
            cache[f"{tower}.prob"] = _sigmoid(z3[:, 0])
        return cache

    def forward_batch(self, batch: PackedBatch) -> tuple[np.ndarray, np.ndarray]:
        """Probabilities (P, P') for every row; shared bottom runs once."""
        cache = self._forward_arrays(batch)
        return cache["tower_v.prob"], cache["tower_w.prob"]

    def forward(self, f: FeatureVector) -> tuple[float, float]:
        batch = pack_instances([TrainingInstance(f, 0, 0.0)], self.config.dense_dim)
        p, pw = self.forward_batch(batch)
        return float(p[0]), float(pw[0])

    def score(self, f: FeatureVector) -> float:
        """Ranking score: sum of the two towers' probabilities."""
        p, pw = self.forward(f)
        return p + pw

    def score_batch(self, batch: PackedBatch) -> np.ndarray:
        p, pw = self.forward_batch(batch)
        return p + pw

    def batch_loss(self, batch: PackedBatch) -> tuple[float, float, float]:
        """(L_v, L_w, L) summed over the batch, probabilities clamped."""
        cache = self._forward_arrays(batch)
        l_v, l_w = self._losses_from_cache(batch, cache)
        return l_v, l_w, l_v + l_w

    @staticmethod
    def _losses_from_cache(
        batch: PackedBatch, cache: dict[str, np.ndarray]
    ) -> tuple[float, float]:
        y, w = batch.y, batch.w
        p = np.clip(cache["tower_v.prob"], PROB_CLAMP, 1.0 - PROB_CLAMP)
        pw = np.clip(cache["tower_w.prob"], PROB_CLAMP, 1.0 - PROB_CLAMP)
        l_v = -float(np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
        l_w = -float(np.sum(w * (y * np.log(pw) + (1.0 - y) * np.log(1.0 - pw))))
        return l_v, l_w

    def backward(
        self, batch: PackedBatch
    ) -> tuple[tuple[float, float, float], dict[str, np.ndarray]]:
        """Analytic gradient of L over every parameter.

        Returns ((L_v, L_w, L), grads).  The shared-bottom and embedding
        gradients accumulate both towers' contributions.
        """
        cache = self._forward_arrays(batch)
        l_v, l_w = self._losses_from_cache(batch, cache)
        p = self.params
        grads = {name: np.zeros_like(arr, dtype=np.float64) for name, arr in p.items()}

        d_hb = np.zeros_like(cache["hb"])
        for tower, scale in (("tower_v", None), ("tower_w", batch.w)):
            dz3 = cache[f"{tower}.prob"] - batch.y
            if scale is not None:
                dz3 = dz3 * scale
            h2 = cache[f"{tower}.h2"]
            grads[f"{tower}.3.W"] += h2.T @ dz3[:, None]
            grads[f"{tower}.3.b"] += np.array([dz3.sum()])
            dh2 = dz3[:, None] @ p[f"{tower}.3.W"].astype(np.float64).T
            dz2 = dh2 * (cache[f"{tower}.z2"] > 0)
            h1 = cache[f"{tower}.h1"]
            grads[f"{tower}.2.W"] += h1.T @ dz2
            grads[f"{tower}.2.b"] += dz2.sum(axis=0)
            dh1 = dz2 @ p[f"{tower}.2.W"].astype(np.float64).T
            dz1 = dh1 * (cache[f"{tower}.z1"] > 0)
            grads[f"{tower}.1.W"] += cache["hb"].T @ dz1
            grads[f"{tower}.1.b"] += dz1.sum(axis=0)
            d_hb += dz1 @ p[f"{tower}.1.W"].astype(np.float64).T

        dzb = d_hb * (cache["zb"] > 0)
        grads["bottom.W"] += cache["x0"].T @ dzb
        grads["bottom.b"] += dzb.sum(axis=0)
        dx0 = dzb @ p["bottom.W"].astype(np.float64).T
        d_emb = self.config.embedding_dim
        for col, slot in enumerate(self.config.slots):
            chunk = dx0[:, col * d_emb : (col + 1) * d_emb]
            np.add.at(grads[f"emb.{slot.name}"], batch.idx[:, col], chunk)
        return (l_v, l_w, l_v + l_w), grads

    # -- checkpoint io ----------------------------------------------------

    def config_doc(self, extra: dict | None = None) -> dict:
        doc = {
            "slots": [{"name": s.name, "cardinality": s.cardinality} for s in self.config.slots],
            "dense_dim": self.config.dense_dim,
            "embedding_dim": self.config.embedding_dim,
            "bottom_dim": self.config.bottom_dim,
            "tower_dims": list(self.config.tower_dims),
            "seed": self.config.seed,
        }
        if extra:
            doc.update(extra)
        return doc

    def to_bytes(self, extra_config: dict | None = None) -> bytes:
        config_blob = json.dumps(self.config_doc(extra_config), sort_keys=True).encode("utf-8")
        names = self.param_names(self.config)
        parts = [
            CHECKPOINT_MAGIC,
            struct.pack("<I", CHECKPOINT_VERSION),
            struct.pack("<I", len(config_blob)),
            config_blob,
            struct.pack("<I", len(names)),
        ]
        for name in names:
            tensor = np.ascontiguousarray(self.params[name], dtype="<f4")
            encoded = name.encode("utf-8")
            parts.append(struct.pack("<I", len(encoded)))
            parts.append(encoded)
            parts.append(struct.pack("<I", tensor.ndim))
            parts.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            parts.append(tensor.tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> tuple["MtlNetwork", dict]:
        if data[:4] != CHECKPOINT_MAGIC:
            raise ValueError("not a model checkpoint (bad magic)")
        (version,) = struct.unpack_from("<I", data, 4)
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (config_len,) = struct.unpack_from("<I", data, 8)
        offset = 12
        doc = json.loads(data[offset : offset + config_len].decode("utf-8"))
        offset += config_len
        config = ModelConfig(
            slots=tuple(SlotSpec(s["name"], int(s["cardinality"])) for s in doc["slots"]),
            dense_dim=int(doc["dense_dim"]),
            embedding_dim=int(doc["embedding_dim"]),
            bottom_dim=int(doc["bottom_dim"]),
            tower_dims=tuple(doc["tower_dims"]),
            seed=int(doc["seed"]),
        )
        (n_tensors,) = struct.unpack_from("<I", data, offset)
        offset += 4
        params: dict[str, np.ndarray] = {}
        for _ in range(n_tensors):
            (name_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            name = data[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<I", data, offset)
            offset += 4
            shape = struct.unpack_from(f"<{rank}I", data, offset)
            offset += 4 * rank
            count = int(np.prod(shape)) if rank else 1
            tensor = np.frombuffer(data, dtype="<f4", count=count, offset=offset).reshape(shape)
            offset += 4 * count
            params[name] = tensor.copy()
        return cls(config, params), doc

    def save(self, path: str, extra_config: dict | None = None) -> None:
        from ._fileio import atomic_write_bytes

        atomic_write_bytes(path, self.to_bytes(extra_config))

    @classmethod
    def load(cls, path: str) -> tuple["MtlNetwork", dict]:
        with open(path, "rb") as handle:
            return cls.from_bytes(handle.read())
