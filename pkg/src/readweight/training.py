"""Deterministic mini-batch training of the two-tower model.

Four objectives cover the ablation grid:

  single_ctr  y = clicked, weighted tower idle (all weights zero)
  ctr_logdt   y = clicked, weighted tower uses log dwell time
  vr_logdt    y = valid read, weighted tower uses log dwell time
  vr_ndt      y = valid read, weighted tower uses normalized dwell time

Log dwell time is ln(1 + T) so unclicked rows (T = 0) are well defined in
literal negative mode.  The optimizer is Adam (0.9 / 0.999, eps 1e-8) with
moments kept in float64 and parameters stored in float32; given the same
config and seed, two runs produce byte-identical checkpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .labeling import LabelKind
from .model import (
    FeatureVector,
    ModelConfig,
    MtlNetwork,
        SlotSpec,
    TrainingInstance,
    pack_instances,
)
from .ndt import NdtParams, ndt

OBJECTIVES = ("single_ctr", "ctr_logdt", "vr_logdt", "vr_ndt")


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite."""


@dataclass(frozen=True, slots=True)
class TrainConfig:
    objective: str = "vr_ndt"
    neg_mode: str = "unit"
    batch_size: int = 512
    learning_rate: float = 1e-3
    epochs: int = 3
    seed: int = 0
    embedding_dim: int = 16
    bottom_dim: int = 64
    tower_dims: tuple[int, int] = (64, 32)

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.neg_mode not in ("unit", "literal"):
            raise ValueError(f"neg_mode must be unit or literal, got {self.neg_mode!r}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")


@dataclass(frozen=True, slots=True)
class FeatureSpace:
    """Token vocabularies shared by training and scoring; index 0 is OOV."""

    user_vocab: tuple[str, ...]
    item_vocab: tuple[str, ...]
    _user_index: dict = field(default_factory=dict, compare=False, repr=False)
    _item_index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self._user_index.update({u: i + 1 for i, u in enumerate(self.user_vocab)})
        self._item_index.update({t: i + 1 for i, t in enumerate(self.item_vocab)})

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "FeatureSpace":
        users: set[str] = set()
        items: set[str] = set()
        for user_id, item_id in pairs:
            users.add(user_id)
            items.add(item_id)
        return cls(tuple(sorted(users)), tuple(sorted(items)))

    def encode(self, user_id: str, item_id: str) -> FeatureVector:
        return FeatureVector(
            (self._user_index.get(user_id, 0), self._item_index.get(item_id, 0))
        )

    def slots(self) -> tuple[SlotSpec, SlotSpec]:
        return (
            SlotSpec("user_id", len(self.user_vocab) + 1),
            SlotSpec("item_id", len(self.item_vocab) + 1),
        )


def _log_dwell(dwell_time_s: float) -> float:
    return math.log1p(dwell_time_s)


def build_instances(
    labeled: Sequence[tuple],
    params: NdtParams,
    cfg: TrainConfig,
    space: FeatureSpace | None = None,
) -> tuple[list[TrainingInstance], FeatureSpace]:
    """Map labeled events to training instances under the configured objective.

    ``labeled`` holds (InteractionEvent, ValidReadLabel) pairs.  Positives
    are clicks (ctr objectives) or valid reads (vr objectives); the weighted
    tower's weight is the objective's dwell transform for positives and,
    for negatives, 1.0 in unit mode or the same transform in literal mode.
    """
    if space is None:
        space = FeatureSpace.from_pairs((e.user_id, e.item_id) for e, _ in labeled)
    if cfg.objective.endswith("logdt"):
        transform = _log_dwell
    else:
        transform = lambda t: float(ndt(t, params))  # noqa: E731
    use_clicks = cfg.objective in ("single_ctr", "ctr_logdt")
    instances: list[TrainingInstance] = []
    for event, label in labeled:
        if use_clicks:
            y = 1 if event.clicked else 0
        else:
            y = 1 if label.kind is LabelKind.VALID_READ else 0
        if cfg.objective == "single_ctr":
            w = 0.0
        elif y == 1 or cfg.neg_mode == "literal":
            w = transform(event.dwell_time_s)
        else:
            w = 1.0
        instances.append(TrainingInstance(space.encode(event.user_id, event.item_id), y, w))
    return instances, space


@dataclass(slots=True)
class EpochLoss:
    epoch: int
    l_v: float
    l_w: float

    @property
    def l(self) -> float:
        return self.l_v + self.l_w


@dataclass(slots=True)
class TrainResult:
    network: MtlNetwork
    trace: list[EpochLoss]
    space: FeatureSpace
    config: TrainConfig


class Adam:
    """Per-parameter moment estimates; state in float64."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, b1=0.9, b2=0.999, eps=1e-8):
        self.lr = lr
        self.b1 = b1
        self.b2 = b2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros(v.shape, dtype=np.float64) for k, v in params.items()}
        self.v = {k: np.zeros(v.shape, dtype=np.float64) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.b1**self.t
        bc2 = 1.0 - self.b2**self.t
        for name, grad in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * grad
            v *= self.b2
            v += (1.0 - self.b2) * np.square(grad)
            update = (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
            params[name] = (params[name].astype(np.float64) - update).astype(np.float32)


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """Visit order of instances for one epoch; a pure function of (seed, epoch)."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def train(cfg: TrainConfig, instances: Sequence[TrainingInstance], space: FeatureSpace) -> TrainResult:
    """Run fixed-epoch training; deterministic given cfg.seed.

    The loss trace records per-instance mean losses per epoch.  Non-finite
    loss aborts with TrainingDivergedError.
    """
    if not instances:
        raise ValueError("cannot train on an empty instance set")
    config = ModelConfig(
        slots=space.slots(),
        embedding_dim=cfg.embedding_dim,
        bottom_dim=cfg.bottom_dim,
        tower_dims=cfg.tower_dims,
        seed=cfg.seed,
    )
    net = MtlNetwork(config)
    packed = pack_instances(list(instances), config.dense_dim)
    optimizer = Adam(net.params, lr=cfg.learning_rate)
    n = len(packed)
    trace: list[EpochLoss] = []
    for epoch in range(cfg.epochs):
        order = epoch_order(cfg.seed, epoch, n)
        epoch_lv = 0.0
        epoch_lw = 0.0
        for start in range(0, n, cfg.batch_size):
            rows = order[start : start + cfg.batch_size]
            # Non-finite values surface as the divergence error below.
            with np.errstate(over="ignore", invalid="ignore"):
                (l_v, l_w, l_total), grads = net.backward(packed.take(rows))
            if not math.isfinite(l_total):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch offset {start}: "
                    f"L_v={l_v}, L_w={l_w}"
                )
            optimizer.step(net.params, grads)
            epoch_lv += l_v
            epoch_lw += l_w
        trace.append(EpochLoss(epoch=epoch, l_v=epoch_lv / n, l_w=epoch_lw / n))
    return TrainResult(network=net, trace=trace, space=space, config=cfg)


def trace_csv(trace: Sequence[EpochLoss]) -> str:
    lines = ["epoch,L_v,L_w,L"]
    for row in trace:
        lines.append(f"{row.epoch},{row.l_v!r},{row.l_w!r},{row.l!r}")
    return "\n".join(lines) + "\n"


def checkpoint_extra_config(result: TrainResult) -> dict:
    cfg = result.config
    return {
        "objective": cfg.objective,
        "neg_mode": cfg.neg_mode,
        "batch_size": cfg.batch_size,
        "learning_rate": cfg.learning_rate,
        "epochs": cfg.epochs,
        "train_seed": cfg.seed,
        "user_vocab": list(result.space.user_vocab),
        "item_vocab": list(result.space.item_vocab),
    }


def space_from_checkpoint(doc: dict) -> FeatureSpace:
    return FeatureSpace(tuple(doc["user_vocab"]), tuple(doc["item_vocab"]))


def score_events(net: MtlNetwork, space: FeatureSpace, events: Sequence) -> np.ndarray:
    """Ranking scores P + P' for a sequence of events."""
    instances = [
        TrainingInstance(space.encode(e.user_id, e.item_id), 0, 0.0) for e in events
    ]
    if not instances:
        return np.zeros(0, dtype=np.float64)
    return net.score_batch(pack_instances(instances, net.config.dense_dim))
