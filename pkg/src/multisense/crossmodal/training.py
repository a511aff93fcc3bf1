"""Desk-scale linear contrastive trainer and the dataset-size sweep.

Linear per-modality encoders are trained by minibatch gradient descent with
decoupled weight decay on one of the three losses (RGB-anchored contrastive,
all-pairs contrastive, or MSE alignment to RGB). The RGB encoder stays
frozen by default. This exercises the loss formulations and evaluation
protocols end to end; it does not try to reproduce deep-encoder accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MultisenseError, ValidationError
from .embeddings import EmbeddingTable, Modality
from .evaluate import EvalConfig, retrieval_eval
from .losses import (
    cross_sensory_loss_grad,
    image_loss_grad,
    mse_align_loss_grad,
)

LOSS_KINDS = ("image", "cross_sensory", "mse")


class TrainingDiverged(MultisenseError):
    """Loss became non-finite during training."""


@dataclass
class FeatureSet:
    """Raw per-modality features keyed by (object_id, point_index)."""

    keys: list[tuple[str, int]]
    x: np.ndarray  # n x d_in

    def validate(self) -> None:
        if len(self.keys) != self.x.shape[0]:
            raise ValidationError("feature rows do not match keys")
        if len(set(self.keys)) != len(self.keys):
            raise ValidationError("duplicate feature keys")

    def subset(self, object_ids: set[str]) -> "FeatureSet":
        rows = [i for i, (obj, _) in enumerate(self.keys) if obj in object_ids]
        return FeatureSet(keys=[self.keys[i] for i in rows], x=self.x[rows])

    def object_ids(self) -> list[str]:
        return sorted({obj for obj, _ in self.keys})


@dataclass
class TrainConfig:
    embed_dim: int = 32
    batch_size: int = 64
    learning_rate: float = 1e-5
    weight_decay: float = 0.01
    n_steps: int = 200
    temperature: float = 0.07
    seed: int = 0
    rgb_frozen: bool = True

    def validate(self) -> None:
        if self.batch_size < 2:
            raise ValidationError("batch_size must be >= 2")
        if self.n_steps < 0:
            raise ValidationError("n_steps must be >= 0")


@dataclass
class LinearEncoderSet:
    weights: dict[Modality, np.ndarray]  # d_in(m) x d
    rgb_frozen: bool = True

    def encode(self, modality: Modality, x: np.ndarray, normalize: bool = True) -> np.ndarray:
        z = np.asarray(x, dtype=np.float64) @ self.weights[modality]
        if not normalize:
            return z
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        norms = np.where(norms == 0, 1.0, norms)
        return z / norms


@dataclass
class TrainResult:
    encoders: LinearEncoderSet
    loss_trace: list[float] = field(default_factory=list)


class AdamW:
    """Adam with decoupled weight decay over a dict of parameter arrays."""

    def __init__(
        self,
        params: dict,
        lr: float = 1e-5,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict) -> None:
        self.t += 1
        for key, grad in grads.items():
            p = self.params[key]
            self.m[key] = self.beta1 * self.m[key] + (1 - self.beta1) * grad
            self.v[key] = self.beta2 * self.v[key] + (1 - self.beta2) * grad * grad
            m_hat = self.m[key] / (1 - self.beta1**self.t)
            v_hat = self.v[key] / (1 - self.beta2**self.t)
            p -= self.lr * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p)


def _aligned_keys(features: dict[Modality, FeatureSet]) -> list[tuple[str, int]]:
    key_sets = {m: set(fs.keys) for m, fs in features.items()}
    common = set.intersection(*key_sets.values())
    for modality, keys in key_sets.items():
        if keys != common:
            missing = sorted(common ^ keys)[:5]
            raise ValidationError(f"features misaligned for {modality.value}: e.g. {missing}")
    return sorted(common)


def _normalize_rows_grad(z: np.ndarray, d_unit: np.ndarray) -> np.ndarray:
    """Backprop through row-wise L2 normalization."""

    norms = np.linalg.norm(z, axis=1, keepdims=True)
    unit = z / norms
    return (d_unit - unit * np.sum(d_unit * unit, axis=1, keepdims=True)) / norms


def train_linear(
    features: dict[Modality, FeatureSet],
    loss_kind: str = "cross_sensory",
    cfg: TrainConfig | None = None,
) -> TrainResult:
    """Minibatch training of one linear encoder per modality."""

    cfg = cfg or TrainConfig()
    cfg.validate()
    if loss_kind not in LOSS_KINDS:
        raise ValidationError(f"loss_kind must be one of {LOSS_KINDS}")
    if loss_kind in ("image", "mse") and Modality.RGB not in features:
        raise ValidationError(f"{loss_kind} loss requires the RGB modality")
    if len(features) < 2:
        raise ValidationError("need at least 2 modalities")
    for fs in features.values():
        fs.validate()

    keys = _aligned_keys(features)
    modalities = sorted(features, key=lambda m: m.value)
    index = {m: {k: i for i, k in enumerate(features[m].keys)} for m in modalities}
    x_all = {m: features[m].x[[index[m][k] for k in keys]] for m in modalities}

    rng = np.random.default_rng(cfg.seed)
    weights = {
        m: rng.normal(0.0, 1.0 / np.sqrt(x_all[m].shape[1]), size=(x_all[m].shape[1], cfg.embed_dim))
        for m in modalities
    }
    trainable = [m for m in modalities if not (cfg.rgb_frozen and m is Modality.RGB)]
    optimizer = AdamW(
        {m: weights[m] for m in trainable},
        lr=cfg.learning_rate,
        weight_decay=cfg.weight_decay,
    )

    n = len(keys)
    batch = min(cfg.batch_size, n)
    order = np.arange(n)
    cursor = n  # force an initial shuffle
    trace: list[float] = []
    for step in range(cfg.n_steps):
        if cursor + batch > n:
            rng.shuffle(order)
            cursor = 0
        rows = order[cursor : cursor + batch]
        cursor += batch

        z = {m: x_all[m][rows] @ weights[m] for m in modalities}
        for m in modalities:
            if not np.all(np.isfinite(z[m])):
                raise TrainingDiverged(f"non-finite {m.value} embeddings at step {step}")
        norms = {m: np.linalg.norm(z[m], axis=1, keepdims=True) for m in modalities}
        if any(np.any(v == 0) for v in norms.values()):
            raise TrainingDiverged(f"zero embedding norm at step {step}")
        unit = {m: z[m] / norms[m] for m in modalities}

        if loss_kind == "image":
            loss, d_unit = image_loss_grad(unit, cfg.temperature)
        elif loss_kind == "cross_sensory":
            loss, d_unit = cross_sensory_loss_grad(unit, cfg.temperature)
        else:
            loss = 0.0
            d_unit = {m: np.zeros_like(unit[m]) for m in modalities}
            for m in modalities:
                if m is Modality.RGB:
                    continue
                part, grad = mse_align_loss_grad(unit[m], unit[Modality.RGB])
                loss += part
                d_unit[m] += grad

        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {step}: {loss}")
        trace.append(float(loss))

        grads = {}
        for m in trainable:
            dz = _normalize_rows_grad(z[m], d_unit[m])
            grads[m] = x_all[m][rows].T @ dz
        optimizer.step(grads)

    return TrainResult(
        encoders=LinearEncoderSet(weights=weights, rgb_frozen=cfg.rgb_frozen),
        loss_trace=trace,
    )


def table_from_encoders(
    encoders: LinearEncoderSet, features: dict[Modality, FeatureSet]
) -> EmbeddingTable:
    """Encode features into a unit-normalized embedding table."""

    dim = next(iter(encoders.weights.values())).shape[1]
    table = EmbeddingTable(dim)
    for modality, fs in features.items():
        encoded = encoders.encode(modality, fs.x)
        for (obj, point), vec in zip(fs.keys, encoded):
            table.put(modality, obj, point, vec)
    return table


@dataclass
class SweepPoint:
    size: int
    accuracy: float  # mean top-k over all ordered modality pairs
    per_pair: dict[tuple[Modality, Modality], float] = field(default_factory=dict)


def scaling_sweep(
    features: dict[Modality, FeatureSet],
    sizes: list[int],
    cfg: TrainConfig | None = None,
    eval_cfg: EvalConfig | None = None,
    n_test: int = 20,
    loss_kind: str = "cross_sensory",
    top_k: int = 5,
) -> list[SweepPoint]:
    """Train on seeded object subsets of each size; evaluate on a fixed test set."""

    cfg = cfg or TrainConfig()
    eval_cfg = eval_cfg or EvalConfig(top_k=(top_k,), n_samplings=3, seed=cfg.seed)
    all_objects = sorted(set.intersection(*(set(fs.object_ids()) for fs in features.values())))
    if n_test >= len(all_objects):
        raise ValidationError("n_test leaves no training objects")
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(all_objects))
    test_ids = {all_objects[i] for i in order[:n_test]}
    train_pool = [all_objects[i] for i in order[n_test:]]
    if max(sizes) > len(train_pool):
        raise ValidationError(f"size {max(sizes)} exceeds train pool {len(train_pool)}")

    test_features = {m: fs.subset(test_ids) for m, fs in features.items()}
    curve: list[SweepPoint] = []
    for size in sizes:
        subset_ids = set(train_pool[:size])
        train_features = {m: fs.subset(subset_ids) for m, fs in features.items()}
        result = train_linear(train_features, loss_kind, cfg)
        table = table_from_encoders(result.encoders, test_features)
        per_pair = {}
        modalities = sorted(features, key=lambda m: m.value)
        for q in modalities:
            for t in modalities:
                if q is t:
                    continue
                res = retrieval_eval(table, q, t, eval_cfg)
                per_pair[(q, t)] = res.accuracies[top_k]
        curve.append(
            SweepPoint(size=size, accuracy=float(np.mean(list(per_pair.values()))), per_pair=per_pair)
        )
    return curve


def synthetic_shared_latent_features(
    n_objects: int = 60,
    n_points: int = 6,
    modalities: tuple[Modality, ...] = (
        Modality.RGB,
        Modality.AUDIO,
        Modality.TACTILE,
        Modality.DEPTH,
    ),
    d_latent: int = 8,
    d_in: int = 16,
    noise: float = 0.05,
    seed: int = 0,
) -> dict[Modality, FeatureSet]:
    """x_m = M_m z + eps with a shared latent z per (object, point)."""

    rng = np.random.default_rng(seed)
    keys = [(f"obj{obj:04d}", p) for obj in range(n_objects) for p in range(n_points)]
    z = rng.normal(size=(len(keys), d_latent))
    features = {}
    for modality in modalities:
        mix = rng.normal(size=(d_latent, d_in))
        x = z @ mix + noise * rng.normal(size=(len(keys), d_in))
        features[modality] = FeatureSet(keys=list(keys), x=x)
    return features
