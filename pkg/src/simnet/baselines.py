"""Reference similarity functions: cosine, negated Euclidean, and a trained affine map.

The linear baseline is trained with the exact same loss and optimizer as the
similarity network; only the model family differs (a single affine map from
the concatenated pair straight to a scalar score).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, types only
    from simnet.retrieval import Dataset, PairBatch
    from simnet.similarity import TrainConfig, TrainingLog


def cosine_similarity(x_i: np.ndarray, x_j: np.ndarray) -> float:
    """Classic cosine: dot(x_i, x_j) / (|x_i| |x_j|). Undefined for zero vectors."""
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.shape != x_j.shape or x_i.ndim != 1:
        raise ValueError(f"cosine needs two equal-length vectors, got {x_i.shape} and {x_j.shape}")
    ni = np.linalg.norm(x_i)
    nj = np.linalg.norm(x_j)
    if ni == 0.0 or nj == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(x_i, x_j) / (ni * nj), -1.0, 1.0))


def cosine_matrix(query: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    """Cosine of one query vector against each row of a gallery matrix."""
    query = np.asarray(query, dtype=np.float64)
    gallery = np.asarray(gallery, dtype=np.float64)
    nq = np.linalg.norm(query)
    ng = np.linalg.norm(gallery, axis=1)
    if nq == 0.0 or np.any(ng == 0.0):
        raise ValueError("cosine similarity is undefined for a zero vector")
    return np.clip(gallery @ query / (ng * nq), -1.0, 1.0)


def neg_euclidean(x_i: np.ndarray, x_j: np.ndarray) -> float:
    """-||x_i - x_j||: a metric distance flipped so that higher means more similar."""
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.shape != x_j.shape:
        raise ValueError(f"length mismatch: {x_i.shape} vs {x_j.shape}")
    return -float(np.linalg.norm(x_i - x_j))


@dataclass
class LinearModel:
    """Affine map: score = weights . concat(x_i, x_j) + bias."""

    weights: np.ndarray  # (2K,)
    bias: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = float(self.bias)
        if self.weights.ndim != 1 or self.weights.size % 2 != 0:
            raise ValueError(f"weights must be a flat vector of even length, got {self.weights.shape}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias)):
            raise ValueError("linear model parameters must be finite")

    @property
    def feature_dim(self) -> int:
        return self.weights.size // 2


def linear_score(m: LinearModel, x_i: np.ndarray, x_j: np.ndarray) -> float:
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.size + x_j.size != m.weights.size:
        raise ValueError(
            f"pair dims {x_i.size}+{x_j.size} do not match model dim {m.weights.size}"
        )
    return float(m.weights[: x_i.size] @ x_i + m.weights[x_i.size :] @ x_j + m.bias)


def train_linear(
    dataset: "Dataset", pairs: "PairBatch", cfg: "TrainConfig"
) -> tuple[LinearModel, "TrainingLog"]:
    """Fit the affine baseline with the shared margin loss (default margin 0.2).

    Internally trains a zero-hidden-layer similarity model so the loss,
    optimizer, and convergence logic are byte-for-byte the shared ones.
    """
    from simnet.similarity import ArchConfig, build_model, train

    arch = ArchConfig(name="Custom", hidden_dims=[], input_dim_per_vector=dataset.feature_dim)
    model = build_model(arch, seed=cfg.optimizer.seed)
    log = train(model, dataset, pairs, cfg)
    layer = model.net.layers[0]
    return LinearModel(layer.weights[0].copy(), float(layer.bias[0])), log
