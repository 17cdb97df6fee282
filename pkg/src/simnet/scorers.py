"""Adapters that turn every model family into one ranking-scorer shape.

A scorer is ``f(query_vec (K,), gallery (M, K)) -> scores (M,)`` with higher
meaning more similar. This is the single currency the evaluation harness
understands; everything rankable — cosine, Euclidean, the trained affine
map, the similarity network, an encoder+network stack, even a seeded random
control — gets wrapped into it here.

Scorer spec strings (the CLI surface):

    cosine | euclid | linear:PATH | simnet:PATH | e2e:PATH | random:SEED

where PATH is a checkpoint file and SEED a non-negative integer.
"""

from __future__ import annotations

import hashlib
from typing import Callable

import numpy as np

from simnet.baselines import LinearModel
from simnet.nn import Network, forward
from simnet.retrieval import cosine_scorer
from simnet.similarity import SimNetModel, normalize_rows, score_pairs

Scorer = Callable[[np.ndarray, np.ndarray], np.ndarray]

__all__ = [
    "Scorer",
    "cosine_scorer",
    "neg_euclidean_scorer",
    "linear_scorer",
    "simnet_scorer",
    "encoder_scorer",
    "random_scorer",
    "parse_scorer_spec",
]


def neg_euclidean_scorer(query: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    """Negated L2 distance to each gallery row (a metric baseline)."""
    diff = np.asarray(gallery, dtype=np.float64) - np.asarray(query, dtype=np.float64)
    return -np.linalg.norm(diff, axis=1)


def linear_scorer(model: LinearModel) -> Scorer:
    """Ranking adapter for the trained affine baseline.

    Vectors are L2-normalized per side before the affine map, matching the
    convention the model was trained under.
    """

    def scorer(query: np.ndarray, gallery: np.ndarray) -> np.ndarray:
        k = model.feature_dim
        q = normalize_rows(np.asarray(query, dtype=np.float64).reshape(1, k))[0]
        g = normalize_rows(np.asarray(gallery, dtype=np.float64))
        return g @ model.weights[k:] + (model.weights[:k] @ q + model.bias)

    return scorer


def simnet_scorer(model: SimNetModel) -> Scorer:
    """Ranking adapter for a similarity network: query against every row."""

    def scorer(query: np.ndarray, gallery: np.ndarray) -> np.ndarray:
        gallery = np.asarray(gallery, dtype=np.float64)
        tiled = np.broadcast_to(
            np.asarray(query, dtype=np.float64), gallery.shape
        )
        return score_pairs(model, tiled, gallery)

    return scorer


def encoder_scorer(encoder: Network, model: SimNetModel) -> Scorer:
    """Encode raw inputs through the learned encoder, then score pairs."""

    def scorer(query: np.ndarray, gallery: np.ndarray) -> np.ndarray:
        q = forward(encoder, np.asarray(query, dtype=np.float64))[0]
        g = forward(encoder, np.asarray(gallery, dtype=np.float64))[0]
        return score_pairs(model, np.broadcast_to(q, g.shape), g)

    return scorer


def random_scorer(seed: int) -> Scorer:
    """Uniform random scores — the chance-level control.

    The stream is derived from the seed plus a digest of the query vector's
    bytes, so every query gets its own reproducible scores regardless of
    evaluation order.
    """

    def scorer(query: np.ndarray, gallery: np.ndarray) -> np.ndarray:
        digest = hashlib.blake2b(
            np.ascontiguousarray(query, dtype=np.float64).tobytes(), digest_size=8
        ).digest()
        rng = np.random.default_rng([seed, int.from_bytes(digest, "little")])
        return rng.uniform(size=np.asarray(gallery).shape[0])

    return scorer


def parse_scorer_spec(spec: str) -> Scorer:
    """Build a scorer from its CLI spec string (see module docstring)."""
    from simnet.dataio import load_checkpoint

    if spec == "cosine":
        return cosine_scorer
    if spec == "euclid":
        return neg_euclidean_scorer
    kind, _, arg = spec.partition(":")
    if not arg:
        raise ValueError(f"unknown scorer spec {spec!r}")
    if kind == "random":
        try:
            seed = int(arg)
        except ValueError:
            raise ValueError(f"random scorer needs an integer seed, got {arg!r}") from None
        if seed < 0:
            raise ValueError(f"random scorer seed must be >= 0, got {seed}")
        return random_scorer(seed)
    if kind == "linear":
        return linear_scorer(load_checkpoint(arg, expected_kind="linear"))
    if kind == "simnet":
        return simnet_scorer(load_checkpoint(arg, expected_kind="simnet"))
    if kind == "e2e":
        encoder, model = load_checkpoint(arg, expected_kind="encoder_simnet")
        return encoder_scorer(encoder, model)
    raise ValueError(f"unknown scorer spec {spec!r}")
