"""Datasets, balanced pair sampling, ranking, and mean-average-precision evaluation.

Scorers are callables ``scorer(query_vec, gallery_matrix) -> scores`` with the
query always the first argument: the learned similarity is deliberately
asymmetric, so argument order is part of the contract.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from simnet.baselines import cosine_matrix

Scorer = Callable[[np.ndarray, np.ndarray], np.ndarray]


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    """Feature vectors with integer class labels and stable string ids."""

    features: np.ndarray  # (N, K) float
    labels: np.ndarray    # (N,) int
    ids: list[str]
    query_indices: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))
    name: str = "unnamed"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.query_indices = np.asarray(self.query_indices, dtype=np.int64)
        if self.features.ndim != 2:
            raise DatasetError(f"features must be N x K, got shape {self.features.shape}")
        n = self.features.shape[0]
        if self.labels.shape != (n,):
            raise DatasetError(f"labels shape {self.labels.shape} does not match {n} items")
        if len(self.ids) != n:
            raise DatasetError(f"{len(self.ids)} ids for {n} items")
        if self.query_indices.size and (
            self.query_indices.min() < 0 or self.query_indices.max() >= n
        ):
            raise DatasetError("query index out of range")

    @property
    def n_items(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def n_classes(self) -> int:
        return len(np.unique(self.labels))

    def non_query_indices(self) -> np.ndarray:
        mask = np.ones(self.n_items, dtype=bool)
        mask[self.query_indices] = False
        return np.flatnonzero(mask)


@dataclass
class PairBatch:
    """Index pairs with match labels and the cosine of each pair's features."""

    idx_i: np.ndarray
    idx_j: np.ndarray
    labels: np.ndarray        # 1 = same class, 0 = different
    baseline_sims: np.ndarray

    def __post_init__(self):
        self.idx_i = np.asarray(self.idx_i, dtype=np.int64)
        self.idx_j = np.asarray(self.idx_j, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.baseline_sims = np.asarray(self.baseline_sims, dtype=np.float64)
        n = self.idx_i.size
        if not (self.idx_j.size == self.labels.size == self.baseline_sims.size == n):
            raise ValueError("pair batch arrays must share one length")
        if np.any(self.idx_i == self.idx_j):
            raise ValueError("self-pairs are not allowed")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("pair labels must be 0 or 1")

    def __len__(self) -> int:
        return self.idx_i.size

    def subset(self, sel: np.ndarray) -> "PairBatch":
        return PairBatch(
            self.idx_i[sel], self.idx_j[sel], self.labels[sel], self.baseline_sims[sel]
        )

    @staticmethod
    def concatenate(batches: Sequence["PairBatch"]) -> "PairBatch":
        return PairBatch(
            np.concatenate([b.idx_i for b in batches]),
            np.concatenate([b.idx_j for b in batches]),
            np.concatenate([b.labels for b in batches]),
            np.concatenate([b.baseline_sims for b in batches]),
        )

    def check_against(self, dataset: Dataset) -> None:
        """Verify labels and cached cosines against the dataset (test helper)."""
        same = dataset.labels[self.idx_i] == dataset.labels[self.idx_j]
        if not np.array_equal(same.astype(np.int64), self.labels):
            raise ValueError("pair labels disagree with dataset labels")
        feats = dataset.features
        for i, j, s in zip(self.idx_i, self.idx_j, self.baseline_sims):
            from simnet.baselines import cosine_similarity

            if abs(cosine_similarity(feats[i], feats[j]) - s) > 1e-9:
                raise ValueError(f"stale baseline similarity for pair ({i}, {j})")


@dataclass
class RankedList:
    query_index: int
    gallery_indices: np.ndarray  # descending score, ties by ascending index
    scores: np.ndarray


@dataclass
class EvalReport:
    scorer_name: str
    dataset_name: str
    query_indices: list[int]
    per_query_ap: list[float]
    map_score: float
    n_skipped: int
    elapsed_seconds: float

    def to_records(self) -> list[dict]:
        recs = [
            {"scorer": self.scorer_name, "query": int(q), "ap": float(ap)}
            for q, ap in zip(self.query_indices, self.per_query_ap)
        ]
        recs.append(
            {
                "scorer": self.scorer_name,
                "dataset": self.dataset_name,
                "map": float(self.map_score),
                "queries": len(self.per_query_ap),
                "skipped": self.n_skipped,
                "elapsed_seconds": self.elapsed_seconds,
            }
        )
        return recs


def select_queries(dataset: Dataset, fraction: float, seed: int) -> np.ndarray:
    """Deterministically pick round(fraction * N) item indices as queries."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"query fraction must be in (0, 1), got {fraction}")
    n = dataset.n_items
    n_queries = max(1, int(round(fraction * n)))
    if n_queries >= n:
        raise ValueError("query fraction leaves no gallery items")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=n_queries, replace=False))


def sample_balanced_pairs(
    dataset: Dataset, n_pairs: int, seed: int, exclude_queries: bool = True
) -> PairBatch:
    """floor(n/2) similar + ceil(n/2) dissimilar pairs, no self-pairs.

    Similar pairs are class-uniform (uniform over classes with >= 2 eligible
    members, then uniform over member pairs). Query items are excluded from
    sampling by default so held-out queries stay unseen during training.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    eligible = dataset.non_query_indices() if exclude_queries else np.arange(dataset.n_items)
    labels = dataset.labels[eligible]
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < 2:
        raise DatasetError("need at least 2 classes to sample dissimilar pairs")
    multi = classes[counts >= 2]
    if multi.size == 0:
        raise DatasetError("every class is a singleton; cannot form a similar pair")

    rng = np.random.default_rng(seed)
    n_sim = n_pairs // 2
    n_dis = n_pairs - n_sim
    members = {c: eligible[labels == c] for c in classes}

    ii, jj, ll = [], [], []
    for c in rng.choice(multi, size=n_sim):
        pick = rng.choice(members[c], size=2, replace=False)
        ii.append(pick[0])
        jj.append(pick[1])
        ll.append(1)
    for _ in range(n_dis):
        while True:
            a, b = rng.choice(eligible, size=2, replace=False)
            if dataset.labels[a] != dataset.labels[b]:
                break
        ii.append(a)
        jj.append(b)
        ll.append(0)

    idx_i = np.array(ii, dtype=np.int64)
    idx_j = np.array(jj, dtype=np.int64)
    feats = dataset.features
    dots = np.einsum("ij,ij->i", feats[idx_i], feats[idx_j])
    norms = np.linalg.norm(feats[idx_i], axis=1) * np.linalg.norm(feats[idx_j], axis=1)
    sims = np.clip(dots / norms, -1.0, 1.0)
    return PairBatch(idx_i, idx_j, np.array(ll, dtype=np.int64), sims)


def rank(scorer: Scorer, dataset: Dataset, query_index: int) -> RankedList:
    """Score every non-query item against the query and sort them.

    The gallery is the dataset's non-query items (minus the query itself,
    for a query outside the designated set). The query is always the
    scorer's FIRST argument. Sort is by descending score with ties broken
    by ascending gallery index.
    """
    if not 0 <= query_index < dataset.n_items:
        raise IndexError(f"query index {query_index} out of range [0, {dataset.n_items})")
    mask = np.ones(dataset.n_items, dtype=bool)
    mask[dataset.query_indices] = False
    mask[query_index] = False
    gallery = np.flatnonzero(mask)
    if gallery.size == 0:
        raise ValueError("no gallery items to rank (every item is a query)")
    try:
        scores = np.asarray(
            scorer(dataset.features[query_index], dataset.features[gallery]), dtype=np.float64
        )
    except Exception as exc:
        raise RuntimeError(f"scorer failed on query {query_index}: {exc}") from exc
    if scores.shape != (gallery.size,):
        raise ValueError(
            f"scorer returned shape {scores.shape} for {gallery.size} gallery items"
        )
    if not np.isfinite(scores).all():
        bad = gallery[int(np.flatnonzero(~np.isfinite(scores))[0])]
        raise ValueError(f"scorer produced a non-finite score for pair ({query_index}, {bad})")
    order = np.lexsort((gallery, -scores))
    return RankedList(query_index, gallery[order], scores[order])


def average_precision(ranked: RankedList, relevance: np.ndarray) -> float:
    """AP = mean over relevant ranks of precision-at-that-rank.

    ``relevance`` is indexed by dataset item index (boolean). Raises if the
    gallery holds no relevant item.
    """
    rel = np.asarray(relevance, dtype=bool)[ranked.gallery_indices]
    n_rel = int(rel.sum())
    if n_rel == 0:
        raise ValueError(f"query {ranked.query_index} has no relevant gallery item")
    hits = np.cumsum(rel)
    ranks = np.arange(1, rel.size + 1)
    return float((hits[rel] / ranks[rel]).sum() / n_rel)


def mean_average_precision(
    scorer: Scorer,
    dataset: Dataset,
    scorer_name: str = "scorer",
) -> EvalReport:
    """Mean AP over the dataset's queries; relevance = same class label.

    Queries whose class never appears in the gallery are skipped (AP is
    undefined there), warned about, and counted in the report.
    """
    if dataset.query_indices.size == 0:
        raise DatasetError("dataset has no query indices")
    t0 = time.perf_counter()
    aps: list[float] = []
    kept: list[int] = []
    skipped = 0
    non_query = np.ones(dataset.n_items, dtype=bool)
    non_query[dataset.query_indices] = False
    for q in dataset.query_indices:
        q = int(q)
        relevance = dataset.labels == dataset.labels[q]
        relevance[q] = False
        if not (relevance & non_query).any():
            warnings.warn(f"query {q}: no relevant gallery item, skipping", RuntimeWarning)
            skipped += 1
            continue
        aps.append(average_precision(rank(scorer, dataset, q), relevance))
        kept.append(q)
    if not aps:
        raise DatasetError("no query had a relevant gallery item")
    return EvalReport(
        scorer_name=scorer_name,
        dataset_name=dataset.name,
        query_indices=kept,
        per_query_ap=aps,
        map_score=float(np.mean(aps)),
        n_skipped=skipped,
        elapsed_seconds=time.perf_counter() - t0,
    )


def cosine_scorer(query: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    """Ready-made cosine scorer matching the Scorer calling convention."""
    return cosine_matrix(query, gallery)
