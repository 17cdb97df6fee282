"""The learned similarity network: presets, pair scoring, margin loss, training.

The scorer g maps a concatenated, per-vector-L2-normalized pair to an
unbounded real score. Training regresses the score onto ``cosine ± margin``
(plus for matching pairs, minus for non-matching) with an absolute-error
loss; ``margin = 0`` collapses both branches to plain cosine imitation,
which is the warm-up regime. Difficult-pair refinement (the starred model
variant) mines pairs the trained model scores on the wrong side of the
cosine baseline and retrains with them mixed into the pool.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from simnet.nn import (
    MomentumState,
    Network,
    OptimizerConfig,
    backprop,
    build_network,
    forward,
    sgd_step,
)
from simnet.retrieval import Dataset, PairBatch, sample_balanced_pairs

ARCH_PRESETS: dict[str, list[int]] = {
    "A": [1024, 1024],
    "B": [4096, 4096],
    "C": [8192, 8192],
    "D": [4096, 4096, 4096],
}

# Published full-scale results (Landmarks-trained, RMAC features; Paris6k mAP).
# Not reproducible at desk scale — kept for context in reports and docs.
FULL_SCALE_REFERENCE = {
    "warmup_mse": {"A": 0.00035, "B": 0.00019, "C": 0.00012, "D": 0.00019},
    "warmup_rho": {"A": 0.909, "B": 0.965, "C": 0.974, "D": 0.964},
    "paris6k_map": {
        "cosine": 0.638,
        "linear_0.2": 0.660,
        "simnet_0.2": 0.757,
        "simnet_star_0.8": 0.891,
        "frozen_e2e": (0.683, 0.710),
    },
}


class DivergenceError(RuntimeError):
    """Warm-up validation loss blew past the abort threshold."""


def _round_to_multiple_of_8(x: float) -> int:
    return max(8, int(np.floor(x / 8.0 + 0.5)) * 8)


@dataclass
class ArchConfig:
    """Network topology: named preset or custom hidden dims, plus a width scale."""

    name: Literal["A", "B", "C", "D", "Custom"]
    input_dim_per_vector: int
    hidden_dims: list[int] | None = None
    width_scale: float = 1.0

    def __post_init__(self):
        if self.input_dim_per_vector < 1:
            raise ValueError(f"feature dim must be >= 1, got {self.input_dim_per_vector}")
        if self.width_scale <= 0:
            raise ValueError(f"width_scale must be > 0, got {self.width_scale}")
        if self.name == "Custom":
            if self.hidden_dims is None:
                raise ValueError("Custom arch needs explicit hidden_dims")
        elif self.name in ARCH_PRESETS:
            if self.hidden_dims is None:
                self.hidden_dims = list(ARCH_PRESETS[self.name])
        else:
            raise ValueError(f"unknown arch name {self.name!r}")
        if any(d < 1 for d in self.hidden_dims):
            raise ValueError(f"hidden dims must be positive, got {self.hidden_dims}")

    def scaled_hidden_dims(self) -> list[int]:
        if self.width_scale == 1.0:
            return list(self.hidden_dims)
        return [_round_to_multiple_of_8(d * self.width_scale) for d in self.hidden_dims]

    def layer_dims(self) -> list[int]:
        """Full dim chain: concatenated pair in, scalar score out."""
        return [2 * self.input_dim_per_vector] + self.scaled_hidden_dims() + [1]


@dataclass
class SimNetModel:
    arch: ArchConfig
    net: Network
    input_norm: Literal["l2_each", "none"] = "l2_each"

    def __post_init__(self):
        if self.net.input_dim != 2 * self.arch.input_dim_per_vector:
            raise ValueError(
                f"net input dim {self.net.input_dim} != 2 x {self.arch.input_dim_per_vector}"
            )
        if self.net.output_dim != 1:
            raise ValueError(f"net must output a scalar, got dim {self.net.output_dim}")

    @property
    def feature_dim(self) -> int:
        return self.arch.input_dim_per_vector


@dataclass
class Convergence:
    patience: int = 5
    min_delta: float = 1e-4

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class TrainConfig:
    margin: float = 0.2
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    max_epochs: int = 50
    convergence: Convergence = field(default_factory=Convergence)
    mined_fraction_cap: float = 0.5
    val_fraction: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.margin <= 1.0:
            raise ValueError(f"margin must be in [0, 1], got {self.margin}")
        if not 0.0 <= self.mined_fraction_cap <= 1.0:
            raise ValueError(f"mined_fraction_cap must be in [0, 1], got {self.mined_fraction_cap}")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")


@dataclass
class WarmupReport:
    mse: float
    correlation_rho: float
    pairs_trained: int
    pairs_validated: int

    def __post_init__(self):
        if self.mse < 0:
            raise ValueError("mse must be >= 0")
        if not -1.0 <= self.correlation_rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")


@dataclass
class EpochRecord:
    epoch: int
    phase: str
    train_loss: float
    val_loss: float


@dataclass
class TrainingLog:
    records: list[EpochRecord] = field(default_factory=list)

    def append(self, rec: EpochRecord) -> None:
        self.records.append(rec)

    def last_epoch(self) -> int:
        return self.records[-1].epoch if self.records else 0

    def phases(self) -> list[str]:
        seen = []
        for r in self.records:
            if not seen or seen[-1] != r.phase:
                seen.append(r.phase)
        return seen

    def to_records(self) -> list[dict]:
        return [
            {
                "epoch": r.epoch,
                "phase": r.phase,
                "train_loss": r.train_loss,
                "val_loss": r.val_loss,
            }
            for r in self.records
        ]


def build_model(arch: ArchConfig, seed: int) -> SimNetModel:
    """Fresh model with nn-core init; deterministic for a given seed."""
    return SimNetModel(arch, build_network(arch.layer_dims(), seed=seed))


def normalize_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot L2-normalize a zero vector")
    return x / norms


def _pair_inputs(model: SimNetModel, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("pair scoring requires finite inputs")
    if model.input_norm == "l2_each":
        a = normalize_rows(a)
        b = normalize_rows(b)
    return np.concatenate([a, b], axis=-1)


def score_pair(model: SimNetModel, x_i: np.ndarray, x_j: np.ndarray) -> float:
    """s_ij = g(concat(norm(x_i), norm(x_j))). Unbounded; higher = more similar."""
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    k = model.feature_dim
    if x_i.shape != (k,) or x_j.shape != (k,):
        raise ValueError(f"expected two length-{k} vectors, got {x_i.shape} and {x_j.shape}")
    out, _ = forward(model.net, _pair_inputs(model, x_i, x_j))
    return float(out[0])


def score_pairs(
    model: SimNetModel, a: np.ndarray, b: np.ndarray, chunk: int = 65536
) -> np.ndarray:
    """Vectorized score_pair over row-aligned matrices (n, K) -> (n,)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != model.feature_dim:
        raise ValueError(f"expected matching (n, {model.feature_dim}) matrices")
    out = np.empty(a.shape[0])
    for lo in range(0, a.shape[0], chunk):
        hi = min(lo + chunk, a.shape[0])
        x = _pair_inputs(model, a[lo:hi], b[lo:hi])
        out[lo:hi] = forward(model.net, x)[0][:, 0]
    return out


def pair_loss(s_ij: float, sim_ij: float, label: int, margin: float) -> float:
    """|s - (sim + margin)| for matches, |s - (sim - margin)| for non-matches.

    Targets are deliberately NOT clamped to [-1, 1]; the score head is
    unbounded and targets like 0.9 + 0.8 are meaningful regression goals.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    target = sim_ij + margin if label == 1 else sim_ij - margin
    return abs(s_ij - target)


def pair_targets(sims: np.ndarray, labels: np.ndarray, margin: float) -> np.ndarray:
    return sims + margin * (2.0 * labels - 1.0)


def _train_array(
    model: SimNetModel,
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: OptimizerConfig,
    state: MomentumState,
    order: np.ndarray,
) -> float:
    """One epoch of L1 regression over pre-built network inputs; returns mean loss.

    Gradients are summed (not averaged) over the batch — the classic
    framework convention the training hyperparameters assume. Averaging
    instead shrinks every step 100x and stalls the cosine warm-up far short
    of its regression targets.
    """
    total = 0.0
    net = model.net
    for lo in range(0, order.size, cfg.batch_size):
        sel = order[lo : lo + cfg.batch_size]
        out, cache = forward(net, inputs[sel])
        resid = out[:, 0] - targets[sel]
        total += np.abs(resid).sum()
        upstream = np.sign(resid)[:, None]
        grads = backprop(net, cache, upstream)
        sgd_step(net, grads, state, cfg)
    return total / order.size


def _eval_l1(model: SimNetModel, inputs: np.ndarray, targets: np.ndarray) -> float:
    out, _ = forward(model.net, inputs)
    return float(np.abs(out[:, 0] - targets).mean())


def warmup(
    model: SimNetModel,
    dim: int,
    n_train_pairs: int,
    n_val_pairs: int,
    optimizer: OptimizerConfig,
    seed: int,
    chunk_pairs: int = 50000,
) -> WarmupReport:
    """Regress the fresh network onto cosine over random unit-norm pairs.

    Pairs are i.i.d. standard-normal vectors, L2-normalized; the target is
    their cosine (margin 0). Validation uses a held-out set drawn first from
    the same stream. Aborts with a diagnostic if validation MSE exceeds 10x
    its starting value. The model is mutated in place.
    """
    if dim != model.feature_dim:
        raise ValueError(f"dim {dim} does not match model feature dim {model.feature_dim}")
    if n_val_pairs < 2:
        raise ValueError("need at least 2 validation pairs")
    rng = np.random.default_rng(seed)

    def draw(n):
        a = normalize_rows(rng.standard_normal((n, dim)))
        b = normalize_rows(rng.standard_normal((n, dim)))
        return a, b

    val_a, val_b = draw(n_val_pairs)
    val_inputs = np.concatenate([val_a, val_b], axis=1)
    val_targets = np.einsum("ij,ij->i", val_a, val_b)

    def val_mse():
        out, _ = forward(model.net, val_inputs)
        return float(((out[:, 0] - val_targets) ** 2).mean())

    initial_mse = val_mse()
    state = MomentumState.zeros_like(model.net)
    trained = 0
    while trained < n_train_pairs:
        n = min(chunk_pairs, n_train_pairs - trained)
        a, b = draw(n)
        inputs = np.concatenate([a, b], axis=1)
        targets = np.einsum("ij,ij->i", a, b)
        _train_array(model, inputs, targets, optimizer, state, np.arange(n))
        trained += n
        mse = val_mse()
        # inverted comparison so a NaN loss also counts as divergence
        if not mse <= 10.0 * max(initial_mse, 1e-12):
            raise DivergenceError(
                f"warm-up diverged after {trained} pairs: val MSE {mse:.3e} "
                f"vs initial {initial_mse:.3e}"
            )

    out, _ = forward(model.net, val_inputs)
    scores = out[:, 0]
    mse = float(((scores - val_targets) ** 2).mean())
    if scores.std() == 0.0 or val_targets.std() == 0.0:
        rho = 0.0
    else:
        rho = float(np.corrcoef(scores, val_targets)[0, 1])
    return WarmupReport(
        mse=mse,
        correlation_rho=float(np.clip(rho, -1.0, 1.0)),
        pairs_trained=trained,
        pairs_validated=n_val_pairs,
    )


def _pair_feature_matrix(model: SimNetModel, dataset: Dataset, pairs: PairBatch) -> np.ndarray:
    feats = dataset.features
    return _pair_inputs(model, feats[pairs.idx_i], feats[pairs.idx_j])


def _split_pairs(n: int, val_fraction: float, rng: np.random.Generator):
    """Shuffled train/val index split; tiny pools validate on themselves."""
    perm = rng.permutation(n)
    n_val = int(np.floor(val_fraction * n))
    if n_val == 0 or n - n_val == 0:
        return perm, perm.copy()
    return perm[n_val:], perm[:n_val]


def train(
    model: SimNetModel,
    dataset: Dataset,
    pairs: PairBatch,
    cfg: TrainConfig,
    phase: str = "train",
    log: TrainingLog | None = None,
    mined: PairBatch | None = None,
) -> TrainingLog:
    """Mini-batch SGD on the margin loss until convergence or max_epochs.

    A held-out slice of ``pairs`` (cfg.val_fraction) drives early stopping:
    training stops after ``patience`` epochs without a val-loss improvement
    of at least ``min_delta``. ``mined`` pairs, if given, are injected into
    every batch capped at cfg.mined_fraction_cap of the batch and never
    enter the validation split.
    """
    if len(pairs) == 0:
        raise ValueError("cannot train on an empty pair set")
    if dataset.n_classes() < 2:
        raise ValueError("dataset has a single class; no dissimilar pairs exist")
    log = log if log is not None else TrainingLog()
    if cfg.max_epochs == 0:
        return log

    rng = np.random.default_rng(cfg.optimizer.seed)
    inputs = _pair_feature_matrix(model, dataset, pairs)
    targets = pair_targets(pairs.baseline_sims, pairs.labels, cfg.margin)
    train_idx, val_idx = _split_pairs(len(pairs), cfg.val_fraction, rng)

    if mined is not None and len(mined) > 0 and cfg.mined_fraction_cap > 0:
        mined_inputs = _pair_feature_matrix(model, dataset, mined)
        mined_targets = pair_targets(mined.baseline_sims, mined.labels, cfg.margin)
    else:
        mined_inputs = mined_targets = None

    state = MomentumState.zeros_like(model.net)
    best_val = np.inf
    stale = 0
    epoch0 = log.last_epoch()
    for epoch in range(1, cfg.max_epochs + 1):
        order = train_idx[rng.permutation(train_idx.size)]
        if mined_inputs is None:
            train_loss = _train_array(
                model, inputs, targets, cfg.optimizer, state, order
            )
        else:
            train_loss = _train_mixed_epoch(
                model, inputs, targets, mined_inputs, mined_targets,
                cfg, state, order, rng,
            )
        val_loss = _eval_l1(model, inputs[val_idx], targets[val_idx])
        log.append(EpochRecord(epoch0 + epoch, phase, float(train_loss), val_loss))
        if best_val - val_loss > cfg.convergence.min_delta:
            best_val = val_loss
            stale = 0
        else:
            stale += 1
            if stale >= cfg.convergence.patience:
                break
    return log


def _train_mixed_epoch(
    model: SimNetModel,
    inputs: np.ndarray,
    targets: np.ndarray,
    mined_inputs: np.ndarray,
    mined_targets: np.ndarray,
    cfg: TrainConfig,
    state: MomentumState,
    order: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """One epoch over base pairs with mined pairs injected under the batch cap."""
    bsz = cfg.optimizer.batch_size
    k_cap = int(np.floor(cfg.mined_fraction_cap * bsz))
    n_mined = mined_inputs.shape[0]
    if k_cap >= bsz:
        # cap does not bind: plain shuffle of the combined pool
        all_inputs = np.concatenate([inputs[order], mined_inputs], axis=0)
        all_targets = np.concatenate([targets[order], mined_targets])
        perm = rng.permutation(all_inputs.shape[0])
        return _train_array(model, all_inputs, all_targets, cfg.optimizer, state, perm)

    mined_order = rng.permutation(n_mined)
    total, count = 0.0, 0
    bi = mi = 0
    net = model.net
    while bi < order.size:
        k = min(k_cap, n_mined - mi)
        nb = min(bsz - k, order.size - bi)
        sel = order[bi : bi + nb]
        x = inputs[sel]
        t = targets[sel]
        if k > 0:
            msel = mined_order[mi : mi + k]
            x = np.concatenate([x, mined_inputs[msel]], axis=0)
            t = np.concatenate([t, mined_targets[msel]])
        out, cache = forward(net, x)
        resid = out[:, 0] - t
        total += np.abs(resid).sum()
        count += resid.size
        upstream = np.sign(resid)[:, None]
        grads = backprop(net, cache, upstream)
        sgd_step(net, grads, state, cfg.optimizer)
        bi += nb
        mi += k
    return total / count


def mine_difficult_pairs(
    model: SimNetModel, dataset: Dataset, candidate_pool_size: int, seed: int
) -> PairBatch:
    """All candidate pairs the model scores on the wrong side of cosine.

    Draws a random candidate set (query items excluded), scores every
    unordered pair, and keeps exactly those where a match scores strictly
    below its cosine or a non-match strictly above it.
    """
    if candidate_pool_size < 2:
        raise ValueError("candidate pool must hold at least 2 items")
    eligible = dataset.non_query_indices()
    rng = np.random.default_rng(seed)
    pool = np.sort(rng.choice(eligible, size=min(candidate_pool_size, eligible.size),
                              replace=False))
    ii, jj = np.triu_indices(pool.size, k=1)
    idx_i, idx_j = pool[ii], pool[jj]

    feats = dataset.features
    a, b = feats[idx_i], feats[idx_j]
    an = normalize_rows(a)
    bn = normalize_rows(b)
    sims = np.clip(np.einsum("ij,ij->i", an, bn), -1.0, 1.0)
    scores = score_pairs(model, a, b)
    labels = (dataset.labels[idx_i] == dataset.labels[idx_j]).astype(np.int64)

    hard = ((labels == 1) & (scores < sims)) | ((labels == 0) & (scores > sims))
    return PairBatch(idx_i[hard], idx_j[hard], labels[hard], sims[hard])


def train_with_refinement(
    model: SimNetModel,
    dataset: Dataset,
    cfg: TrainConfig,
    n_pairs: int = 20000,
    candidate_pool_size: int = 200,
    seed: int | None = None,
) -> TrainingLog:
    """The starred training procedure: train, mine difficult pairs, retrain.

    Phase "base" trains on a balanced random pool to convergence. Difficult
    pairs are then mined from a fresh random candidate set and injected into
    phase "refine" batches under cfg.mined_fraction_cap. A cap of 0 makes
    the whole procedure bit-identical to plain train. An empty mined set
    still runs a single confirmation epoch.
    """
    seed = cfg.optimizer.seed if seed is None else seed
    pairs = sample_balanced_pairs(dataset, n_pairs, seed)
    log = train(model, dataset, pairs, cfg, phase="base")
    if cfg.mined_fraction_cap == 0.0:
        return log

    mined = mine_difficult_pairs(model, dataset, candidate_pool_size, seed + 1)
    refine_cfg = replace(cfg, optimizer=replace(cfg.optimizer, seed=cfg.optimizer.seed + 1))
    if len(mined) == 0:
        refine_cfg = replace(refine_cfg, max_epochs=1)
        return train(model, dataset, pairs, refine_cfg, phase="refine", log=log)
    return train(model, dataset, pairs, refine_cfg, phase="refine", log=log, mined=mined)


def train_end_to_end(
    encoder: Network,
    model: SimNetModel,
    dataset: Dataset,
    cfg: TrainConfig,
    n_pairs: int = 5000,
    seed: int | None = None,
    joint_lr: float | None = None,
) -> TrainingLog:
    """Two-phase training of encoder + scorer on raw inputs.

    Phase "frozen": encode the dataset once and train the scorer on the
    fixed features. Phase "joint": gradients flow through the score, the
    concatenation, and the per-vector normalization into the encoder; the
    cosine target is recomputed from the current encoder each batch (as a
    constant — no gradient flows through the target). ``joint_lr`` overrides
    the learning rate in phase 2; 0 disables updates entirely (both encoder
    and scorer stay frozen, useful as a control).
    """
    if encoder.output_dim != model.feature_dim:
        raise ValueError(
            f"encoder outputs dim {encoder.output_dim}, scorer expects {model.feature_dim}"
        )
    if dataset.feature_dim != encoder.input_dim:
        raise ValueError(
            f"dataset has raw dim {dataset.feature_dim}, encoder expects {encoder.input_dim}"
        )
    if model.input_norm != "l2_each":
        raise ValueError("end-to-end training requires per-vector normalization")
    seed = cfg.optimizer.seed if seed is None else seed

    # Phase 1: frozen encoder, plain feature-space training.
    encoded, _ = forward(encoder, dataset.features)
    feat_ds = Dataset(
        encoded, dataset.labels, dataset.ids,
        query_indices=dataset.query_indices, name=dataset.name + ":encoded",
    )
    pairs = sample_balanced_pairs(feat_ds, n_pairs, seed)
    log = train(model, feat_ds, pairs, cfg, phase="frozen")

    # Phase 2: joint fine-tuning through the encoder.
    lr = cfg.optimizer.learning_rate if joint_lr is None else joint_lr
    if lr == 0.0:
        return log
    opt = replace(cfg.optimizer, learning_rate=lr, seed=cfg.optimizer.seed + 1)
    rng = np.random.default_rng(opt.seed)
    train_idx, val_idx = _split_pairs(len(pairs), cfg.val_fraction, rng)
    enc_state = MomentumState.zeros_like(encoder)
    net_state = MomentumState.zeros_like(model.net)
    raw = dataset.features
    labels_pm = 2.0 * pairs.labels - 1.0

    def joint_losses(sel: np.ndarray) -> float:
        ra, rb = raw[pairs.idx_i[sel]], raw[pairs.idx_j[sel]]
        fa = forward(encoder, ra)[0]
        fb = forward(encoder, rb)[0]
        na, nb = normalize_rows(fa), normalize_rows(fb)
        sims = np.clip(np.einsum("ij,ij->i", na, nb), -1.0, 1.0)
        s = forward(model.net, np.concatenate([na, nb], axis=1))[0][:, 0]
        t = sims + cfg.margin * labels_pm[sel]
        return float(np.abs(s - t).mean())

    best_val = np.inf
    stale = 0
    epoch0 = log.last_epoch()
    for epoch in range(1, cfg.max_epochs + 1):
        order = train_idx[rng.permutation(train_idx.size)]
        total = 0.0
        for lo in range(0, order.size, opt.batch_size):
            sel = order[lo : lo + opt.batch_size]
            ra, rb = raw[pairs.idx_i[sel]], raw[pairs.idx_j[sel]]
            fa, cache_a = forward(encoder, ra)
            fb, cache_b = forward(encoder, rb)
            norm_a = np.linalg.norm(fa, axis=1, keepdims=True)
            norm_b = np.linalg.norm(fb, axis=1, keepdims=True)
            if np.any(norm_a == 0.0) or np.any(norm_b == 0.0):
                raise ValueError("encoder produced a zero feature vector")
            na, nb = fa / norm_a, fb / norm_b
            sims = np.clip(np.einsum("ij,ij->i", na, nb), -1.0, 1.0)
            targets = sims + cfg.margin * labels_pm[sel]

            x = np.concatenate([na, nb], axis=1)
            s, cache = forward(model.net, x)
            resid = s[:, 0] - targets
            total += np.abs(resid).sum()
            upstream = np.sign(resid)[:, None]
            grads = backprop(model.net, cache, upstream)

            k = model.feature_dim
            ga, gb = grads.input_grad[:, :k], grads.input_grad[:, k:]
            # through y = x/|x|: dx = (g - (g.y) y) / |x|
            da = (ga - np.einsum("ij,ij->i", ga, na)[:, None] * na) / norm_a
            db = (gb - np.einsum("ij,ij->i", gb, nb)[:, None] * nb) / norm_b
            enc_grads_a = backprop(encoder, cache_a, da)
            enc_grads_b = backprop(encoder, cache_b, db)
            merged = enc_grads_a
            for gm, gx in zip(merged.weight_grads, enc_grads_b.weight_grads):
                gm += gx
            for gm, gx in zip(merged.bias_grads, enc_grads_b.bias_grads):
                gm += gx
            sgd_step(model.net, grads, net_state, opt)
            sgd_step(encoder, merged, enc_state, opt)
        train_loss = total / order.size
        val_loss = joint_losses(val_idx)
        log.append(EpochRecord(epoch0 + epoch, "joint", float(train_loss), val_loss))
        if best_val - val_loss > cfg.convergence.min_delta:
            best_val = val_loss
            stale = 0
        else:
            stale += 1
            if stale >= cfg.convergence.patience:
                break
    return log
