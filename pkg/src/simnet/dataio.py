"""Binary feature stores, model checkpoints, and the synthetic benchmark generator.

Feature stores (.simf) hold float32 features with optional i32 labels;
checkpoints hold float64 parameters. Both formats are little-endian and
platform-independent, written atomically (temp file + rename). Optional
sidecar files carry string ids (``<path>.ids``) and held-out query indices
(``<path>.queries``), one entry per line.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from simnet.baselines import LinearModel
from simnet.nn import Activation, DenseLayer, Network
from simnet.retrieval import Dataset
from simnet.similarity import ArchConfig, SimNetModel

FEATURE_MAGIC = b"SIMF"
CHECKPOINT_MAGIC = b"SIMC"
FEATURE_VERSION = 1
CHECKPOINT_VERSION = 1

_KIND_TAGS = {"simnet": 1, "linear": 2, "encoder_simnet": 3}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}


class FormatError(ValueError):
    """A file failed structural validation; ``offset`` names the bad byte."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _atomic_write(path: str | Path, payload: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _read_exact(buf: bytes, offset: int, n: int, what: str) -> bytes:
    if offset + n > len(buf):
        raise FormatError(f"truncated file: expected {n} bytes for {what}", offset)
    return buf[offset : offset + n]


# ---------------------------------------------------------------------------
# SIMF feature stores


def write_feature_store(path: str | Path, dataset: Dataset) -> None:
    """Write features as float32 records with i32 labels, plus sidecars.

    An ``.ids`` sidecar is written only when ids differ from plain record
    indices; a ``.queries`` sidecar only when the dataset has queries.
    """
    path = Path(path)
    n, k = dataset.features.shape
    header = FEATURE_MAGIC + struct.pack("<IQIB", FEATURE_VERSION, n, k, 1)
    feats = dataset.features.astype("<f4")
    labels = dataset.labels.astype("<i4")
    body = bytearray()
    for i in range(n):
        body += labels[i].tobytes()
        body += feats[i].tobytes()
    _atomic_write(path, header + bytes(body))

    ids_path = path.with_name(path.name + ".ids")
    if dataset.ids != [str(i) for i in range(n)]:
        ids_path.write_text("".join(f"{s}\n" for s in dataset.ids), encoding="utf-8")
    elif ids_path.exists():
        ids_path.unlink()

    q_path = path.with_name(path.name + ".queries")
    if dataset.query_indices.size:
        q_path.write_text("".join(f"{int(q)}\n" for q in dataset.query_indices))
    elif q_path.exists():
        q_path.unlink()


def read_feature_store(path: str | Path) -> Dataset:
    path = Path(path)
    buf = path.read_bytes()
    magic = _read_exact(buf, 0, 4, "magic")
    if magic != FEATURE_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FEATURE_MAGIC!r}", 0)
    version = struct.unpack("<I", _read_exact(buf, 4, 4, "version"))[0]
    if version != FEATURE_VERSION:
        raise FormatError(f"unsupported feature-store version {version}", 4)
    n = struct.unpack("<Q", _read_exact(buf, 8, 8, "record count"))[0]
    k = struct.unpack("<I", _read_exact(buf, 16, 4, "feature dim"))[0]
    label_kind = _read_exact(buf, 20, 1, "label kind")[0]
    if label_kind not in (0, 1):
        raise FormatError(f"unknown label kind {label_kind}", 20)

    rec_size = (4 if label_kind else 0) + 4 * k
    expected = 21 + n * rec_size
    if len(buf) != expected:
        raise FormatError(
            f"store length {len(buf)} != header-implied {expected} "
            f"({n} records x {rec_size} bytes)",
            min(len(buf), expected),
        )
    if n and k == 0:
        raise FormatError("records with zero feature dim", 16)

    raw = np.frombuffer(buf, dtype=np.uint8, offset=21).reshape(n, rec_size) if n else \
        np.empty((0, rec_size), dtype=np.uint8)
    if label_kind:
        labels = raw[:, :4].copy().view("<i4")[:, 0].astype(np.int64)
        feats = raw[:, 4:].copy().view("<f4").astype(np.float64)
    else:
        labels = np.zeros(n, dtype=np.int64)
        feats = raw.copy().view("<f4").astype(np.float64)
    feats = feats.reshape(n, k)

    ids_path = path.with_name(path.name + ".ids")
    if ids_path.exists():
        ids = ids_path.read_text(encoding="utf-8").splitlines()
        if len(ids) != n:
            raise FormatError(f"ids sidecar has {len(ids)} lines for {n} records", 0)
    else:
        ids = [str(i) for i in range(n)]

    q_path = path.with_name(path.name + ".queries")
    queries = (
        np.array([int(line) for line in q_path.read_text().split()], dtype=np.int64)
        if q_path.exists()
        else np.array([], dtype=np.int64)
    )
    return Dataset(feats, labels, ids, query_indices=queries, name=path.stem)


# ---------------------------------------------------------------------------
# SIMC checkpoints


def _pack_arrays(arrays: list[np.ndarray]) -> bytes:
    return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)


def _net_meta(net: Network) -> dict:
    return {"layer_dims": net.layer_dims}


def _net_arrays(net: Network) -> list[np.ndarray]:
    out = []
    for layer in net.layers:
        out.append(layer.weights)
        out.append(layer.bias)
    return out


def _read_net(meta: dict, buf: bytes, offset: int) -> tuple[Network, int]:
    dims = meta["layer_dims"]
    layers = []
    n_layers = len(dims) - 1
    for i in range(n_layers):
        in_dim, out_dim = dims[i], dims[i + 1]
        w_bytes = _read_exact(buf, offset, 8 * in_dim * out_dim, f"layer {i} weights")
        weights = np.frombuffer(w_bytes, dtype="<f8").reshape(out_dim, in_dim).copy()
        offset += 8 * in_dim * out_dim
        b_bytes = _read_exact(buf, offset, 8 * out_dim, f"layer {i} bias")
        bias = np.frombuffer(b_bytes, dtype="<f8").copy()
        offset += 8 * out_dim
        act = Activation.IDENTITY if i == n_layers - 1 else Activation.RELU
        layers.append(DenseLayer(weights, bias, act))
    return Network(layers, dims[0]), offset


def save_checkpoint(
    path: str | Path, model: SimNetModel | LinearModel | tuple[Network, SimNetModel]
) -> None:
    """Serialize a model (or encoder+model pair) with a kind tag and JSON metadata."""
    if isinstance(model, SimNetModel):
        kind = "simnet"
        meta = {
            "arch": {
                "name": model.arch.name,
                "hidden_dims": model.arch.hidden_dims,
                "input_dim_per_vector": model.arch.input_dim_per_vector,
                "width_scale": model.arch.width_scale,
            },
            "input_norm": model.input_norm,
            "net": _net_meta(model.net),
        }
        arrays = _net_arrays(model.net)
    elif isinstance(model, LinearModel):
        kind = "linear"
        meta = {"feature_dim": model.feature_dim}
        arrays = [model.weights, np.array([model.bias])]
    elif isinstance(model, tuple) and len(model) == 2:
        encoder, simnet_model = model
        kind = "encoder_simnet"
        meta = {
            "encoder": _net_meta(encoder),
            "simnet": {
                "arch": {
                    "name": simnet_model.arch.name,
                    "hidden_dims": simnet_model.arch.hidden_dims,
                    "input_dim_per_vector": simnet_model.arch.input_dim_per_vector,
                    "width_scale": simnet_model.arch.width_scale,
                },
                "input_norm": simnet_model.input_norm,
                "net": _net_meta(simnet_model.net),
            },
        }
        arrays = _net_arrays(encoder) + _net_arrays(simnet_model.net)
    else:
        raise TypeError(f"cannot checkpoint object of type {type(model).__name__}")

    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    payload = (
        CHECKPOINT_MAGIC
        + struct.pack("<IB", CHECKPOINT_VERSION, _KIND_TAGS[kind])
        + struct.pack("<I", len(meta_bytes))
        + meta_bytes
        + _pack_arrays(arrays)
    )
    _atomic_write(path, payload)


def _simnet_from_meta(meta: dict, buf: bytes, offset: int) -> tuple[SimNetModel, int]:
    arch = ArchConfig(
        name=meta["arch"]["name"],
        input_dim_per_vector=meta["arch"]["input_dim_per_vector"],
        hidden_dims=meta["arch"]["hidden_dims"],
        width_scale=meta["arch"]["width_scale"],
    )
    net, offset = _read_net(meta["net"], buf, offset)
    return SimNetModel(arch, net, input_norm=meta["input_norm"]), offset


def load_checkpoint(
    path: str | Path, expected_kind: str | None = None
) -> SimNetModel | LinearModel | tuple[Network, SimNetModel]:
    """Load any checkpoint; ``expected_kind`` asserts the model family."""
    buf = Path(path).read_bytes()
    magic = _read_exact(buf, 0, 4, "magic")
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}", 0)
    version, tag = struct.unpack("<IB", _read_exact(buf, 4, 5, "version/kind"))
    if version > CHECKPOINT_VERSION:
        raise FormatError(
            f"checkpoint version {version} is newer than supported {CHECKPOINT_VERSION}", 4
        )
    if tag not in _TAG_KINDS:
        raise FormatError(f"unknown model kind tag {tag}", 8)
    kind = _TAG_KINDS[tag]
    if expected_kind is not None and kind != expected_kind:
        raise FormatError(f"checkpoint holds a {kind} model, expected {expected_kind}", 8)

    meta_len = struct.unpack("<I", _read_exact(buf, 9, 4, "metadata length"))[0]
    meta = json.loads(_read_exact(buf, 13, meta_len, "metadata").decode("utf-8"))
    offset = 13 + meta_len

    if kind == "simnet":
        model, offset = _simnet_from_meta(meta, buf, offset)
        result: SimNetModel | LinearModel | tuple[Network, SimNetModel] = model
    elif kind == "linear":
        k = meta["feature_dim"]
        w = np.frombuffer(
            _read_exact(buf, offset, 8 * 2 * k, "linear weights"), dtype="<f8"
        ).copy()
        offset += 8 * 2 * k
        bias = struct.unpack("<d", _read_exact(buf, offset, 8, "linear bias"))[0]
        offset += 8
        result = LinearModel(w, bias)
    else:
        encoder, offset = _read_net(meta["encoder"], buf, offset)
        model, offset = _simnet_from_meta(meta["simnet"], buf, offset)
        result = (encoder, model)

    if offset != len(buf):
        raise FormatError(f"{len(buf) - offset} trailing bytes after parameters", offset)
    return result


# ---------------------------------------------------------------------------
# Synthetic benchmark generator


@dataclass
class SynthSpec:
    """Recipe for the non-metric synthetic benchmark.

    Classes are noisy caps around unit-sphere prototypes. For each
    consecutive class pair (2t, 2t+1), a ``bridge_fraction`` of each class's
    items is replaced by "bridge" items near the midpoint of the two
    prototypes, labeled with a dedicated class ``n_classes + t``. Bridges
    sit close to both endpoint classes while the endpoints stay far apart —
    the triangle-style structure a metric scorer cannot represent.
    """

    n_classes: int = 10
    per_class: int = 60
    dim: int = 64
    noise_sigma: float = 0.4
    bridge_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1 or self.per_class < 1 or self.dim < 1:
            raise ValueError("n_classes, per_class, and dim must all be >= 1")
        if self.noise_sigma <= 0:
            raise ValueError(f"noise_sigma must be > 0, got {self.noise_sigma}")
        if not 0.0 <= self.bridge_fraction <= 1.0:
            raise ValueError(f"bridge_fraction must be in [0, 1], got {self.bridge_fraction}")
        if self.bridge_fraction > 0 and self.n_classes < 2:
            raise ValueError("bridge items need at least 2 classes")

    @property
    def n_items(self) -> int:
        return self.n_classes * self.per_class


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def generate_synthetic(spec: SynthSpec) -> Dataset:
    """Build the benchmark dataset; deterministic for a given spec.

    Noise is per-component Gaussian with std sigma, so in high dimension the
    displacement norm (~sigma * sqrt(K)) dominates the unit prototype: class
    structure is real but heavily smeared, which is what keeps the plain
    cosine baseline far from ceiling on this benchmark.
    """
    rng = np.random.default_rng(spec.seed)
    protos = _unit(rng.standard_normal((spec.n_classes, spec.dim)))
    comp_std = spec.noise_sigma

    feats = np.empty((spec.n_items, spec.dim))
    labels = np.empty(spec.n_items, dtype=np.int64)
    for c in range(spec.n_classes):
        lo = c * spec.per_class
        noise = comp_std * rng.standard_normal((spec.per_class, spec.dim))
        feats[lo : lo + spec.per_class] = _unit(protos[c] + noise)
        labels[lo : lo + spec.per_class] = c

    n_bridge_per_class = int(np.floor(spec.bridge_fraction * spec.per_class))
    if n_bridge_per_class:
        for t in range(spec.n_classes // 2):
            a, b = 2 * t, 2 * t + 1
            midpoint = 0.5 * (protos[a] + protos[b])
            for c in (a, b):
                lo = c * spec.per_class
                sel = np.arange(lo, lo + n_bridge_per_class)
                noise = comp_std * rng.standard_normal((sel.size, spec.dim))
                feats[sel] = _unit(midpoint + noise)
                labels[sel] = spec.n_classes + t

    ids = [f"synth-{i:05d}" for i in range(spec.n_items)]
    return Dataset(feats, labels, ids, name=f"synthetic-seed{spec.seed}")


def bridge_violation_report(dataset: Dataset, n_base_classes: int) -> dict:
    """Brute-force scan for triangle-style violations induced by bridge items.

    Looks for triples (a, b, c) with a, c in the two endpoint classes of a
    bridge class and b a bridge item, where both cosine(a, b) and
    cosine(b, c) exceed cosine(a, c). Returns counts and the largest gap
    min(cos(a,b), cos(b,c)) - cos(a,c) found.
    """
    feats = _unit(dataset.features)
    bridge_classes = sorted(c for c in np.unique(dataset.labels) if c >= n_base_classes)
    best_gap = -np.inf
    n_violations = 0
    for bc in bridge_classes:
        t = bc - n_base_classes
        a_idx = np.flatnonzero(dataset.labels == 2 * t)
        c_idx = np.flatnonzero(dataset.labels == 2 * t + 1)
        b_idx = np.flatnonzero(dataset.labels == bc)
        if not (a_idx.size and c_idx.size and b_idx.size):
            continue
        cos_ab = feats[a_idx] @ feats[b_idx].T          # (A, B)
        cos_bc = feats[b_idx] @ feats[c_idx].T          # (B, C)
        cos_ac = feats[a_idx] @ feats[c_idx].T          # (A, C)
        # gap[a, b, c] = min(cos_ab[a,b], cos_bc[b,c]) - cos_ac[a,c]
        gap = np.minimum(cos_ab[:, :, None], cos_bc[None, :, :]) - cos_ac[:, None, :]
        n_violations += int((gap > 0).sum())
        best_gap = max(best_gap, float(gap.max()))
    return {
        "bridge_classes": [int(c) for c in bridge_classes],
        "n_violations": n_violations,
        "max_gap": None if best_gap == -np.inf else best_gap,
    }
