"""Command-line pipeline: generate, warm up, train, evaluate, compare.

One binary with subcommands. Every run writes a JSON manifest next to its
primary artifact holding the fully resolved configuration, all seeds, and
SHA-256 hashes of inputs and outputs — enough to reproduce the run exactly.
Exit codes: 0 success, 1 runtime failure, 2 usage error.

Thread count for the numeric backend can be capped with ``--threads`` or the
``SIMNET_THREADS`` environment variable (flag wins); it must be applied
before the numeric libraries load, which is why heavy imports happen inside
the command handlers.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path


class UsageError(ValueError):
    """Bad command-line input: reported with exit code 2."""


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _hash_if_exists(paths: list[str]) -> dict[str, str]:
    return {p: _sha256(p) for p in paths if p and Path(p).is_file()}


def write_manifest(
    artifact_path: str,
    command: str,
    config: dict,
    seeds: dict,
    inputs: list[str],
    outputs: list[str],
) -> str:
    """Reproduction record for one run; lives at ``<artifact>.manifest.json``."""
    manifest = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": _hash_if_exists(inputs),
        "outputs": _hash_if_exists(outputs),
    }
    path = artifact_path + ".manifest.json"
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_jsonl(path: str, records: list[dict]) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def _print_eval_table(reports) -> None:
    width = max(len("scorer"), *(len(r.scorer_name) for r in reports))
    print(f"{'scorer':<{width}}  {'mAP':>7}  {'queries':>7}  {'skipped':>7}")
    for r in reports:
        print(
            f"{r.scorer_name:<{width}}  {r.map_score:>7.4f}  "
            f"{len(r.per_query_ap):>7d}  {r.n_skipped:>7d}"
        )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen(args) -> int:
    import numpy as np

    from simnet.dataio import SynthSpec, bridge_violation_report, generate_synthetic, write_feature_store
    from simnet.retrieval import Dataset, select_queries

    if args.queries is not None and args.per_class == 1:
        raise UsageError("--queries needs --per-class > 1: single-member classes leave queries without relevant items")
    try:
        spec = SynthSpec(
            n_classes=args.classes,
            per_class=args.per_class,
            dim=args.dim,
            noise_sigma=args.sigma,
            bridge_fraction=args.bridge,
            seed=args.seed,
        )
        if args.queries is not None and not 0.0 < args.queries < 1.0:
            raise ValueError(f"query fraction must be in (0, 1), got {args.queries}")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    ds = generate_synthetic(spec)
    if args.queries is not None:
        qi = select_queries(ds, args.queries, args.query_seed)
        ds = Dataset(ds.features, ds.labels, ds.ids, query_indices=qi, name=ds.name)
    write_feature_store(args.out, ds)

    classes, counts = np.unique(ds.labels, return_counts=True)
    summary = {
        "spec": asdict(spec),
        "n_items": ds.n_items,
        "dim": ds.feature_dim,
        "n_queries": int(ds.query_indices.size),
        "class_histogram": {int(c): int(n) for c, n in zip(classes, counts)},
    }
    if spec.bridge_fraction > 0:
        summary["non_metric_structure"] = bridge_violation_report(ds, spec.n_classes)
    summary_path = args.out + ".summary.json"
    Path(summary_path).write_text(json.dumps(summary, indent=2) + "\n")

    write_manifest(
        args.out, "gen",
        config=asdict(spec) | {"queries": args.queries, "out": args.out},
        seeds={"spec": spec.seed, "query_seed": args.query_seed},
        inputs=[], outputs=[args.out, summary_path],
    )
    print(f"wrote {ds.n_items} records ({ds.feature_dim}-d, {ds.query_indices.size} queries) to {args.out}")
    return 0


def cmd_warmup(args) -> int:
    from simnet.dataio import save_checkpoint
    from simnet.nn import OptimizerConfig
    from simnet.similarity import ArchConfig, build_model, warmup

    try:
        arch = ArchConfig(args.arch, args.dim, width_scale=args.scale)
        optimizer = OptimizerConfig(
            learning_rate=args.lr, batch_size=args.batch_size, seed=args.seed
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    model = build_model(arch, seed=args.init_seed)
    report = warmup(
        model, args.dim,
        n_train_pairs=args.pairs, n_val_pairs=args.val_pairs,
        optimizer=optimizer, seed=args.seed,
    )
    save_checkpoint(args.out, model)
    print(
        f"warm-up {args.arch} x{args.scale}: dims {arch.layer_dims()}, "
        f"{report.pairs_trained} pairs -> val MSE {report.mse:.5f}, rho {report.correlation_rho:.4f}"
    )
    write_manifest(
        args.out, "warmup",
        config={
            "arch": args.arch, "scale": args.scale, "dim": args.dim,
            "pairs": args.pairs, "val_pairs": args.val_pairs,
            "optimizer": asdict(optimizer), "layer_dims": arch.layer_dims(),
            "mse": report.mse, "rho": report.correlation_rho,
        },
        seeds={"init": args.init_seed, "data": args.seed},
        inputs=[], outputs=[args.out],
    )
    return 0


def cmd_train(args) -> int:
    from simnet.baselines import train_linear
    from simnet.dataio import load_checkpoint, read_feature_store, save_checkpoint
    from simnet.nn import OptimizerConfig
    from simnet.retrieval import sample_balanced_pairs
    from simnet.similarity import TrainConfig, train, train_with_refinement

    if args.family == "linear" and args.refine:
        raise UsageError("--refine applies to the similarity network only, not --family linear")
    if args.family == "simnet" and not args.model_in:
        raise UsageError("similarity training starts from a warmed model: pass --model-in")
    try:
        cfg = TrainConfig(
            margin=args.delta,
            optimizer=OptimizerConfig(seed=args.seed),
            max_epochs=args.max_epochs,
            mined_fraction_cap=args.mined_cap,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    ds = read_feature_store(args.store)
    if args.family == "linear":
        pairs = sample_balanced_pairs(ds, args.pairs, args.seed)
        model, log = train_linear(ds, pairs, cfg)
        save_checkpoint(args.out, model)
    else:
        model = load_checkpoint(args.model_in, expected_kind="simnet")
        if model.feature_dim != ds.feature_dim:
            raise ValueError(
                f"model expects {model.feature_dim}-d features, store holds {ds.feature_dim}-d"
            )
        if args.refine:
            log = train_with_refinement(
                model, ds, cfg,
                n_pairs=args.pairs, candidate_pool_size=args.pool_size, seed=args.seed,
            )
        else:
            pairs = sample_balanced_pairs(ds, args.pairs, args.seed)
            log = train(model, ds, pairs, cfg)
        save_checkpoint(args.out, model)

    log_path = args.out + ".log.jsonl"
    _write_jsonl(log_path, log.to_records())
    last = log.records[-1]
    print(
        f"trained {args.family} (delta {args.delta}) for {log.last_epoch()} epochs "
        f"(phases {'+'.join(log.phases())}): final val loss {last.val_loss:.4f}"
    )
    write_manifest(
        args.out, "train",
        config={
            "family": args.family, "delta": args.delta, "pairs": args.pairs,
            "refine": args.refine, "pool_size": args.pool_size,
            "max_epochs": args.max_epochs, "mined_cap": args.mined_cap,
            "store": args.store, "model_in": args.model_in,
        },
        seeds={"train": args.seed},
        inputs=[p for p in (args.store, args.model_in) if p],
        outputs=[args.out, log_path],
    )
    return 0


def _load_scorer(spec: str):
    from simnet.dataio import FormatError
    from simnet.scorers import parse_scorer_spec

    try:
        return parse_scorer_spec(spec)
    except FormatError:
        raise
    except (FileNotFoundError, OSError):
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _eval_reports(args, specs: list[str]):
    from simnet.dataio import read_feature_store
    from simnet.retrieval import mean_average_precision

    scorers = [(spec, _load_scorer(spec)) for spec in specs]
    ds = read_feature_store(args.store)
    if ds.query_indices.size == 0:
        raise ValueError(
            f"store {args.store} designates no queries (generate with --queries)"
        )
    return [mean_average_precision(fn, ds, scorer_name=spec) for spec, fn in scorers]


def cmd_eval(args) -> int:
    reports = _eval_reports(args, [args.scorer])
    _write_jsonl(args.report, reports[0].to_records())
    _print_eval_table(reports)
    write_manifest(
        args.report, "eval",
        config={"store": args.store, "scorer": args.scorer},
        seeds={},
        inputs=_input_paths(args.store, [args.scorer]),
        outputs=[args.report],
    )
    return 0


def cmd_compare(args) -> int:
    reports = _eval_reports(args, args.scorers)
    records = [rec for r in reports for rec in r.to_records()]
    _write_jsonl(args.report, records)
    _print_eval_table(reports)
    write_manifest(
        args.report, "compare",
        config={"store": args.store, "scorers": args.scorers},
        seeds={},
        inputs=_input_paths(args.store, args.scorers),
        outputs=[args.report],
    )
    return 0


def _input_paths(store: str, specs: list[str]) -> list[str]:
    paths = [store]
    for spec in specs:
        kind, _, arg = spec.partition(":")
        if kind in ("linear", "simnet", "e2e") and arg:
            paths.append(arg)
    return paths


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simnet",
        description="Learn and evaluate a non-metric similarity function over feature vectors.",
    )
    parser.add_argument(
        "--threads", type=int, default=None,
        help="cap numeric-backend threads (default: SIMNET_THREADS or library default)",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("gen", help="generate the synthetic benchmark feature store")
    g.add_argument("--classes", type=int, default=10)
    g.add_argument("--per-class", type=int, default=60)
    g.add_argument("--dim", type=int, default=64)
    g.add_argument("--sigma", type=float, default=0.4)
    g.add_argument("--bridge", type=float, default=0.3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--queries", type=float, default=None,
                   help="designate this fraction of items as held-out queries")
    g.add_argument("--query-seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    w = sub.add_parser("warmup", help="pre-train a fresh network to imitate cosine")
    w.add_argument("--arch", default="B", choices=["A", "B", "C", "D"])
    w.add_argument("--scale", type=float, default=1.0)
    w.add_argument("--dim", type=int, required=True)
    w.add_argument("--pairs", type=int, default=2_000_000)
    w.add_argument("--val-pairs", type=int, default=20_000)
    w.add_argument("--lr", type=float, default=0.001)
    w.add_argument("--batch-size", type=int, default=100)
    w.add_argument("--seed", type=int, default=7, help="random pair stream seed")
    w.add_argument("--init-seed", type=int, default=0, help="weight init seed")
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_warmup)

    t = sub.add_parser("train", help="train a similarity model on a labeled store")
    t.add_argument("--store", required=True)
    t.add_argument("--family", default="simnet", choices=["simnet", "linear"])
    t.add_argument("--model-in", default=None, help="warmed checkpoint to start from")
    t.add_argument("--delta", type=float, default=0.2, help="regression margin")
    t.add_argument("--pairs", type=int, default=20_000)
    t.add_argument("--refine", action="store_true",
                   help="mine difficult pairs after training and retrain (the starred variant)")
    t.add_argument("--pool-size", type=int, default=200,
                   help="candidate pool size for difficult-pair mining")
    t.add_argument("--max-epochs", type=int, default=50)
    t.add_argument("--mined-cap", type=float, default=0.5,
                   help="max fraction of each refine batch drawn from mined pairs")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="mean average precision of one scorer on a store")
    e.add_argument("--store", required=True)
    e.add_argument("--scorer", required=True,
                   help="cosine | euclid | linear:PATH | simnet:PATH | e2e:PATH | random:SEED")
    e.add_argument("--report", required=True, help="JSONL output path")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="evaluate several scorers side by side")
    c.add_argument("--store", required=True)
    c.add_argument("--scorers", required=True, nargs="+",
                   help="scorer specs (same grammar as eval --scorer)")
    c.add_argument("--report", required=True, help="JSONL output path")
    c.set_defaults(func=cmd_compare)
    return parser


def _apply_thread_cap(threads: int | None) -> None:
    if threads is None:
        env = os.environ.get("SIMNET_THREADS", "").strip()
        if not env:
            return
        try:
            threads = int(env)
        except ValueError:
            raise UsageError(f"SIMNET_THREADS must be an integer, got {env!r}") from None
    if threads < 1:
        raise UsageError(f"thread cap must be >= 1, got {threads}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(threads)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_thread_cap(args.threads)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 1
    except Exception as exc:  # runtime failure: file IO, divergence, bad formats
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
