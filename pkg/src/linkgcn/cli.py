"""Command-line front end.

Subcommands: synth, train, cluster, eval, upper-bound, toy2d, baseline.
Config precedence is defaults < --config file < explicit flags; every
command is deterministic given its flags and seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from linkgcn import dataset, gcn, merge, metrics, pipeline, trainer
from linkgcn.config import make_config, seed_stream
from linkgcn.dataset import FeatureSet


def _parse_range(text: str, label: str):
    try:
        lo, hi = (int(tok) for tok in text.split(":"))
    except ValueError:
        raise SystemExit(f"error: {label} must look like LO:HI, got {text!r}")
    if lo > hi:
        raise SystemExit(f"error: inverted {label} range {text!r}")
    return lo, hi


def _parse_float_range(text: str, label: str):
    try:
        lo, hi = (float(tok) for tok in text.split(":"))
    except ValueError:
        raise SystemExit(f"error: {label} must look like LO:HI, got {text!r}")
    if lo > hi:
        raise SystemExit(f"error: inverted {label} range {text!r}")
    return lo, hi


def _load_feature_set(args, need_labels=False) -> FeatureSet:
    fs = dataset.load_features(args.features)
    labels = None
    if getattr(args, "labels", None):
        labels = dataset.load_labels(args.labels)
    elif need_labels:
        raise SystemExit("error: this command needs --labels")
    if labels is not None:
        fs = FeatureSet(features=fs.features, labels=labels)
    return fs


def _maybe_normalize(fs: FeatureSet, cfg) -> FeatureSet:
    return dataset.normalize_rows(fs) if cfg.normalize else fs


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args):
    spec = dataset.SynthSpec(
        num_identities=args.ids,
        samples_per_identity=_parse_range(args.per_id, "--per-id"),
        dim=args.dim,
        center_spread=args.center_spread,
        noise_scale=_parse_float_range(args.noise, "--noise"),
        outlier_fraction=args.outliers,
        seed=args.seed,
    )
    fs = dataset.synth_generate(spec)
    out = _out_dir(args)
    dataset.save_features(fs, out / "features.fmat")
    dataset.save_labels(fs.labels, out / "labels.lbls")
    n_ids = np.unique(fs.labels[fs.labels >= 0]).size
    print(f"N={fs.n} D={fs.dim} identities={n_ids} "
          f"distractors={int(np.sum(fs.labels < 0))}")
    print(f"wrote {out / 'features.fmat'} and {out / 'labels.lbls'}")


def cmd_train(args):
    cfg = make_config(args.config, _config_overrides(args))
    fs = _maybe_normalize(_load_feature_set(args, need_labels=True), cfg)
    train_cfg = trainer.TrainConfig(
        aggregator=cfg.aggregator, hidden_dims=tuple(cfg.hidden_dims),
        attention_hidden=cfg.attention_hidden,
        mean_row_normalized=cfg.mean_row_normalize, ips=cfg.train_ips(),
        epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr,
        momentum=cfg.momentum, lr_decay=cfg.lr_decay, seed=cfg.seed)
    model, curve = trainer.train(fs, train_cfg)
    out = _out_dir(args)
    gcn.save_model(model, out / "model.gcnm")
    with open(out / "loss.csv", "w") as fh:
        fh.write("epoch,mean_loss\n")
        for epoch, loss in enumerate(curve):
            fh.write(f"{epoch},{loss:.6f}\n")
    print(f"final mean loss {curve[-1]:.6f}")
    print(f"wrote {out / 'model.gcnm'} and {out / 'loss.csv'}")


def cmd_cluster(args):
    cfg = make_config(args.config, _config_overrides(args))
    fs = _maybe_normalize(_load_feature_set(args), cfg)
    model = gcn.load_model(args.checkpoint)
    assignment, edges, timing = pipeline.cluster(
        fs, model, cfg.test_ips(), merge=cfg.merge, tau=cfg.tau, tau0=cfg.tau0,
        dtau=cfg.dtau, max_size=cfg.max_size, workers=cfg.workers)
    out = _out_dir(args)
    merge.save_partition(assignment, out / "partition.tsv")
    merge.save_edges(edges, out / "edges.tsv")
    with open(out / "timing.txt", "w") as fh:
        fh.write(timing.as_text() + "\n")
    print(timing.as_text())
    print(f"clusters={int(assignment.max()) + 1}")
    print(f"wrote {out / 'partition.tsv'} and {out / 'edges.tsv'}")


def cmd_eval(args):
    truth = dataset.load_labels(args.labels)
    pred = merge.load_partition(args.partition)
    mode = "ignore" if args.ignore_distractors else args.distractors
    report = metrics.evaluate(truth, pred, distractors=mode)
    print(report.as_table())
    if args.drop_singletons:
        mask, removed = merge.filter_singletons(pred)
        if mask.any():
            filtered = metrics.evaluate(truth[mask], pred[mask], distractors=mode)
            print(f"\nafter dropping singletons ({removed:.1%} removed):")
            print(filtered.as_table())
        else:
            print("\nall clusters are singletons; nothing left after filtering")


def cmd_upper_bound(args):
    cfg = make_config(args.config, _config_overrides(args))
    fs = _maybe_normalize(_load_feature_set(args, need_labels=True), cfg)
    k_list = [int(tok) for tok in args.k_list.split(",")]
    nbrs = pipeline.build_knn(fs, max(k_list), workers=cfg.workers)
    print("k\tF\tNMI")
    for k, report in metrics.knn_upper_bound(fs, nbrs, k_list):
        print(f"{k}\t{report.bcubed_f:.4f}\t{report.nmi:.4f}")


def cmd_toy2d(args):
    spec = dataset.SynthSpec(num_identities=args.ids, samples_per_identity=(args.per_id, args.per_id),
                             dim=2, center_spread=1.0, noise_scale=(0.15, 0.15), seed=args.seed)
    fs = dataset.synth_generate(spec)
    from linkgcn.ips import IpsConfig, build_ips, clamp_config
    cfg = clamp_config(IpsConfig(h=2, k_per_hop=(args.k1, 2), u=3), fs.n)
    nbrs = pipeline.build_knn(fs, max(max(cfg.k_per_hop), cfg.u))
    ips = build_ips(0, fs, nbrs, cfg)
    rows = trainer.toy2d_trace(fs, ips, steps=args.steps, seed=args.seed)
    out = _out_dir(args)
    with open(out / "toy2d.csv", "w") as fh:
        fh.write("iteration,layer,node,x,y\n")
        for it, layer, node, x, y in rows:
            fh.write(f"{it},{layer},{node},{x:.6f},{y:.6f}\n")
    print(f"wrote {out / 'toy2d.csv'} ({len(rows)} rows)")


def cmd_baseline(args):
    cfg = make_config(args.config, _config_overrides(args))
    fs = _maybe_normalize(_load_feature_set(args), cfg)
    nbrs = pipeline.build_knn(fs, args.k, workers=cfg.workers)
    assignment = merge.threshold_baseline(fs, nbrs, args.tau_sim)
    out = _out_dir(args)
    merge.save_partition(assignment, out / "baseline_partition.tsv")
    print(f"clusters={int(assignment.max()) + 1}")
    print(f"wrote {out / 'baseline_partition.tsv'}")


def _config_overrides(args) -> dict:
    keys = ("seed", "workers", "aggregator", "epochs", "batch_size", "lr",
            "merge", "tau", "tau0", "dtau", "max_size", "normalize",
            "test_k1", "test_k2", "test_u", "train_k1", "train_k2", "train_u")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _add_common(sub, features=False, labels=False, out_dir=False):
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--workers", type=int, default=None)
    if features:
        sub.add_argument("--features", required=True, help="FMAT feature file")
    if labels:
        sub.add_argument("--labels", help="LBLS label file")
    if out_dir:
        sub.add_argument("--out-dir", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linkgcn",
                                     description="linkage-based clustering of embeddings")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate a synthetic labeled collection")
    p.add_argument("--ids", type=int, required=True)
    p.add_argument("--per-id", required=True, help="samples per identity, LO:HI")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--center-spread", type=float, default=1.0)
    p.add_argument("--noise", default="0.1:0.1", help="per-identity noise scale, LO:HI")
    p.add_argument("--outliers", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("train", help="train the link predictor")
    _add_common(p, features=True, labels=True, out_dir=True)
    p.add_argument("--aggregator", choices=gcn.AGGREGATORS)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--train-k1", dest="train_k1", type=int)
    p.add_argument("--train-k2", dest="train_k2", type=int)
    p.add_argument("--train-u", dest="train_u", type=int)
    p.add_argument("--no-normalize", dest="normalize", action="store_false", default=None)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("cluster", help="cluster a collection with a trained model")
    _add_common(p, features=True, out_dir=True)
    p.add_argument("--checkpoint", required=True, help="GCNM model file")
    p.add_argument("--merge", choices=("propagate", "bfs"))
    p.add_argument("--tau", type=float)
    p.add_argument("--tau0", type=float)
    p.add_argument("--dtau", type=float)
    p.add_argument("--max-size", dest="max_size", type=int)
    p.add_argument("--test-k1", dest="test_k1", type=int)
    p.add_argument("--test-k2", dest="test_k2", type=int)
    p.add_argument("--test-u", dest="test_u", type=int)
    p.add_argument("--no-normalize", dest="normalize", action="store_false", default=None)
    p.set_defaults(func=cmd_cluster)

    p = subs.add_parser("eval", help="score a partition against identity labels")
    p.add_argument("--partition", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--drop-singletons", action="store_true")
    p.add_argument("--ignore-distractors", action="store_true")
    p.add_argument("--distractors", choices=("keep", "ignore", "unique"), default="keep")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("upper-bound", help="same-identity kNN linking upper bound")
    _add_common(p, features=True, labels=True)
    p.add_argument("--k-list", default="1,2,4,8,16,32")
    p.add_argument("--no-normalize", dest="normalize", action="store_false", default=None)
    p.set_defaults(func=cmd_upper_bound)

    p = subs.add_parser("toy2d", help="trace 2-D layer embeddings during training")
    p.add_argument("--ids", type=int, default=3)
    p.add_argument("--per-id", dest="per_id", type=int, default=8)
    p.add_argument("--k1", type=int, default=8)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_toy2d)

    p = subs.add_parser("baseline", help="global similarity-threshold comparator")
    _add_common(p, features=True, out_dir=True)
    p.add_argument("--k", type=int, default=80)
    p.add_argument("--tau-sim", dest="tau_sim", type=float, required=True)
    p.add_argument("--no-normalize", dest="normalize", action="store_false", default=None)
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
