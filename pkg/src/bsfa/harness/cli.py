"""Command line entry point: ``bsfa {train,eval,ablate,visualize,make-synthetic}``.

Any config key can be overridden as ``--section.key=value`` (for example
``--loss.lambda=0.4``); the named flags below are shortcuts for common keys.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..backbone import load_checkpoint
from ..data import PRESETS, load_dataset, resolve_split
from ..episodic import evaluate
from ..pipeline import FewShotClassifier
from ..synthetic import make_synthetic
from .ablation import run_ablation
from .config import TrainConfig, config_digest, load_config
from .train import train
from .variants import TABLE_VARIANTS, VARIANTS, AblationSpec, variant_config
from .visualize import visualize

log = logging.getLogger("bsfa")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--dataset-root", help="dataset directory (class folders)")
    p.add_argument("--split-preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--n-way", type=int)
    p.add_argument("--k-shot", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", choices=sorted(VARIANTS))
    p.add_argument("--use-gt-box", action="store_true", default=None)
    p.add_argument("--out-dir", default="runs/default")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bsfa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="episodic training on the base split")
    _common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the novel split")
    _common(p)
    p.add_argument("--checkpoint", help="defaults to <out-dir>/checkpoints/{best,last}.npz")
    p.add_argument("--split", choices=("novel", "val"), default="novel")

    p = sub.add_parser("ablate", help="train and evaluate ablation variants")
    _common(p)
    p.add_argument("--variants", default=",".join(TABLE_VARIANTS),
                   help="comma-separated variant names (default: the B0-B3/C0-C4 grid)")

    p = sub.add_parser("visualize", help="write BAS panels for image files")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--with-erase", action="store_true")
    p.add_argument("images", nargs="+")

    p = sub.add_parser("make-synthetic", help="write the synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--classes", type=int, default=15)
    p.add_argument("--images-per-class", type=int, default=60)
    p.add_argument("--size", type=int, default=84)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _split_overrides(extra: list[str]) -> dict[str, str]:
    out = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--") or "." not in tok:
            raise SystemExit(f"unrecognised argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            value = next(it, None)
            if value is None:
                raise SystemExit(f"missing value for {tok}")
        out[key] = value
    return out


def resolve_config(args, extra: list[str]) -> TrainConfig:
    overrides = _split_overrides(extra)
    cfg = load_config(args.config, overrides)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.n_way is not None:
        cfg.train.n_way = cfg.eval.n_way = args.n_way
    if args.k_shot is not None:
        cfg.train.k_shot = cfg.eval.k_shot = args.k_shot
    if args.episodes is not None:
        if args.command == "train":
            cfg.train.episodes_per_epoch = args.episodes
        else:
            cfg.eval.episodes = args.episodes
    if args.variant is not None:
        cfg = variant_config(cfg, args.variant)
    if args.use_gt_box:
        cfg.data.use_gt_box = True
    return cfg


def _pools(args):
    if not args.dataset_root:
        raise SystemExit("--dataset-root is required")
    split = resolve_split(args.dataset_root, args.split_preset, seed=0)
    return load_dataset(args.dataset_root, split)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    out_dir = Path(args.out_dir)

    if args.command == "make-synthetic":
        split = make_synthetic(out_dir, args.classes, args.images_per_class, args.size, args.seed)
        log.info("wrote %d classes to %s (base/val/novel = %s)",
                 args.classes, out_dir, split.counts)
        return 0

    cfg = resolve_config(args, extra)

    if args.command == "train":
        artifacts = train(cfg, _pools(args), out_dir, log=log.info)
        log.info("checkpoint: %s", artifacts.checkpoint)
        return 0

    if args.command == "eval":
        ckpt = args.checkpoint
        if ckpt is None:
            best = out_dir / "checkpoints" / "best.npz"
            ckpt = best if best.exists() else out_dir / "checkpoints" / "last.npz"
        net, _ = load_checkpoint(ckpt)
        base, val, novel = _pools(args)
        pool = novel if args.split == "novel" else val
        clf = FewShotClassifier(net, AblationSpec(cfg.variant).flags, cfg.loss, cfg.data)
        report = evaluate(clf, pool, cfg.eval.episodes, cfg.eval.n_way, cfg.eval.k_shot,
                          cfg.eval.queries_per_class, cfg.seed, base_classes=tuple(base),
                          config_digest=config_digest(cfg))
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"eval_{args.split}_{cfg.eval.n_way}way{cfg.eval.k_shot}shot.json"
        report.to_json(path)
        log.info("%d-way %d-shot: %.2f +- %.2f (%d episodes) -> %s", report.n_way, report.k_shot,
                 100 * report.mean_accuracy, 100 * report.ci95_halfwidth, report.n_episodes, path)
        return 0

    if args.command == "ablate":
        variants = [v.strip() for v in args.variants.split(",") if v.strip()]
        for v in variants:
            AblationSpec(v)
        rows = run_ablation(variants, cfg, _pools(args), out_dir, log=log.info)
        json.dump(rows, sys.stdout, indent=2)
        print()
        return 0

    if args.command == "visualize":
        records = visualize(args.checkpoint, args.images, out_dir, with_erase=args.with_erase,
                            gamma=cfg.erase.gamma)
        for r in records:
            log.info("%s: box %s", r["name"], r["image_box"])
        return 0

    parser.error(f"unknown command {args.command}")
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
