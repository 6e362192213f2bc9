"""Episodic training loop: one episode per optimizer step."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..backbone import TwoStageNet, save_checkpoint
from ..data import Pool
from ..episodic import build_prototypes, evaluate, predict, sample_episode
from ..pipeline import FewShotClassifier, PipelineFlags, episode_loss, make_scorer
from .config import TrainConfig, config_digest, dump_config
from .variants import flags_for


class NonFiniteLossError(RuntimeError):
    def __init__(self, message: str, episode_seed: int, dump_path: Path | None = None):
        super().__init__(message)
        self.episode_seed = episode_seed
        self.dump_path = dump_path


@dataclass
class RunArtifacts:
    run_dir: Path
    config_path: Path
    checkpoint: Path
    best_checkpoint: Path | None
    metrics_log: Path
    eval_reports: list[Path] = field(default_factory=list)
    visualization_dir: Path | None = None
    net: TwoStageNet | None = None
    final_train_accuracy: float = float("nan")


def episode_seed(seed: int, step: int) -> int:
    return int(np.random.SeedSequence([seed, step]).generate_state(1)[0])


def _train_accuracy(raw, refined, n_way, k_shot, labels, flags: PipelineFlags, w) -> float:
    n = n_way * k_shot
    raw = raw.detach() if flags.use_raw else None
    refined = None if refined is None else refined.detach()
    protos = build_prototypes(
        None if raw is None else raw[:n], None if refined is None else refined[:n], n_way, k_shot
    )
    pred, _ = predict(
        None if raw is None else raw[n:], None if refined is None else refined[n:],
        protos, w, make_scorer(flags, w),
    )
    return float((pred.numpy() == labels).mean())


def train(cfg: TrainConfig, pools: tuple[Pool, Pool, Pool], out_dir, log=None) -> RunArtifacts:
    """Train from scratch on the base pool; checkpoint every epoch.

    When a validation pool with classes is given and ``eval.val_episodes > 0``,
    the epoch with the best validation accuracy is also kept as ``best.npz``.
    """
    base, val, _ = pools
    flags = flags_for(cfg)
    s = cfg.train
    run_dir = Path(out_dir)
    (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    config_path = run_dir / "config.txt"
    dump_config(cfg, config_path)
    metrics_path = run_dir / "metrics.jsonl"

    torch.manual_seed(cfg.seed)
    net = TwoStageNet(cfg.model, n_base_classes=len(base))
    opt = torch.optim.SGD(net.parameters(), lr=cfg.lr_at(0), momentum=s.momentum,
                          weight_decay=s.weight_decay)
    last = run_dir / "checkpoints" / "last.npz"
    best_path, best_acc = None, -1.0
    reports = []
    acc_window: list[float] = []

    with open(metrics_path, "w") as metrics:
        for epoch in range(s.epochs):
            lr = cfg.lr_at(epoch)
            for group in opt.param_groups:
                group["lr"] = lr
            net.train()
            for i in range(s.episodes_per_epoch):
                step = epoch * s.episodes_per_epoch + i
                eseed = episode_seed(cfg.seed, step)
                rng = np.random.default_rng(eseed)
                episode = sample_episode(base, s.n_way, s.k_shot, s.queries_per_class, rng)
                losses, (raw, refined) = episode_loss(
                    net, episode, flags, cfg.loss, cfg.erase, cfg.data, rng
                )
                if not all(math.isfinite(v) for v in losses.as_record().values()):
                    dump = run_dir / "nonfinite_episode.json"
                    dump.write_text(json.dumps({
                        "step": step, "epoch": epoch, "episode_seed": eseed,
                        "classes": list(episode.classes), **losses.as_record(),
                    }, indent=2))
                    raise NonFiniteLossError(
                        f"non-finite loss at step {step} (episode seed {eseed})", eseed, dump
                    )
                opt.zero_grad()
                losses.total.backward()
                opt.step()
                with torch.no_grad():
                    acc = _train_accuracy(raw, refined, s.n_way, s.k_shot,
                                          episode.query_labels, flags, cfg.loss)
                acc_window = (acc_window + [acc])[-s.episodes_per_epoch:]
                record = {"step": step, "epoch": epoch, "lr": lr, **losses.as_record(),
                          "train_accuracy": acc}
                metrics.write(json.dumps(record) + "\n")
            metrics.flush()
            save_checkpoint(last, net, {"epoch": epoch, "variant": cfg.variant,
                                        "config_digest": config_digest(cfg)})
            msg = f"epoch {epoch}: lr={lr} loss={record['total']:.4f} train_acc={np.mean(acc_window):.3f}"
            if val and cfg.eval.val_episodes > 0:
                report = evaluate(
                    FewShotClassifier(net, flags, cfg.loss, cfg.data), val,
                    n_episodes=cfg.eval.val_episodes, n_way=min(cfg.eval.n_way, len(val)),
                    k_shot=cfg.eval.k_shot, queries_per_class=cfg.eval.queries_per_class,
                    seed=cfg.seed, base_classes=tuple(base), config_digest=config_digest(cfg),
                )
                path = run_dir / f"eval_val_epoch{epoch:03d}.json"
                report.to_json(path, include_episodes=False)
                reports.append(path)
                msg += f" val={report.mean_accuracy:.3f}"
                if report.mean_accuracy > best_acc:
                    best_acc = report.mean_accuracy
                    best_path = save_checkpoint(run_dir / "checkpoints" / "best.npz", net,
                                                {"epoch": epoch, "val_accuracy": best_acc,
                                                 "variant": cfg.variant})
            if log:
                log(msg)
    return RunArtifacts(
        run_dir=run_dir,
        config_path=config_path,
        checkpoint=last,
        best_checkpoint=best_path,
        metrics_log=metrics_path,
        eval_reports=reports,
        net=net,
        final_train_accuracy=float(np.mean(acc_window)) if acc_window else float("nan"),
    )

