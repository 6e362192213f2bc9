"""Train and evaluate every ablation variant and tabulate the results."""
from __future__ import annotations

import csv
import json
from pathlib import Path

from ..data import Pool
from ..episodic import EvalReport, evaluate
from ..pipeline import FewShotClassifier
from .config import TrainConfig, config_digest
from .train import train
from .variants import AblationSpec, variant_config


def run_ablation(variants, cfg: TrainConfig, pools: tuple[Pool, Pool, Pool], out_dir,
                 n_episodes: int | None = None, log=None) -> list[dict]:
    """Train and evaluate each variant on the novel split; write ablation.{json,csv}."""
    specs = [AblationSpec(v) for v in variants]  # reject unknown names before training
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base, _, novel = pools
    rows = []
    for variant, spec in zip(variants, specs):
        vcfg = variant_config(cfg, variant)
        artifacts = train(vcfg, pools, out_dir / variant, log=log)
        clf = FewShotClassifier(artifacts.net, spec.flags, vcfg.loss, vcfg.data)
        report: EvalReport = evaluate(
            clf, novel,
            n_episodes=n_episodes or vcfg.eval.episodes,
            n_way=vcfg.eval.n_way, k_shot=vcfg.eval.k_shot,
            queries_per_class=vcfg.eval.queries_per_class,
            seed=vcfg.seed, base_classes=tuple(base), config_digest=config_digest(vcfg),
        )
        report.to_json(out_dir / variant / "eval_novel.json")
        row = {"variant": variant, **{k: k in spec.enabled() for k in
                                       ("local", "raw", "refined", "foa", "erasing")},
               "mean_accuracy": report.mean_accuracy, "ci95_halfwidth": report.ci95_halfwidth,
               "n_episodes": report.n_episodes, "n_way": report.n_way, "k_shot": report.k_shot}
        rows.append(row)
        if log:
            log(f"{variant}: {report.mean_accuracy:.4f} +- {report.ci95_halfwidth:.4f}")
    write_table(rows, out_dir)
    return rows


def write_table(rows: list[dict], out_dir) -> None:
    out_dir = Path(out_dir)
    (out_dir / "ablation.json").write_text(json.dumps(rows, indent=2) + "\n")
    if rows:
        with open(out_dir / "ablation.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)

