#!/usr/bin/env python3
"""Sweep hidden-layer configurations of the estimator on one synthetic
dataset and compare validation error per target, including the closed-form
ridge baseline."""

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from wattrank import synthetic
from wattrank.dataset_builder import assemble
from wattrank.estimator import (
    TrainConfig,
    design_matrices,
    evaluate,
    fit_linear_baseline,
    init_model,
    r2_score,
    train,
)


@dataclass
class SweepConfig:
    seed: int = 7
    n_workloads: int = 20
    epochs: int = 5000
    lr: float = 0.01
    hidden_specs: list = field(default_factory=lambda: [
        [], [14], [28, 14], [56, 28], [28, 28, 14],
    ])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--n-workloads", type=int, default=20)
    parser.add_argument("--epochs", type=int, default=5000)
    parser.add_argument("--lr", type=float, default=0.01)
    args = parser.parse_args()
    config = SweepConfig(seed=args.seed, n_workloads=args.n_workloads,
                         epochs=args.epochs, lr=args.lr)

    experiment = synthetic.generate(synthetic.SyntheticConfig(
        n_workloads=config.n_workloads, seed=config.seed))
    samples = synthetic.ingest_experiment(experiment)
    ds = assemble(samples, seed=42)
    d = samples[0].features.size
    print(f"{len(samples)} samples, {d} features, "
          f"train {len(ds.train_indices)} / val {len(ds.val_indices)}\n")
    print(f"{'architecture':<22} {'epochs':>6} {'val power R2':>13} "
          f"{'val perf R2':>12} {'seconds':>8}")

    baseline = fit_linear_baseline(ds)
    Xv, Yv = design_matrices(ds, ds.val_indices, None)
    r2 = r2_score(Yv, baseline.predict_standardized(Xv))
    print(f"{'ridge baseline':<22} {'-':>6} {r2[0]:>13.4f} {r2[1]:>12.4f} {'-':>8}")

    for hidden in config.hidden_specs:
        start = time.monotonic()
        model = init_model(d, hidden, seed=42)
        trained, _ = train(model, ds, TrainConfig(lr=config.lr, epochs=config.epochs))
        metrics = evaluate(trained, ds)
        label = "x".join(map(str, trained.layer_dims))
        print(f"{label:<22} {trained.epochs_trained:>6} "
              f"{metrics['val']['power']['r2']:>13.4f} "
              f"{metrics['val']['perf']['r2']:>12.4f} "
              f"{time.monotonic() - start:>8.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
