"""Desk-scale federated training with each aggregation scheme.

Run: python3 demos/training.py
"""

from dataclasses import replace

from fskmv.config import build_config
from fskmv.learning import SCHEMES, build_model, run_training, synthetic_task
from fskmv.rng import DATA, substream

base = build_config(seed=0)
d = base.data
train, test = synthetic_task(substream(0, DATA), base.cell.num_eds * base.train.per_class_count,
                             d.n_test_per_class, d.dim, d.n_classes, d.center_scale, d.noise_std)
model = build_model("linear", train.dim, train.n_classes)
for scheme in SCHEMES:
    res = run_training(model, train, test, replace(base.train, scheme=scheme), base.link(), eval_every=50)
    curve = ", ".join(f"{h['test_accuracy']:.3f}" for h in res.history if "test_accuracy" in h)
    print(f"{scheme:15s} accuracy every 50 rounds: {curve}")
