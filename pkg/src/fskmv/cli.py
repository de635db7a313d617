"""Command-line entry point: ``fskmv {analyze,detector,train,pmepr}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from fskmv import experiments as ex
from fskmv import rng as streams
from fskmv.config import ConfigError, ExperimentConfig, load_config
from fskmv.geometry import lambda_param
from fskmv.learning import build_model, load_idx_dataset, run_training, synthetic_task
from fskmv.rng import substream

log = logging.getLogger("fskmv")


def cmd_analyze(cfg: ExperimentConfig) -> list[Path]:
    """lambda over cell size, flip probabilities and the convergence bound."""
    out = Path(cfg.out)
    a = cfg.analysis
    meta = cfg.meta("analyze")
    written = []
    cols, rows = ex.lambda_table(cfg.cell, a.r_max_values, a.alpha_eff_values)
    written.append(out / "lambda.csv")
    ex.write_csv(written[-1], cols, rows, meta)
    cols, rows = ex.flip_table(cfg.cell, a.alpha_eff_values, a.snr_db_values, a.q_values, cfg.oac.es)
    written.append(out / "flip_prob.csv")
    ex.write_csv(written[-1], cols, rows, meta)
    cols, rows = ex.bound_table(cfg.cell, a.alpha_eff_values, ex.rounds_grid(a.rounds_max), a.gamma,
                                a.l1_smoothness, a.sigma1, a.f0_gap, cfg.oac.es)
    written.append(out / "bound.csv")
    ex.write_csv(written[-1], cols, rows, meta)
    cols = ["q", "m_active", "fsk_mv_symbols", "obda_symbols"]
    rows = [(cfg.budget_q(), cfg.ofdm.m_active, cfg.fsk_symbols(), cfg.obda_symbols())]
    written.append(out / "resources.csv")
    ex.write_csv(written[-1], cols, rows, meta)
    return written


def cmd_detector(cfg: ExperimentConfig) -> list[Path]:
    """Analytic versus simulated detector flip probability."""
    d = cfg.detector
    cell = replace(cfg.cell, num_eds=d.num_eds)
    cols, rows = ex.detector_table(cell, d.k_plus_values, d.snr_db_values, d.alpha_eff_values, d.trials, cfg.seed,
                                   cfg.oac.es)
    path = Path(cfg.out) / "detector.csv"
    ex.write_csv(path, cols, rows, cfg.meta("detector"))
    return [path]


def _datasets(cfg: ExperimentConfig):
    d = cfg.data
    if d.uses_idx:
        train = load_idx_dataset(d.train_images, d.train_labels, d.n_classes)
        if d.test_images is None:
            raise ConfigError("data.test_images: required for IDX training runs")
        test = load_idx_dataset(d.test_images, d.test_labels, d.n_classes)
        return train, test
    per_class = cfg.cell.num_eds * cfg.train.per_class_count
    return synthetic_task(substream(cfg.seed, streams.DATA), per_class, d.n_test_per_class, d.dim, d.n_classes,
                          d.center_scale, d.noise_std)


def cmd_train(cfg: ExperimentConfig) -> list[Path]:
    """Train with the configured scheme; per-round and per-device CSVs."""
    tcfg = replace(cfg.train, seed=cfg.seed)
    train, test = _datasets(cfg)
    model = build_model(tcfg.model, train.dim, train.n_classes, tcfg.hidden)
    log.info("training %s, q=%d, %d rounds", tcfg.scheme, model.n_params, tcfg.rounds)
    res = run_training(model, train, test, tcfg, cfg.link())
    meta = cfg.meta("train")
    out = Path(cfg.out)
    keys = ("test_accuracy", "test_loss", "mv_error_rate")
    rows = [(h["round"],) + tuple(h.get(c, "") for c in keys) for h in res.history]
    ex.write_csv(out / "train_rounds.csv", ["round", "test_accuracy", "test_loss", "mv_error_rate"], rows, meta)
    rows = [(k, float(d), float(l)) for k, (d, l) in enumerate(zip(res.state.distances, res.local_loss))]
    ex.write_csv(out / "train_local_loss.csv", ["ed", "distance", "local_loss"], rows, meta)
    return [out / "train_rounds.csv", out / "train_local_loss.csv"]


def cmd_pmepr(cfg: ExperimentConfig) -> list[Path]:
    """PMEPR CCDF per transmit scheme."""
    p = cfg.pmepr
    thresholds = np.arange(p.threshold_start_db, p.threshold_stop_db + p.threshold_step_db / 2, p.threshold_step_db)
    cols, rows = ex.pmepr_table(cfg.ofdm, p.n_symbols, cfg.seed, thresholds, oversampling=p.oversampling,
                                correlation=p.correlation)
    path = Path(cfg.out) / "pmepr_ccdf.csv"
    ex.write_csv(path, cols, rows, cfg.meta("pmepr"))
    return [path]


COMMANDS = {"analyze": cmd_analyze, "detector": cmd_detector, "train": cmd_train, "pmepr": cmd_pmepr}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fskmv", description="FSK-MV over-the-air majority vote: analysis, detector, training and PMEPR experiments.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="YAML experiment config")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--profile", choices=["desk", "paper"], default="desk")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, profile=args.profile, seed=args.seed, out=args.out)
        log.info("lambda=%.5g for alpha_eff=%g", lambda_param(cfg.cell), cfg.cell.alpha_eff)
        written = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"fskmv: config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"fskmv: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
