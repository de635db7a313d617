"""Federated signSGD with a majority vote computed over the air.

Each round every device draws a mini-batch, computes its local gradient and
votes with the gradient signs. The votes are aggregated by one of

``fsk_mv``
    FSK over OFDM with a non-coherent energy detector at the server.
``obda_tci`` / ``obda_blind``
    QPSK over OFDM with / without truncated channel inversion.
``ideal_mv``
    Error-free majority vote.
``error_free_sgd``
    Plain averaging of the true local gradients (no signs, no channel).

and the server broadcasts the result over an error-free downlink.

All randomness is drawn from :func:`fskmv.rng.substream` keyed by the run
seed, the round and the device, so a trajectory depends only on its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from fskmv import rng as streams
from fskmv.channel import EPA, TapProfile, max_timing_offset, realize_channel, superpose_at_es
from fskmv.geometry import CellConfig, ed_link_distances, received_power
from fskmv.learning.data import Dataset, partition_iid, partition_location
from fskmv.oac import (
    ES,
    build_fsk_map,
    fsk_symbols_needed,
    fskmv_detect,
    fskmv_encode,
    ideal_mv,
    obda_detect,
    obda_encode,
    sign_random_ties,
)
from fskmv.rng import random_signs, substream
from fskmv.waveform import OfdmConfig

SCHEMES = ("fsk_mv", "obda_tci", "obda_blind", "ideal_mv", "error_free_sgd")
PARTITIONS = ("iid", "location")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 32
    rounds: int = 200
    scheme: str = "fsk_mv"
    partition: str = "iid"
    seed: int = 0
    per_class_count: int = 50
    model: str = "linear"
    hidden: int = 32
    # "fixed" uses learning_rate/batch_size; "bound" derives both from rounds, gamma, l1_smoothness
    lr_schedule: str = "fixed"
    gamma: int = 1
    l1_smoothness: float = 1.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.rounds < 1:
            raise ValueError("batch_size and rounds must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.partition not in PARTITIONS:
            raise ValueError(f"unknown partition {self.partition!r}; expected one of {PARTITIONS}")
        if self.lr_schedule not in ("fixed", "bound"):
            raise ValueError("lr_schedule must be 'fixed' or 'bound'")
        if self.gamma < 1:
            raise ValueError("gamma must be a positive integer")

    def step_and_batch(self) -> tuple[float, int]:
        if self.lr_schedule == "fixed":
            return self.learning_rate, self.batch_size
        n_b = max(1, round(self.rounds / self.gamma))
        return 1.0 / math.sqrt(self.l1_smoothness * n_b), n_b


@dataclass(frozen=True)
class LinkConfig:
    """Uplink used by the over-the-air schemes."""

    cell: CellConfig = field(default_factory=CellConfig)
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    profile: TapProfile = EPA
    # arrival spread in seconds; None means one over the occupied bandwidth
    t_sync: float | None = None
    n_err: int = 3
    sync_errors: bool = False
    integer_offsets: bool = True
    tci_threshold: float = 0.2
    randomize: bool = True
    es: float = ES

    @property
    def max_offset(self) -> float:
        return max_timing_offset(self.ofdm, self.t_sync) if self.sync_errors else 0.0

    @property
    def window_offset(self) -> int:
        return self.n_err if self.sync_errors else 0


@dataclass
class TrainState:
    w: np.ndarray
    round: int
    datasets: list[Dataset]
    distances: np.ndarray
    history: list[dict] = field(default_factory=list)


def local_gradient(model, w, x, y) -> np.ndarray:
    """Mean cross-entropy gradient over a batch."""
    if len(y) == 0:
        raise ValueError("empty batch")
    return model.loss_and_grad(w, x, y)[1]


def sign_vector(gradient, rng: np.random.Generator) -> np.ndarray:
    """Gradient signs as votes; exact zeros become random signs."""
    g = np.asarray(gradient, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient has non-finite entries")
    return sign_random_ties(g, rng)


def apply_update(w, direction, eta: float) -> np.ndarray:
    """``w - eta * direction``."""
    w = np.asarray(w, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if w.shape != direction.shape:
        raise ValueError(f"parameter shape {w.shape} and update shape {direction.shape} differ")
    return w - eta * direction


def batch_indices(n_samples: int, batch_size: int, round_: int, seed: int, ed: int) -> np.ndarray:
    """Indices of device ``ed``'s batch in round ``round_``.

    Samples are taken without replacement from a fresh permutation each epoch;
    a batch straddling an epoch boundary takes the tail of one permutation and
    the head of the next.
    """
    if n_samples == 0:
        raise ValueError(f"device {ed} holds no samples")
    start = round_ * batch_size
    out = []
    pos = start
    while pos < start + batch_size:
        epoch, offset = divmod(pos, n_samples)
        perm = substream(seed, streams.BATCH, epoch, ed).permutation(n_samples)
        take = min(n_samples - offset, start + batch_size - pos)
        out.append(perm[offset : offset + take])
        pos += take
    return np.concatenate(out)


def _over_the_air(scheme: str, votes: np.ndarray, powers: np.ndarray, link: LinkConfig, seed: int, n: int):
    k, q = votes.shape
    m = link.ofdm.m_active
    channels = [
        realize_channel(
            link.profile,
            link.ofdm,
            substream(seed, streams.CHANNEL, n, e),
            max_offset=link.max_offset,
            n_err=link.window_offset,
            integer_offset=link.integer_offsets,
        )
        for e in range(k)
    ]
    h_eff = np.stack([c.effective_response(link.ofdm, link.window_offset) for c in channels])
    noise_rng = substream(seed, streams.NOISE, n)
    det_rng = substream(seed, streams.DETECTOR, n)
    if scheme == "fsk_mv":
        # pad to whole OFDM symbols with random dummy votes
        q_pad = fsk_symbols_needed(q, m) * (m // 2)
        rmap = build_fsk_map(q_pad, m)
        grids = []
        for e in range(k):
            enc = substream(seed, streams.ENCODE, n, e)
            v = np.concatenate([votes[e], random_signs(q_pad - q, enc)])
            grids.append(fskmv_encode(v, rmap, enc, es=link.es, randomize=link.randomize))
        y = superpose_at_es(np.stack(grids), powers, h_eff, link.cell.noise_var, noise_rng)
        return fskmv_detect(y, rmap, det_rng)[:q]
    grids = []
    for e, ch in enumerate(channels):
        enc = substream(seed, streams.ENCODE, n, e)
        csi = ch.freq_response if scheme == "obda_tci" else None
        grids.append(obda_encode(votes[e], m, enc, response=csi, tci_threshold=link.tci_threshold))
    y = superpose_at_es(np.stack(grids), powers, h_eff, link.cell.noise_var, noise_rng)
    return obda_detect(y, q, det_rng)


def aggregate(scheme: str, votes, powers, link: LinkConfig, seed: int, round_: int) -> np.ndarray:
    """Majority vote of the (K, q) vote array as seen by the server under ``scheme``."""
    votes = np.asarray(votes, dtype=np.int8)
    if scheme == "ideal_mv":
        return ideal_mv(votes, substream(seed, streams.DETECTOR, round_))
    if scheme in ("fsk_mv", "obda_tci", "obda_blind"):
        return _over_the_air(scheme, votes, np.asarray(powers, dtype=float), link, seed, round_)
    raise ValueError(f"scheme {scheme!r} does not aggregate votes")


def evaluate(model, w, data: Dataset) -> tuple[float, float]:
    """Accuracy and mean cross-entropy on ``data``."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    logits = model.logits(w, data.x)
    acc = float(np.mean(np.argmax(logits, axis=1) == data.y))
    return acc, model.loss(w, data.x, data.y)


def local_losses(model, state: TrainState) -> np.ndarray:
    """Mean sample loss of the current model on each device's whole local set."""
    return np.array([model.loss(state.w, d.x, d.y) if len(d) else np.nan for d in state.datasets])


def init_state(model, train: Dataset, tcfg: TrainConfig, cell: CellConfig) -> TrainState:
    distances = ed_link_distances(cell)
    part_rng = substream(tcfg.seed, streams.PARTITION)
    if tcfg.partition == "iid":
        datasets = partition_iid(train, cell.num_eds, tcfg.per_class_count, part_rng)
    else:
        datasets = partition_location(train, distances, cell, part_rng)
    w0 = model.init_params(substream(tcfg.seed, streams.MODEL_INIT))
    return TrainState(w=w0, round=0, datasets=datasets, distances=distances)


def train_round(state: TrainState, model, tcfg: TrainConfig, link: LinkConfig) -> TrainState:
    """One communication round; returns the next state and appends a history row."""
    n = state.round
    eta, n_b = tcfg.step_and_batch()
    k = len(state.datasets)
    grads = np.empty((k, model.n_params))
    for e, d in enumerate(state.datasets):
        idx = batch_indices(len(d), n_b, n, tcfg.seed, e)
        grads[e] = local_gradient(model, state.w, d.x[idx], d.y[idx])
    row = {"round": n + 1}
    if tcfg.scheme == "error_free_sgd":
        direction = grads.mean(axis=0)
    else:
        votes = np.stack([sign_vector(g, substream(tcfg.seed, streams.SIGN, n, e)) for e, g in enumerate(grads)])
        powers = received_power(state.distances, link.cell)
        direction = aggregate(tcfg.scheme, votes, powers, link, tcfg.seed, n)
        tally = votes.astype(np.int64).sum(axis=0)
        strict = tally != 0
        row["mv_error_rate"] = float(np.mean(direction[strict] != np.sign(tally[strict]))) if strict.any() else 0.0
    w = apply_update(state.w, direction, eta)
    return replace(state, w=w, round=n + 1, history=state.history + [row])


@dataclass
class TrainResult:
    state: TrainState
    history: list[dict]
    local_loss: np.ndarray


def run_training(
    model,
    train: Dataset,
    test: Dataset,
    tcfg: TrainConfig,
    link: LinkConfig,
    eval_every: int = 1,
) -> TrainResult:
    """Train for ``tcfg.rounds`` rounds, logging test accuracy and loss."""
    state = init_state(model, train, tcfg, link.cell)
    acc, loss = evaluate(model, state.w, test)
    history = [{"round": 0, "test_accuracy": acc, "test_loss": loss}]
    for _ in range(tcfg.rounds):
        state = train_round(state, model, tcfg, link)
        row = dict(state.history[-1])
        if state.round % eval_every == 0 or state.round == tcfg.rounds:
            row["test_accuracy"], row["test_loss"] = evaluate(model, state.w, test)
        history.append(row)
    return TrainResult(state=state, history=history, local_loss=local_losses(model, state))
