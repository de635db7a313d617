import gzip
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fskmv.channel import FLAT
from fskmv.geometry import CellConfig, ed_link_distances, ring_index
from fskmv.learning import (
    Dataset,
    LinearSoftmax,
    LinkConfig,
    OneHiddenLayer,
    TrainConfig,
    TrainState,
    aggregate,
    apply_update,
    batch_indices,
    build_model,
    evaluate,
    init_state,
    load_idx_dataset,
    local_gradient,
    local_losses,
    partition_iid,
    partition_location,
    read_idx,
    ring_labels,
    run_training,
    sign_vector,
    synthetic_task,
    train_round,
    write_idx,
)
from fskmv.rng import random_signs, substream

LINK = LinkConfig()


def _indexed(n_per_class, n_classes=10, seed=0):
    # first feature is the sample id, used to check disjointness
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(n_classes), n_per_class)
    x = np.column_stack([np.arange(y.size), rng.standard_normal((y.size, 3))])
    return Dataset(x, y, n_classes)


def _ids(d):
    return d.x[:, 0].astype(int)


def fd_gradient(model, w, x, y, coords, h=1e-5):
    out = np.empty(len(coords))
    for j, c in enumerate(coords):
        e = np.zeros_like(w)
        e[c] = h
        out[j] = (model.loss(w + e, x, y) - model.loss(w - e, x, y)) / (2 * h)
    return out


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(2, dtype=int))
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), np.array([0, 10]))
    with pytest.raises(ValueError):
        Dataset(np.zeros(3), np.zeros(3, dtype=int))


def test_partition_iid_paper_size():
    data = _indexed(2500)
    parts = partition_iid(data, 50, 50, np.random.default_rng(0))
    assert len(parts) == 50
    assert all(len(p) == 500 for p in parts)
    assert all(np.all(p.class_counts() == 50) for p in parts)
    ids = np.concatenate([_ids(p) for p in parts])
    assert np.unique(ids).size == ids.size == 25_000


def test_partition_iid_single_device():
    data = _indexed(20)
    (only,) = partition_iid(data, 1, 20, np.random.default_rng(0))
    assert sorted(_ids(only)) == list(range(200))


def test_partition_iid_insufficient():
    with pytest.raises(ValueError):
        partition_iid(_indexed(10), 5, 3, np.random.default_rng(0))


@pytest.mark.parametrize("ring, labels", [(0, [0, 1, 2, 3, 4, 5]), (1, [1, 2, 3, 4, 5, 6]), (4, [4, 5, 6, 7, 8, 9])])
def test_ring_labels(ring, labels):
    assert ring_labels(ring).tolist() == labels


def test_ring_labels_generalized():
    assert ring_labels(4, n_classes=6).tolist() == [4, 5]


@pytest.mark.parametrize("k", [10, 50, 12])
def test_partition_location(k):
    cell = CellConfig(num_eds=k)
    d = ed_link_distances(cell)
    data = _indexed(300)
    parts = partition_location(data, d, cell, np.random.default_rng(1))
    rings = ring_index(d, cell)
    ids = np.concatenate([_ids(p) for p in parts])
    assert np.unique(ids).size == ids.size
    held = set()
    for p, r in zip(parts, rings):
        labels = set(np.unique(p.y).tolist())
        assert labels <= set(ring_labels(int(r)).tolist())
        held |= labels
    assert held == set(range(10))
    # every class fully handed out and split evenly among its holders
    assert ids.size == len(data)
    for c in range(10):
        sizes = [p.class_counts()[c] for p, r in zip(parts, rings) if c in ring_labels(int(r))]
        assert max(sizes) - min(sizes) <= 1


def test_edge_devices_hold_high_labels():
    cell = CellConfig(num_eds=10)
    parts = partition_location(_indexed(100), ed_link_distances(cell), cell, np.random.default_rng(2))
    assert parts[0].y.max() <= 5 and parts[-1].y.min() >= 4


def _model_and_batch(kind, seed, n=20, dim=16):
    rng = np.random.default_rng(seed)
    model = build_model(kind, dim, 10, hidden=8)
    w = rng.standard_normal(model.n_params) * 0.5
    x = rng.standard_normal((n, dim))
    y = rng.integers(0, 10, n)
    return model, w, x, y


@pytest.mark.parametrize("kind", ["linear", "mlp"])
@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(kind, seed):
    model, w, x, y = _model_and_batch(kind, seed)
    g = local_gradient(model, w, x, y)
    coords = np.random.default_rng(seed + 100).choice(model.n_params, size=min(100, model.n_params), replace=False)
    fd = fd_gradient(model, w, x, y, coords)
    rel = np.abs(g[coords] - fd) / np.maximum(np.abs(fd), 1e-8)
    assert np.max(np.abs(g[coords] - fd)) < 1e-8 or np.max(rel) < 1e-5


def test_reference_model_size():
    assert LinearSoftmax(16, 10).n_params == 170
    assert OneHiddenLayer(16, 32, 10).n_params == 16 * 32 + 32 + 32 * 10 + 10


def test_zero_weights_balanced_binary_bias_gradient():
    model = LinearSoftmax(4, 2)
    x = np.random.default_rng(0).standard_normal((6, 4))
    g = local_gradient(model, model.init_params(), x, np.array([0, 1, 0, 1, 0, 1]))
    assert np.allclose(g[-2:], 0)


def test_single_sample_gradient():
    model, w, x, y = _model_and_batch("linear", 7, n=5)
    g = local_gradient(model, w, x[:1], y[:1])
    assert np.allclose(g, model.loss_and_grad(w, x[:1], y[:1])[1])
    with pytest.raises(ValueError):
        local_gradient(model, w, x[:0], y[:0])


def test_softmax_stable_for_large_logits():
    model = LinearSoftmax(2, 3)
    w = np.array([1e4, 0, 0, 1e4, -1e4, 0, 0, 0, 0])
    loss, g = model.loss_and_grad(w, np.array([[1.0, 1.0]]), np.array([2]))
    assert np.isfinite(loss) and np.all(np.isfinite(g))


def test_mlp_needs_rng():
    with pytest.raises(ValueError):
        OneHiddenLayer(4, 3, 2).init_params()
    with pytest.raises(ValueError):
        build_model("cnn", 4)


def test_sign_vector():
    rng = np.random.default_rng(0)
    assert sign_vector([-0.3, 0.7], rng).tolist() == [-1, 1]
    assert sign_vector([0.0], rng)[0] in (-1, 1)
    with pytest.raises(ValueError):
        sign_vector([np.nan, 1.0], rng)


@given(c=st.floats(1e-6, 1e6), seed=st.integers(0, 2**31))
def test_sign_scale_invariance(c, seed):
    g = np.random.default_rng(seed).standard_normal(50)
    assert np.array_equal(sign_vector(c * g, np.random.default_rng(0)), sign_vector(g, np.random.default_rng(0)))


def test_apply_update_examples():
    assert apply_update([0.0, 0.0], [1, -1], 0.01).tolist() == [-0.01, 0.01]
    w = np.array([0.3, -0.2])
    assert np.allclose(apply_update(apply_update(w, [1, -1], 0.1), [-1, 1], 0.1), w)
    v = random_signs(170, np.random.default_rng(0))
    assert np.sum(np.abs(apply_update(np.zeros(170), v, 0.01))) == pytest.approx(1.7)
    with pytest.raises(ValueError):
        apply_update([0.0], [1, 1], 0.1)


@given(n=st.integers(1, 60), b=st.integers(1, 40), r=st.integers(0, 30))
@settings(max_examples=40)
def test_batch_indices(n, b, r):
    idx = batch_indices(n, b, r, seed=3, ed=1)
    assert idx.size == b and idx.min() >= 0 and idx.max() < n
    assert np.array_equal(idx, batch_indices(n, b, r, seed=3, ed=1))


def test_batches_cover_epoch_without_replacement():
    n, b = 40, 8
    epoch = np.concatenate([batch_indices(n, b, r, 0, 0) for r in range(5)])
    assert sorted(epoch) == list(range(n))
    assert not np.array_equal(batch_indices(n, b, 5, 0, 0), batch_indices(n, b, 0, 0, 0))


def test_train_config_validation():
    for kw in (dict(learning_rate=0), dict(batch_size=0), dict(rounds=0), dict(scheme="x"), dict(partition="x"),
               dict(lr_schedule="x"), dict(gamma=0)):
        with pytest.raises(ValueError):
            TrainConfig(**kw)


def test_bound_schedule_mode():
    eta, nb = TrainConfig(rounds=400, lr_schedule="bound", gamma=4, l1_smoothness=2.0).step_and_batch()
    assert nb == 100 and eta == pytest.approx(1 / np.sqrt(200))


@pytest.fixture(scope="module")
def task():
    return synthetic_task(np.random.default_rng(0), 500, 50, dim=16)


def test_untrained_model_chance_accuracy(task):
    _, test = task
    model = LinearSoftmax(16)
    acc, loss = evaluate(model, model.init_params(), test)
    assert acc == pytest.approx(0.1)
    assert loss == pytest.approx(np.log(10))


def test_separable_fit_loss_small():
    x = np.array([[10.0, 0.0], [0.0, 10.0]])
    data = Dataset(x, np.array([0, 1]), 2)
    model = LinearSoftmax(2, 2)
    w = np.array([5.0, 0.0, 0.0, 5.0, 0.0, 0.0])
    acc, loss = evaluate(model, w, data)
    assert acc == 1.0 and loss < 1e-20


@pytest.mark.parametrize("scheme", ["fsk_mv", "obda_tci", "obda_blind", "ideal_mv"])
def test_round_moves_every_coordinate_by_eta(task, scheme):
    train, _ = task
    model = LinearSoftmax(16)
    tcfg = TrainConfig(scheme=scheme, rounds=1)
    s0 = init_state(model, train, tcfg, LINK.cell)
    s1 = train_round(s0, model, tcfg, LINK)
    assert np.allclose(np.abs(s1.w - s0.w), tcfg.learning_rate)
    assert s1.round == 1 and len(s1.history) == 1


def test_error_free_sgd_uses_mean_gradient(task):
    train, _ = task
    model = LinearSoftmax(16)
    tcfg = TrainConfig(scheme="error_free_sgd", batch_size=10_000)
    s0 = init_state(model, train, tcfg, LINK.cell)
    mean = np.mean([local_gradient(model, s0.w, d.x, d.y) for d in s0.datasets], axis=0)
    s1 = train_round(s0, model, tcfg, LINK)
    assert np.allclose(s1.w, s0.w - 0.01 * mean)


def test_single_device_ideal_mv_is_signsgd(task):
    train, _ = task
    model = LinearSoftmax(16)
    cell = CellConfig(num_eds=1)
    link = LinkConfig(cell=cell)
    tcfg = TrainConfig(scheme="ideal_mv", rounds=5)
    state = init_state(model, train, tcfg, cell)
    d = state.datasets[0]
    w = state.w.copy()
    for n in range(5):
        idx = batch_indices(len(d), 32, n, tcfg.seed, 0)
        g = local_gradient(model, w, d.x[idx], d.y[idx])
        w = w - 0.01 * np.sign(g)
        state = train_round(state, model, tcfg, link)
    assert np.array_equal(state.w, w)


def test_identical_datasets_full_agreement(task):
    train, _ = task
    model = LinearSoftmax(16)
    local = train.subset(np.arange(200))
    cell = CellConfig(num_eds=5)
    tcfg = TrainConfig(scheme="ideal_mv", batch_size=len(local))
    state = TrainState(w=model.init_params(), round=0, datasets=[local] * 5, distances=ed_link_distances(cell))
    w = state.w.copy()
    for _ in range(5):
        state = train_round(state, model, tcfg, LinkConfig(cell=cell))
        w = w - 0.01 * np.sign(local_gradient(model, w, local.x, local.y))
        assert state.history[-1]["mv_error_rate"] == 0.0
    assert np.allclose(state.w, w)


class _Scaled:
    """Wraps a model and multiplies its loss by ``c``."""

    def __init__(self, model, c):
        self.model, self.c = model, c
        self.n_params = model.n_params

    def init_params(self, rng=None):
        return self.model.init_params(rng)

    def loss_and_grad(self, w, x, y):
        loss, g = self.model.loss_and_grad(w, x, y)
        return self.c * loss, self.c * g


def test_loss_scale_leaves_trajectory_unchanged(task):
    train, _ = task
    base = LinearSoftmax(16)
    tcfg = TrainConfig(scheme="fsk_mv")
    states = []
    for model in (base, _Scaled(base, 37.5)):
        s = init_state(model, train, tcfg, LINK.cell)
        for _ in range(5):
            s = train_round(s, model, tcfg, LINK)
        states.append(s)
    assert np.array_equal(states[0].w, states[1].w)


@pytest.mark.parametrize("scheme", ["fsk_mv", "obda_tci", "error_free_sgd"])
def test_training_deterministic(task, scheme):
    train, test = task
    model = LinearSoftmax(16)
    tcfg = TrainConfig(scheme=scheme, rounds=10)
    a = run_training(model, train, test, tcfg, LINK)
    b = run_training(model, train, test, tcfg, LINK)
    assert np.array_equal(a.state.w, b.state.w)
    assert a.history == b.history


def test_training_with_sync_errors_runs(task):
    train, test = task
    link = replace(LINK, sync_errors=True)
    res = run_training(LinearSoftmax(16), train, test, TrainConfig(rounds=20), link)
    assert res.history[-1]["test_accuracy"] > 0.5


def test_aggregate_rejects_error_free():
    with pytest.raises(ValueError):
        aggregate("error_free_sgd", np.ones((2, 3)), np.ones(2), LINK, 0, 0)


def test_aggregate_fsk_mv_pads_partial_symbol():
    votes = np.ones((3, 170), dtype=np.int8)
    link = LinkConfig(cell=CellConfig(num_eds=3, noise_var=0.0), profile=FLAT)
    out = aggregate("fsk_mv", votes, np.ones(3), link, 0, 0)
    assert out.shape == (170,) and np.all(out == 1)


def test_mv_error_non_increasing_in_snr():
    k, q, seeds = 10, 600, 20
    rates = []
    for snr in (-10.0, 0.0, 10.0, 30.0):
        link = replace(LINK, cell=LINK.cell.with_snr_db(snr))
        errs = []
        for seed in range(seeds):
            votes = random_signs(k * q, substream(seed, 99)).reshape(k, q)
            tally = votes.astype(int).sum(axis=0)
            strict = tally != 0
            v = aggregate("fsk_mv", votes, np.ones(k), link, seed, 0)
            errs.append(np.mean(v[strict] != np.sign(tally[strict])))
        rates.append(np.mean(errs))
    assert all(b <= a + 1e-3 for a, b in zip(rates, rates[1:]))
    assert rates[-1] < rates[0]


def test_iid_local_losses_near_equal(task):
    # spread measured as the coefficient of variation across devices, averaged over partitions
    train, test = task
    cvs = []
    for seed in range(5):
        res = run_training(LinearSoftmax(16), train, test, TrainConfig(rounds=50, scheme="ideal_mv", seed=seed), LINK)
        cvs.append(res.local_loss.std() / res.local_loss.mean())
    assert np.mean(cvs) < 0.1


def test_local_losses_nan_for_empty_device():
    model = LinearSoftmax(3, 2)
    empty = Dataset(np.zeros((0, 3)), np.zeros(0, dtype=int), 2)
    full = Dataset(np.ones((2, 3)), np.array([0, 1]), 2)
    state = TrainState(model.init_params(), 0, [empty, full], np.array([10.0, 20.0]))
    out = local_losses(model, state)
    assert np.isnan(out[0]) and out[1] == pytest.approx(np.log(2))


@pytest.mark.parametrize("dtype", [np.uint8, np.int8, np.int16, np.int32, np.float32, np.float64])
@pytest.mark.parametrize("suffix", [".idx", ".idx.gz"])
def test_idx_round_trip(tmp_path, dtype, suffix):
    arr = (np.arange(2 * 3 * 4) % 100).astype(dtype).reshape(2, 3, 4)
    path = tmp_path / f"a{suffix}"
    write_idx(path, arr)
    back = read_idx(path)
    assert back.dtype == np.dtype(dtype) and np.array_equal(back, arr)


def test_idx_header_layout(tmp_path):
    write_idx(tmp_path / "l.idx", np.array([3, 1, 4], dtype=np.uint8))
    raw = (tmp_path / "l.idx").read_bytes()
    assert raw[:4] == bytes([0, 0, 0x08, 1]) and raw[4:8] == (3).to_bytes(4, "big")
    write_idx(tmp_path / "i.idx", np.zeros((2, 28, 28), dtype=np.uint8))
    assert (tmp_path / "i.idx").read_bytes()[:4] == bytes.fromhex("00000803")


def test_idx_rejects_garbage(tmp_path):
    p = tmp_path / "bad.idx"
    p.write_bytes(b"\x01\x02\x03\x04")
    with pytest.raises(ValueError):
        read_idx(p)
    p.write_bytes(b"\x00\x00\x07\x01\x00\x00\x00\x01\x00")
    with pytest.raises(ValueError):
        read_idx(p)


def test_load_idx_dataset(tmp_path):
    images = np.random.default_rng(0).integers(0, 256, (6, 4, 4)).astype(np.uint8)
    labels = np.array([0, 1, 2, 3, 4, 5], dtype=np.uint8)
    write_idx(tmp_path / "x.gz", images)
    with gzip.open(tmp_path / "y.gz", "wb") as fh:
        fh.write(bytes([0, 0, 8, 1]) + (6).to_bytes(4, "big") + labels.tobytes())
    data = load_idx_dataset(tmp_path / "x.gz", tmp_path / "y.gz")
    assert data.x.shape == (6, 16) and data.x.max() <= 1.0
    assert np.allclose(data.x[0], images[0].ravel() / 255)
    write_idx(tmp_path / "y2.idx", labels[:5])
    with pytest.raises(ValueError):
        load_idx_dataset(tmp_path / "x.gz", tmp_path / "y2.idx")
