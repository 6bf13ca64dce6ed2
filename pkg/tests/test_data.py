import numpy as np
import pytest

from evosnn.data import (
    DataFormatError,
    DataSpec,
    SampleBatch,
    load_event_frames,
    load_raw_batches,
    make_batches,
    synthetic_batches,
    write_event_frames,
    write_raw_samples,
)
from evosnn.genome import Genome, LayerBlock
from evosnn.motifs import build_phenotype
from evosnn.simulate import forward, init_weights


def test_noise_batches_shape_and_range():
    rng = np.random.default_rng(80)
    batches = synthetic_batches("noise", (1, 8, 8), j=8, s=2, rng=rng)
    assert len(batches) == 2
    for batch in batches:
        assert batch.data.shape == (8, 1, 8, 8)
        assert batch.data.min() >= 0.0 and batch.data.max() <= 1.0
        assert batch.labels is None


def test_synthetic_deterministic_given_seed():
    a = synthetic_batches("bars", (1, 8, 8), 4, 2, np.random.default_rng(81))
    b = synthetic_batches("bars", (1, 8, 8), 4, 2, np.random.default_rng(81))
    for ba, bb in zip(a, b):
        assert np.array_equal(ba.data, bb.data)
        assert np.array_equal(ba.labels, bb.labels)


def test_bars_have_exactly_one_active_line():
    rng = np.random.default_rng(82)
    (batch,) = synthetic_batches("bars", (1, 8, 8), 32, 1, rng)
    for sample, label in zip(batch.data, batch.labels):
        img = sample[0]
        full_rows = [r for r in range(8) if np.all(img[r] == 1.0)]
        full_cols = [c for c in range(8) if np.all(img[:, c] == 1.0)]
        assert img.sum() == 8.0
        if label == 0:
            assert len(full_rows) == 1 and not full_cols
        else:
            assert len(full_cols) == 1 and not full_rows


def test_blobs_classes_and_range():
    rng = np.random.default_rng(83)
    (batch,) = synthetic_batches("blobs", (1, 8, 8), 16, 1, rng)
    assert set(np.unique(batch.labels)) <= {0, 1, 2, 3}
    assert batch.data.min() >= 0.0 and batch.data.max() <= 1.0


def test_unknown_generator_rejected():
    with pytest.raises(ValueError):
        synthetic_batches("stripes", (1, 8, 8), 4, 1, np.random.default_rng(84))
    with pytest.raises(ValueError):
        DataSpec(generator="stripes")
    with pytest.raises(ValueError):
        DataSpec(source="raw", path=None)


def test_raw_roundtrip_exact_partition(tmp_path):
    rng = np.random.default_rng(85)
    samples = rng.normal(size=(16, 1, 4, 4)).astype(np.float32)
    path = tmp_path / "samples.bin"
    write_raw_samples(path, samples)
    batches = load_raw_batches(path, j=8, s=2, rng=np.random.default_rng(0))
    assert len(batches) == 2
    stacked = np.concatenate([b.data for b in batches])
    assert stacked.shape == (16, 1, 4, 4)
    assert stacked.min() >= 0.0 and stacked.max() <= 1.0
    # without replacement: every source sample used exactly once
    lo, hi = samples.min(), samples.max()
    rescaled = (samples.astype(np.float64) - lo) / (hi - lo)
    used = {tuple(np.round(s.ravel(), 6)) for s in stacked}
    expected = {tuple(np.round(s.ravel(), 6)) for s in rescaled}
    assert used == expected


def test_raw_loader_errors(tmp_path):
    rng = np.random.default_rng(86)
    path = tmp_path / "small.bin"
    write_raw_samples(path, rng.random((4, 1, 4, 4)))
    with pytest.raises(DataFormatError):
        load_raw_batches(path, j=8, s=2, rng=rng)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(DataFormatError):
        load_raw_batches(bad, j=1, s=1, rng=rng)
    trunc = tmp_path / "trunc.bin"
    with open(path, "rb") as fh:
        trunc.write_bytes(fh.read()[:-8])
    with pytest.raises(DataFormatError):
        load_raw_batches(trunc, j=1, s=1, rng=rng)


def test_raw_loader_deterministic_assignment(tmp_path):
    rng = np.random.default_rng(87)
    path = tmp_path / "samples.bin"
    write_raw_samples(path, rng.random((12, 1, 4, 4)))
    a = load_raw_batches(path, 4, 2, np.random.default_rng(5))
    b = load_raw_batches(path, 4, 2, np.random.default_rng(5))
    for ba, bb in zip(a, b):
        assert np.array_equal(ba.data, bb.data)


def test_event_frames_roundtrip_and_t_mismatch(tmp_path):
    rng = np.random.default_rng(88)
    frames = rng.integers(0, 3, size=(6, 10, 2, 4, 4)).astype(np.float32)
    path = tmp_path / "events.bin"
    write_event_frames(path, frames)
    batches = load_event_frames(path, T=10, j=3, s=2)
    assert len(batches) == 2
    assert batches[0].data.shape == (3, 10, 2, 4, 4)
    assert np.array_equal(batches[0].data, frames[:3].astype(np.float64))
    with pytest.raises(DataFormatError):
        load_event_frames(path, T=4, j=3, s=2)


def test_single_event_appears_once(tmp_path):
    frames = np.zeros((2, 5, 2, 4, 4), dtype=np.float32)
    frames[0, 0, 1, 2, 3] = 1.0
    path = tmp_path / "one_event.bin"
    write_event_frames(path, frames)
    (batch,) = load_event_frames(path, T=5, j=2, s=1)
    sample = batch.data[0]
    assert sample[0, 1, 2, 3] == 1.0
    assert sample.sum() == 1.0
    assert sample[1:].sum() == 0.0  # nothing after timestep 0
    assert sample[:, 0].sum() == 0.0  # other polarity silent


def test_all_zero_events_drive_no_spikes(tmp_path):
    frames = np.zeros((2, 4, 2, 8, 8), dtype=np.float32)
    path = tmp_path / "silent.bin"
    write_event_frames(path, frames)
    (batch,) = load_event_frames(path, T=4, j=2, s=1)
    g = Genome(layers=(LayerBlock(m=1, x=(1,) * 4),), g1=1, g2=1)
    net = build_phenotype(g, (2, 8, 8), 4)
    weights = init_weights(net, np.random.default_rng(89))
    res = forward(net, weights, batch.data[0], 4)
    assert res.total_spikes == 0


def test_event_loader_rejects_negative(tmp_path):
    frames = np.zeros((2, 4, 2, 4, 4), dtype=np.float32)
    frames[0, 0, 0, 0, 0] = -1.0
    path = tmp_path / "neg.bin"
    write_event_frames(path, frames)
    with pytest.raises(DataFormatError):
        load_event_frames(path, T=4, j=2, s=1)


def test_make_batches_dispatch(tmp_path):
    rng = np.random.default_rng(90)
    spec = DataSpec(source="synthetic", generator="noise", shape=(1, 6, 6))
    batches = make_batches(spec, j=4, s=2, T=4, rng=rng)
    assert len(batches) == 2 and batches[0].data.shape == (4, 1, 6, 6)

    raw_path = tmp_path / "raw.bin"
    write_raw_samples(raw_path, rng.random((8, 1, 6, 6)))
    spec = DataSpec(source="raw", path=str(raw_path))
    batches = make_batches(spec, j=4, s=2, T=4, rng=rng)
    assert batches[0].data.shape == (4, 1, 6, 6)

    ev_path = tmp_path / "ev.bin"
    write_event_frames(ev_path, rng.random((8, 4, 2, 6, 6)))
    spec = DataSpec(source="events", path=str(ev_path))
    batches = make_batches(spec, j=4, s=2, T=4, rng=rng)
    assert batches[0].data.shape == (4, 4, 2, 6, 6)
