import numpy as np
import pytest

import taylorse as ts


def test_stft_round_trip():
    x = ts.white_noise(16000, seed=1)
    spec = ts.stft(x)
    assert spec.shape == (99, 161)
    assert spec.dtype == np.complex128
    y = ts.istft(spec)
    assert np.max(np.abs(y[160:-160] - x[160 : len(y) - 160])) < 1e-9


def test_multichannel_stft_shape():
    x = np.stack([ts.white_noise(3200, seed=s) for s in range(3)])
    assert ts.stft(x).shape == (3, 19, 161)


def test_erb_matrices():
    fwd, inv = ts.erb_matrix(), ts.erb_inverse_matrix()
    assert fwd.shape == (32, 161) and inv.shape == (161, 32)
    assert np.allclose(fwd.sum(axis=1), 1.0)
    assert len(ts.erb_centers_hz()) == 32


def test_counts_and_receptive_field():
    lite = ts.Model("taerlite", 3, 1)
    assert lite.params == 1924583
    assert lite.receptive_field() == (2, 2)
    assert ts.Model("taer", 1, 1).receptive_field() == (177, 137)
    probe = lite.probe(ts.Weights.random(lite, seed=2))
    assert probe == {"zeroth_order": 2, "high_order": 2, "causal": True}
    assert '"params"' in lite.describe(json=True)


def test_weights_round_trip(tmp_path):
    m = ts.Model("taerlite", 1, 1)
    w = ts.Weights.random(m, seed=5)
    path = tmp_path / "m.tayw"
    w.save(path)
    back = ts.Weights.load(path)
    assert back.names() == w.names()
    name = w.names()[0]
    assert np.array_equal(back[name], w[name])
    ok, _ = back.validate(m)
    assert ok
    ok, summary = back.validate(ts.Model("taerlite", 2, 1))
    assert not ok and summary
    path.write_bytes(b"junk")
    with pytest.raises(ts.FormatError):
        ts.Weights.load(path)


def test_engine_streaming_matches_offline():
    m = ts.Model("taerlite", 2, 1)
    e = ts.Engine(m, ts.Weights.random(m, seed=3))
    spec = ts.stft(0.1 * ts.white_noise(4000, seed=4))
    a, b = e.forward(spec), e.forward(spec, streaming=False)
    assert len(a["orders"]) == 3
    assert np.max(np.abs(a["enhanced"] - b["enhanced"])) <= 1e-6
    with pytest.raises(ts.ShapeError):
        e.forward(spec[:, :160])


def test_zero_surrogate_heads_give_zeroth_order():
    m = ts.Model("taer", 2, 1)
    w = ts.Weights.random(m, seed=9)
    for name in w.names():
        if name.startswith("surrogate"):
            w[name] = np.zeros_like(w[name])
    out = ts.Engine(m, w).forward(ts.stft(ts.white_noise(3200, seed=1)))
    assert np.max(np.abs(out["partial_sums"][-1] - out["orders"][0])) <= 1e-7


def test_enhance_and_metrics():
    m = ts.Model("taerlite", 1, 1)
    e = ts.Engine(m, ts.Weights.random(m, seed=1))
    clean = np.sin(2 * np.pi * 200 * np.arange(8000) / 16000)
    noise = ts.orthogonalize(ts.white_noise(8000, seed=2), clean)
    noisy = ts.mix(clean, noise, 5.0)
    assert abs(ts.si_snr(noisy, clean) - 5.0) < 0.2
    y = e.enhance(noisy)
    assert y.shape == noisy.shape and np.all(np.isfinite(y))
    assert np.array_equal(y, e.enhance(noisy, chunk=1000))
    assert len(e.bench_rtf(seconds=0.5, runs=2)) == 2
