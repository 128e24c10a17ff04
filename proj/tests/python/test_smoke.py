# Copyright 2026 The ctxhourglass Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json

import numpy as np
import pytest

import ctxhourglass as ch


def naive_conv_same(x, w, b):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    p = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    out = np.empty((n, o, h, wd))
    for i in range(h):
        for j in range(wd):
            out[:, :, i, j] = np.einsum("ncuv,ocuv->no", xp[:, :, i : i + k, j : j + k], w) + b
    return out


def test_conv_matches_numpy_oracle():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 3, 5, 6))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    np.testing.assert_allclose(ch.conv2d_same(x, w, b), naive_conv_same(x, w, b), atol=1e-12)


def test_maxpool_and_selu():
    x = np.arange(16, dtype=float).reshape(1, 1, 4, 4)
    assert ch.maxpool2(x).tolist() == [[[[5.0, 7.0], [13.0, 15.0]]]]
    assert ch.selu(np.zeros((1, 1, 1, 1)))[0, 0, 0, 0] == 0.0
    with pytest.raises(ValueError):
        ch.maxpool2(np.zeros((1, 1, 3, 4)))


def test_contextual_conv_equal_sizes():
    rng = np.random.default_rng(1)
    s = rng.normal(size=(1, 2, 4, 4))
    l = rng.normal(size=(1, 2, 4, 4))
    ws, wl = rng.normal(size=(3, 2, 3, 3)), rng.normal(size=(3, 2, 3, 3))
    bs, bl = rng.normal(size=3), rng.normal(size=3)
    z = naive_conv_same(l, wl, bl) + naive_conv_same(s, ws, bs)
    lam, alpha = 1.0507009873554805, 1.6732632423543772
    expected = np.where(z > 0, lam * z, lam * alpha * np.expm1(z))
    np.testing.assert_allclose(ch.contextual_conv(s, l, ws, bs, wl, bl), expected, atol=1e-12)


def test_index_map():
    assert ch.context_index_map(5, 6, 4, 3, 8, 7) == (2, 2)


def test_network_shapes():
    net = ch.unet(depth=1, base_filters=2, out_channels=1, contextual=False)
    assert net.parameter_count == 431
    out = net.predict(np.zeros((1, 1, 8, 8)))
    assert out.shape == (1, 1, 8, 8)


def test_gradcheck_ops_pass():
    entries = ch.gradcheck("ops", 1)
    assert entries and all(e["passed"] for e in entries)


def test_synth_train_and_reload(tmp_path):
    ch.synth("segment", 3, tmp_path / "data", 1)
    config = {
        "task": "segment",
        "seed": 2,
        "output_dir": "out",
        "data": {"dir": "data"},
        "network": {"depth": 1, "base_filters": 2},
        "train": {"phase1": {"max_epochs": 1}, "phase2": {"max_epochs": 1}},
    }
    (tmp_path / "run.json").write_text(json.dumps(config))
    summary = ch.train(tmp_path / "run.json")
    assert summary["epochs"] == 2
    net = ch.load_checkpoint(tmp_path / "out" / "best.ckpt")
    assert net.predict(np.zeros((1, 1, 64, 64))).shape == (1, 2, 64, 64)


def test_bad_config_raises(tmp_path):
    (tmp_path / "run.json").write_text("{}")
    with pytest.raises(ValueError):
        ch.train(tmp_path / "run.json")
