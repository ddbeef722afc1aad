# Copyright (c) 2026 The GhostVec Lab Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import ghostvec as gv


def test_features_shape():
    t = np.arange(16000) / 16000.0
    x = 0.3 * np.sin(2 * np.pi * 220 * t)
    f = gv.compute_features(x)
    assert f.shape == (98, 120)
    assert np.isfinite(f).all()


def test_eer_matches_sorting_oracle():
    rng = np.random.default_rng(0)
    tgt = rng.normal(1.5, 1.0, 300)
    non = rng.normal(0.0, 1.0, 300)
    pct, _ = gv.eer(tgt.tolist(), non.tolist())
    # Crossing of FRR and FAR over all observed thresholds.
    th = np.sort(np.concatenate([tgt, non]))
    frr = np.array([(tgt < t).mean() for t in th])
    far = np.array([(non >= t).mean() for t in th])
    i = np.argmin(np.abs(frr - far))
    assert abs(pct - 100 * (frr[i] + far[i]) / 2) < 1.0
    assert 0 < gv.min_dcf(tgt.tolist(), non.tolist()) <= 1
    act, mn = gv.cllr(tgt.tolist(), non.tolist())
    assert 0 <= mn <= act or math.isclose(mn, act)


def test_separable_scores():
    pct, _ = gv.eer([2.0, 3.0], [0.0, 1.0])
    assert pct == 0.0


def test_svd_and_transfer():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(7, 5))
    U, s, V = gv.svd(X)
    R = U[:, :5] @ np.diag(s) @ V.T
    assert np.linalg.norm(R - X) / np.linalg.norm(X) < 1e-10
    T = gv.transfer(X, rng.normal(size=(7, 5)))
    assert np.allclose(np.linalg.svd(T, compute_uv=False), s, atol=1e-9)


def test_cosine():
    assert gv.cosine_similarity(np.array([1.0, 0.0]), np.array([2.0, 0.0])) == pytest.approx(1.0)


def test_errors_are_typed():
    with pytest.raises(gv.Error, match="^insufficient:"):
        gv.eer([], [1.0])


def test_stage_names():
    assert gv.stage_names()[0] == "corpus"
    assert gv.stage_names()[-1] == "report"


def test_unknown_stage(tmp_path):
    import os

    conf = os.path.join(os.environ.get("GHOSTVEC_SOURCE_DIR", "."), "configs", "default.conf")
    with pytest.raises(gv.Error):
        gv.run_stage(conf, "nope", str(tmp_path))
