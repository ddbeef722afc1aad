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

"""GhostVec desk laboratory bindings."""

from ._ghostvec import (
    Error,
    VoiceMap,
    cllr,
    compute_features,
    cosine_similarity,
    eer,
    min_dcf,
    run_stage,
    stage_names,
    svd,
    synth_mel,
    transfer,
    vocode,
)

__all__ = [
    "Error",
    "VoiceMap",
    "cllr",
    "compute_features",
    "cosine_similarity",
    "eer",
    "min_dcf",
    "run_stage",
    "stage_names",
    "svd",
    "synth_mel",
    "transfer",
    "vocode",
]
