// Copyright (c) 2026 The GhostVec Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// A small two-speaker ASR model shared by the ASR and attack tests.
#ifndef GHOSTVEC_TESTS_TINY_MODEL_H_
#define GHOSTVEC_TESTS_TINY_MODEL_H_

#include "ghostvec/asr.h"

namespace tiny {

inline ghostvec::ModelConfig model_config() {
  ghostvec::ModelConfig mc;
  mc.encoder_layers = 1;
  mc.decoder_layers = 1;
  mc.model_dim = 16;
  mc.heads = 2;
  mc.ffn_dim = 32;
  mc.dropout = 0.0;
  return mc;
}

inline std::vector<ghostvec::TrainingExample> examples() {
  ghostvec::CorpusConfig cc;
  cc.n_speakers = 2;
  cc.utts_per_speaker = 1;
  cc.min_len = 3;
  cc.max_len = 4;
  cc.seed = 5;
  std::vector<ghostvec::TrainingExample> out;
  for (auto& u : ghostvec::generate_utterances(cc)) out.push_back({u.features, u.speaker_id, u.transcript});
  return out;
}

inline const ghostvec::AsrModel& model() {
  static const ghostvec::AsrModel m = [] {
    ghostvec::TrainConfig tc;
    tc.epochs = 150;
    tc.batch = 2;
    tc.lr = 5e-3;
    tc.warmup_steps = 10;
    tc.seed = 3;
    return ghostvec::train_asr(examples(), ghostvec::VocabSpec({"spk00", "spk01"}), model_config(), tc);
  }();
  return m;
}

}  // namespace tiny

#endif  // GHOSTVEC_TESTS_TINY_MODEL_H_
