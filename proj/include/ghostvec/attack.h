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

#ifndef GHOSTVEC_ATTACK_H_
#define GHOSTVEC_ATTACK_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ghostvec/asr.h"

namespace ghostvec {

// Gaussian "empty audio" in feature space. `mean` holds either one value
// for every column or one value per feature column.
struct NoiseSpec {
  RowVector mean = RowVector::Zero(1);
  double stddev = 0.1;
};

struct AttackConfig {
  double epsilon = 0.05;        // per-step L-inf magnitude
  int max_iters = 100;
  int frames = 100;             // input length T
  NoiseSpec noise;
  std::optional<double> budget; // cumulative L-inf bound around the start point
  uint64_t seed = 1;
  // Ablation switch: optimize <speaker> and <eos> instead of the speaker
  // position alone.
  bool full_sequence_loss = false;

  void validate() const;
  // Stable SHA-256 of every field.
  std::string digest() const;
};

struct GhostVec {
  Matrix embedding;       // T' x D encoder output
  Vector pooled;          // time mean of `embedding`
  std::string target_speaker;
  uint64_t seed = 0;      // seed of the variant's noise draw
  int iters_used = 0;     // FGSM steps taken
  double final_loss = 0;
  bool success = false;
};

struct AttackResult {
  std::vector<GhostVec> ghostvecs;
  double success_rate = 0;
};

// T x 120 noise matrix drawn with cfg.seed.
Matrix init_input(const AttackConfig& cfg);
// x - epsilon * sign(grad), sign(0) = 0. Descends the loss towards the
// target label.
Matrix fgsm_step(const Matrix& x, const Matrix& grad, double epsilon);

// One variant: start from init_input(seeded per variant) and step until the
// first decoded token is the target or max_iters steps were taken. When
// `final_input` is non-null it receives the last input.
GhostVec attack_variant(const AsrModel& model, const std::string& target_speaker,
                        const AttackConfig& cfg, int variant, Matrix* final_input = nullptr);
uint64_t variant_seed(const AttackConfig& cfg, const std::string& target_speaker, int variant);

AttackResult extract_ghostvec(const AsrModel& model, const std::string& target_speaker,
                              const AttackConfig& cfg, int n_variants);

// Re-decodes the harvested embedding and checks the first token.
bool verify_ghostvec(const AsrModel& model, const GhostVec& gv);

// Per-target bundle: text header, provenance lines, pooled N x D matrix and
// optionally each full T' x D embedding (all in the matrix file format).
struct GhostVecBundle {
  std::string target_speaker;
  int dim = 0;
  std::string config_digest;
  std::vector<GhostVec> ghostvecs;  // embedding left empty when not stored
  bool has_full = false;

  Matrix pooled_matrix() const;
};

void save_bundle(const std::string& path, const GhostVecBundle& bundle, bool include_full);
GhostVecBundle load_bundle(const std::string& path);

}  // namespace ghostvec

#endif  // GHOSTVEC_ATTACK_H_
