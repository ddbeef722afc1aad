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

#ifndef GHOSTVEC_SYNTHESIS_H_
#define GHOSTVEC_SYNTHESIS_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ghostvec/features.h"
#include "ghostvec/voice.h"

namespace ghostvec {

struct VoiceRange {
  double lo = 0;
  double hi = 1;
  double mid() const { return 0.5 * (lo + hi); }
};

struct VoiceMapConfig {
  int basis = 16; // principal coordinates fed to the regression
  VoiceRange f0{80.0, 270.0};
  VoiceRange formant_scale{0.85, 1.20};
  VoiceRange brightness{0.05, 0.95};
  VoiceRange noise_floor{0.0015, 0.007};

  void validate() const;
};

// Embedding -> voice parameters: project onto a fixed principal basis, apply
// a linear map without intercept, then squash each output into its range
// with a logistic. X = 0 maps to the range midpoints.
class VoiceMap {
 public:
  VoiceMap() = default;
  VoiceMap(Matrix basis, Matrix weights, const VoiceMapConfig& cfg);

  // Least-squares fit of logit-scaled voice parameters on the principal
  // coordinates of the given (typically per-speaker mean) embeddings.
  static VoiceMap fit(const std::vector<Vector>& embeddings, const std::vector<VoiceParams>& voices,
                      const VoiceMapConfig& cfg = {});

  VoiceParams operator()(const Vector& X) const;
  Vector coordinates(const Vector& X) const;
  VoiceParams midpoint() const;

  int dim() const { return static_cast<int>(basis_.rows()); }
  const Matrix& basis() const { return basis_; }      // D x k, orthonormal columns
  const Matrix& weights() const { return weights_; }  // k x 4
  const VoiceMapConfig& config() const { return cfg_; }
  // Smallest singular value of the weights restricted to the first three
  // coordinates; positive means the map is injective there.
  double injectivity_margin() const;

  void save(const std::string& path) const;
  static VoiceMap load(const std::string& path);

 private:
  Matrix basis_;
  Matrix weights_;
  VoiceMapConfig cfg_;
};

inline VoiceParams embed_to_voice(const VoiceMap& map, const Vector& X) { return map(X); }

struct SynthConfig {
  int frames_per_char = 8;
  FrameConfig frame;
  uint64_t noise_seed = 7;
  int nnls_iters = 50;
  int griffin_lim_iters = 32;
  uint64_t phase_seed = 11;

  void validate() const;
};

struct SynthesisRequest {
  std::string text;
  Vector embedding;
};

// Nonnegative mel representation ln(1 + E / kLogFloor) of mel energies E.
Matrix mel_from_power(const Matrix& mel_energy);
Matrix mel_from_waveform(const Waveform& wave, const FrameConfig& cfg = {});

// Renders `text` for a voice at a fixed frames-per-character rate.
Waveform render_text(const VoiceParams& voice, const std::string& text, const SynthConfig& cfg);
// len(text) * frames_per_char x 40.
Matrix synth_mel(const VoiceMap& map, const SynthesisRequest& req, const SynthConfig& cfg = {});

// Mel -> linear power by nonnegative least squares, then Griffin-Lim phase
// reconstruction. Output has window + (T - 1) * hop samples, peak <= 1.
Waveform vocode(const Matrix& mel, const SynthConfig& cfg = {});

double pearson(const Matrix& a, const Matrix& b);

// Synthesis request list: `utt_id<TAB>text<TAB>embedding-file` where the
// embedding file is a 1 x D or D x 1 matrix, relative to the list's directory.
struct SynthJob {
  std::string utt_id;
  std::string text;
  std::string embedding_path;
};
std::vector<SynthJob> load_synth_jobs(const std::string& path);

}  // namespace ghostvec

#endif  // GHOSTVEC_SYNTHESIS_H_
