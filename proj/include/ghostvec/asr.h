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

#ifndef GHOSTVEC_ASR_H_
#define GHOSTVEC_ASR_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ghostvec/autodiff.h"
#include "ghostvec/common.h"
#include "ghostvec/corpus.h"

namespace ghostvec {

// Token layout: PAD, SOS, EOS, the 27 alphabet characters, then one token
// per training speaker ("<spk:ID>").
class VocabSpec {
 public:
  static constexpr int kPad = 0, kSos = 1, kEos = 2, kCharBegin = 3;

  VocabSpec() = default;
  explicit VocabSpec(std::vector<std::string> speakers);

  int size() const { return static_cast<int>(tokens_.size()); }
  int n_chars() const { return static_cast<int>(kAlphabet.size()); }
  int n_speakers() const { return static_cast<int>(speakers_.size()); }
  int speaker_begin() const { return kCharBegin + n_chars(); }

  int char_token(char c) const;                      // VocabError if outside alphabet
  int speaker_token(const std::string& speaker) const;  // VocabError if unknown
  bool has_speaker(const std::string& speaker) const;
  bool is_char(int tok) const { return tok >= kCharBegin && tok < speaker_begin(); }
  bool is_speaker(int tok) const { return tok >= speaker_begin() && tok < size(); }
  char token_char(int tok) const;
  const std::string& speaker_of(int tok) const;
  const std::string& token_string(int tok) const { return tokens_.at(tok); }
  const std::vector<std::string>& speakers() const { return speakers_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const VocabSpec& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> speakers_;
  std::vector<std::string> tokens_;
};

// <SOS> <speaker> c1 .. cn <EOS>
struct LabelSequence {
  std::vector<int> tokens;
};

LabelSequence make_labels(const VocabSpec& vocab, const std::string& speaker,
                          const std::string& transcript);
// Throws VocabError when the sequence violates the layout.
void validate_labels(const VocabSpec& vocab, const LabelSequence& labels);

// Loss masks select predicted positions: entry i covers the prediction of
// labels.tokens[i + 1]. Position 0 is the speaker token.
std::vector<uint8_t> full_mask(const LabelSequence& labels);
std::vector<uint8_t> speaker_only_mask(const LabelSequence& labels);

struct ModelConfig {
  int encoder_layers = 2;
  int decoder_layers = 2;
  int model_dim = 64;
  int heads = 4;
  int ffn_dim = 128;
  double dropout = 0.1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  int epochs = 20;
  double lr = 1e-3;
  int batch = 16;
  int warmup_steps = 200;
  double grad_clip = 5.0;
  uint64_t seed = 1;
  // Optional progress hook: (epoch, mean loss).
  std::function<void(int, double)> on_epoch;
};

struct TrainingExample {
  Matrix features;
  std::string speaker;
  std::string transcript;
};

// Encoder-decoder transformer with a stride-2 frame-stacking frontend and
// pre-LN blocks. Inputs are normalized with frozen corpus statistics.
class AsrModel {
 public:
  AsrModel() = default;
  AsrModel(const ModelConfig& cfg, VocabSpec vocab, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const VocabSpec& vocab() const { return vocab_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }
  std::string checksum() const { return params_.checksum(); }

  const RowVector& feature_mean() const { return feat_mean_; }
  const RowVector& feature_inv_std() const { return feat_inv_std_; }
  void set_feature_stats(RowVector mean, RowVector inv_std);

  // Graph builders. `rng` non-null enables dropout.
  ad::Var encoder(ad::Graph& g, ad::Var features, Rng* rng) const;
  ad::Var decoder(ad::Graph& g, ad::Var memory, const std::vector<int>& prefix, Rng* rng) const;

  void save(const std::string& path) const;
  static AsrModel load(const std::string& path);

 private:
  ad::Var linear(ad::Graph& g, ad::Var x, const std::string& name) const;
  ad::Var attention_block(ad::Graph& g, ad::Var x, ad::Var memory, const std::string& name,
                          bool causal) const;
  ad::Var ffn_block(ad::Graph& g, ad::Var x, const std::string& name, Rng* rng) const;
  ad::Var norm(ad::Graph& g, ad::Var x, const std::string& name) const;
  ad::Parameter& p(const std::string& name) const;

  ModelConfig config_;
  VocabSpec vocab_;
  mutable ad::ParameterSet params_;
  RowVector feat_mean_, feat_inv_std_;
  bool frozen_ = false;
};

inline constexpr uint32_t kAsrCheckpointVersion = 1;

// Sinusoidal positional encoding, rows x dim.
Matrix positional_encoding(Eigen::Index rows, int dim);

AsrModel train_asr(const std::vector<TrainingExample>& data, const VocabSpec& vocab,
                   const ModelConfig& cfg, const TrainConfig& train_cfg);
// Loads every manifest entry; the vocabulary covers the manifest speakers.
AsrModel train_asr(const Manifest& manifest, const ModelConfig& cfg, const TrainConfig& train_cfg);

// T' x D encoder output (dropout off).
Matrix encode(const AsrModel& model, const Matrix& features);

struct DecodeResult {
  std::vector<int> tokens;        // predicted tokens after SOS, EOS included if reached
  std::vector<Vector> posteriors; // one softmax vector per step
  int speaker_token() const { return tokens.empty() ? -1 : tokens.front(); }
  // Characters of the interior tokens (non-char tokens dropped).
  std::string text(const VocabSpec& vocab) const;
};

DecodeResult decode_greedy(const AsrModel& model, const Matrix& encoder_out, int max_len);

// Teacher-forced masked cross-entropy.
double loss(const AsrModel& model, const Matrix& features, const LabelSequence& labels,
            const std::vector<uint8_t>& mask);
// d loss / d features; requires a frozen model.
Matrix grad_input(const AsrModel& model, const Matrix& features, const LabelSequence& labels,
                  const std::vector<uint8_t>& mask);

// Loss, gradient and first-step logits from one forward/backward pass over the
// minimal decoder prefix.
struct InputGradient {
  double loss = 0;
  Matrix grad;
  Vector first_step_logits;
};
InputGradient loss_and_grad_input(const AsrModel& model, const Matrix& features,
                                  const LabelSequence& labels, const std::vector<uint8_t>& mask);

// Levenshtein distance / reference length * 100.
double cer(const std::string& hypothesis, const std::string& reference);
size_t edit_distance(const std::string& a, const std::string& b);

}  // namespace ghostvec

#endif  // GHOSTVEC_ASR_H_
