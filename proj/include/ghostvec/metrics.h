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

#ifndef GHOSTVEC_METRICS_H_
#define GHOSTVEC_METRICS_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ghostvec/autodiff.h"
#include "ghostvec/corpus.h"
#include "json.hpp"

namespace ghostvec {

// ------------------------------------------------------------ speaker encoder

struct EncoderConfig {
  int hidden = 128;
  int embed_dim = 64;
  int epochs = 12;
  int batch = 32;
  double lr = 2e-3;
  int warmup_steps = 50;
  int crop_frames = 80;  // random training crop, <= 0 disables
  uint64_t seed = 1;
  std::function<void(int epoch, double loss, double accuracy)> on_epoch;

  void validate() const;
};

struct LabeledFeatures {
  Matrix features;
  std::string speaker;
};

// Frame MLP, mean+std statistics pooling, affine embedding layer and a
// speaker-classification head used only for training.
class SpeakerEncoder {
 public:
  SpeakerEncoder() = default;
  SpeakerEncoder(const EncoderConfig& cfg, std::vector<std::string> speakers, uint64_t seed);

  const std::vector<std::string>& speakers() const { return speakers_; }
  int embed_dim() const { return embed_dim_; }
  std::string checksum() const { return params_.checksum(); }
  ad::ParameterSet& params() { return params_; }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }
  void set_feature_stats(RowVector mean, RowVector inv_std);

  Vector embed(const Matrix& features) const;
  int classify(const Matrix& features) const;  // index into speakers()
  double training_accuracy() const { return train_accuracy_; }
  void set_training_accuracy(double a) { train_accuracy_ = a; }

  // Returns {embedding, logits}.
  std::pair<ad::Var, ad::Var> forward(ad::Graph& g, ad::Var features) const;

  void save(const std::string& path) const;
  static SpeakerEncoder load(const std::string& path);

 private:
  int hidden_ = 0;
  int embed_dim_ = 0;
  std::vector<std::string> speakers_;
  RowVector feat_mean_, feat_inv_std_;
  mutable ad::ParameterSet params_;
  bool frozen_ = false;
  double train_accuracy_ = 0;
};

inline constexpr uint32_t kEncoderCheckpointVersion = 1;

SpeakerEncoder train_speaker_encoder(const std::vector<LabeledFeatures>& data,
                                     const EncoderConfig& cfg);
SpeakerEncoder train_speaker_encoder(const Manifest& manifest, const EncoderConfig& cfg);

// -------------------------------------------------------------------- trials

struct Trial {
  std::string enroll_id;
  std::string test_id;
  bool target = false;
};

struct ScoredTrial {
  Trial trial;
  double score = 0;
};

using TrialScoreSet = std::vector<ScoredTrial>;

// Cosine similarity between the mean enrollment embedding and the test embedding.
TrialScoreSet score_embeddings(const std::map<std::string, std::vector<Vector>>& enroll,
                               const std::map<std::string, Vector>& test,
                               const std::vector<Trial>& trials, bool allow_same_id = false);
TrialScoreSet score_trials(const SpeakerEncoder& enc,
                           const std::map<std::string, std::vector<Matrix>>& enroll,
                           const std::map<std::string, Matrix>& test,
                           const std::vector<Trial>& trials, bool allow_same_id = false);

void save_trials(const std::vector<Trial>& trials, const std::string& path);
std::vector<Trial> load_trials(const std::string& path);
void save_scores(const TrialScoreSet& scores, const std::string& path);
TrialScoreSet load_scores(const std::string& path);

// ------------------------------------------------------------------- metrics

struct ScoreSplit {
  std::vector<double> target;
  std::vector<double> nontarget;
};
// Throws InsufficiencyError unless both classes are present; InputError on
// non-finite scores.
ScoreSplit split_scores(const TrialScoreSet& scores);

struct EerResult {
  double eer_pct = 0;
  double threshold = 0;
};

// Operating points sit at -inf, every midpoint between adjacent distinct
// scores, and +inf; a trial is accepted when score > threshold. The EER is the
// linear interpolation where P_miss - P_fa changes sign.
EerResult eer(const std::vector<double>& target, const std::vector<double>& nontarget);
EerResult eer(const TrialScoreSet& scores);

double normalized_dcf(const std::vector<double>& target, const std::vector<double>& nontarget,
                      double threshold, double p_target = 0.01, double c_miss = 1,
                      double c_fa = 1);
double min_dcf(const std::vector<double>& target, const std::vector<double>& nontarget,
               double p_target = 0.01, double c_miss = 1, double c_fa = 1);
double min_dcf(const TrialScoreSet& scores, double p_target = 0.01);

// Pool-adjacent-violators fit of P(target | score); tied scores share a
// value. Output is in input order.
std::vector<double> pav_posteriors(const std::vector<double>& scores,
                                   const std::vector<uint8_t>& is_target);

struct CllrResult {
  double act = 0;
  double min = 0;
};
double cllr_act(const std::vector<double>& target_llr, const std::vector<double>& nontarget_llr);
CllrResult cllr(const std::vector<double>& target, const std::vector<double>& nontarget);
CllrResult cllr(const TrialScoreSet& scores);

struct MetricReport {
  double eer_pct = 0;
  double min_dcf = 0;
  double cllr_min = 0;
  double cllr_act = 0;
  size_t n_target = 0;
  size_t n_nontarget = 0;
};
MetricReport evaluate(const TrialScoreSet& scores, double p_target = 0.01);

// ---------------------------------------------------------------- projection

struct ProjectedPoint {
  std::string label;
  double x = 0;
  double y = 0;
};

struct Projection {
  Matrix directions;  // D x 2, columns are unit principal directions
  RowVector center;
  std::vector<ProjectedPoint> points;
};

// Top-2 principal directions of the centered data. Each direction is signed so
// its largest-magnitude coordinate is positive.
Projection project_2d(const std::vector<std::pair<std::string, Vector>>& embeddings);

// ----------------------------------------------------------------------- CER

struct CerTally {
  size_t edits = 0;
  size_t ref_chars = 0;
  size_t utterances = 0;
  void add(const std::string& reference, const std::string& hypothesis);
  double pct() const;
};

// -------------------------------------------------------------------- report

struct ConditionRow {
  std::string name;
  MetricReport metrics;
  std::optional<double> cer_pct;
};

struct ReferenceRow {
  std::string name;
  double eer_pct, min_dcf, cllr_min, cllr_act;
};

// Published full-scale values, shown as legend context.
const std::vector<ReferenceRow>& reference_rows();
const std::vector<std::pair<std::string, double>>& reference_cer_rows();

struct Report {
  nlohmann::ordered_json json;
  std::string text;
};

Report build_report(const std::vector<std::pair<std::string, TrialScoreSet>>& conditions,
                    const std::map<std::string, double>& cers,
                    const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());

}  // namespace ghostvec

#endif  // GHOSTVEC_METRICS_H_
