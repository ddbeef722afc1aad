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

#ifndef GHOSTVEC_PIPELINE_H_
#define GHOSTVEC_PIPELINE_H_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ghostvec/asr.h"
#include "ghostvec/attack.h"
#include "ghostvec/corpus.h"
#include "ghostvec/metrics.h"
#include "ghostvec/synthesis.h"

namespace ghostvec {

struct PipelineConfig {
  uint64_t seed = 1;
  std::string out = "runs/default";

  // corpus
  CorpusConfig corpus;             // train speakers
  int template_speakers = 30;
  int template_utts = 100;
  int eval_sentences = 120;
  int eval_min_len = 8;
  int eval_max_len = 16;
  int enroll_utts = 10;            // held-out genuine utterances per target

  ModelConfig asr_model;
  TrainConfig asr_train;
  EncoderConfig sv;

  // attack
  int targets = 6;
  int variants = 100;              // for the success-rate measurement
  int max_variants = 300;          // extension cap when collecting svd.rows successes
  AttackConfig attack;
  bool noise_from_silence = true;  // noise mean = corpus silence mean (attack.noise_mean = silence)

  // svd
  int svd_rows = 100;
  int sigma_head = 8;

  VoiceMapConfig voice_map;
  SynthConfig synth;

  double p_target = 0.01;

  // Flat `section.key = value` text; '#' starts a comment. Unknown keys and
  // malformed values raise ConfigError.
  static PipelineConfig parse(const std::string& text, const std::string& source = "<config>");
  static PipelineConfig load(const std::string& path);
  // Canonical `key = value` listing of every setting, sorted by key.
  std::string canonical() const;
  // Digest of the settings a stage depends on (its sections plus the seed).
  std::string stage_digest(const std::string& stage) const;
  // Propagates `seed` into every component seed.
  void apply_seed(uint64_t s);
  void validate() const;
};

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"corpus", "train-asr", "train-sv", "attack",
                                                 "svd-transfer", "synth", "score", "report"};
  return names;
}

struct StageOutcome {
  bool cache_hit = false;
  double wall_seconds = 0;
};

using Logger = std::function<void(const std::string&)>;

class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, Logger log = nullptr);

  const PipelineConfig& config() const { return cfg_; }
  std::string path(const std::string& rel) const;

  // Runs one stage. Skips (cache hit) when the last completed ledger record
  // has the same config and input digests and its outputs are intact, unless
  // `force`. Throws MissingPrerequisiteError when an upstream stage has not
  // completed.
  StageOutcome run(const std::string& stage, bool force = false);
  void run_all(bool force = false);

 private:
  struct Record;
  std::vector<std::string> upstream(const std::string& stage) const;
  std::string output_digest(const std::string& stage) const;
  std::vector<std::string> outputs(const std::string& stage) const;
  void append_ledger(const std::string& line) const;
  const Record* last_completed(const std::string& stage) const;

  void stage_corpus();
  void stage_train_asr();
  void stage_train_sv();
  void stage_attack();
  void stage_svd();
  void stage_synth();
  void stage_score();
  void stage_report();

  std::vector<std::string> target_speakers() const;

  PipelineConfig cfg_;
  Logger log_;
};

}  // namespace ghostvec

#endif  // GHOSTVEC_PIPELINE_H_
