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

#ifndef GHOSTVEC_CORPUS_H_
#define GHOSTVEC_CORPUS_H_

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ghostvec/features.h"
#include "ghostvec/voice.h"

namespace ghostvec {

struct SpeakerProfile {
  std::string speaker_id;
  double f0_base = 150.0;
  double formant_scale = 1.0;
  double noise_floor = 0.004;
  // Source tilt; shared with the synthesizer's voice parameters.
  double brightness = 0.5;

  VoiceParams voice() const { return {f0_base, formant_scale, brightness, noise_floor}; }
  bool operator==(const SpeakerProfile&) const = default;
};

struct Utterance {
  std::string utt_id;
  std::string speaker_id;
  std::string transcript;
  Matrix features;  // T x 120
};

struct ManifestEntry {
  std::string utt_id;
  std::string speaker_id;
  std::string feature_path;  // relative paths resolve against the manifest directory
  std::string transcript;
  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::set<std::string> speaker_set;
  // Directory relative feature paths are resolved against; not compared.
  std::string root;

  std::string feature_path(const ManifestEntry& e) const;
  Matrix load_features(const ManifestEntry& e) const;
  std::vector<const ManifestEntry*> by_speaker(const std::string& speaker) const;
  bool operator==(const Manifest& o) const {
    return entries == o.entries && speaker_set == o.speaker_set;
  }
};

struct CorpusConfig {
  int n_speakers = 20;
  int utts_per_speaker = 110;
  int min_len = 5;
  int max_len = 20;
  uint64_t seed = 1;
  std::string speaker_prefix = "spk";
  int frames_per_char = 8;
  int duration_jitter = 1;     // +- frames per character
  int pad_frames = 8;          // leading/trailing silence
  double min_separation = 0.2;
  // Profile ranges; separation is measured on the unit cube of
  // (log f0, log formant_scale, brightness).
  double f0_min = 90.0, f0_max = 250.0;
  double formant_min = 0.88, formant_max = 1.16;
  double brightness_min = 0.1, brightness_max = 0.9;
  double noise_min = 0.002, noise_max = 0.006;
  double f0_jitter = 0.03;        // per-utterance log-normal spread
  double f0_drift_depth = 0.04;
  FrameConfig frame;

  void validate() const;
};

// Normalized coordinates used for the separation constraint.
std::array<double, 3> profile_coordinates(const SpeakerProfile& p, const CorpusConfig& cfg);
std::vector<SpeakerProfile> sample_speakers(const CorpusConfig& cfg);
std::string random_transcript(Rng& rng, int length);

// One utterance rendered and featurized. Deterministic in (profile, text, seed).
Utterance generate_utterance(const SpeakerProfile& profile, const std::string& utt_id,
                             const std::string& transcript, uint64_t seed,
                             const CorpusConfig& cfg);

struct Corpus {
  std::vector<SpeakerProfile> speakers;
  Manifest manifest;
};

// Writes <out_dir>/manifest.tsv, <out_dir>/speakers.tsv and one feature file
// per utterance under <out_dir>/feats/.
Corpus generate_corpus(const CorpusConfig& cfg, const std::string& out_dir);
// Same corpus, kept in memory.
std::vector<Utterance> generate_utterances(const CorpusConfig& cfg,
                                           std::vector<SpeakerProfile>* speakers = nullptr);

void save_manifest(const Manifest& m, const std::string& path);
// Validates unique utt ids and that every feature file exists.
Manifest load_manifest(const std::string& path);

void save_speakers(const std::vector<SpeakerProfile>& speakers, const std::string& path);
std::vector<SpeakerProfile> load_speakers(const std::string& path);

// Per-feature mean of the silent padding frames of every manifest utterance
// (the outer pad_frames / 2 frames at each end, clear of speech and of the
// delta context around it).
RowVector silence_mean(const Manifest& manifest, int pad_frames);

}  // namespace ghostvec

#endif  // GHOSTVEC_CORPUS_H_
