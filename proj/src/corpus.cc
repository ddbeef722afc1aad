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

#include "ghostvec/corpus.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "ghostvec/matrix_io.h"
#include "ghostvec/tsv.h"

namespace ghostvec {

namespace fs = std::filesystem;

void CorpusConfig::validate() const {
  if (n_speakers < 2) throw ParameterError("corpus: n_speakers must be >= 2");
  if (utts_per_speaker < 1) throw ParameterError("corpus: utts_per_speaker must be >= 1");
  if (min_len < 1 || min_len > max_len)
    throw ParameterError("corpus: transcript length range must satisfy 1 <= min <= max");
  if (frames_per_char < 1 || duration_jitter < 0 || duration_jitter >= frames_per_char)
    throw ParameterError("corpus: need frames_per_char >= 1 and 0 <= jitter < frames_per_char");
  if (pad_frames < 0) throw ParameterError("corpus: pad_frames must be >= 0");
  if (!(f0_min > 0 && f0_min < f0_max) || !(formant_min > 0 && formant_min < formant_max) ||
      !(brightness_min >= 0 && brightness_min < brightness_max && brightness_max <= 1) ||
      !(noise_min >= 0 && noise_min <= noise_max && noise_max < 1))
    throw ParameterError("corpus: invalid speaker parameter ranges");
  if (min_separation < 0) throw ParameterError("corpus: min_separation must be >= 0");
}

std::array<double, 3> profile_coordinates(const SpeakerProfile& p, const CorpusConfig& cfg) {
  return {std::log(p.f0_base / cfg.f0_min) / std::log(cfg.f0_max / cfg.f0_min),
          std::log(p.formant_scale / cfg.formant_min) / std::log(cfg.formant_max / cfg.formant_min),
          (p.brightness - cfg.brightness_min) / (cfg.brightness_max - cfg.brightness_min)};
}

std::vector<SpeakerProfile> sample_speakers(const CorpusConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, "speakers:" + cfg.speaker_prefix));
  std::vector<SpeakerProfile> speakers;
  std::vector<std::array<double, 3>> coords;
  constexpr int kMaxAttempts = 100000;
  int attempts = 0;
  while (static_cast<int>(speakers.size()) < cfg.n_speakers) {
    if (++attempts > kMaxAttempts)
      throw ParameterError("corpus: cannot place " + std::to_string(cfg.n_speakers) +
                           " speakers with min_separation " + std::to_string(cfg.min_separation));
    SpeakerProfile p;
    p.f0_base = cfg.f0_min * std::pow(cfg.f0_max / cfg.f0_min, rng.uniform());
    p.formant_scale = cfg.formant_min * std::pow(cfg.formant_max / cfg.formant_min, rng.uniform());
    p.brightness = rng.uniform(cfg.brightness_min, cfg.brightness_max);
    p.noise_floor = rng.uniform(cfg.noise_min, cfg.noise_max);
    const auto c = profile_coordinates(p, cfg);
    bool ok = true;
    for (const auto& other : coords) {
      double d2 = 0;
      for (int k = 0; k < 3; ++k) d2 += (c[k] - other[k]) * (c[k] - other[k]);
      if (std::sqrt(d2) < cfg.min_separation) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    std::ostringstream id;
    id << cfg.speaker_prefix << std::setw(2) << std::setfill('0') << speakers.size();
    p.speaker_id = id.str();
    coords.push_back(c);
    speakers.push_back(p);
  }
  return speakers;
}

std::string random_transcript(Rng& rng, int length) {
  std::string s;
  s.reserve(length);
  for (int j = 0; j < length; ++j) {
    const bool can_space = j > 0 && j + 1 < length && s.back() != ' ';
    if (can_space && rng.uniform() < 0.18)
      s.push_back(' ');
    else
      s.push_back(static_cast<char>('a' + rng.below(26)));
  }
  return s;
}

Utterance generate_utterance(const SpeakerProfile& profile, const std::string& utt_id,
                             const std::string& transcript, uint64_t seed,
                             const CorpusConfig& cfg) {
  if (transcript.empty()) throw ParameterError("generate_utterance: empty transcript");
  check_alphabet(transcript);
  Rng rng(seed);
  VoiceParams voice = profile.voice();
  voice.f0 *= std::exp(cfg.f0_jitter * rng.normal());
  Prosody prosody{cfg.f0_drift_depth, 2.0 * std::numbers::pi * rng.uniform()};

  std::string text;
  std::vector<int> frames;
  if (cfg.pad_frames > 0) {
    text.push_back(' ');
    frames.push_back(cfg.pad_frames);
  }
  for (char c : transcript) {
    text.push_back(c);
    const int jitter = cfg.duration_jitter > 0
                           ? static_cast<int>(rng.below(2 * cfg.duration_jitter + 1)) -
                                 cfg.duration_jitter
                           : 0;
    frames.push_back(cfg.frames_per_char + jitter);
  }
  if (cfg.pad_frames > 0) {
    text.push_back(' ');
    frames.push_back(cfg.pad_frames);
  }
  const Waveform wave = render_voice(voice, text, frames, prosody, rng.next_u64(), cfg.frame);
  return Utterance{utt_id, profile.speaker_id, transcript, compute_features(wave, cfg.frame)};
}

namespace {

template <typename Fn>
void for_each_utterance(const CorpusConfig& cfg, const std::vector<SpeakerProfile>& speakers,
                        Fn&& fn) {
  for (const auto& spk : speakers) {
    Rng text_rng(mix_seed(cfg.seed, "text:" + spk.speaker_id));
    for (int u = 0; u < cfg.utts_per_speaker; ++u) {
      const int len = cfg.min_len + static_cast<int>(text_rng.below(cfg.max_len - cfg.min_len + 1));
      const std::string transcript = random_transcript(text_rng, len);
      std::ostringstream id;
      id << spk.speaker_id << '_' << std::setw(3) << std::setfill('0') << u;
      const uint64_t seed = mix_seed(cfg.seed, "utt:" + id.str());
      fn(generate_utterance(spk, id.str(), transcript, seed, cfg));
    }
  }
}

}  // namespace

std::vector<Utterance> generate_utterances(const CorpusConfig& cfg,
                                           std::vector<SpeakerProfile>* speakers_out) {
  const auto speakers = sample_speakers(cfg);
  std::vector<Utterance> utts;
  utts.reserve(static_cast<size_t>(cfg.n_speakers) * cfg.utts_per_speaker);
  for_each_utterance(cfg, speakers, [&](Utterance u) { utts.push_back(std::move(u)); });
  if (speakers_out) *speakers_out = speakers;
  return utts;
}

Corpus generate_corpus(const CorpusConfig& cfg, const std::string& out_dir) {
  Corpus corpus;
  corpus.speakers = sample_speakers(cfg);
  corpus.manifest.root = out_dir;
  fs::create_directories(fs::path(out_dir) / "feats");
  for_each_utterance(cfg, corpus.speakers, [&](const Utterance& u) {
    const std::string rel = "feats/" + u.utt_id + ".gvm";
    save_matrix((fs::path(out_dir) / rel).string(), u.features);
    corpus.manifest.entries.push_back({u.utt_id, u.speaker_id, rel, u.transcript});
    corpus.manifest.speaker_set.insert(u.speaker_id);
  });
  save_manifest(corpus.manifest, (fs::path(out_dir) / "manifest.tsv").string());
  save_speakers(corpus.speakers, (fs::path(out_dir) / "speakers.tsv").string());
  return corpus;
}

std::string Manifest::feature_path(const ManifestEntry& e) const {
  const fs::path p(e.feature_path);
  if (p.is_absolute() || root.empty()) return p.string();
  return (fs::path(root) / p).string();
}

Matrix Manifest::load_features(const ManifestEntry& e) const {
  return load_matrix(feature_path(e));
}

std::vector<const ManifestEntry*> Manifest::by_speaker(const std::string& speaker) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.speaker_id == speaker) out.push_back(&e);
  return out;
}

void save_manifest(const Manifest& m, const std::string& path) {
  std::ostringstream os;
  for (const auto& e : m.entries) {
    for (const auto* field : {&e.utt_id, &e.speaker_id, &e.feature_path, &e.transcript})
      if (field->find_first_of("\t\n") != std::string::npos)
        throw FormatError("manifest field contains tab or newline: " + *field);
    os << e.utt_id << '\t' << e.speaker_id << '\t' << e.feature_path << '\t' << e.transcript
       << '\n';
  }
  write_file_atomic(path, os.str());
}

Manifest load_manifest(const std::string& path) {
  Manifest m;
  m.root = fs::path(path).parent_path().string();
  std::unordered_set<std::string> seen;
  int line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 4)
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields");
    ManifestEntry e{f[0], f[1], f[2], f[3]};
    if (!seen.insert(e.utt_id).second)
      throw FormatError(path + ":" + std::to_string(line_no) + ": duplicate utt_id " + e.utt_id);
    if (!fs::exists(m.feature_path(e)))
      throw DanglingReferenceError(path + ":" + std::to_string(line_no) +
                                   ": missing feature file " + m.feature_path(e));
    m.speaker_set.insert(e.speaker_id);
    m.entries.push_back(std::move(e));
  }
  return m;
}

void save_speakers(const std::vector<SpeakerProfile>& speakers, const std::string& path) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const auto& s : speakers)
    os << s.speaker_id << '\t' << s.f0_base << '\t' << s.formant_scale << '\t' << s.brightness
       << '\t' << s.noise_floor << '\n';
  write_file_atomic(path, os.str());
}

std::vector<SpeakerProfile> load_speakers(const std::string& path) {
  std::vector<SpeakerProfile> out;
  for (const auto& line : split_lines(read_file(path))) {
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 5) throw FormatError(path + ": expected 5 fields per speaker line");
    SpeakerProfile p;
    p.speaker_id = f[0];
    try {
      p.f0_base = std::stod(f[1]);
      p.formant_scale = std::stod(f[2]);
      p.brightness = std::stod(f[3]);
      p.noise_floor = std::stod(f[4]);
    } catch (const std::exception&) {
      throw FormatError(path + ": malformed number in speaker line");
    }
    out.push_back(p);
  }
  return out;
}

RowVector silence_mean(const Manifest& manifest, int pad_frames) {
  const Eigen::Index edge = pad_frames / 2;
  if (edge < 1) throw ParameterError("silence_mean: need pad_frames >= 2");
  RowVector sum = RowVector::Zero(kFeatureDim);
  double n = 0;
  for (const auto& e : manifest.entries) {
    const Matrix f = manifest.load_features(e);
    if (f.rows() < 2 * edge) continue;
    sum += f.topRows(edge).colwise().sum() + f.bottomRows(edge).colwise().sum();
    n += 2.0 * static_cast<double>(edge);
  }
  if (n == 0) throw InsufficiencyError("silence_mean: no utterance long enough");
  return sum / n;
}

}  // namespace ghostvec
