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

#include "ghostvec/attack.h"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "ghostvec/digest.h"
#include "ghostvec/matrix_io.h"
#include "ghostvec/tsv.h"

namespace ghostvec {

void AttackConfig::validate() const {
  if (!(epsilon > 0)) throw ParameterError("attack: epsilon must be > 0");
  if (max_iters < 1) throw ParameterError("attack: max_iters must be >= 1");
  if (frames < 1) throw ParameterError("attack: frames must be >= 1");
  if (noise.mean.size() != 1 && noise.mean.size() != kFeatureDim)
    throw ParameterError("attack: noise mean must have 1 or 120 entries");
  if (!(noise.stddev >= 0)) throw ParameterError("attack: noise stddev must be >= 0");
  if (budget && !(*budget > 0)) throw ParameterError("attack: budget must be > 0 when set");
}

std::string AttackConfig::digest() const {
  std::ostringstream os;
  os << std::setprecision(17) << "eps=" << epsilon << ";iters=" << max_iters
     << ";frames=" << frames << ";std=" << noise.stddev << ";mean=";
  for (Eigen::Index i = 0; i < noise.mean.size(); ++i) os << noise.mean(i) << ',';
  os << ";budget=" << (budget ? *budget : -1.0) << ";seed=" << seed
     << ";full=" << full_sequence_loss;
  return sha256_hex(os.str());
}

Matrix init_input(const AttackConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, "attack-noise"));
  Matrix x(cfg.frames, kFeatureDim);
  for (Eigen::Index t = 0; t < x.rows(); ++t)
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double mu = cfg.noise.mean.size() == 1 ? cfg.noise.mean(0) : cfg.noise.mean(c);
      x(t, c) = cfg.noise.stddev > 0 ? rng.normal(mu, cfg.noise.stddev) : mu;
    }
  return x;
}

Matrix fgsm_step(const Matrix& x, const Matrix& grad, double epsilon) {
  if (x.rows() != grad.rows() || x.cols() != grad.cols())
    throw ShapeError("fgsm_step: input and gradient shapes differ");
  return x - epsilon * grad.unaryExpr([](double g) { return g > 0 ? 1.0 : (g < 0 ? -1.0 : 0.0); });
}

uint64_t variant_seed(const AttackConfig& cfg, const std::string& target_speaker, int variant) {
  return mix_seed(cfg.seed, target_speaker + "#" + std::to_string(variant));
}

GhostVec attack_variant(const AsrModel& model, const std::string& target_speaker,
                        const AttackConfig& cfg, int variant, Matrix* final_input) {
  cfg.validate();
  if (!model.frozen()) throw ParameterError("attack: model must be frozen");
  const VocabSpec& vocab = model.vocab();
  if (!vocab.has_speaker(target_speaker))
    throw ParameterError("attack: target speaker not in vocabulary: " + target_speaker);
  const int target = vocab.speaker_token(target_speaker);
  const LabelSequence labels = make_labels(vocab, target_speaker, "");
  const std::vector<uint8_t> mask = cfg.full_sequence_loss ? full_mask(labels)
                                                           : speaker_only_mask(labels);

  AttackConfig vcfg = cfg;
  vcfg.seed = variant_seed(cfg, target_speaker, variant);
  const Matrix start = init_input(vcfg);
  Matrix x = start;

  GhostVec gv;
  gv.target_speaker = target_speaker;
  gv.seed = vcfg.seed;
  for (int it = 0;; ++it) {
    const InputGradient r = loss_and_grad_input(model, x, labels, mask);
    gv.final_loss = r.loss;
    Eigen::Index best;
    r.first_step_logits.maxCoeff(&best);
    gv.iters_used = it;
    if (best == target) {
      gv.success = true;
      break;
    }
    if (it == cfg.max_iters) break;
    x = fgsm_step(x, r.grad, cfg.epsilon);
    if (cfg.budget) x = start + (x - start).cwiseMax(-*cfg.budget).cwiseMin(*cfg.budget);
  }
  gv.embedding = encode(model, x);
  gv.pooled = gv.embedding.colwise().mean().transpose();
  if (final_input) *final_input = std::move(x);
  return gv;
}

AttackResult extract_ghostvec(const AsrModel& model, const std::string& target_speaker,
                              const AttackConfig& cfg, int n_variants) {
  if (n_variants < 1) throw ParameterError("attack: n_variants must be >= 1");
  if (!model.vocab().has_speaker(target_speaker))
    throw ParameterError("attack: target speaker not in vocabulary: " + target_speaker);
  AttackResult res;
  int successes = 0;
  for (int v = 0; v < n_variants; ++v) {
    res.ghostvecs.push_back(attack_variant(model, target_speaker, cfg, v));
    successes += res.ghostvecs.back().success ? 1 : 0;
  }
  res.success_rate = static_cast<double>(successes) / n_variants;
  return res;
}

bool verify_ghostvec(const AsrModel& model, const GhostVec& gv) {
  const DecodeResult d = decode_greedy(model, gv.embedding, 1);
  return d.speaker_token() == model.vocab().speaker_token(gv.target_speaker);
}

Matrix GhostVecBundle::pooled_matrix() const {
  Matrix m(static_cast<Eigen::Index>(ghostvecs.size()), dim);
  for (size_t i = 0; i < ghostvecs.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = ghostvecs[i].pooled.transpose();
  return m;
}

void save_bundle(const std::string& path, const GhostVecBundle& b, bool include_full) {
  std::ostringstream os(std::ios::binary);
  os << "GVBUNDLE 1\n"
     << "target " << b.target_speaker << '\n'
     << "dim " << b.dim << '\n'
     << "count " << b.ghostvecs.size() << '\n'
     << "config_digest " << b.config_digest << '\n'
     << "full " << (include_full ? 1 : 0) << '\n';
  os << std::setprecision(17);
  for (const auto& g : b.ghostvecs)
    os << g.seed << '\t' << g.iters_used << '\t' << (g.success ? 1 : 0) << '\t' << g.final_loss
       << '\n';
  write_matrix(os, b.pooled_matrix());
  if (include_full)
    for (const auto& g : b.ghostvecs) write_matrix(os, g.embedding);
  write_file_atomic(path, os.str());
}

GhostVecBundle load_bundle(const std::string& path) {
  std::istringstream is(read_file(path), std::ios::binary);
  auto expect = [&](const std::string& key) {
    std::string line;
    if (!std::getline(is, line) || line.rfind(key + " ", 0) != 0)
      throw FormatError(path + ": expected header field '" + key + "'");
    return line.substr(key.size() + 1);
  };
  if (expect("GVBUNDLE") != "1") throw VersionError(path + ": unsupported bundle version");
  GhostVecBundle b;
  b.target_speaker = expect("target");
  size_t count = 0;
  try {
    b.dim = std::stoi(expect("dim"));
    count = std::stoul(expect("count"));
  } catch (const std::invalid_argument&) {
    throw FormatError(path + ": malformed dim/count");
  }
  b.config_digest = expect("config_digest");
  b.has_full = expect("full") == "1";
  for (size_t i = 0; i < count; ++i) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError(path + ": truncated provenance");
    const auto f = split_tabs(line);
    if (f.size() != 4) throw FormatError(path + ": malformed provenance line");
    GhostVec g;
    g.target_speaker = b.target_speaker;
    g.seed = std::stoull(f[0]);
    g.iters_used = std::stoi(f[1]);
    g.success = f[2] == "1";
    g.final_loss = std::stod(f[3]);
    b.ghostvecs.push_back(std::move(g));
  }
  const Matrix pooled = read_matrix(is);
  if (pooled.rows() != static_cast<Eigen::Index>(count) || pooled.cols() != b.dim)
    throw FormatError(path + ": pooled matrix shape disagrees with header");
  for (size_t i = 0; i < count; ++i) {
    b.ghostvecs[i].pooled = pooled.row(static_cast<Eigen::Index>(i)).transpose();
    if (b.has_full) b.ghostvecs[i].embedding = read_matrix(is);
  }
  return b;
}

}  // namespace ghostvec
