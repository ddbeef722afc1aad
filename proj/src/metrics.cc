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

#include "ghostvec/metrics.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "ghostvec/asr.h"
#include "ghostvec/binary_io.h"
#include "ghostvec/matrix_io.h"
#include "ghostvec/svd_transfer.h"
#include "ghostvec/tsv.h"

namespace ghostvec {

namespace {

constexpr char kEncoderMagic[8] = {'G', 'V', 'S', 'V', 'E', 'N', 'C', '\n'};
constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix glorot(int rows, int cols, Rng& rng) {
  const double s = std::sqrt(2.0 / (rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0, s);
  return m;
}

}  // namespace

// ------------------------------------------------------------ speaker encoder

void EncoderConfig::validate() const {
  if (hidden < 1 || embed_dim < 1) throw ParameterError("encoder: hidden and embed_dim must be >= 1");
  if (epochs < 1 || batch < 1 || !(lr > 0)) throw ParameterError("encoder: epochs, batch, lr must be positive");
  if (warmup_steps < 0) throw ParameterError("encoder: warmup_steps must be >= 0");
}

SpeakerEncoder::SpeakerEncoder(const EncoderConfig& cfg, std::vector<std::string> speakers,
                               uint64_t seed)
    : hidden_(cfg.hidden), embed_dim_(cfg.embed_dim), speakers_(std::move(speakers)) {
  Rng rng(mix_seed(seed, "sv-init"));
  const int h = hidden_;
  params_.add("frame1.w", glorot(kFeatureDim, h, rng));
  params_.add("frame1.b", Matrix::Zero(1, h));
  params_.add("frame2.w", glorot(h, h, rng));
  params_.add("frame2.b", Matrix::Zero(1, h));
  params_.add("embed.w", glorot(2 * h, embed_dim_, rng));
  params_.add("embed.b", Matrix::Zero(1, embed_dim_));
  params_.add("cls.w", glorot(embed_dim_, static_cast<int>(speakers_.size()), rng));
  params_.add("cls.b", Matrix::Zero(1, static_cast<Eigen::Index>(speakers_.size())));
  feat_mean_ = RowVector::Zero(kFeatureDim);
  feat_inv_std_ = RowVector::Ones(kFeatureDim);
}

void SpeakerEncoder::set_feature_stats(RowVector mean, RowVector inv_std) {
  if (mean.size() != kFeatureDim || inv_std.size() != kFeatureDim)
    throw ShapeError("encoder: feature statistics must have 120 entries");
  feat_mean_ = std::move(mean);
  feat_inv_std_ = std::move(inv_std);
}

std::pair<ad::Var, ad::Var> SpeakerEncoder::forward(ad::Graph& g, ad::Var features) const {
  if (g.value(features).cols() != kFeatureDim)
    throw ShapeError("encoder: expected 120-dim features, got " +
                     std::to_string(g.value(features).cols()));
  auto P = [&](const char* n) { return g.param(params_.get(n)); };
  ad::Var x = g.normalize_cols(features, feat_mean_, feat_inv_std_);
  x = g.gelu(g.add_row(g.matmul(x, P("frame1.w")), P("frame1.b")));
  x = g.gelu(g.add_row(g.matmul(x, P("frame2.w")), P("frame2.b")));
  const ad::Var stats = g.concat_cols(g.mean_rows(x), g.std_rows(x));
  const ad::Var emb = g.add_row(g.matmul(stats, P("embed.w")), P("embed.b"));
  const ad::Var logits = g.add_row(g.matmul(g.gelu(emb), P("cls.w")), P("cls.b"));
  return {emb, logits};
}

Vector SpeakerEncoder::embed(const Matrix& features) const {
  if (features.rows() < 1) throw InputError("encoder: empty feature matrix");
  ad::Graph g(false);
  const auto [emb, logits] = forward(g, g.input(features));
  (void)logits;
  return g.value(emb).row(0).transpose();
}

int SpeakerEncoder::classify(const Matrix& features) const {
  ad::Graph g(false);
  const auto [emb, logits] = forward(g, g.input(features));
  (void)emb;
  Eigen::Index best = 0;
  g.value(logits).row(0).maxCoeff(&best);
  return static_cast<int>(best);
}

void SpeakerEncoder::save(const std::string& path) const {
  BinaryWriter w;
  w.magic(kEncoderMagic);
  w.u32(kEncoderCheckpointVersion);
  w.i32(hidden_);
  w.i32(embed_dim_);
  w.u32(static_cast<uint32_t>(speakers_.size()));
  for (const auto& s : speakers_) w.str(s);
  w.matrix(feat_mean_);
  w.matrix(feat_inv_std_);
  w.u32(static_cast<uint32_t>(params_.all().size()));
  for (const auto& prm : params_.all()) {
    w.str(prm->name);
    w.matrix(prm->value);
  }
  w.f64(train_accuracy_);
  w.u8(frozen_ ? 1 : 0);
  write_file_atomic(path, w.data());
}

SpeakerEncoder SpeakerEncoder::load(const std::string& path) {
  BinaryReader r(read_file(path), path);
  r.expect_magic(kEncoderMagic);
  const uint32_t version = r.u32();
  if (version != kEncoderCheckpointVersion)
    throw VersionError(path + ": encoder checkpoint version " + std::to_string(version) +
                       ", this build reads version " + std::to_string(kEncoderCheckpointVersion));
  EncoderConfig cfg;
  cfg.hidden = r.i32();
  cfg.embed_dim = r.i32();
  std::vector<std::string> speakers(r.u32());
  for (auto& s : speakers) s = r.str();
  SpeakerEncoder enc(cfg, std::move(speakers), 0);
  RowVector mean = r.matrix().row(0);
  RowVector inv_std = r.matrix().row(0);
  enc.set_feature_stats(std::move(mean), std::move(inv_std));
  const uint32_t n = r.u32();
  if (n != enc.params_.all().size()) throw FormatError(path + ": parameter count mismatch");
  for (uint32_t i = 0; i < n; ++i) {
    const std::string name = r.str();
    Matrix value = r.matrix();
    auto& prm = enc.params_.get(name);
    if (value.rows() != prm.value.rows() || value.cols() != prm.value.cols())
      throw FormatError(path + ": shape mismatch for parameter " + name);
    prm.value = std::move(value);
  }
  enc.train_accuracy_ = r.f64();
  enc.frozen_ = r.u8() != 0;
  if (!r.at_end()) throw FormatError(path + ": trailing bytes");
  return enc;
}

SpeakerEncoder train_speaker_encoder(const std::vector<LabeledFeatures>& data,
                                     const EncoderConfig& cfg) {
  cfg.validate();
  std::set<std::string> speaker_set;
  for (const auto& ex : data) speaker_set.insert(ex.speaker);
  if (speaker_set.size() < 2)
    throw InsufficiencyError("train_speaker_encoder: need at least 2 speakers, got " +
                             std::to_string(speaker_set.size()));
  std::vector<std::string> speakers(speaker_set.begin(), speaker_set.end());
  std::map<std::string, int> index;
  for (size_t i = 0; i < speakers.size(); ++i) index[speakers[i]] = static_cast<int>(i);

  SpeakerEncoder enc(cfg, speakers, cfg.seed);
  {
    RowVector sum = RowVector::Zero(kFeatureDim), sq = RowVector::Zero(kFeatureDim);
    double frames = 0;
    for (const auto& ex : data) {
      if (ex.features.cols() != kFeatureDim || ex.features.rows() < 1)
        throw ShapeError("train_speaker_encoder: bad feature matrix for " + ex.speaker);
      sum += ex.features.colwise().sum();
      sq += ex.features.array().square().colwise().sum().matrix();
      frames += static_cast<double>(ex.features.rows());
    }
    const RowVector mean = sum / frames;
    const RowVector var = sq / frames - mean.cwiseProduct(mean);
    enc.set_feature_stats(mean, var.unaryExpr([](double v) { return 1.0 / std::sqrt(std::max(v, 1e-6)); }));
  }

  ad::Adam adam(enc.params());
  Rng rng(mix_seed(cfg.seed, "sv-train"));
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const int steps_per_epoch = static_cast<int>((data.size() + cfg.batch - 1) / cfg.batch);
  const int total_steps = steps_per_epoch * cfg.epochs;
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0;
    size_t correct = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch) {
      const size_t end = std::min(order.size(), start + cfg.batch);
      enc.params().zero_grad();
      for (size_t b = start; b < end; ++b) {
        const auto& ex = data[order[b]];
        Eigen::Index t0 = 0, len = ex.features.rows();
        if (cfg.crop_frames > 0 && len > cfg.crop_frames) {
          t0 = static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(len - cfg.crop_frames + 1)));
          len = cfg.crop_frames;
        }
        ad::Graph g(true);
        const auto [emb, logits] = enc.forward(g, g.input(ex.features.middleRows(t0, len)));
        (void)emb;
        const int label = index.at(ex.speaker);
        const ad::Var ce = g.cross_entropy(logits, {label}, {1});
        const double l = g.value(ce)(0, 0);
        if (!std::isfinite(l))
          throw TrainingError("train_speaker_encoder: non-finite loss at epoch " + std::to_string(epoch));
        Eigen::Index arg = 0;
        g.value(logits).row(0).maxCoeff(&arg);
        correct += arg == label;
        epoch_loss += l;
        g.backward(ce);
      }
      const double inv_b = 1.0 / static_cast<double>(end - start);
      double norm2 = 0;
      for (auto& prm : enc.params().all()) {
        prm->grad *= inv_b;
        norm2 += prm->grad.squaredNorm();
      }
      const double gnorm = std::sqrt(norm2);
      if (!std::isfinite(gnorm)) throw TrainingError("train_speaker_encoder: non-finite gradient");
      ++step;
      const double warm = std::min(1.0, static_cast<double>(step) / std::max(1, cfg.warmup_steps));
      const double progress = static_cast<double>(step) / total_steps;
      const double lr = cfg.lr * warm * (0.55 + 0.45 * std::cos(std::numbers::pi * progress));
      adam.step(lr, gnorm > 5.0 ? 5.0 / gnorm : 1.0);
    }
    if (cfg.on_epoch)
      cfg.on_epoch(epoch, epoch_loss / static_cast<double>(data.size()),
                   static_cast<double>(correct) / static_cast<double>(data.size()));
  }
  enc.params().zero_grad();
  size_t correct = 0;
  for (const auto& ex : data) correct += enc.classify(ex.features) == index.at(ex.speaker);
  enc.set_training_accuracy(static_cast<double>(correct) / static_cast<double>(data.size()));
  enc.freeze();
  return enc;
}

SpeakerEncoder train_speaker_encoder(const Manifest& manifest, const EncoderConfig& cfg) {
  std::vector<LabeledFeatures> data;
  data.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) data.push_back({manifest.load_features(e), e.speaker_id});
  return train_speaker_encoder(data, cfg);
}

// -------------------------------------------------------------------- trials

TrialScoreSet score_embeddings(const std::map<std::string, std::vector<Vector>>& enroll,
                               const std::map<std::string, Vector>& test,
                               const std::vector<Trial>& trials, bool allow_same_id) {
  std::map<std::string, Vector> enroll_mean;
  for (const auto& [id, vs] : enroll) {
    if (vs.empty()) throw InputError("score_trials: enrollment " + id + " has no utterances");
    Vector m = Vector::Zero(vs.front().size());
    for (const auto& v : vs) m += v;
    enroll_mean[id] = m / static_cast<double>(vs.size());
  }
  TrialScoreSet out;
  out.reserve(trials.size());
  for (const auto& t : trials) {
    if (!allow_same_id && t.enroll_id == t.test_id)
      throw InputError("score_trials: enroll and test id coincide: " + t.enroll_id);
    const auto e = enroll_mean.find(t.enroll_id);
    if (e == enroll_mean.end()) throw DanglingReferenceError("score_trials: unknown enroll id " + t.enroll_id);
    const auto x = test.find(t.test_id);
    if (x == test.end()) throw DanglingReferenceError("score_trials: unknown test id " + t.test_id);
    out.push_back({t, cosine_similarity(e->second, x->second)});
  }
  return out;
}

TrialScoreSet score_trials(const SpeakerEncoder& enc,
                           const std::map<std::string, std::vector<Matrix>>& enroll,
                           const std::map<std::string, Matrix>& test,
                           const std::vector<Trial>& trials, bool allow_same_id) {
  std::set<std::string> need_enroll, need_test;
  for (const auto& t : trials) {
    need_enroll.insert(t.enroll_id);
    need_test.insert(t.test_id);
  }
  std::map<std::string, std::vector<Vector>> e;
  for (const auto& id : need_enroll) {
    const auto it = enroll.find(id);
    if (it == enroll.end()) throw DanglingReferenceError("score_trials: unknown enroll id " + id);
    for (const auto& f : it->second) e[id].push_back(enc.embed(f));
  }
  std::map<std::string, Vector> x;
  for (const auto& id : need_test) {
    const auto it = test.find(id);
    if (it == test.end()) throw DanglingReferenceError("score_trials: unknown test id " + id);
    x[id] = enc.embed(it->second);
  }
  return score_embeddings(e, x, trials, allow_same_id);
}

namespace {

bool parse_label(const std::string& s, const std::string& path) {
  if (s == "target") return true;
  if (s == "nontarget") return false;
  throw FormatError(path + ": label must be target or nontarget, got '" + s + "'");
}

}  // namespace

void save_trials(const std::vector<Trial>& trials, const std::string& path) {
  std::ostringstream os;
  for (const auto& t : trials)
    os << t.enroll_id << '\t' << t.test_id << '\t' << (t.target ? "target" : "nontarget") << '\n';
  write_file_atomic(path, os.str());
}

std::vector<Trial> load_trials(const std::string& path) {
  std::vector<Trial> out;
  for (const auto& line : split_lines(read_file(path))) {
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 3) throw FormatError(path + ": trial lines need 3 fields");
    out.push_back({f[0], f[1], parse_label(f[2], path)});
  }
  return out;
}

void save_scores(const TrialScoreSet& scores, const std::string& path) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const auto& s : scores)
    os << s.trial.enroll_id << '\t' << s.trial.test_id << '\t'
       << (s.trial.target ? "target" : "nontarget") << '\t' << s.score << '\n';
  write_file_atomic(path, os.str());
}

TrialScoreSet load_scores(const std::string& path) {
  TrialScoreSet out;
  for (const auto& line : split_lines(read_file(path))) {
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 4) throw FormatError(path + ": score lines need 4 fields");
    size_t used = 0;
    double v = 0;
    try {
      v = std::stod(f[3], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != f[3].size()) throw FormatError(path + ": bad score '" + f[3] + "'");
    out.push_back({{f[0], f[1], parse_label(f[2], path)}, v});
  }
  return out;
}

// ------------------------------------------------------------------- metrics

ScoreSplit split_scores(const TrialScoreSet& scores) {
  ScoreSplit s;
  for (const auto& t : scores) {
    if (!std::isfinite(t.score)) throw InputError("metrics: non-finite score");
    (t.trial.target ? s.target : s.nontarget).push_back(t.score);
  }
  if (s.target.empty() || s.nontarget.empty())
    throw InsufficiencyError("metrics: need both target and nontarget trials (have " +
                             std::to_string(s.target.size()) + " and " +
                             std::to_string(s.nontarget.size()) + ")");
  return s;
}

namespace {

void check_classes(const std::vector<double>& target, const std::vector<double>& nontarget) {
  if (target.empty() || nontarget.empty())
    throw InsufficiencyError("metrics: need both target and nontarget scores");
  for (const auto* v : {&target, &nontarget})
    for (double x : *v)
      if (!std::isfinite(x)) throw InputError("metrics: non-finite score");
}

// Operating points in increasing threshold order.
struct Sweep {
  std::vector<double> threshold, p_miss, p_fa;
};

Sweep sweep(const std::vector<double>& target, const std::vector<double>& nontarget) {
  check_classes(target, nontarget);
  std::vector<std::pair<double, bool>> all;
  all.reserve(target.size() + nontarget.size());
  for (double s : target) all.emplace_back(s, true);
  for (double s : nontarget) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const double nt = static_cast<double>(target.size()), nn = static_cast<double>(nontarget.size());
  Sweep sw;
  sw.threshold.push_back(-kInf);
  sw.p_miss.push_back(0.0);
  sw.p_fa.push_back(1.0);
  size_t tgt_rej = 0, non_rej = 0;
  for (size_t i = 0; i < all.size();) {
    const double v = all[i].first;
    while (i < all.size() && all[i].first == v) {
      (all[i].second ? tgt_rej : non_rej) += 1;
      ++i;
    }
    sw.threshold.push_back(i < all.size() ? 0.5 * (v + all[i].first) : kInf);
    sw.p_miss.push_back(static_cast<double>(tgt_rej) / nt);
    sw.p_fa.push_back(1.0 - static_cast<double>(non_rej) / nn);
  }
  return sw;
}

}  // namespace

EerResult eer(const std::vector<double>& target, const std::vector<double>& nontarget) {
  const Sweep sw = sweep(target, nontarget);
  const double lo = std::min(*std::min_element(target.begin(), target.end()),
                             *std::min_element(nontarget.begin(), nontarget.end()));
  const double hi = std::max(*std::max_element(target.begin(), target.end()),
                             *std::max_element(nontarget.begin(), nontarget.end()));
  auto finite = [&](double t) { return std::isfinite(t) ? t : (t < 0 ? lo : hi); };
  for (size_t j = 1; j < sw.threshold.size(); ++j) {
    const double d1 = sw.p_miss[j] - sw.p_fa[j];
    if (d1 < 0) continue;
    if (d1 == 0) return {100.0 * sw.p_miss[j], finite(sw.threshold[j])};
    const double d0 = sw.p_miss[j - 1] - sw.p_fa[j - 1];
    const double a = d0 / (d0 - d1);
    const double pm = sw.p_miss[j - 1] + a * (sw.p_miss[j] - sw.p_miss[j - 1]);
    const double th = finite(sw.threshold[j - 1]) +
                      a * (finite(sw.threshold[j]) - finite(sw.threshold[j - 1]));
    return {100.0 * pm, th};
  }
  throw DegenerateError("eer: no crossing found");  // unreachable: the last point has d = 1
}

EerResult eer(const TrialScoreSet& scores) {
  const auto s = split_scores(scores);
  return eer(s.target, s.nontarget);
}

namespace {

void check_costs(double p_target, double c_miss, double c_fa) {
  if (!(p_target > 0 && p_target < 1)) throw ParameterError("dcf: p_target must lie in (0, 1)");
  if (!(c_miss > 0 && c_fa > 0)) throw ParameterError("dcf: costs must be positive");
}

}  // namespace

double normalized_dcf(const std::vector<double>& target, const std::vector<double>& nontarget,
                      double threshold, double p_target, double c_miss, double c_fa) {
  check_classes(target, nontarget);
  check_costs(p_target, c_miss, c_fa);
  size_t miss = 0, fa = 0;
  for (double s : target) miss += !(s > threshold);
  for (double s : nontarget) fa += s > threshold;
  const double pm = static_cast<double>(miss) / static_cast<double>(target.size());
  const double pf = static_cast<double>(fa) / static_cast<double>(nontarget.size());
  return (c_miss * p_target * pm + c_fa * (1 - p_target) * pf) /
         std::min(c_miss * p_target, c_fa * (1 - p_target));
}

double min_dcf(const std::vector<double>& target, const std::vector<double>& nontarget,
               double p_target, double c_miss, double c_fa) {
  check_costs(p_target, c_miss, c_fa);
  const Sweep sw = sweep(target, nontarget);
  double best = kInf;
  for (size_t j = 0; j < sw.threshold.size(); ++j)
    best = std::min(best, c_miss * p_target * sw.p_miss[j] + c_fa * (1 - p_target) * sw.p_fa[j]);
  return best / std::min(c_miss * p_target, c_fa * (1 - p_target));
}

double min_dcf(const TrialScoreSet& scores, double p_target) {
  const auto s = split_scores(scores);
  return min_dcf(s.target, s.nontarget, p_target);
}

std::vector<double> pav_posteriors(const std::vector<double>& scores,
                                   const std::vector<uint8_t>& is_target) {
  if (scores.size() != is_target.size()) throw ShapeError("pav: scores and labels differ in length");
  std::vector<size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  struct Block {
    double sum;
    double count;
    size_t first, last;  // range in idx, inclusive/exclusive
  };
  std::vector<Block> st;
  for (size_t i = 0; i < idx.size();) {
    Block b{0, 0, i, i};
    const double v = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == v) {
      b.sum += is_target[idx[i]] ? 1.0 : 0.0;
      b.count += 1;
      ++i;
    }
    b.last = i;
    // Merge while the previous block's mean exceeds this one's.
    while (!st.empty() && st.back().sum * b.count > b.sum * st.back().count) {
      b.sum += st.back().sum;
      b.count += st.back().count;
      b.first = st.back().first;
      st.pop_back();
    }
    st.push_back(b);
  }
  std::vector<double> out(scores.size());
  for (const auto& b : st)
    for (size_t k = b.first; k < b.last; ++k) out[idx[k]] = b.sum / b.count;
  return out;
}

namespace {

// log2(1 + e^x), exact at +-inf.
double softplus2(double x) {
  if (x == kInf) return kInf;
  if (x == -kInf) return 0.0;
  const double v = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return v / std::numbers::ln2;
}

double logit(double p) {
  if (p <= 0) return -kInf;
  if (p >= 1) return kInf;
  return std::log(p / (1 - p));
}

}  // namespace

double cllr_act(const std::vector<double>& target_llr, const std::vector<double>& nontarget_llr) {
  if (target_llr.empty() || nontarget_llr.empty())
    throw InsufficiencyError("cllr: need both target and nontarget scores");
  double t = 0, n = 0;
  for (double s : target_llr) t += softplus2(-s);
  for (double s : nontarget_llr) n += softplus2(s);
  return 0.5 * (t / static_cast<double>(target_llr.size()) +
                n / static_cast<double>(nontarget_llr.size()));
}

CllrResult cllr(const std::vector<double>& target, const std::vector<double>& nontarget) {
  check_classes(target, nontarget);
  std::vector<double> scores(target);
  scores.insert(scores.end(), nontarget.begin(), nontarget.end());
  std::vector<uint8_t> labels(target.size(), 1);
  labels.resize(scores.size(), 0);
  const std::vector<double> post = pav_posteriors(scores, labels);
  const double prior_logit =
      std::log(static_cast<double>(target.size()) / static_cast<double>(nontarget.size()));
  std::vector<double> tl, nl;
  for (size_t i = 0; i < scores.size(); ++i)
    (labels[i] ? tl : nl).push_back(logit(post[i]) - prior_logit);
  return {cllr_act(target, nontarget), cllr_act(tl, nl)};
}

CllrResult cllr(const TrialScoreSet& scores) {
  const auto s = split_scores(scores);
  return cllr(s.target, s.nontarget);
}

MetricReport evaluate(const TrialScoreSet& scores, double p_target) {
  const auto s = split_scores(scores);
  const auto c = cllr(s.target, s.nontarget);
  return {eer(s.target, s.nontarget).eer_pct, min_dcf(s.target, s.nontarget, p_target), c.min,
          c.act, s.target.size(), s.nontarget.size()};
}

// ---------------------------------------------------------------- projection

Projection project_2d(const std::vector<std::pair<std::string, Vector>>& embeddings) {
  if (embeddings.size() < 2) throw InsufficiencyError("project_2d: need at least 2 vectors");
  const Eigen::Index d = embeddings.front().second.size();
  if (d < 2) throw ShapeError("project_2d: need at least 2 dimensions");
  Matrix X(static_cast<Eigen::Index>(embeddings.size()), d);
  for (size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].second.size() != d) throw ShapeError("project_2d: inconsistent dimensions");
    if (!embeddings[i].second.allFinite()) throw InputError("project_2d: non-finite input");
    X.row(static_cast<Eigen::Index>(i)) = embeddings[i].second.transpose();
  }
  Projection p;
  p.center = X.colwise().mean();
  const Matrix Xc = X.rowwise() - p.center;
  const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
  if (Xc.cwiseAbs().maxCoeff() <= 1e-12 * scale)
    throw DegenerateError("project_2d: all vectors identical, no variance to project");
  const Eigen::MatrixXd cov = (Xc.transpose() * Xc) / static_cast<double>(X.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  p.directions.resize(d, 2);
  for (int k = 0; k < 2; ++k) {
    Vector v = es.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    p.directions.col(k) = v;
  }
  const Matrix xy = Xc * p.directions;
  for (size_t i = 0; i < embeddings.size(); ++i)
    p.points.push_back({embeddings[i].first, xy(static_cast<Eigen::Index>(i), 0),
                        xy(static_cast<Eigen::Index>(i), 1)});
  return p;
}

// ----------------------------------------------------------------------- CER

void CerTally::add(const std::string& reference, const std::string& hypothesis) {
  if (reference.empty()) throw ParameterError("cer: empty reference");
  edits += edit_distance(hypothesis, reference);
  ref_chars += reference.size();
  ++utterances;
}

double CerTally::pct() const {
  if (ref_chars == 0) throw InsufficiencyError("cer: no utterances scored");
  return 100.0 * static_cast<double>(edits) / static_cast<double>(ref_chars);
}

// -------------------------------------------------------------------- report

const std::vector<ReferenceRow>& reference_rows() {
  static const std::vector<ReferenceRow> rows = {
      {"Target/Target", 1.50, 0.32, 0.07, 0.71},
      {"Target/GhostVec", 52.27, 1.00, 0.99, 143.87},
      {"Target/Our", 10.83, 0.46, 0.34, 42.22},
  };
  return rows;
}

const std::vector<std::pair<std::string, double>>& reference_cer_rows() {
  static const std::vector<std::pair<std::string, double>> rows = {
      {"Baseline", 9.80},
      {"SVD-modified GhostVec (Our)", 15.42},
  };
  return rows;
}

namespace {

// Fixed-precision rounding keeps the report stable against last-bit noise in
// how a value is printed.
double r6(double v) { return std::isfinite(v) ? std::round(v * 1e6) / 1e6 : v; }

std::string fmt(double v, int prec) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace

Report build_report(const std::vector<std::pair<std::string, TrialScoreSet>>& conditions,
                    const std::map<std::string, double>& cers, const nlohmann::ordered_json& extra) {
  if (conditions.empty() && cers.empty()) throw ParameterError("build_report: nothing to report");
  Report rep;
  auto& j = rep.json;
  j["conditions"] = nlohmann::ordered_json::array();
  std::ostringstream tx;
  tx << "Speaker verification (desk scale)\n";
  tx << std::left << std::setw(18) << "Enrolls/Trials" << std::right << std::setw(9) << "EER%"
     << std::setw(9) << "minDCF" << std::setw(10) << "Cllr_min" << std::setw(10) << "Cllr_act"
     << std::setw(8) << "#tgt" << std::setw(8) << "#non" << '\n';
  for (const auto& [name, scores] : conditions) {
    const MetricReport m = evaluate(scores);
    nlohmann::ordered_json row;
    row["name"] = name;
    row["eer_pct"] = r6(m.eer_pct);
    row["min_dcf"] = r6(m.min_dcf);
    row["cllr_min"] = r6(m.cllr_min);
    row["cllr_act"] = r6(m.cllr_act);
    row["n_target"] = m.n_target;
    row["n_nontarget"] = m.n_nontarget;
    j["conditions"].push_back(row);
    tx << std::left << std::setw(18) << name << std::right << std::setw(9) << fmt(m.eer_pct, 2)
       << std::setw(9) << fmt(m.min_dcf, 3) << std::setw(10) << fmt(m.cllr_min, 3) << std::setw(10)
       << fmt(m.cllr_act, 3) << std::setw(8) << m.n_target << std::setw(8) << m.n_nontarget << '\n';
  }
  j["cer_pct"] = nlohmann::ordered_json::object();
  if (!cers.empty()) tx << "\nCER% (ASR decode of synthesized audio)\n";
  for (const auto& [name, v] : cers) {
    j["cer_pct"][name] = r6(v);
    tx << std::left << std::setw(30) << name << std::right << std::setw(9) << fmt(v, 2) << '\n';
  }
  auto& ref = j["reference"];
  ref["note"] = "published full-scale values; context only";
  ref["sv"] = nlohmann::ordered_json::array();
  tx << "\nReference (full scale, context only)\n";
  for (const auto& r : reference_rows()) {
    ref["sv"].push_back({{"name", r.name},
                         {"eer_pct", r.eer_pct},
                         {"min_dcf", r.min_dcf},
                         {"cllr_min", r.cllr_min},
                         {"cllr_act", r.cllr_act}});
    tx << std::left << std::setw(18) << r.name << std::right << std::setw(9) << fmt(r.eer_pct, 2)
       << std::setw(9) << fmt(r.min_dcf, 3) << std::setw(10) << fmt(r.cllr_min, 3)
       << std::setw(10) << fmt(r.cllr_act, 3) << '\n';
  }
  ref["cer_pct"] = nlohmann::ordered_json::object();
  for (const auto& [name, v] : reference_cer_rows()) {
    ref["cer_pct"][name] = v;
    tx << std::left << std::setw(30) << name << std::right << std::setw(9) << fmt(v, 2) << '\n';
  }
  for (const auto& [k, v] : extra.items()) j[k] = v;
  rep.text = tx.str();
  return rep;
}

}  // namespace ghostvec
