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

#include "ghostvec/asr.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ghostvec/binary_io.h"
#include "ghostvec/matrix_io.h"

namespace ghostvec {

namespace {

constexpr char kAsrMagic[8] = {'G', 'V', 'A', 'S', 'R', 'C', 'K', '\n'};

Matrix xavier(Rng& rng, Eigen::Index in, Eigen::Index out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Matrix w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
  return w;
}

}  // namespace

// ---------------------------------------------------------------- vocabulary

VocabSpec::VocabSpec(std::vector<std::string> speakers) : speakers_(std::move(speakers)) {
  tokens_ = {"<pad>", "<sos>", "<eos>"};
  for (char c : kAlphabet) tokens_.push_back(std::string(1, c));
  for (const auto& s : speakers_) {
    if (s.empty()) throw VocabError("empty speaker id");
    tokens_.push_back("<spk:" + s + ">");
  }
  std::vector<std::string> sorted = tokens_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw VocabError("duplicate vocabulary token");
}

int VocabSpec::char_token(char c) const {
  const auto pos = kAlphabet.find(c);
  if (pos == std::string_view::npos)
    throw VocabError(std::string("character outside alphabet: '") + c + "'");
  return kCharBegin + static_cast<int>(pos);
}

int VocabSpec::speaker_token(const std::string& speaker) const {
  const auto it = std::find(speakers_.begin(), speakers_.end(), speaker);
  if (it == speakers_.end()) throw VocabError("speaker not in vocabulary: " + speaker);
  return speaker_begin() + static_cast<int>(it - speakers_.begin());
}

bool VocabSpec::has_speaker(const std::string& speaker) const {
  return std::find(speakers_.begin(), speakers_.end(), speaker) != speakers_.end();
}

char VocabSpec::token_char(int tok) const {
  if (!is_char(tok)) throw VocabError("not a character token: " + std::to_string(tok));
  return kAlphabet[tok - kCharBegin];
}

const std::string& VocabSpec::speaker_of(int tok) const {
  if (!is_speaker(tok)) throw VocabError("not a speaker token: " + std::to_string(tok));
  return speakers_[tok - speaker_begin()];
}

LabelSequence make_labels(const VocabSpec& vocab, const std::string& speaker,
                          const std::string& transcript) {
  LabelSequence l;
  l.tokens.reserve(transcript.size() + 3);
  l.tokens.push_back(VocabSpec::kSos);
  l.tokens.push_back(vocab.speaker_token(speaker));
  for (char c : transcript) l.tokens.push_back(vocab.char_token(c));
  l.tokens.push_back(VocabSpec::kEos);
  return l;
}

void validate_labels(const VocabSpec& vocab, const LabelSequence& labels) {
  const auto& t = labels.tokens;
  if (t.size() < 3) throw VocabError("label sequence too short");
  if (t.front() != VocabSpec::kSos) throw VocabError("label sequence must start with <sos>");
  if (!vocab.is_speaker(t[1])) throw VocabError("label position 1 must be a speaker token");
  if (t.back() != VocabSpec::kEos) throw VocabError("label sequence must end with <eos>");
  for (size_t i = 2; i + 1 < t.size(); ++i)
    if (!vocab.is_char(t[i])) throw VocabError("interior label token is not a character");
}

std::vector<uint8_t> full_mask(const LabelSequence& labels) {
  return std::vector<uint8_t>(labels.tokens.size() - 1, 1);
}

std::vector<uint8_t> speaker_only_mask(const LabelSequence& labels) {
  std::vector<uint8_t> m(labels.tokens.size() - 1, 0);
  m[0] = 1;
  return m;
}

void ModelConfig::validate() const {
  if (encoder_layers < 1 || decoder_layers < 1 || model_dim < 1 || heads < 1 || ffn_dim < 1)
    throw ParameterError("model config: all counts must be >= 1");
  if (model_dim % heads != 0) throw ParameterError("model config: model_dim must be divisible by heads");
  if (dropout < 0 || dropout >= 1) throw ParameterError("model config: dropout must be in [0,1)");
}

Matrix positional_encoding(Eigen::Index rows, int dim) {
  Matrix pe(rows, dim);
  for (Eigen::Index t = 0; t < rows; ++t)
    for (int i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      pe(t, i) = (i % 2 == 0) ? std::sin(t * freq) : std::cos(t * freq);
    }
  return pe;
}

// --------------------------------------------------------------------- model

AsrModel::AsrModel(const ModelConfig& cfg, VocabSpec vocab, uint64_t seed)
    : config_(cfg), vocab_(std::move(vocab)) {
  cfg.validate();
  Rng rng(mix_seed(seed, "asr-init"));
  const int d = cfg.model_dim, f = cfg.ffn_dim, v = vocab_.size();
  auto add_linear = [&](const std::string& name, int in, int out) {
    params_.add(name + ".w", xavier(rng, in, out));
    params_.add(name + ".b", Matrix::Zero(1, out));
  };
  auto add_norm = [&](const std::string& name) {
    params_.add(name + ".g", Matrix::Ones(1, d));
    params_.add(name + ".b", Matrix::Zero(1, d));
  };
  auto add_attention = [&](const std::string& name) {
    for (const char* part : {".q", ".k", ".v", ".o"}) add_linear(name + part, d, d);
  };
  auto add_ffn = [&](const std::string& name) {
    add_linear(name + ".1", d, f);
    add_linear(name + ".2", f, d);
  };
  add_linear("frontend", 2 * kFeatureDim, d);
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    const std::string n = "enc." + std::to_string(l);
    add_norm(n + ".ln1");
    add_attention(n + ".att");
    add_norm(n + ".ln2");
    add_ffn(n + ".ffn");
  }
  add_norm("enc.ln");
  Matrix emb(v, d);
  for (Eigen::Index i = 0; i < emb.size(); ++i) emb.data()[i] = rng.normal();
  params_.add("dec.emb", std::move(emb));
  for (int l = 0; l < cfg.decoder_layers; ++l) {
    const std::string n = "dec." + std::to_string(l);
    add_norm(n + ".ln1");
    add_attention(n + ".self");
    add_norm(n + ".ln2");
    add_attention(n + ".cross");
    add_norm(n + ".ln3");
    add_ffn(n + ".ffn");
  }
  add_norm("dec.ln");
  add_linear("out", d, v);
  feat_mean_ = RowVector::Zero(kFeatureDim);
  feat_inv_std_ = RowVector::Ones(kFeatureDim);
}

void AsrModel::set_feature_stats(RowVector mean, RowVector inv_std) {
  if (mean.size() != kFeatureDim || inv_std.size() != kFeatureDim)
    throw ShapeError("feature statistics must have 120 entries");
  feat_mean_ = std::move(mean);
  feat_inv_std_ = std::move(inv_std);
}

ad::Parameter& AsrModel::p(const std::string& name) const { return params_.get(name); }

ad::Var AsrModel::linear(ad::Graph& g, ad::Var x, const std::string& name) const {
  return g.add_row(g.matmul(x, g.param(p(name + ".w"))), g.param(p(name + ".b")));
}

ad::Var AsrModel::norm(ad::Graph& g, ad::Var x, const std::string& name) const {
  return g.layer_norm(x, g.param(p(name + ".g")), g.param(p(name + ".b")));
}

ad::Var AsrModel::attention_block(ad::Graph& g, ad::Var x, ad::Var memory,
                                  const std::string& name, bool causal) const {
  const ad::Var q = linear(g, x, name + ".q");
  const ad::Var k = linear(g, memory, name + ".k");
  const ad::Var v = linear(g, memory, name + ".v");
  return linear(g, g.attention(q, k, v, config_.heads, causal), name + ".o");
}

ad::Var AsrModel::ffn_block(ad::Graph& g, ad::Var x, const std::string& name, Rng* rng) const {
  ad::Var h = g.gelu(linear(g, x, name + ".1"));
  if (rng) h = g.dropout(h, config_.dropout, *rng);
  return linear(g, h, name + ".2");
}

ad::Var AsrModel::encoder(ad::Graph& g, ad::Var features, Rng* rng) const {
  const Matrix& x = g.value(features);
  if (x.cols() != kFeatureDim)
    throw ShapeError("encoder: expected " + std::to_string(kFeatureDim) + " feature columns, got " +
                     std::to_string(x.cols()));
  if (x.rows() < 1) throw ShapeError("encoder: empty feature matrix");
  ad::Var h = g.normalize_cols(features, feat_mean_, feat_inv_std_);
  h = linear(g, g.stack_frames2(h), "frontend");
  h = g.add(h, g.input(positional_encoding(g.value(h).rows(), config_.model_dim)));
  if (rng) h = g.dropout(h, config_.dropout, *rng);
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::string n = "enc." + std::to_string(l);
    ad::Var y = norm(g, h, n + ".ln1");
    ad::Var a = attention_block(g, y, y, n + ".att", false);
    if (rng) a = g.dropout(a, config_.dropout, *rng);
    h = g.add(h, a);
    ad::Var f = ffn_block(g, norm(g, h, n + ".ln2"), n + ".ffn", rng);
    if (rng) f = g.dropout(f, config_.dropout, *rng);
    h = g.add(h, f);
  }
  return norm(g, h, "enc.ln");
}

ad::Var AsrModel::decoder(ad::Graph& g, ad::Var memory, const std::vector<int>& prefix,
                          Rng* rng) const {
  if (prefix.empty()) throw ShapeError("decoder: empty prefix");
  if (g.value(memory).cols() != config_.model_dim) throw ShapeError("decoder: memory width mismatch");
  ad::Var h = g.embedding(g.param(p("dec.emb")), prefix);
  h = g.add(h, g.input(positional_encoding(static_cast<Eigen::Index>(prefix.size()),
                                           config_.model_dim)));
  if (rng) h = g.dropout(h, config_.dropout, *rng);
  for (int l = 0; l < config_.decoder_layers; ++l) {
    const std::string n = "dec." + std::to_string(l);
    ad::Var y = norm(g, h, n + ".ln1");
    ad::Var a = attention_block(g, y, y, n + ".self", true);
    if (rng) a = g.dropout(a, config_.dropout, *rng);
    h = g.add(h, a);
    ad::Var c = attention_block(g, norm(g, h, n + ".ln2"), memory, n + ".cross", false);
    if (rng) c = g.dropout(c, config_.dropout, *rng);
    h = g.add(h, c);
    ad::Var f = ffn_block(g, norm(g, h, n + ".ln3"), n + ".ffn", rng);
    if (rng) f = g.dropout(f, config_.dropout, *rng);
    h = g.add(h, f);
  }
  return linear(g, norm(g, h, "dec.ln"), "out");
}

void AsrModel::save(const std::string& path) const {
  BinaryWriter w;
  w.magic(kAsrMagic);
  w.u32(kAsrCheckpointVersion);
  w.i32(config_.encoder_layers);
  w.i32(config_.decoder_layers);
  w.i32(config_.model_dim);
  w.i32(config_.heads);
  w.i32(config_.ffn_dim);
  w.f64(config_.dropout);
  w.u32(static_cast<uint32_t>(vocab_.speakers().size()));
  for (const auto& s : vocab_.speakers()) w.str(s);
  w.matrix(feat_mean_);
  w.matrix(feat_inv_std_);
  w.u32(static_cast<uint32_t>(params_.all().size()));
  for (const auto& prm : params_.all()) {
    w.str(prm->name);
    w.matrix(prm->value);
  }
  w.u8(frozen_ ? 1 : 0);
  write_file_atomic(path, w.data());
}

AsrModel AsrModel::load(const std::string& path) {
  BinaryReader r(read_file(path), path);
  r.expect_magic(kAsrMagic);
  const uint32_t version = r.u32();
  if (version != kAsrCheckpointVersion)
    throw VersionError(path + ": checkpoint version " + std::to_string(version) +
                       ", this build reads version " + std::to_string(kAsrCheckpointVersion));
  ModelConfig cfg;
  cfg.encoder_layers = r.i32();
  cfg.decoder_layers = r.i32();
  cfg.model_dim = r.i32();
  cfg.heads = r.i32();
  cfg.ffn_dim = r.i32();
  cfg.dropout = r.f64();
  std::vector<std::string> speakers(r.u32());
  for (auto& s : speakers) s = r.str();
  AsrModel model(cfg, VocabSpec(std::move(speakers)), 0);
  RowVector mean = r.matrix().row(0);
  RowVector inv_std = r.matrix().row(0);
  model.set_feature_stats(std::move(mean), std::move(inv_std));
  const uint32_t n = r.u32();
  if (n != model.params_.all().size()) throw FormatError(path + ": parameter count mismatch");
  for (uint32_t i = 0; i < n; ++i) {
    const std::string name = r.str();
    Matrix value = r.matrix();
    auto& prm = model.params_.get(name);
    if (value.rows() != prm.value.rows() || value.cols() != prm.value.cols())
      throw FormatError(path + ": shape mismatch for parameter " + name);
    prm.value = std::move(value);
  }
  model.frozen_ = r.u8() != 0;
  if (!r.at_end()) throw FormatError(path + ": trailing bytes");
  return model;
}

// ------------------------------------------------------------------ training

AsrModel train_asr(const std::vector<TrainingExample>& data, const VocabSpec& vocab,
                   const ModelConfig& cfg, const TrainConfig& tc) {
  if (data.empty()) throw ParameterError("train_asr: no training data");
  if (tc.epochs < 1 || tc.batch < 1 || !(tc.lr > 0))
    throw ParameterError("train_asr: epochs, batch and lr must be positive");
  std::vector<LabelSequence> labels;
  labels.reserve(data.size());
  for (const auto& ex : data) {
    if (ex.features.cols() != kFeatureDim) throw ShapeError("train_asr: feature width must be 120");
    labels.push_back(make_labels(vocab, ex.speaker, ex.transcript));
  }

  AsrModel model(cfg, vocab, tc.seed);
  {
    RowVector sum = RowVector::Zero(kFeatureDim), sq = RowVector::Zero(kFeatureDim);
    double frames = 0;
    for (const auto& ex : data) {
      sum += ex.features.colwise().sum();
      sq += ex.features.array().square().colwise().sum().matrix();
      frames += static_cast<double>(ex.features.rows());
    }
    const RowVector mean = sum / frames;
    const RowVector var = sq / frames - mean.cwiseProduct(mean);
    RowVector inv_std = var.unaryExpr([](double v) { return 1.0 / std::sqrt(std::max(v, 1e-6)); });
    model.set_feature_stats(mean, inv_std);
  }

  auto& params = model.params().all();
  ad::Adam adam(model.params());
  Rng rng(mix_seed(tc.seed, "asr-train"));
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const int steps_per_epoch = static_cast<int>((data.size() + tc.batch - 1) / tc.batch);
  const int total_steps = steps_per_epoch * tc.epochs;
  int step = 0;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0;
    for (size_t start = 0; start < order.size(); start += tc.batch) {
      const size_t end = std::min(order.size(), start + tc.batch);
      model.params().zero_grad();
      for (size_t b = start; b < end; ++b) {
        const auto& ex = data[order[b]];
        const auto& lab = labels[order[b]].tokens;
        ad::Graph g(true);
        const ad::Var x = g.input(ex.features);
        const ad::Var mem = model.encoder(g, x, &rng);
        const std::vector<int> prefix(lab.begin(), lab.end() - 1);
        const std::vector<int> targets(lab.begin() + 1, lab.end());
        const ad::Var logits = model.decoder(g, mem, prefix, &rng);
        const ad::Var ce = g.cross_entropy(logits, targets, std::vector<uint8_t>(targets.size(), 1));
        const double l = g.value(ce)(0, 0);
        if (!std::isfinite(l))
          throw TrainingError("train_asr: non-finite loss at epoch " + std::to_string(epoch));
        epoch_loss += l;
        g.backward(ce);
      }
      const double inv_b = 1.0 / static_cast<double>(end - start);
      double norm2 = 0;
      for (auto& prm : params) {
        prm->grad *= inv_b;
        norm2 += prm->grad.squaredNorm();
      }
      const double gnorm = std::sqrt(norm2);
      if (!std::isfinite(gnorm)) throw TrainingError("train_asr: non-finite gradient");
      const double clip = (tc.grad_clip > 0 && gnorm > tc.grad_clip) ? tc.grad_clip / gnorm : 1.0;
      ++step;
      const double warm = std::min(1.0, static_cast<double>(step) / std::max(1, tc.warmup_steps));
      const double progress = static_cast<double>(step) / total_steps;
      const double lr = tc.lr * warm * (0.55 + 0.45 * std::cos(std::numbers::pi * progress));
      adam.step(lr, clip);
    }
    if (tc.on_epoch) tc.on_epoch(epoch, epoch_loss / static_cast<double>(data.size()));
  }
  model.params().zero_grad();
  model.freeze();
  return model;
}

AsrModel train_asr(const Manifest& manifest, const ModelConfig& cfg, const TrainConfig& tc) {
  std::vector<std::string> speakers(manifest.speaker_set.begin(), manifest.speaker_set.end());
  VocabSpec vocab(speakers);
  std::vector<TrainingExample> data;
  data.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    if (!vocab.has_speaker(e.speaker_id)) throw VocabError("speaker not in vocabulary: " + e.speaker_id);
    check_alphabet(e.transcript);
    data.push_back({manifest.load_features(e), e.speaker_id, e.transcript});
  }
  return train_asr(data, vocab, cfg, tc);
}

// ----------------------------------------------------------------- inference

Matrix encode(const AsrModel& model, const Matrix& features) {
  ad::Graph g(false);
  return g.value(model.encoder(g, g.input(features), nullptr));
}

std::string DecodeResult::text(const VocabSpec& vocab) const {
  std::string s;
  for (size_t i = 1; i < tokens.size(); ++i)
    if (vocab.is_char(tokens[i])) s.push_back(vocab.token_char(tokens[i]));
  return s;
}

DecodeResult decode_greedy(const AsrModel& model, const Matrix& encoder_out, int max_len) {
  if (!encoder_out.allFinite()) throw InputError("decode_greedy: non-finite encoder output");
  DecodeResult res;
  std::vector<int> prefix{VocabSpec::kSos};
  for (int step = 0; step < max_len; ++step) {
    ad::Graph g(false);
    const ad::Var logits = model.decoder(g, g.input(encoder_out), prefix, nullptr);
    const RowVector last = g.value(logits).row(g.value(logits).rows() - 1);
    const RowVector e = (last.array() - last.maxCoeff()).exp().matrix();
    Vector post = (e / e.sum()).transpose();
    Eigen::Index best;
    post.maxCoeff(&best);
    res.tokens.push_back(static_cast<int>(best));
    res.posteriors.push_back(std::move(post));
    if (best == VocabSpec::kEos) break;
    prefix.push_back(static_cast<int>(best));
  }
  return res;
}

namespace {

struct LossPass {
  ad::Graph graph;
  ad::Var input, loss, logits;
};

// Runs the decoder only over the prefix needed by the last masked position.
void build_loss(const AsrModel& model, LossPass& pass, const Matrix& features,
                const LabelSequence& labels, const std::vector<uint8_t>& mask, bool need_grad) {
  validate_labels(model.vocab(), labels);
  const auto& t = labels.tokens;
  if (mask.size() != t.size() - 1)
    throw ShapeError("loss mask must have one entry per predicted position");
  size_t last = 0;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) last = i;
  const std::vector<int> prefix(t.begin(), t.begin() + last + 1);
  const std::vector<int> targets(t.begin() + 1, t.begin() + last + 2);
  const std::vector<uint8_t> sub_mask(mask.begin(), mask.begin() + last + 1);
  pass.input = pass.graph.input(features, need_grad);
  const ad::Var mem = model.encoder(pass.graph, pass.input, nullptr);
  pass.logits = model.decoder(pass.graph, mem, prefix, nullptr);
  pass.loss = pass.graph.cross_entropy(pass.logits, targets, sub_mask);
}

}  // namespace

double loss(const AsrModel& model, const Matrix& features, const LabelSequence& labels,
            const std::vector<uint8_t>& mask) {
  LossPass pass{ad::Graph(false), {}, {}, {}};
  build_loss(model, pass, features, labels, mask, false);
  return pass.graph.value(pass.loss)(0, 0);
}

InputGradient loss_and_grad_input(const AsrModel& model, const Matrix& features,
                                  const LabelSequence& labels, const std::vector<uint8_t>& mask) {
  if (!model.frozen()) throw ParameterError("grad_input: model must be frozen");
  LossPass pass{ad::Graph(false), {}, {}, {}};
  build_loss(model, pass, features, labels, mask, true);
  InputGradient out;
  out.loss = pass.graph.value(pass.loss)(0, 0);
  out.first_step_logits = pass.graph.value(pass.logits).row(0).transpose();
  if (pass.graph.requires_grad(pass.loss)) pass.graph.backward(pass.loss);
  out.grad = pass.graph.grad(pass.input);
  return out;
}

Matrix grad_input(const AsrModel& model, const Matrix& features, const LabelSequence& labels,
                  const std::vector<uint8_t>& mask) {
  return loss_and_grad_input(model, features, labels, mask).grad;
}

size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double cer(const std::string& hypothesis, const std::string& reference) {
  if (reference.empty()) throw ParameterError("cer: empty reference");
  return 100.0 * static_cast<double>(edit_distance(hypothesis, reference)) /
         static_cast<double>(reference.size());
}

}  // namespace ghostvec
