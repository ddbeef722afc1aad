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

#include "ghostvec/pipeline.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "ghostvec/digest.h"
#include "ghostvec/matrix_io.h"
#include "ghostvec/svd_transfer.h"
#include "ghostvec/tsv.h"
#include "json.hpp"

namespace ghostvec {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ------------------------------------------------------------------ config

namespace {

struct Binding {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size())
    throw ConfigError("config: bad value for " + key + ": '" + v + "'");
  return out;
}

// Shortest representation that round-trips.
std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::map<std::string, Binding> bindings(PipelineConfig& c) {
  std::map<std::string, Binding> b;
  auto i32 = [&](const std::string& k, int& ref) {
    b[k] = {[&ref, k](const std::string& v) { ref = parse_number<int>(k, v); },
            [&ref] { return std::to_string(ref); }};
  };
  auto f64 = [&](const std::string& k, double& ref) {
    b[k] = {[&ref, k](const std::string& v) { ref = parse_number<double>(k, v); },
            [&ref] { return fmt_double(ref); }};
  };
  b["global.seed"] = {[&c](const std::string& v) { c.seed = parse_number<uint64_t>("global.seed", v); },
                      [&c] { return std::to_string(c.seed); }};
  b["global.out"] = {[&c](const std::string& v) { c.out = v; }, [&c] { return c.out; }};

  auto& k = c.corpus;
  i32("corpus.speakers", k.n_speakers);
  i32("corpus.utts_per_speaker", k.utts_per_speaker);
  i32("corpus.min_len", k.min_len);
  i32("corpus.max_len", k.max_len);
  i32("corpus.frames_per_char", k.frames_per_char);
  i32("corpus.duration_jitter", k.duration_jitter);
  i32("corpus.pad_frames", k.pad_frames);
  f64("corpus.min_separation", k.min_separation);
  f64("corpus.f0_min", k.f0_min);
  f64("corpus.f0_max", k.f0_max);
  f64("corpus.formant_min", k.formant_min);
  f64("corpus.formant_max", k.formant_max);
  f64("corpus.brightness_min", k.brightness_min);
  f64("corpus.brightness_max", k.brightness_max);
  f64("corpus.noise_min", k.noise_min);
  f64("corpus.noise_max", k.noise_max);
  f64("corpus.f0_jitter", k.f0_jitter);
  f64("corpus.f0_drift_depth", k.f0_drift_depth);
  i32("corpus.template_speakers", c.template_speakers);
  i32("corpus.template_utts", c.template_utts);
  i32("corpus.eval_sentences", c.eval_sentences);
  i32("corpus.eval_min_len", c.eval_min_len);
  i32("corpus.eval_max_len", c.eval_max_len);
  i32("corpus.enroll_utts", c.enroll_utts);

  i32("asr.encoder_layers", c.asr_model.encoder_layers);
  i32("asr.decoder_layers", c.asr_model.decoder_layers);
  i32("asr.model_dim", c.asr_model.model_dim);
  i32("asr.heads", c.asr_model.heads);
  i32("asr.ffn_dim", c.asr_model.ffn_dim);
  f64("asr.dropout", c.asr_model.dropout);
  i32("asr.epochs", c.asr_train.epochs);
  f64("asr.lr", c.asr_train.lr);
  i32("asr.batch", c.asr_train.batch);
  i32("asr.warmup_steps", c.asr_train.warmup_steps);
  f64("asr.grad_clip", c.asr_train.grad_clip);

  i32("sv.hidden", c.sv.hidden);
  i32("sv.embed_dim", c.sv.embed_dim);
  i32("sv.epochs", c.sv.epochs);
  i32("sv.batch", c.sv.batch);
  f64("sv.lr", c.sv.lr);
  i32("sv.warmup_steps", c.sv.warmup_steps);
  i32("sv.crop_frames", c.sv.crop_frames);

  i32("attack.targets", c.targets);
  i32("attack.variants", c.variants);
  i32("attack.max_variants", c.max_variants);
  f64("attack.epsilon", c.attack.epsilon);
  i32("attack.max_iters", c.attack.max_iters);
  i32("attack.frames", c.attack.frames);
  b["attack.noise_mean"] = {
      [&c](const std::string& v) {
        c.noise_from_silence = v == "silence";
        if (!c.noise_from_silence)
          c.attack.noise.mean = RowVector::Constant(1, parse_number<double>("attack.noise_mean", v));
      },
      [&c] { return c.noise_from_silence ? std::string("silence") : fmt_double(c.attack.noise.mean(0)); }};
  f64("attack.noise_std", c.attack.noise.stddev);
  b["attack.budget"] = {
      [&c](const std::string& v) {
        const double x = parse_number<double>("attack.budget", v);
        c.attack.budget = x > 0 ? std::optional<double>(x) : std::nullopt;
      },
      [&c] { return fmt_double(c.attack.budget.value_or(0.0)); }};
  b["attack.full_sequence_loss"] = {
      [&c](const std::string& v) {
        if (v != "true" && v != "false") throw ConfigError("config: attack.full_sequence_loss must be true or false");
        c.attack.full_sequence_loss = v == "true";
      },
      [&c] { return std::string(c.attack.full_sequence_loss ? "true" : "false"); }};

  i32("svd.rows", c.svd_rows);
  i32("svd.sigma_head", c.sigma_head);

  i32("synth.frames_per_char", c.synth.frames_per_char);
  i32("synth.nnls_iters", c.synth.nnls_iters);
  i32("synth.griffin_lim_iters", c.synth.griffin_lim_iters);
  i32("synth.basis", c.voice_map.basis);
  f64("synth.f0_min", c.voice_map.f0.lo);
  f64("synth.f0_max", c.voice_map.f0.hi);
  f64("synth.formant_min", c.voice_map.formant_scale.lo);
  f64("synth.formant_max", c.voice_map.formant_scale.hi);
  f64("synth.brightness_min", c.voice_map.brightness.lo);
  f64("synth.brightness_max", c.voice_map.brightness.hi);
  f64("synth.noise_min", c.voice_map.noise_floor.lo);
  f64("synth.noise_max", c.voice_map.noise_floor.hi);

  f64("metrics.p_target", c.p_target);
  return b;
}

std::string section_of(const std::string& stage) {
  static const std::map<std::string, std::string> m = {
      {"corpus", "corpus."}, {"train-asr", "asr."},    {"train-sv", "sv."},     {"attack", "attack."},
      {"svd-transfer", "svd."}, {"synth", "synth."}, {"score", "metrics."}, {"report", "metrics."}};
  const auto it = m.find(stage);
  if (it == m.end()) throw ParameterError("unknown stage: " + stage);
  return it->second;
}

}  // namespace

PipelineConfig PipelineConfig::parse(const std::string& text, const std::string& source) {
  PipelineConfig c;
  auto b = bindings(c);
  int line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected `key = value`");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const auto it = b.find(key);
    if (it == b.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (value.empty()) throw ConfigError(where + ": empty value for " + key);
    try {
      it->second.set(value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  c.apply_seed(c.seed);
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  return parse(read_file(path), path);
}

std::string PipelineConfig::canonical() const {
  auto self = *this;
  std::ostringstream os;
  for (const auto& [k, bind] : bindings(self)) os << k << " = " << bind.get() << '\n';
  return os.str();
}

std::string PipelineConfig::stage_digest(const std::string& stage) const {
  const std::string prefix = section_of(stage);
  auto self = *this;
  std::ostringstream os;
  os << "stage=" << stage << "\nseed=" << seed << '\n';
  for (const auto& [k, bind] : bindings(self))
    if (k.rfind(prefix, 0) == 0) os << k << " = " << bind.get() << '\n';
  return sha256_hex(os.str());
}

void PipelineConfig::apply_seed(uint64_t s) {
  seed = s;
  corpus.seed = s;
  asr_train.seed = mix_seed(s, "asr");
  sv.seed = mix_seed(s, "sv");
  attack.seed = mix_seed(s, "attack");
  synth.noise_seed = mix_seed(s, "synth-noise");
  synth.phase_seed = mix_seed(s, "synth-phase");
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  try {
    corpus.validate();
    asr_model.validate();
    sv.validate();
    attack.validate();
    voice_map.validate();
    synth.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(e.what());
  }
  if (out.empty()) fail("global.out must not be empty");
  if (template_speakers < 1 || template_utts < 1) fail("template speakers and utterances must be >= 1");
  if (targets < 2 || targets > corpus.n_speakers) fail("attack.targets must lie in [2, corpus.speakers]");
  if (eval_sentences < targets || eval_sentences % targets != 0)
    fail("corpus.eval_sentences must be a positive multiple of attack.targets");
  if (eval_min_len < 1 || eval_max_len < eval_min_len) fail("bad eval sentence length range");
  if (enroll_utts < 1) fail("corpus.enroll_utts must be >= 1");
  if (variants < 1 || max_variants < variants) fail("need 1 <= attack.variants <= attack.max_variants");
  if (svd_rows < 1) fail("svd.rows must be >= 1");
  if (sigma_head < 1) fail("svd.sigma_head must be >= 1");
  if (eval_sentences / targets > svd_rows) fail("sentences per target exceed svd.rows");
  if (asr_train.epochs < 1 || asr_train.batch < 1 || !(asr_train.lr > 0)) fail("bad asr training settings");
  if (!(p_target > 0 && p_target < 1)) fail("metrics.p_target must lie in (0, 1)");
}

// ---------------------------------------------------------------- pipeline

struct Pipeline::Record {
  std::string stage;
  std::string status;
  std::string config_digest;
  std::map<std::string, std::string> inputs;
  std::string output_digest;
};

namespace {

thread_local std::string g_work_dir;  // staging directory of the running stage

std::string W(const std::string& rel) { return (fs::path(g_work_dir) / rel).string(); }

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> out;
  for (auto& l : split_lines(read_file(path)))
    if (!l.empty()) out.push_back(l);
  return out;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  write_file_atomic(path, s);
}

std::string two(int i) {
  std::ostringstream os;
  os << std::setw(2) << std::setfill('0') << i;
  return os.str();
}

Vector pooled(const AsrModel& model, const Matrix& features) {
  return encode(model, features).colwise().mean().transpose();
}

Matrix rows_of(const std::vector<Vector>& vs) {
  Matrix m(static_cast<Eigen::Index>(vs.size()), vs.empty() ? 0 : vs.front().size());
  for (size_t i = 0; i < vs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = vs[i].transpose();
  return m;
}

const std::vector<std::string>& conditions() {
  static const std::vector<std::string> c = {"genuine", "ghost", "svd"};
  return c;
}

const std::map<std::string, std::string>& condition_titles() {
  static const std::map<std::string, std::string> t = {
      {"genuine", "Target/Target"}, {"ghost", "Target/GhostVec"}, {"svd", "Target/Our"}};
  return t;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg, Logger log) : cfg_(std::move(cfg)), log_(std::move(log)) {
  if (!log_) log_ = [](const std::string&) {};
}

std::string Pipeline::path(const std::string& rel) const { return (fs::path(cfg_.out) / rel).string(); }

std::vector<std::string> Pipeline::upstream(const std::string& stage) const {
  static const std::map<std::string, std::vector<std::string>> deps = {
      {"corpus", {}},
      {"train-asr", {"corpus"}},
      {"train-sv", {"corpus"}},
      {"attack", {"corpus", "train-asr"}},
      {"svd-transfer", {"corpus", "train-asr", "attack"}},
      {"synth", {"corpus", "svd-transfer"}},
      {"score", {"corpus", "train-asr", "train-sv", "synth"}},
      {"report", {"corpus", "train-asr", "train-sv", "attack", "svd-transfer", "score"}},
  };
  const auto it = deps.find(stage);
  if (it == deps.end()) throw ParameterError("unknown stage: " + stage);
  return it->second;
}

std::vector<std::string> Pipeline::outputs(const std::string& stage) const {
  std::vector<std::string> files;
  const fs::path root = path(stage);
  if (!fs::exists(root)) return files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), cfg_.out).generic_string());
  std::sort(files.begin(), files.end());
  return files;
}

std::string Pipeline::output_digest(const std::string& stage) const {
  std::string blob;
  for (const auto& f : outputs(stage)) blob += f + '\t' + sha256_file(path(f)) + '\n';
  return sha256_hex(blob);
}

void Pipeline::append_ledger(const std::string& line) const {
  fs::create_directories(cfg_.out);
  std::ofstream os(path("ledger.jsonl"), std::ios::app);
  os << line << '\n';
  if (!os) throw Error("io", "cannot append to ledger " + path("ledger.jsonl"));
}

const Pipeline::Record* Pipeline::last_completed(const std::string& stage) const {
  static thread_local Record rec;
  const std::string lp = path("ledger.jsonl");
  if (!fs::exists(lp)) return nullptr;
  bool found = false;
  for (const auto& line : split_lines(read_file(lp))) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      continue;  // a torn final line from an interrupted write
    }
    if (j.value("stage", "") != stage || j.value("status", "") != "completed") continue;
    rec.stage = stage;
    rec.status = "completed";
    rec.config_digest = j.value("config_digest", "");
    rec.output_digest = j.value("output_digest", "");
    rec.inputs.clear();
    for (const auto& [k, v] : j["inputs"].items()) rec.inputs[k] = v.get<std::string>();
    found = true;
  }
  return found ? &rec : nullptr;
}

StageOutcome Pipeline::run(const std::string& stage, bool force) {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<std::string, std::string> inputs;
  for (const auto& up : upstream(stage)) {
    const Record* r = last_completed(up);
    if (!r || !fs::exists(path(up)))
      throw MissingPrerequisiteError("stage " + stage + " needs " + path(up) + " (run `" + up + "` first)");
    inputs[up] = r->output_digest;
  }
  const std::string cfg_digest = cfg_.stage_digest(stage);
  json rec;
  rec["stage"] = stage;
  rec["config_digest"] = cfg_digest;
  rec["inputs"] = inputs;

  if (!force) {
    const Record* prev = last_completed(stage);
    if (prev && prev->config_digest == cfg_digest && prev->inputs == inputs && fs::exists(path(stage)) &&
        output_digest(stage) == prev->output_digest) {
      rec["status"] = "cached";
      rec["output_digest"] = prev->output_digest;
      append_ledger(rec.dump());
      log_("[" + stage + "] up to date, skipped");
      return {true, 0.0};
    }
  }

  const std::string work = path(stage) + ".partial";
  fs::remove_all(work);
  fs::create_directories(work);
  g_work_dir = work;
  log_("[" + stage + "] running");
  try {
    if (stage == "corpus") stage_corpus();
    else if (stage == "train-asr") stage_train_asr();
    else if (stage == "train-sv") stage_train_sv();
    else if (stage == "attack") stage_attack();
    else if (stage == "svd-transfer") stage_svd();
    else if (stage == "synth") stage_synth();
    else if (stage == "score") stage_score();
    else if (stage == "report") stage_report();
    else throw ParameterError("unknown stage: " + stage);
    fs::remove_all(path(stage));
    fs::rename(work, path(stage));
  } catch (const std::exception& e) {
    g_work_dir.clear();
    rec["status"] = "failed";
    const auto* ge = dynamic_cast<const Error*>(&e);
    rec["error_kind"] = ge ? ge->kind() : std::string("internal");
    rec["error"] = e.what();
    append_ledger(rec.dump());
    throw;
  }
  g_work_dir.clear();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rec["status"] = "completed";
  rec["output_digest"] = output_digest(stage);
  rec["outputs"] = outputs(stage);
  rec["wall_seconds"] = std::round(secs * 1000) / 1000;
  append_ledger(rec.dump());
  std::ostringstream msg;
  msg << "[" << stage << "] done in " << std::fixed << std::setprecision(1) << secs << " s";
  log_(msg.str());
  return {false, secs};
}

void Pipeline::run_all(bool force) {
  for (const auto& s : stage_names()) run(s, force);
}

std::vector<std::string> Pipeline::target_speakers() const {
  return read_lines(path("corpus/targets.txt"));
}

// ------------------------------------------------------------------ stages

void Pipeline::stage_corpus() {
  const Corpus train = generate_corpus(cfg_.corpus, W("train"));
  log_("[corpus] " + std::to_string(train.manifest.entries.size()) + " training utterances");

  CorpusConfig tc = cfg_.corpus;
  tc.n_speakers = cfg_.template_speakers;
  tc.utts_per_speaker = cfg_.template_utts;
  tc.speaker_prefix = "tpl";
  tc.seed = mix_seed(cfg_.seed, "templates");
  const Corpus tpl = generate_corpus(tc, W("templates"));
  log_("[corpus] " + std::to_string(tpl.manifest.entries.size()) + " template utterances");

  // Targets spread evenly over the sorted speaker list.
  std::vector<std::string> all(train.manifest.speaker_set.begin(), train.manifest.speaker_set.end());
  std::vector<std::string> targets;
  for (int i = 0; i < cfg_.targets; ++i)
    targets.push_back(all[static_cast<size_t>(i) * all.size() / static_cast<size_t>(cfg_.targets)]);
  write_lines(W("targets.txt"), targets);

  // Held-out genuine enrollment speech for every target.
  Manifest enroll;
  Rng rng(mix_seed(cfg_.seed, "enroll"));
  fs::create_directories(W("enroll/feats"));
  for (const auto& t : targets) {
    const auto it = std::find_if(train.speakers.begin(), train.speakers.end(),
                                 [&](const SpeakerProfile& p) { return p.speaker_id == t; });
    for (int u = 0; u < cfg_.enroll_utts; ++u) {
      const int len = cfg_.corpus.min_len + static_cast<int>(rng.below(cfg_.corpus.max_len - cfg_.corpus.min_len + 1));
      const std::string text = random_transcript(rng, len);
      const std::string id = t + "_enr" + two(u);
      const Utterance utt = generate_utterance(*it, id, text, mix_seed(cfg_.seed, "utt:" + id), cfg_.corpus);
      const std::string rel = "feats/" + id + ".gvm";
      save_matrix(W("enroll/" + rel), utt.features);
      enroll.entries.push_back({id, t, rel, text});
      enroll.speaker_set.insert(t);
    }
  }
  save_manifest(enroll, W("enroll/manifest.tsv"));

  std::vector<std::string> sentences;
  Rng srng(mix_seed(cfg_.seed, "sentences"));
  for (int i = 0; i < cfg_.eval_sentences; ++i) {
    const int len = cfg_.eval_min_len + static_cast<int>(srng.below(cfg_.eval_max_len - cfg_.eval_min_len + 1));
    sentences.push_back(random_transcript(srng, len));
  }
  write_lines(W("sentences.txt"), sentences);
}

void Pipeline::stage_train_asr() {
  const Manifest train = load_manifest(path("corpus/train/manifest.tsv"));
  TrainConfig tc = cfg_.asr_train;
  json losses = json::array();
  tc.on_epoch = [&](int epoch, double l) {
    std::ostringstream os;
    os << "[train-asr] epoch " << epoch + 1 << "/" << tc.epochs << " loss " << std::setprecision(4) << l;
    log_(os.str());
    losses.push_back(std::round(l * 1e6) / 1e6);
  };
  const AsrModel model = train_asr(train, cfg_.asr_model, tc);
  model.save(W("model.ckpt"));

  // Held-in speaker-token accuracy over every training utterance, CER on every 10th.
  size_t correct = 0;
  CerTally tally;
  for (size_t i = 0; i < train.entries.size(); ++i) {
    const auto& e = train.entries[i];
    const Matrix enc = encode(model, train.load_features(e));
    const bool full = i % 10 == 0;
    const DecodeResult d = decode_greedy(model, enc, full ? static_cast<int>(e.transcript.size()) + 8 : 1);
    correct += d.speaker_token() == model.vocab().speaker_token(e.speaker_id);
    if (full) tally.add(e.transcript, d.text(model.vocab()));
  }
  json rep;
  rep["speaker_accuracy"] = static_cast<double>(correct) / static_cast<double>(train.entries.size());
  rep["utterances"] = train.entries.size();
  rep["cer_pct_subset"] = std::round(tally.pct() * 1e6) / 1e6;
  rep["epoch_loss"] = losses;
  rep["checksum"] = model.checksum();
  write_file_atomic(W("train_report.json"), rep.dump(2) + "\n");
  log_("[train-asr] held-in speaker accuracy " + std::to_string(rep["speaker_accuracy"].get<double>()));
}

void Pipeline::stage_train_sv() {
  const Manifest train = load_manifest(path("corpus/train/manifest.tsv"));
  const Manifest tpl = load_manifest(path("corpus/templates/manifest.tsv"));
  std::vector<LabeledFeatures> data;
  for (const auto* m : {&train, &tpl})
    for (const auto& e : m->entries) data.push_back({m->load_features(e), e.speaker_id});
  EncoderConfig ec = cfg_.sv;
  ec.on_epoch = [&](int epoch, double l, double acc) {
    std::ostringstream os;
    os << "[train-sv] epoch " << epoch + 1 << "/" << ec.epochs << " loss " << std::setprecision(4) << l
       << " crop-acc " << acc;
    log_(os.str());
  };
  const SpeakerEncoder enc = train_speaker_encoder(data, ec);
  enc.save(W("encoder.ckpt"));
  json rep;
  rep["training_accuracy"] = enc.training_accuracy();
  rep["speakers"] = enc.speakers().size();
  rep["checksum"] = enc.checksum();
  write_file_atomic(W("train_report.json"), rep.dump(2) + "\n");
  log_("[train-sv] held-in accuracy " + std::to_string(enc.training_accuracy()));
}

void Pipeline::stage_attack() {
  const AsrModel model = AsrModel::load(path("train-asr/model.ckpt"));
  const auto targets = target_speakers();
  AttackConfig acfg = cfg_.attack;
  if (cfg_.noise_from_silence) {
    acfg.noise.mean = silence_mean(load_manifest(path("corpus/train/manifest.tsv")), cfg_.corpus.pad_frames);
    save_matrix(W("silence_mean.gvm"), acfg.noise.mean);
  }
  json summary;
  summary["config_digest"] = acfg.digest();
  summary["targets"] = json::array();
  for (const auto& t : targets) {
    GhostVecBundle bundle;
    bundle.target_speaker = t;
    bundle.dim = model.config().model_dim;
    bundle.config_digest = acfg.digest();
    int successes = 0, variant = 0, first_successes = 0;
    double iters = 0;
    for (; variant < cfg_.max_variants; ++variant) {
      if (variant >= cfg_.variants && successes >= cfg_.svd_rows) break;
      GhostVec gv = attack_variant(model, t, acfg, variant);
      gv.embedding.resize(0, 0);
      successes += gv.success;
      if (variant < cfg_.variants) {
        first_successes += gv.success;
        iters += gv.iters_used;
      }
      bundle.ghostvecs.push_back(std::move(gv));
    }
    save_bundle(W(t + ".bundle"), bundle, false);
    const double rate = static_cast<double>(first_successes) / cfg_.variants;
    summary["targets"].push_back({{"speaker", t},
                                  {"success_rate", rate},
                                  {"mean_iters", std::round(iters / cfg_.variants * 1e6) / 1e6},
                                  {"variants_run", variant},
                                  {"successes", successes}});
    std::ostringstream os;
    os << "[attack] " << t << " success " << first_successes << "/" << cfg_.variants << ", " << successes
       << " total over " << variant << " variants";
    log_(os.str());
  }
  write_file_atomic(W("summary.json"), summary.dump(2) + "\n");
}

void Pipeline::stage_svd() {
  const AsrModel model = AsrModel::load(path("train-asr/model.ckpt"));
  const Manifest train = load_manifest(path("corpus/train/manifest.tsv"));
  const Manifest tpl = load_manifest(path("corpus/templates/manifest.tsv"));
  const auto targets = target_speakers();

  // Genuine utterance embeddings of every training and template speaker.
  std::map<std::string, Matrix> genuine;
  std::vector<std::string> mean_ids;
  std::vector<Vector> means;
  for (const auto* m : {&train, &tpl}) {
    for (const auto& spk : m->speaker_set) {
      std::vector<Vector> rows;
      for (const auto* e : m->by_speaker(spk)) rows.push_back(pooled(model, m->load_features(*e)));
      genuine[spk] = rows_of(rows);
      mean_ids.push_back(spk);
      means.push_back(pool_speaker_embedding(genuine[spk]));
    }
  }
  log_("[svd-transfer] encoded " + std::to_string(genuine.size()) + " speakers");
  save_matrix(W("speaker_means.gvm"), rows_of(means));
  write_lines(W("speaker_means.txt"), mean_ids);
  for (const auto& t : targets) save_matrix(W("genuine/" + t + ".gvm"), genuine[t]);

  TemplateBank bank;
  for (const auto& spk : tpl.speaker_set)
    bank[spk] = {resample_rows(genuine[spk], cfg_.svd_rows, mix_seed(cfg_.seed, "tpl:" + spk)), spk};
  save_template_bank(bank, W("templates"));

  json summary;
  summary["targets"] = json::array();
  std::vector<std::pair<std::string, Vector>> proj_in;
  for (const auto& t : targets) {
    const GhostVecBundle b = load_bundle(path("attack/" + t + ".bundle"));
    const EmbeddingMatrix ghost = stack_ghostvecs(b.ghostvecs, cfg_.svd_rows);
    const SVDFactors gf = svd(ghost.X);
    const NearestTemplate nt = nearest_template(ghost, bank);
    const SVDFactors tf = svd(nt.matrix->X);
    const Matrix Xp = transfer(gf, tf);
    save_matrix(W(t + ".ghost.gvm"), ghost.X);
    save_matrix(W(t + ".transfer.gvm"), Xp);
    TransferRecord tr{t, nt.speaker, nt.distance, gf.sigma.head(std::min<Eigen::Index>(cfg_.sigma_head, gf.sigma.size()))};
    write_file_atomic(W(t + ".transfer.txt"), format_transfer_record(tr));

    // Centroid proximity in the ASR embedding space.
    const Vector gc = pool_speaker_embedding(ghost.X);
    json sims = json::object();
    std::string best6, best_all;
    double best6_sim = -2, best_all_sim = -2;
    for (const auto& spk : train.speaker_set) {
      const double s = cosine_similarity(gc, pool_speaker_embedding(genuine[spk]));
      const bool is_target = std::find(targets.begin(), targets.end(), spk) != targets.end();
      if (is_target) {
        sims[spk] = std::round(s * 1e9) / 1e9;
        if (s > best6_sim) best6_sim = s, best6 = spk;
      }
      if (s > best_all_sim) best_all_sim = s, best_all = spk;
    }
    summary["targets"].push_back({{"speaker", t},
                                  {"template", nt.speaker},
                                  {"template_cosine_distance", std::round(nt.distance * 1e9) / 1e9},
                                  {"nearest_target_centroid", best6},
                                  {"nearest_speaker_centroid", best_all},
                                  {"centroid_similarity", sims},
                                  {"transfer_relative_change", std::round((Xp - ghost.X).norm() / ghost.X.norm() * 1e9) / 1e9}});
    log_("[svd-transfer] " + t + ": template " + nt.speaker + ", ghost centroid nearest " + best6);
    for (int i = 0; i < 20 && i < ghost.X.rows(); ++i) {
      proj_in.push_back({"genuine:" + t, genuine[t].row(i).transpose()});
      proj_in.push_back({"ghost:" + t, ghost.X.row(i).transpose()});
    }
  }
  const Projection pr = project_2d(proj_in);
  std::ostringstream ps;
  ps << std::setprecision(9);
  for (const auto& p : pr.points) ps << p.label << '\t' << p.x << '\t' << p.y << '\n';
  write_file_atomic(W("projection.tsv"), ps.str());
  write_file_atomic(W("summary.json"), summary.dump(2) + "\n");
}

void Pipeline::stage_synth() {
  const auto targets = target_speakers();
  const auto ids = read_lines(path("svd-transfer/speaker_means.txt"));
  const Matrix means = load_matrix(path("svd-transfer/speaker_means.gvm"));
  std::map<std::string, VoiceParams> voices;
  for (const auto* f : {"corpus/train/speakers.tsv", "corpus/templates/speakers.tsv"})
    for (const auto& p : load_speakers(path(f))) voices[p.speaker_id] = p.voice();
  std::vector<Vector> emb;
  std::vector<VoiceParams> vp;
  for (size_t i = 0; i < ids.size(); ++i) {
    emb.push_back(means.row(static_cast<Eigen::Index>(i)).transpose());
    vp.push_back(voices.at(ids[i]));
  }
  const VoiceMap map = VoiceMap::fit(emb, vp, cfg_.voice_map);
  map.save(W("voice_map.txt"));

  const auto sentences = read_lines(path("corpus/sentences.txt"));
  const int per_target = cfg_.eval_sentences / cfg_.targets;
  for (const auto& cond : conditions()) {
    std::ostringstream jobs, vlog;
    vlog << std::setprecision(9);
    for (size_t ti = 0; ti < targets.size(); ++ti) {
      const auto& t = targets[ti];
      // Genuine synthesis is conditioned on the target's speaker-level (mean) embedding.
      Matrix rows;
      if (cond == "genuine") {
        const auto at = std::find(ids.begin(), ids.end(), t);
        if (at == ids.end()) throw MissingPrerequisiteError("synth: no mean embedding for " + t);
        rows = means.row(at - ids.begin()).replicate(per_target, 1);
      } else {
        rows = load_matrix(path("svd-transfer/" + t + (cond == "ghost" ? ".ghost.gvm" : ".transfer.gvm")));
      }
      for (int j = 0; j < per_target; ++j) {
        const std::string utt = t + "_" + two(j);
        const std::string text = sentences[ti * per_target + static_cast<size_t>(j)];
        const Vector x = rows.row(j).transpose();
        save_matrix(W(cond + "/emb/" + utt + ".gvm"), x.transpose());
        jobs << utt << '\t' << text << '\t' << "emb/" << utt << ".gvm\n";
        const VoiceParams v = map(x);
        vlog << utt << '\t' << v.f0 << '\t' << v.formant_scale << '\t' << v.brightness << '\t' << v.noise_floor << '\n';
        const Matrix mel = synth_mel(map, {" " + text + " ", x}, cfg_.synth);
        save_matrix(W(cond + "/mel/" + utt + ".gvm"), mel);
        write_wav(W(cond + "/wav/" + utt + ".wav"), vocode(mel, cfg_.synth));
      }
    }
    write_file_atomic(W(cond + "/jobs.tsv"), jobs.str());
    write_file_atomic(W(cond + "/voices.tsv"), vlog.str());
    log_("[synth] " + cond + " done");
  }
}

void Pipeline::stage_score() {
  const SpeakerEncoder enc = SpeakerEncoder::load(path("train-sv/encoder.ckpt"));
  const AsrModel model = AsrModel::load(path("train-asr/model.ckpt"));
  const auto targets = target_speakers();
  const Manifest enroll_m = load_manifest(path("corpus/enroll/manifest.tsv"));
  std::map<std::string, std::vector<Matrix>> enroll;
  for (const auto& e : enroll_m.entries) enroll[e.speaker_id].push_back(enroll_m.load_features(e));
  std::map<std::string, std::vector<Vector>> enroll_emb;
  for (const auto& [id, fs_] : enroll)
    for (const auto& f : fs_) enroll_emb[id].push_back(enc.embed(f));

  json cer = json::object(), ident = json::object(), asr_spk = json::object();
  for (const auto& cond : conditions()) {
    const std::string dir = path("synth/" + cond);
    const auto jobs = load_synth_jobs(dir + "/jobs.tsv");
    std::map<std::string, Vector> test_emb;
    std::vector<Trial> trials;
    CerTally tally;
    std::ostringstream dec;
    size_t id_ok = 0, asr_ok = 0;
    for (const auto& job : jobs) {
      const std::string owner = job.utt_id.substr(0, job.utt_id.rfind('_'));
      const Matrix feats = compute_features(read_wav(dir + "/wav/" + job.utt_id + ".wav"));
      const std::string test_id = cond + "/" + job.utt_id;
      test_emb[test_id] = enc.embed(feats);
      for (const auto& t : targets) trials.push_back({t, test_id, t == owner});
      const DecodeResult d =
          decode_greedy(model, encode(model, feats), static_cast<int>(job.text.size()) + 8);
      const std::string hyp = d.text(model.vocab());
      tally.add(job.text, hyp);
      const bool spk_ok = d.speaker_token() == model.vocab().speaker_token(owner);
      asr_ok += spk_ok;
      dec << job.utt_id << '\t' << job.text << '\t' << hyp << '\t'
          << model.vocab().token_string(d.speaker_token()) << '\n';
    }
    // Closed-set identification among the enrolled targets.
    const TrialScoreSet scores = score_embeddings(enroll_emb, test_emb, trials);
    std::map<std::string, std::pair<double, std::string>> best;
    for (const auto& s : scores) {
      auto& b = best[s.trial.test_id];
      if (b.second.empty() || s.score > b.first) b = {s.score, s.trial.enroll_id};
    }
    for (const auto& s : scores)
      if (s.trial.target && best[s.trial.test_id].second == s.trial.enroll_id) ++id_ok;
    save_scores(scores, W("scores_" + cond + ".tsv"));
    std::vector<Trial> tr;
    for (const auto& s : scores) tr.push_back(s.trial);
    save_trials(tr, W("trials_" + cond + ".tsv"));
    write_file_atomic(W("decodes_" + cond + ".tsv"), dec.str());
    cer[cond] = std::round(tally.pct() * 1e6) / 1e6;
    ident[cond] = static_cast<double>(id_ok) / static_cast<double>(jobs.size());
    asr_spk[cond] = static_cast<double>(asr_ok) / static_cast<double>(jobs.size());
    std::ostringstream os;
    os << "[score] " << cond << ": CER " << std::fixed << std::setprecision(2) << tally.pct()
       << "%, identification " << ident[cond].get<double>() << ", EER "
       << eer(scores).eer_pct << "%";
    log_(os.str());
  }
  json out;
  out["cer_pct"] = cer;
  out["identification_accuracy"] = ident;
  out["asr_speaker_token_accuracy"] = asr_spk;
  write_file_atomic(W("summary.json"), out.dump(2) + "\n");
}

void Pipeline::stage_report() {
  std::vector<std::pair<std::string, TrialScoreSet>> conds;
  for (const auto& c : conditions())
    conds.push_back({condition_titles().at(c), load_scores(path("score/scores_" + c + ".tsv"))});
  const json score_summary = json::parse(read_file(path("score/summary.json")));
  std::map<std::string, double> cers;
  cers["Genuine embedding"] = score_summary["cer_pct"]["genuine"].get<double>();
  cers["Raw GhostVec"] = score_summary["cer_pct"]["ghost"].get<double>();
  cers["SVD-modified GhostVec"] = score_summary["cer_pct"]["svd"].get<double>();

  json extra;
  extra["seed"] = cfg_.seed;
  extra["asr"] = json::parse(read_file(path("train-asr/train_report.json")));
  extra["asr"].erase("epoch_loss");
  extra["speaker_encoder"] = json::parse(read_file(path("train-sv/train_report.json")));
  extra["attack"] = json::parse(read_file(path("attack/summary.json")));
  extra["svd"] = json::parse(read_file(path("svd-transfer/summary.json")));
  extra["synthesis"] = {{"identification_accuracy", score_summary["identification_accuracy"]},
                        {"asr_speaker_token_accuracy", score_summary["asr_speaker_token_accuracy"]}};
  const Report rep = build_report(conds, cers, extra);
  write_file_atomic(W("report.json"), rep.json.dump(2) + "\n");
  write_file_atomic(W("report.txt"), rep.text);
  log_("[report]\n" + rep.text);
}

}  // namespace ghostvec
