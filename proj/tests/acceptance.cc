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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ghostvec/asr.h"
#include "ghostvec/corpus.h"
#include "ghostvec/digest.h"
#include "ghostvec/matrix_io.h"
#include "ghostvec/metrics.h"
#include "ghostvec/svd_transfer.h"
#include "json.hpp"
#include "oracles.h"

using namespace ghostvec;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void report(int id, const std::string& name, const Verdict& v) {
  std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): " << v.detail << std::endl;
  if (!v.pass) ++g_failures;
}

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << x;
  return os.str();
}

// ---------------------------------------------------------------- criterion 1

double cllr_act_oracle(const std::vector<double>& t, const std::vector<double>& n) {
  double a = 0, b = 0;
  for (double s : t) a += std::log2(1.0 + std::exp(-s));
  for (double s : n) b += std::log2(1.0 + std::exp(s));
  return 0.5 * (a / static_cast<double>(t.size()) + b / static_cast<double>(n.size()));
}

// Cllr of the isotonic posteriors turned into llrs by removing the empirical
// prior odds, written directly in terms of the posterior p.
double cllr_min_oracle(const std::vector<double>& t, const std::vector<double>& n) {
  std::vector<double> s(t);
  s.insert(s.end(), n.begin(), n.end());
  std::vector<uint8_t> y(t.size(), 1);
  y.resize(s.size(), 0);
  const auto p = oracle::isotonic_maxmin(s, y);
  const double odds = static_cast<double>(t.size()) / static_cast<double>(n.size());
  double a = 0, b = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i]) a += std::log2(1.0 + (1.0 - p[i]) / p[i] * odds);
    else b += std::log2(1.0 + p[i] / (1.0 - p[i]) / odds);
  }
  return 0.5 * (a / static_cast<double>(t.size()) + b / static_cast<double>(n.size()));
}

Verdict criterion_metrics() {
  const auto t0 = Clock::now();
  Rng rng(20260101);
  double worst = 0;
  bool invariant = true;
  for (int set = 0; set < 50; ++set) {
    const double shift = 0.1 * set;  // from chance to well separated
    const int n_t = 100 + static_cast<int>(rng.below(200));
    std::vector<double> t, n;
    for (int i = 0; i < n_t; ++i) t.push_back(rng.normal(shift, 1.0));
    for (int i = n_t; i < 1000; ++i) n.push_back(rng.normal(0.0, 1.0 + 0.5 * rng.uniform()));
    for (int i = 0; i < 5; ++i) t[static_cast<size_t>(i)] = n[static_cast<size_t>(3 * i)];  // exact ties
    const double e = eer(t, n).eer_pct, d = min_dcf(t, n), ca = cllr(t, n).act, cm = cllr(t, n).min;
    worst = std::max({worst, std::abs(e - oracle::eer_bruteforce(t, n)),
                      std::abs(d - oracle::min_dcf_bruteforce(t, n, 0.01)),
                      std::abs(ca - cllr_act_oracle(t, n)), std::abs(cm - cllr_min_oracle(t, n))});
    auto f = [](double x) { return std::exp(0.5 * x) + x; };
    std::vector<double> ft, fn;
    for (double x : t) ft.push_back(f(x));
    for (double x : n) fn.push_back(f(x));
    invariant = invariant && eer(ft, fn).eer_pct == e && min_dcf(ft, fn) == d && cllr(ft, fn).min == cm;
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && invariant && secs <= 60,
          "max |impl - oracle| = " + fmt(worst) + ", monotone invariance " + (invariant ? "exact" : "BROKEN") +
              ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- criterion 2

Verdict criterion_svd() {
  const auto t0 = Clock::now();
  Rng rng(20260102);
  double rec = 0, orth = 0, spec = 0;
  bool ordered = true;
  auto random = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
  };
  for (int k = 0; k < 100; ++k) {
    Eigen::Index r = 2 + static_cast<Eigen::Index>(rng.below(100)), c = 2 + static_cast<Eigen::Index>(rng.below(64));
    Matrix X;
    if (k % 10 == 0) X = random(1, c);                                       // single row
    else if (k % 10 == 1) X = random(r, 1);                                  // single column
    else if (k % 5 == 2) X = random(r, 2) * random(2, c);                    // rank 2
    else if (k % 5 == 3) { X = random(r, c); X.col(0).setZero(); }          // zero column
    else X = random(r, c);
    const SVDFactors f = svd(X);
    rec = std::max(rec, reconstruction_error(f, X));
    orth = std::max({orth, orthogonality_error(f.U), orthogonality_error(f.V)});
    for (Eigen::Index i = 0; i < f.sigma.size(); ++i)
      ordered = ordered && f.sigma(i) >= 0 && (i == 0 || f.sigma(i) <= f.sigma(i - 1));
    // Template of the same shape; transplanting keeps the ghost spectrum.
    const SVDFactors tf = svd(random(X.rows(), X.cols()));
    const SVDFactors back = svd(transfer(f, tf));
    const double scale = std::max(f.sigma.size() ? f.sigma(0) : 0.0, 1e-12);
    spec = std::max(spec, (back.sigma - f.sigma).cwiseAbs().maxCoeff() / scale);
  }
  const double secs = seconds_since(t0);
  return {rec <= 1e-6 && orth <= 1e-6 && spec <= 1e-6 && ordered && secs <= 60,
          "reconstruction " + fmt(rec) + ", orthogonality " + fmt(orth) + ", spectrum drift " + fmt(spec) +
              ", sigma " + (ordered ? "sorted/nonnegative" : "UNSORTED") + ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- criterion 3

Verdict criterion_gradient(const std::string& ckpt) {
  const auto t0 = Clock::now();
  const AsrModel model = AsrModel::load(ckpt);
  Rng rng(20260103);
  double worst = 0;
  for (int rep = 0; rep < 5; ++rep) {
    const auto& spk = model.vocab().speakers();
    const LabelSequence labels = make_labels(model.vocab(), spk[rng.below(spk.size())], "");
    const auto mask = speaker_only_mask(labels);
    Matrix x(100, kFeatureDim);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal(0.0, 0.1);
    const Matrix g = grad_input(model, x, labels, mask);
    Vector an(10), num(10);
    for (int k = 0; k < 10; ++k) {
      const auto r = static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(x.rows())));
      const auto c = static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(x.cols())));
      const double h = 1e-4, keep = x(r, c);
      x(r, c) = keep + h;
      const double lp = loss(model, x, labels, mask);
      x(r, c) = keep - h;
      const double lm = loss(model, x, labels, mask);
      x(r, c) = keep;
      num(k) = (lp - lm) / (2 * h);
      an(k) = g(r, c);
    }
    worst = std::max(worst, (an - num).norm() / std::max(num.norm(), 1e-12));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs <= 120, "max relative error " + fmt(worst) + " over 5 inputs x 10 coordinates, " +
                                            fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- pipeline

json load_json(const std::string& path) { return json::parse(read_file(path)); }

bool run_pipeline(const std::string& cli, const std::string& config, const std::string& out, double* secs) {
  fs::remove_all(out);
  const std::string cmd = "\"" + cli + "\" all --config \"" + config + "\" --out \"" + out + "\" > \"" + out +
                          ".log\" 2>&1";
  const auto t0 = Clock::now();
  const int rc = std::system(cmd.c_str());
  *secs = seconds_since(t0);
  return rc == 0;
}

Verdict criterion_attack(const std::string& run, double secs) {
  const json asr = load_json(run + "/train-asr/train_report.json");
  const Manifest m = load_manifest(run + "/corpus/train/manifest.tsv");
  const json atk = load_json(run + "/attack/summary.json");
  const double acc = asr["speaker_accuracy"].get<double>();
  bool ok = acc >= 0.95 && m.entries.size() == 2200 && m.speaker_set.size() == 20 && atk["targets"].size() == 6 &&
            secs <= 1800;
  std::string rates;
  for (const auto& t : atk["targets"]) {
    const double r = t["success_rate"].get<double>();
    ok = ok && r >= 0.8 && t["variants_run"].get<int>() >= 100;
    rates += (rates.empty() ? "" : " ") + fmt(r, 3);
  }
  return {ok, "asr speaker accuracy " + fmt(acc) + " on " + std::to_string(m.entries.size()) + " utterances / " +
                  std::to_string(m.speaker_set.size()) + " speakers; success rates [" + rates + "]; pipeline " +
                  fmt(secs, 4) + " s"};
}

Verdict criterion_clustering(const std::string& run) {
  // Competitors are the genuine centroids of the attacked targets; the count
  // against all training speakers is reported alongside for context.
  const json s = load_json(run + "/svd-transfer/summary.json");
  int hits = 0, strict = 0;
  std::string miss;
  for (const auto& t : s["targets"]) {
    const auto spk = t["speaker"].get<std::string>();
    if (t["nearest_speaker_centroid"].get<std::string>() == spk) ++strict;
    if (t["nearest_target_centroid"].get<std::string>() == spk) ++hits;
    else miss += " " + spk + "->" + t["nearest_target_centroid"].get<std::string>();
  }
  return {hits >= 5, std::to_string(hits) + "/6 ghost centroids nearest their target among the attacked targets" +
                         (miss.empty() ? "" : " (misses:" + miss + ")") + "; " + std::to_string(strict) +
                         "/6 among all training speakers"};
}

Verdict criterion_table2(const std::string& run) {
  const json r = load_json(run + "/report/report.json");
  std::map<std::string, json> c;
  for (const auto& row : r["conditions"]) c[row["name"].get<std::string>()] = row;
  auto v = [&](const char* cond, const char* key) { return c.at(cond)[key].get<double>(); };
  const double e_tt = v("Target/Target", "eer_pct"), e_our = v("Target/Our", "eer_pct"),
               e_gv = v("Target/GhostVec", "eer_pct");
  const double d_tt = v("Target/Target", "min_dcf"), d_our = v("Target/Our", "min_dcf"),
               d_gv = v("Target/GhostVec", "min_dcf");
  const double c_our = v("Target/Our", "cllr_min"), c_gv = v("Target/GhostVec", "cllr_min");
  const bool eer_order = e_tt < e_our && e_our < e_gv;
  const bool band = e_gv >= 40 && e_gv <= 60;
  const bool dcf_order = d_tt < d_our && d_our < d_gv;
  const bool cllr_order = c_our < c_gv;
  return {eer_order && band && dcf_order && cllr_order,
          "EER " + fmt(e_tt) + " / " + fmt(e_our) + " / " + fmt(e_gv) + " (order " + (eer_order ? "ok" : "WRONG") +
              ", ghost band " + (band ? "ok" : "OUT") + "); minDCF " + fmt(d_tt) + " / " + fmt(d_our) + " / " +
              fmt(d_gv) + " (" + (dcf_order ? "ok" : "WRONG") + "); cllr_min Our " + fmt(c_our) + " vs GhostVec " +
              fmt(c_gv) + " (" + (cllr_order ? "ok" : "WRONG") + ")"};
}

Verdict criterion_table3(const std::string& run) {
  const json r = load_json(run + "/report/report.json");
  const double g = r["cer_pct"]["Genuine embedding"].get<double>();
  const double s = r["cer_pct"]["SVD-modified GhostVec"].get<double>();
  const bool ok = std::isfinite(s) && std::isfinite(g) && s <= 3.0 * g;
  return {ok, "CER svd " + fmt(s) + "% vs genuine " + fmt(g) + "% (ratio " + fmt(g > 0 ? s / g : INFINITY, 3) +
                  ", limit 3)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GhostVec acceptance run"};
  std::string cli, work = "acceptance_runs", config = GHOSTVEC_SOURCE_DIR "/configs/default.conf";
  app.add_option("--cli", cli, "path to the ghostvec executable")->required();
  app.add_option("--work", work, "scratch directory for the two pipeline runs");
  app.add_option("--config", config, "pipeline configuration");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  auto guarded = [](int id, const std::string& name, const std::function<Verdict()>& f) {
    try {
      report(id, name, f());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("error: ") + e.what()});
    }
  };

  guarded(1, "metric oracle equivalence", criterion_metrics);
  guarded(2, "svd suite", criterion_svd);

  const std::string run_a = (fs::path(work) / "run_a").string(), run_b = (fs::path(work) / "run_b").string();
  double secs_a = 0, secs_b = 0;
  const bool ok_a = run_pipeline(cli, config, run_a, &secs_a);
  std::cout << "pipeline run A " << (ok_a ? "finished" : "FAILED") << " in " << fmt(secs_a, 4) << " s" << std::endl;
  auto needs_a = [&](const std::function<Verdict()>& f) {
    return [&, f]() { return ok_a ? f() : Verdict{false, "pipeline run A failed, see " + run_a + ".log"}; };
  };

  guarded(3, "gradient fidelity", needs_a([&] { return criterion_gradient(run_a + "/train-asr/model.ckpt"); }));
  guarded(4, "attack success", needs_a([&] { return criterion_attack(run_a, secs_a); }));
  guarded(5, "clustering", needs_a([&] { return criterion_clustering(run_a); }));
  guarded(6, "verification ordering", needs_a([&] { return criterion_table2(run_a); }));
  guarded(7, "cer ratio", needs_a([&] { return criterion_table3(run_a); }));

  const bool ok_b = run_pipeline(cli, config, run_b, &secs_b);
  std::cout << "pipeline run B " << (ok_b ? "finished" : "FAILED") << " in " << fmt(secs_b, 4) << " s" << std::endl;
  guarded(8, "determinism", [&]() -> Verdict {
    if (!ok_a || !ok_b) return {false, "a pipeline run failed"};
    const std::string da = sha256_file(run_a + "/report/report.json"), db = sha256_file(run_b + "/report/report.json");
    return {da == db, "report.json sha256 " + da.substr(0, 16) + " vs " + db.substr(0, 16)};
  });

  std::cout << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " criteria failed")
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}
