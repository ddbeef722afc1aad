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

#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "ghostvec/matrix_io.h"
#include "ghostvec/metrics.h"
#include "oracles.h"

using namespace ghostvec;

namespace {

// Mixed-separability random score set with a few exact ties.
std::pair<std::vector<double>, std::vector<double>> random_scores(Rng& rng, int n, double shift) {
  std::vector<double> t, nt;
  const int n_t = n / 5;
  for (int i = 0; i < n_t; ++i) t.push_back(rng.normal(shift, 1.0));
  for (int i = n_t; i < n; ++i) nt.push_back(rng.normal(0.0, 1.0));
  for (int i = 0; i < 10; ++i) t[static_cast<size_t>(i)] = nt[static_cast<size_t>(i)];
  return {t, nt};
}

TrialScoreSet as_set(const std::vector<double>& t, const std::vector<double>& n) {
  TrialScoreSet s;
  for (double x : t) s.push_back({{"e", "t", true}, x});
  for (double x : n) s.push_back({{"e", "n", false}, x});
  return s;
}

}  // namespace

TEST_CASE("eer: separated, chance and oracle") {
  CHECK(eer({2, 3, 4}, {-1, 0, 1}).eer_pct == 0.0);
  const std::vector<double> same{0.1, 0.5, 0.5, 0.9, 1.3};
  CHECK(eer(same, same).eer_pct == doctest::Approx(50.0).epsilon(1e-12));
  Rng rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    auto [t, n] = random_scores(rng, 1000, 0.5 * rep);
    CHECK(std::abs(eer(t, n).eer_pct - oracle::eer_bruteforce(t, n)) <= 1e-9);
  }
  CHECK_THROWS_AS(eer({1.0}, {}), InsufficiencyError);
  CHECK_THROWS_AS(eer(as_set({1, 2}, {})), InsufficiencyError);
}

TEST_CASE("min_dcf: bounds and oracle") {
  CHECK(min_dcf({2, 3}, {0, 1}) == 0.0);
  CHECK(min_dcf({0.5, 0.5}, {0.5, 0.5, 0.5}) == doctest::Approx(1.0));
  Rng rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    auto [t, n] = random_scores(rng, 1000, 0.7 * rep);
    const double m = min_dcf(t, n);
    CHECK(std::abs(m - oracle::min_dcf_bruteforce(t, n, 0.01)) <= 1e-9);
    for (double th = -3; th <= 4; th += 0.25) CHECK(m <= normalized_dcf(t, n, th) + 1e-12);
  }
  CHECK_THROWS_AS(min_dcf({}, {1.0}), InsufficiencyError);
}

TEST_CASE("cllr: act, min and PAV oracle") {
  const auto zero = cllr({0, 0, 0}, {0, 0});
  CHECK(zero.act == doctest::Approx(1.0).epsilon(1e-12));
  const auto sep = cllr({3, 4, 5}, {-1, 0, 1});
  CHECK(sep.min <= 1e-6);
  Rng rng(9);
  for (int rep = 0; rep < 4; ++rep) {
    auto [t, n] = random_scores(rng, 500, 0.8 * rep);
    const auto c = cllr(t, n);
    CHECK(c.min <= c.act);
    std::vector<double> s(t);
    s.insert(s.end(), n.begin(), n.end());
    std::vector<uint8_t> y(t.size(), 1);
    y.resize(s.size(), 0);
    const auto pav = pav_posteriors(s, y);
    const auto ref = oracle::isotonic_maxmin(s, y);
    double worst = 0;
    for (size_t i = 0; i < s.size(); ++i) worst = std::max(worst, std::abs(pav[i] - ref[i]));
    CHECK(worst <= 1e-9);
  }
  CHECK_THROWS_AS(cllr({1.0}, {}), InsufficiencyError);
}

TEST_CASE("metrics: monotone invariance and label-swap symmetry") {
  Rng rng(11);
  auto [t, n] = random_scores(rng, 1000, 1.0);
  auto f = [](double x) { return 2.0 * x + 0.125 * x * x * x + 7.0; };
  std::vector<double> ft, fn;
  for (double x : t) ft.push_back(f(x));
  for (double x : n) fn.push_back(f(x));
  CHECK(eer(ft, fn).eer_pct == eer(t, n).eer_pct);
  CHECK(min_dcf(ft, fn) == min_dcf(t, n));
  CHECK(cllr(ft, fn).min == cllr(t, n).min);

  std::vector<double> nt, nn;
  for (double x : t) nt.push_back(-x);
  for (double x : n) nn.push_back(-x);
  CHECK(eer(nn, nt).eer_pct == doctest::Approx(eer(t, n).eer_pct).epsilon(1e-12));
}

TEST_CASE("evaluate: report invariants") {
  Rng rng(13);
  auto [t, n] = random_scores(rng, 300, 1.5);
  const auto r = evaluate(as_set(t, n));
  CHECK(r.eer_pct >= 0);
  CHECK(r.eer_pct <= 100);
  CHECK(r.min_dcf >= 0);
  CHECK(r.cllr_min <= r.cllr_act);
  CHECK(r.n_target == t.size());
  CHECK_THROWS_AS(evaluate(as_set({1, std::nan("")}, {0})), InputError);
}

TEST_CASE("score_embeddings: self, orthogonal and oracle") {
  Vector a(3), b(3);
  a << 1, 2, 3;
  b << 3, 0, -1;
  const auto self = score_embeddings({{"E", {a}}}, {{"T", a}}, {{"E", "T", true}});
  CHECK(self[0].score == doctest::Approx(1.0).epsilon(1e-15));
  const auto orth = score_embeddings({{"E", {a}}}, {{"T", b}}, {{"E", "T", false}});
  CHECK(std::abs(orth[0].score) < 1e-15);

  Rng rng(17);
  std::map<std::string, std::vector<Vector>> enroll;
  std::map<std::string, Vector> test;
  std::vector<Trial> trials;
  for (int e = 0; e < 4; ++e)
    for (int u = 0; u < 3; ++u) {
      Vector v(8);
      for (auto& x : v) x = rng.normal();
      enroll["e" + std::to_string(e)].push_back(v);
    }
  for (int i = 0; i < 6; ++i) {
    Vector v(8);
    for (auto& x : v) x = rng.normal();
    test["t" + std::to_string(i)] = v;
    for (int e = 0; e < 4; ++e) trials.push_back({"e" + std::to_string(e), "t" + std::to_string(i), e == i % 4});
  }
  const auto scores = score_embeddings(enroll, test, trials);
  for (const auto& s : scores) {
    Vector m = Vector::Zero(8);
    for (const auto& v : enroll[s.trial.enroll_id]) m += v;
    CHECK(std::abs(s.score - oracle::naive_cosine(m / 3.0, test[s.trial.test_id])) <= 1e-9);
  }
  CHECK_THROWS_AS(score_embeddings(enroll, test, {{"nope", "t0", true}}), DanglingReferenceError);
  CHECK_THROWS_AS(score_embeddings(enroll, test, {{"e0", "nope", true}}), DanglingReferenceError);
  CHECK_THROWS_AS(score_embeddings({{"x", {a}}}, {{"x", a}}, {{"x", "x", true}}), InputError);
  CHECK_NOTHROW(score_embeddings({{"x", {a}}}, {{"x", a}}, {{"x", "x", true}}, true));
}

TEST_CASE("trial and score files round-trip") {
  const std::string dir = "metrics_io_tmp";
  TrialScoreSet s{{{"a", "b", true}, 0.25}, {{"a", "c", false}, -1.0 / 3.0}};
  save_scores(s, dir + "/scores.tsv");
  const auto back = load_scores(dir + "/scores.tsv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].score == s[1].score);
  CHECK(back[0].trial.target);
  std::vector<Trial> tr{{"a", "b", true}};
  save_trials(tr, dir + "/trials.tsv");
  CHECK(load_trials(dir + "/trials.tsv")[0].test_id == "b");
  write_file_atomic(dir + "/bad.tsv", "a\tb\tmaybe\n");
  CHECK_THROWS_AS(load_trials(dir + "/bad.tsv"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("project_2d: examples and eigen oracle") {
  Vector p(3), q(3);
  p << 0, 0, 0;
  q << 1, 2, 2;
  const auto two = project_2d({{"p", p}, {"q", q}});
  CHECK(std::abs(two.points[0].x - two.points[1].x) == doctest::Approx(3.0));

  // Already 2-D data: pairwise distances preserved.
  Rng rng(19);
  std::vector<std::pair<std::string, Vector>> flat;
  for (int i = 0; i < 10; ++i) {
    Vector v = Vector::Zero(5);
    v(1) = rng.normal();
    v(3) = 2 * rng.normal();
    flat.push_back({"x" + std::to_string(i), v});
  }
  const auto fp = project_2d(flat);
  for (size_t i = 0; i < flat.size(); ++i)
    for (size_t j = 0; j < flat.size(); ++j) {
      const double d0 = (flat[i].second - flat[j].second).norm();
      const double d1 = std::hypot(fp.points[i].x - fp.points[j].x, fp.points[i].y - fp.points[j].y);
      CHECK(std::abs(d0 - d1) < 1e-9);
    }

  std::vector<std::pair<std::string, Vector>> pts;
  for (int i = 0; i < 40; ++i) {
    Vector v(6);
    for (int k = 0; k < 6; ++k) v(k) = rng.normal(0, 1.0 + k);
    pts.push_back({"p", v});
  }
  const auto pr = project_2d(pts);
  Matrix X(40, 6);
  for (int i = 0; i < 40; ++i) X.row(i) = pts[static_cast<size_t>(i)].second.transpose();
  const Matrix Xc = X.rowwise() - X.colwise().mean();
  const auto [vals, vecs] = oracle::jacobi_eigen(Xc.transpose() * Xc / 40.0);
  for (int k = 0; k < 2; ++k) {
    const double align = std::abs(pr.directions.col(k).dot(vecs.col(k)));
    CHECK(align == doctest::Approx(1.0).epsilon(1e-8));
  }

  // Reordering the input leaves the projection unchanged up to sign.
  auto rev = pts;
  std::reverse(rev.begin(), rev.end());
  const auto pr2 = project_2d(rev);
  for (int k = 0; k < 2; ++k)
    CHECK(std::abs(pr.directions.col(k).dot(pr2.directions.col(k))) == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(project_2d({{"a", p}, {"b", p}}), DegenerateError);
  CHECK_THROWS_AS(project_2d({{"a", p}}), InsufficiencyError);
}

TEST_CASE("cer tally aggregates over utterances") {
  CerTally t;
  t.add("abcd", "abce");
  t.add("xy", "xy");
  CHECK(t.pct() == doctest::Approx(100.0 / 6.0));
  CHECK_THROWS_AS(t.add("", "a"), ParameterError);
  CHECK_THROWS_AS(CerTally{}.pct(), InsufficiencyError);
}

TEST_CASE("speaker encoder: separable pair, determinism, checkpoint") {
  Rng rng(23);
  std::vector<LabeledFeatures> data;
  for (int s = 0; s < 2; ++s)
    for (int u = 0; u < 12; ++u) {
      Matrix f(30, kFeatureDim);
      for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.normal(s == 0 ? -1.0 : 1.0, 1.0);
      data.push_back({f, s == 0 ? "alice" : "bob"});
    }
  EncoderConfig cfg;
  cfg.hidden = 16;
  cfg.embed_dim = 8;
  cfg.epochs = 6;
  cfg.batch = 4;
  cfg.warmup_steps = 5;
  const auto a = train_speaker_encoder(data, cfg);
  const auto b = train_speaker_encoder(data, cfg);
  CHECK(a.training_accuracy() >= 0.99);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.frozen());

  a.save("sv_tmp.ckpt");
  const auto c = SpeakerEncoder::load("sv_tmp.ckpt");
  CHECK(c.checksum() == a.checksum());
  CHECK((c.embed(data[0].features) - a.embed(data[0].features)).norm() == 0.0);
  std::filesystem::remove("sv_tmp.ckpt");

  std::vector<LabeledFeatures> one(data.begin(), data.begin() + 3);
  CHECK_THROWS_AS(train_speaker_encoder(one, cfg), InsufficiencyError);
}

TEST_CASE("build_report: rows, reference legend, text") {
  Rng rng(29);
  auto [t, n] = random_scores(rng, 200, 2.0);
  const auto rep = build_report({{"Target/Target", as_set(t, n)}, {"Target/Our", as_set(n, t)}},
                                {{"Genuine embedding", 12.5}});
  REQUIRE(rep.json["conditions"].size() == 2);
  CHECK(rep.json["conditions"][0]["name"] == "Target/Target");
  CHECK(rep.json["cer_pct"]["Genuine embedding"] == 12.5);
  const auto& ref = rep.json["reference"]["sv"];
  REQUIRE(ref.size() == 3);
  CHECK(ref[0]["eer_pct"] == 1.50);
  CHECK(ref[0]["min_dcf"] == 0.32);
  CHECK(ref[1]["eer_pct"] == 52.27);
  CHECK(ref[1]["min_dcf"] == 1.00);
  CHECK(ref[2]["eer_pct"] == 10.83);
  CHECK(ref[2]["cllr_act"] == 42.22);
  CHECK(rep.text.find("Target/Our") != std::string::npos);
}
