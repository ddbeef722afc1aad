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

#include <algorithm>
#include <filesystem>

#include "doctest.h"
#include "ghostvec/matrix_io.h"
#include "ghostvec/svd_transfer.h"
#include "oracles.h"

using namespace ghostvec;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

GhostVec ghost(const Vector& v, bool ok = true) {
  GhostVec g;
  g.pooled = v;
  g.target_speaker = "spk00";
  g.success = ok;
  return g;
}

}  // namespace

TEST_CASE("stack_ghostvecs: order, filtering, shortfall") {
  Vector a(3), b(3), c(3);
  a << 1, 2, 3;
  b << 4, 5, 6;
  c << 7, 8, 9;
  const auto one = stack_ghostvecs({ghost(a)}, 1);
  CHECK(one.X.rows() == 1);
  CHECK(one.X.row(0).transpose() == a);
  CHECK(one.owner == "ghost:spk00");
  const auto two = stack_ghostvecs({ghost(a), ghost(b, false), ghost(c)}, 2);
  CHECK(two.X.row(1).transpose() == c);
  try {
    stack_ghostvecs({ghost(a), ghost(b, false)}, 3);
    FAIL("expected an insufficiency error");
  } catch (const InsufficiencyError& e) {
    CHECK(std::string(e.what()).find("short by 2") != std::string::npos);
  }

  // Row order changes the matrix but not its spectrum.
  Rng rng(1);
  std::vector<GhostVec> gs;
  for (int i = 0; i < 12; ++i) gs.push_back(ghost(random_matrix(rng, 5, 1)));
  auto shuffled = gs;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto s1 = svd(stack_ghostvecs(gs, 12).X).sigma;
  const auto s2 = svd(stack_ghostvecs(shuffled, 12).X).sigma;
  const auto ref = oracle::singular_values(stack_ghostvecs(gs, 12).X);
  for (Eigen::Index i = 0; i < s1.size(); ++i) {
    CHECK(std::abs(s1(i) - s2(i)) < 1e-10);
    CHECK(std::abs(s1(i) - ref[static_cast<size_t>(i)]) < 1e-8);
  }
}

TEST_CASE("svd: examples") {
  const auto id = svd(Matrix::Identity(3, 3));
  CHECK((id.sigma - Vector::Ones(3)).norm() < 1e-12);
  Matrix x(2, 2);
  x << 3, 0, 4, 0;
  const auto f = svd(x);
  CHECK(f.sigma(0) == doctest::Approx(5.0));
  CHECK(std::abs(f.sigma(1)) < 1e-12);

  Rng rng(2);
  const Matrix r = random_matrix(rng, 100, 64);
  const auto fr = svd(r);
  const auto ref = oracle::singular_values(r);
  for (Eigen::Index i = 0; i < fr.sigma.size(); ++i)
    CHECK(std::abs(fr.sigma(i) - ref[static_cast<size_t>(i)]) < 1e-8);
  CHECK(reconstruction_error(fr, r) < 1e-6);
  CHECK(orthogonality_error(fr.U) < 1e-6);
  CHECK(orthogonality_error(fr.V) < 1e-6);

  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(svd(bad), InputError);
}

TEST_CASE("transfer: identity, null spectrum, re-decomposition oracle") {
  Rng rng(3);
  const Matrix g = random_matrix(rng, 20, 8);
  const auto gf = svd(g);
  CHECK((transfer(gf, gf) - g).norm() / g.norm() < 1e-6);

  auto zero = gf;
  zero.sigma.setZero();
  CHECK(transfer(zero, gf).norm() == 0.0);

  const auto tf = svd(random_matrix(rng, 20, 8));
  const Matrix xp = transfer(gf, tf);
  const auto ref = oracle::singular_values(xp);
  for (Eigen::Index i = 0; i < gf.sigma.size(); ++i)
    CHECK(std::abs(ref[static_cast<size_t>(i)] - gf.sigma(i)) < 1e-6);

  const auto other = svd(random_matrix(rng, 10, 8));
  CHECK_THROWS_AS(transfer(gf, other), ShapeError);
}

TEST_CASE("nearest_template: self, exhaustive scan, ties, scale") {
  Rng rng(4);
  TemplateBank bank;
  for (int s = 0; s < 6; ++s) {
    const std::string id = "tpl0" + std::to_string(s);
    bank[id] = {random_matrix(rng, 5, 4).array() + 0.5 * s, id};
  }
  EmbeddingMatrix g{random_matrix(rng, 5, 4).array() + 1.2, "ghost:x"};
  const auto best = nearest_template(g, bank);
  std::string scan;
  double scan_d = 1e9;
  for (const auto& [id, m] : bank) {
    const double d = 1 - oracle::naive_cosine(oracle::naive_mean_rows(g.X), oracle::naive_mean_rows(m.X));
    if (d < scan_d) scan_d = d, scan = id;
  }
  CHECK(best.speaker == scan);
  CHECK(best.distance == doctest::Approx(scan_d).epsilon(1e-12));

  EmbeddingMatrix scaled{g.X * 7.5, g.owner};
  CHECK(nearest_template(scaled, bank).speaker == best.speaker);

  bank["zz_self"] = {g.X, "zz_self"};
  const auto self = nearest_template(g, bank);
  CHECK(self.speaker == "zz_self");
  CHECK(std::abs(self.distance) < 1e-12);

  TemplateBank twins{{"b", {g.X, "b"}}, {"a", {g.X, "a"}}};
  CHECK(nearest_template(g, twins).speaker == "a");
  CHECK_THROWS_AS(nearest_template(g, TemplateBank{}), ParameterError);
}

TEST_CASE("pool_speaker_embedding") {
  Vector v(3);
  v << 1, -2, 5;
  Matrix one(1, 3);
  one.row(0) = v.transpose();
  CHECK(pool_speaker_embedding(one) == v);
  Matrix pm(2, 3);
  pm.row(0) = v.transpose();
  pm.row(1) = -v.transpose();
  CHECK(pool_speaker_embedding(pm).norm() == 0.0);
  Rng rng(5);
  const Matrix r = random_matrix(rng, 37, 11);
  CHECK((pool_speaker_embedding(r) - oracle::naive_mean_rows(r)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("resample_rows and template bank files") {
  Rng rng(6);
  const Matrix m = random_matrix(rng, 8, 3);
  const Matrix sub = resample_rows(m, 5, 1);
  CHECK(sub.rows() == 5);
  // Without replacement: all picked rows distinct.
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) CHECK((sub.row(i) - sub.row(j)).norm() > 0);
  CHECK(resample_rows(m, 12, 1).rows() == 12);
  CHECK(resample_rows(m, 8, 1) == m);
  CHECK(resample_rows(m, 5, 1) == resample_rows(m, 5, 1));

  const std::string dir = "bank_tmp";
  TemplateBank bank{{"tpl00", {m, "tpl00"}}, {"tpl01", {m * 2, "tpl01"}}};
  save_template_bank(bank, dir);
  const auto back = load_template_bank(dir);
  REQUIRE(back.size() == 2);
  CHECK((back.at("tpl01").X - quantize_f32(m * 2)).norm() == 0.0);
  std::filesystem::remove_all(dir);
}
