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
#include <fstream>

#include "doctest.h"
#include "ghostvec/asr.h"
#include "ghostvec/matrix_io.h"
#include "oracles.h"
#include "tiny_model.h"

using namespace ghostvec;

TEST_CASE("vocabulary and labels") {
  const VocabSpec v({"spk00", "spk01"});
  CHECK(v.size() == 3 + 27 + 2);
  CHECK(v.char_token('a') == 3);
  CHECK(v.char_token(' ') == 29);
  CHECK(v.speaker_token("spk01") == 31);
  CHECK_THROWS_AS(v.speaker_token("nobody"), VocabError);
  const auto l = make_labels(v, "spk00", "ab");
  CHECK(l.tokens == std::vector<int>{1, 30, 3, 4, 2});
  CHECK(full_mask(l) == std::vector<uint8_t>{1, 1, 1, 1});
  CHECK(speaker_only_mask(l) == std::vector<uint8_t>{1, 0, 0, 0});
  CHECK_NOTHROW(validate_labels(v, l));
  CHECK_THROWS_AS(validate_labels(v, LabelSequence{{1, 3, 2}}), VocabError);
  CHECK_THROWS_AS(make_labels(v, "spk00", "A"), VocabError);
}

TEST_CASE("training memorizes a tiny corpus and is deterministic") {
  const AsrModel& m = tiny::model();
  CHECK(m.frozen());
  for (const auto& ex : tiny::examples()) {
    const auto d = decode_greedy(m, encode(m, ex.features), 12);
    CHECK(m.vocab().speaker_of(d.speaker_token()) == ex.speaker);
    CHECK(d.text(m.vocab()) == ex.transcript);
    CHECK(cer(d.text(m.vocab()), ex.transcript) == 0.0);
  }
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch = 2;
  tc.seed = 9;
  const auto a = train_asr(tiny::examples(), VocabSpec({"spk00", "spk01"}), tiny::model_config(), tc);
  const auto b = train_asr(tiny::examples(), VocabSpec({"spk00", "spk01"}), tiny::model_config(), tc);
  CHECK(a.checksum() == b.checksum());
  CHECK_THROWS_AS(train_asr({}, VocabSpec({"spk00"}), tiny::model_config(), tc), ParameterError);
}

TEST_CASE("checkpoint round trip and version check") {
  const AsrModel& m = tiny::model();
  m.save("asr_tmp.ckpt");
  const AsrModel r = AsrModel::load("asr_tmp.ckpt");
  CHECK(r.checksum() == m.checksum());
  CHECK(r.frozen());
  const Matrix f = tiny::examples()[0].features;
  CHECK((encode(r, f) - encode(m, f)).norm() == 0.0);

  std::string bytes = read_file("asr_tmp.ckpt");
  bytes[8] = 9;  // version field follows the 8-byte magic
  write_file_atomic("asr_tmp.ckpt", bytes);
  CHECK_THROWS_AS(AsrModel::load("asr_tmp.ckpt"), VersionError);
  std::filesystem::remove("asr_tmp.ckpt");
}

TEST_CASE("grad_input matches central differences") {
  const AsrModel& m = tiny::model();
  const auto labels = make_labels(m.vocab(), "spk01", "ab");
  Rng rng(4);
  for (int rep = 0; rep < 2; ++rep) {
    Matrix x(14, kFeatureDim);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal(-2.0, 2.0);
    for (const auto& mask : {full_mask(labels), speaker_only_mask(labels)}) {
      const Matrix g = grad_input(m, x, labels, mask);
      Vector an(10), num(10);
      for (int k = 0; k < 10; ++k) {
        const Eigen::Index r = static_cast<Eigen::Index>(rng.below(14)), c = static_cast<Eigen::Index>(rng.below(120));
        const double h = 1e-5, keep = x(r, c);
        x(r, c) = keep + h;
        const double lp = loss(m, x, labels, mask);
        x(r, c) = keep - h;
        const double lm = loss(m, x, labels, mask);
        x(r, c) = keep;
        num(k) = (lp - lm) / (2 * h);
        an(k) = g(r, c);
      }
      CHECK((an - num).norm() <= 1e-4 * std::max(num.norm(), 1e-8));
    }
  }
  AsrModel unfrozen(tiny::model_config(), VocabSpec({"a", "b"}), 1);
  CHECK_THROWS_AS(grad_input(unfrozen, Matrix::Zero(4, 120), make_labels(unfrozen.vocab(), "a", ""),
                             std::vector<uint8_t>{1}),
                  ParameterError);
}

TEST_CASE("edit distance matches the table oracle") {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    std::string a, b;
    for (uint64_t k = rng.below(9); k > 0; --k) a.push_back(static_cast<char>('a' + rng.below(4)));
    for (uint64_t k = rng.below(9); k > 0; --k) b.push_back(static_cast<char>('a' + rng.below(4)));
    CHECK(edit_distance(a, b) == oracle::levenshtein(a, b));
  }
  CHECK(cer("abd", "abc") == doctest::Approx(100.0 / 3.0));
  CHECK_THROWS_AS(cer("x", ""), ParameterError);
}
