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

#ifndef GHOSTVEC_COMMON_H_
#define GHOSTVEC_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ghostvec {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Every failure the library reports derives from Error. The kind() string is
// stable and used by the CLI for machine-readable error lines.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define GHOSTVEC_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(tag, what) {}          \
  };

GHOSTVEC_DEFINE_ERROR(ParameterError, "parameter")
GHOSTVEC_DEFINE_ERROR(InputError, "input")
GHOSTVEC_DEFINE_ERROR(ShapeError, "shape")
GHOSTVEC_DEFINE_ERROR(FormatError, "format")
GHOSTVEC_DEFINE_ERROR(DanglingReferenceError, "dangling_reference")
GHOSTVEC_DEFINE_ERROR(VocabError, "vocab")
GHOSTVEC_DEFINE_ERROR(TrainingError, "training")
GHOSTVEC_DEFINE_ERROR(InsufficiencyError, "insufficient")
GHOSTVEC_DEFINE_ERROR(DegenerateError, "degenerate")
GHOSTVEC_DEFINE_ERROR(VersionError, "version")
GHOSTVEC_DEFINE_ERROR(ConfigError, "config")
GHOSTVEC_DEFINE_ERROR(MissingPrerequisiteError, "missing_prerequisite")

#undef GHOSTVEC_DEFINE_ERROR

// xoshiro256** seeded through splitmix64. The standard library distributions
// are implementation-defined, so normals are drawn here (Box-Muller) to keep
// corpora and attacks bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed);
  uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  uint64_t below(uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  uint64_t state_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix-style mixing used to derive independent child seeds.
uint64_t mix_seed(uint64_t seed, uint64_t salt);
uint64_t mix_seed(uint64_t seed, const std::string& salt);

}  // namespace ghostvec

#endif  // GHOSTVEC_COMMON_H_
