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

#ifndef GHOSTVEC_SVD_TRANSFER_H_
#define GHOSTVEC_SVD_TRANSFER_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ghostvec/attack.h"

namespace ghostvec {

// Rows are utterance-level pooled embeddings.
struct EmbeddingMatrix {
  Matrix X;
  std::string owner;  // speaker id or "ghost:<target>"
};

// Full decomposition X = U diag(sigma) V^T with U: N x N, V: D x D and
// sigma of length min(N, D), nonnegative and descending.
struct SVDFactors {
  Matrix U;
  Vector sigma;
  Matrix V;

  Matrix reconstruct() const;
};

using TemplateBank = std::map<std::string, EmbeddingMatrix>;

// First N successful pooled GhostVecs, in input order.
EmbeddingMatrix stack_ghostvecs(const std::vector<GhostVec>& ghosts, int n_rows);

SVDFactors svd(const Matrix& X);

// Relative Frobenius reconstruction error.
double reconstruction_error(const SVDFactors& f, const Matrix& X);
// max |Q^T Q - I|.
double orthogonality_error(const Matrix& Q);

double cosine_similarity(const Vector& a, const Vector& b);
inline double cosine_distance(const Vector& a, const Vector& b) {
  return 1.0 - cosine_similarity(a, b);
}

// Row mean; per-row access is plain X.row(i).
Vector pool_speaker_embedding(const Matrix& X);

struct NearestTemplate {
  std::string speaker;
  const EmbeddingMatrix* matrix = nullptr;
  double distance = 0;
};

// Speaker whose template row mean is cosine-closest to the ghost row mean;
// ties go to the lexicographically smaller speaker id.
NearestTemplate nearest_template(const EmbeddingMatrix& ghost, const TemplateBank& bank);

// U_template diag(sigma_ghost) V_template^T.
Matrix transfer(const SVDFactors& ghost, const SVDFactors& tmpl);

// Exactly n rows: a seeded permutation prefix when the matrix has enough
// rows, seeded draws with replacement otherwise.
Matrix resample_rows(const Matrix& X, int n_rows, uint64_t seed);

// <dir>/index.tsv lines `speaker<TAB>path<TAB>rows`, one matrix file per speaker.
void save_template_bank(const TemplateBank& bank, const std::string& dir);
TemplateBank load_template_bank(const std::string& dir);

struct TransferRecord {
  std::string target;
  std::string template_speaker;
  double cosine_distance = 0;
  Vector sigma_head;  // leading singular values of the ghost matrix
};
std::string format_transfer_record(const TransferRecord& r);

}  // namespace ghostvec

#endif  // GHOSTVEC_SVD_TRANSFER_H_
