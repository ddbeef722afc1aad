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

#include "ghostvec/svd_transfer.h"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "ghostvec/matrix_io.h"
#include "ghostvec/tsv.h"

namespace ghostvec {

namespace fs = std::filesystem;

Matrix SVDFactors::reconstruct() const {
  const Eigen::Index k = sigma.size();
  return U.leftCols(k) * sigma.asDiagonal() * V.leftCols(k).transpose();
}

EmbeddingMatrix stack_ghostvecs(const std::vector<GhostVec>& ghosts, int n_rows) {
  if (n_rows < 1) throw ParameterError("stack_ghostvecs: N must be >= 1");
  std::vector<const GhostVec*> ok;
  for (const auto& g : ghosts)
    if (g.success) ok.push_back(&g);
  if (static_cast<int>(ok.size()) < n_rows)
    throw InsufficiencyError("stack_ghostvecs: need " + std::to_string(n_rows) +
                             " successful GhostVecs, have " + std::to_string(ok.size()) +
                             " (short by " + std::to_string(n_rows - ok.size()) + ")");
  const Eigen::Index d = ok.front()->pooled.size();
  EmbeddingMatrix m;
  m.owner = "ghost:" + ok.front()->target_speaker;
  m.X.resize(n_rows, d);
  for (int i = 0; i < n_rows; ++i) {
    if (ok[i]->pooled.size() != d) throw ShapeError("stack_ghostvecs: inconsistent dimensions");
    m.X.row(i) = ok[i]->pooled.transpose();
  }
  return m;
}

SVDFactors svd(const Matrix& X) {
  if (X.size() == 0) throw InputError("svd: empty matrix");
  if (!X.allFinite()) throw InputError("svd: non-finite input");
  const Eigen::MatrixXd dense = X;
  Eigen::JacobiSVD<Eigen::MatrixXd> solver(dense, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return SVDFactors{solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

double reconstruction_error(const SVDFactors& f, const Matrix& X) {
  return (f.reconstruct() - X).norm() / std::max(X.norm(), 1e-12);
}

double orthogonality_error(const Matrix& Q) {
  return (Q.transpose() * Q - Matrix::Identity(Q.cols(), Q.cols())).cwiseAbs().maxCoeff();
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) return 0.0;
  return a.dot(b) / (na * nb);
}

Vector pool_speaker_embedding(const Matrix& X) {
  if (X.rows() < 1) throw ShapeError("pool_speaker_embedding: empty matrix");
  return X.colwise().mean().transpose();
}

NearestTemplate nearest_template(const EmbeddingMatrix& ghost, const TemplateBank& bank) {
  if (bank.empty()) throw ParameterError("nearest_template: empty template bank");
  const Vector g = pool_speaker_embedding(ghost.X);
  NearestTemplate best;
  bool first = true;
  // std::map iterates in lexicographic order, so strict < keeps the smaller id on ties.
  for (const auto& [speaker, tmpl] : bank) {
    const double d = cosine_distance(g, pool_speaker_embedding(tmpl.X));
    if (first || d < best.distance) {
      best = {speaker, &tmpl, d};
      first = false;
    }
  }
  return best;
}

Matrix transfer(const SVDFactors& ghost, const SVDFactors& tmpl) {
  const Eigen::Index k = ghost.sigma.size();
  if (tmpl.U.rows() != tmpl.U.cols() || tmpl.V.rows() != tmpl.V.cols())
    throw ShapeError("transfer: template factors must be square (full SVD)");
  if (std::min(tmpl.U.rows(), tmpl.V.rows()) != k || tmpl.U.rows() != ghost.U.rows() ||
      tmpl.V.rows() != ghost.V.rows())
    throw ShapeError("transfer: template is " + std::to_string(tmpl.U.rows()) + "x" +
                     std::to_string(tmpl.V.rows()) + ", ghost is " +
                     std::to_string(ghost.U.rows()) + "x" + std::to_string(ghost.V.rows()));
  return tmpl.U.leftCols(k) * ghost.sigma.asDiagonal() * tmpl.V.leftCols(k).transpose();
}

Matrix resample_rows(const Matrix& X, int n_rows, uint64_t seed) {
  if (X.rows() < 1 || n_rows < 1) throw ParameterError("resample_rows: empty input or target");
  Rng rng(mix_seed(seed, "resample"));
  std::vector<Eigen::Index> pick;
  if (X.rows() >= n_rows) {
    std::vector<Eigen::Index> perm(static_cast<size_t>(X.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    for (size_t i = 0; i < static_cast<size_t>(n_rows); ++i)
      std::swap(perm[i], perm[i + rng.below(perm.size() - i)]);
    pick.assign(perm.begin(), perm.begin() + n_rows);
    if (X.rows() == n_rows) std::sort(pick.begin(), pick.end());
  } else {
    for (int i = 0; i < n_rows; ++i) pick.push_back(static_cast<Eigen::Index>(rng.below(X.rows())));
  }
  Matrix out(n_rows, X.cols());
  for (int i = 0; i < n_rows; ++i) out.row(i) = X.row(pick[i]);
  return out;
}

void save_template_bank(const TemplateBank& bank, const std::string& dir) {
  fs::create_directories(dir);
  std::ostringstream index;
  for (const auto& [speaker, m] : bank) {
    const std::string rel = speaker + ".gvm";
    save_matrix((fs::path(dir) / rel).string(), m.X);
    index << speaker << '\t' << rel << '\t' << m.X.rows() << '\n';
  }
  write_file_atomic((fs::path(dir) / "index.tsv").string(), index.str());
}

TemplateBank load_template_bank(const std::string& dir) {
  const std::string index_path = (fs::path(dir) / "index.tsv").string();
  TemplateBank bank;
  for (const auto& line : split_lines(read_file(index_path))) {
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 3) throw FormatError(index_path + ": expected speaker, path, rows");
    EmbeddingMatrix m{load_matrix((fs::path(dir) / f[1]).string()), f[0]};
    if (std::to_string(m.X.rows()) != f[2])
      throw FormatError(index_path + ": row count mismatch for " + f[0]);
    if (!bank.emplace(f[0], std::move(m)).second)
      throw FormatError(index_path + ": duplicate speaker " + f[0]);
  }
  return bank;
}

std::string format_transfer_record(const TransferRecord& r) {
  std::ostringstream os;
  os << std::setprecision(9) << "target\t" << r.target << "\ntemplate\t" << r.template_speaker
     << "\ncosine_distance\t" << r.cosine_distance << "\nsigma_head\t";
  for (Eigen::Index i = 0; i < r.sigma_head.size(); ++i)
    os << (i ? " " : "") << r.sigma_head(i);
  os << '\n';
  return os.str();
}

}  // namespace ghostvec
