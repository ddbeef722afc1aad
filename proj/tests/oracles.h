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

// Independent reference implementations used only by tests. They are
// deliberately naive: direct sums, exhaustive scans, textbook iterations.
#ifndef GHOSTVEC_TESTS_ORACLES_H_
#define GHOSTVEC_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "ghostvec/common.h"

namespace oracle {

using ghostvec::Matrix;
using ghostvec::Vector;

// |DFT|^2 of a windowed frame by the defining sum.
inline std::vector<double> dft_power(const std::vector<double>& frame, int n_fft) {
  const int nf = n_fft / 2 + 1;
  std::vector<double> out(nf);
  for (int k = 0; k < nf; ++k) {
    double re = 0, im = 0;
    for (size_t n = 0; n < frame.size(); ++n) {
      const double a = -2.0 * std::numbers::pi * k * static_cast<double>(n) / n_fft;
      re += frame[n] * std::cos(a);
      im += frame[n] * std::sin(a);
    }
    out[k] = re * re + im * im;
  }
  return out;
}

// Plain recursive-definition Levenshtein via a full table.
inline size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::vector<size_t>> d(a.size() + 1, std::vector<size_t>(b.size() + 1));
  for (size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (size_t i = 1; i <= a.size(); ++i)
    for (size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
  return d[a.size()][b.size()];
}

// Cyclic Jacobi eigenvalue iteration for a symmetric matrix. Returns
// eigenvalues descending and matching eigenvectors as columns.
inline std::pair<std::vector<double>, Matrix> jacobi_eigen(Matrix A) {
  const Eigen::Index n = A.rows();
  Matrix V = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return A(a, a) > A(b, b); });
  std::vector<double> vals;
  Matrix vecs(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    vals.push_back(A(idx[i], idx[i]));
    vecs.col(i) = V.col(idx[i]);
  }
  return {vals, vecs};
}

// Singular values as square roots of Gram eigenvalues, length min(N, D).
inline std::vector<double> singular_values(const Matrix& X) {
  const Matrix G = X.rows() >= X.cols() ? Matrix(X.transpose() * X) : Matrix(X * X.transpose());
  auto [vals, vecs] = jacobi_eigen(G);
  for (double& v : vals) v = std::sqrt(std::max(v, 0.0));
  return vals;
}

struct RocPoint {
  double p_miss, p_fa;
};

// Every operating point by direct counting: thresholds at -inf, each midpoint
// of adjacent distinct scores, +inf; accept when score > threshold.
inline std::vector<RocPoint> roc_bruteforce(const std::vector<double>& tgt, const std::vector<double>& non) {
  std::vector<double> all(tgt);
  all.insert(all.end(), non.begin(), non.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> th{-std::numeric_limits<double>::infinity()};
  for (size_t i = 0; i + 1 < all.size(); ++i) th.push_back(0.5 * (all[i] + all[i + 1]));
  th.push_back(std::numeric_limits<double>::infinity());
  std::vector<RocPoint> pts;
  for (double t : th) {
    double miss = 0, fa = 0;
    for (double s : tgt) miss += !(s > t);
    for (double s : non) fa += s > t;
    pts.push_back({miss / static_cast<double>(tgt.size()), fa / static_cast<double>(non.size())});
  }
  return pts;
}

// Intersection of the piecewise-linear ROC with the line p_miss = p_fa.
inline double eer_bruteforce(const std::vector<double>& tgt, const std::vector<double>& non) {
  const auto pts = roc_bruteforce(tgt, non);
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto& a = pts[i];
    const auto& b = pts[i + 1];
    if (a.p_miss == a.p_fa) return 100 * a.p_miss;
    // Segment a->b parameterized by u in [0,1]; solve miss(u) = fa(u).
    const double dm = b.p_miss - a.p_miss, df = b.p_fa - a.p_fa;
    if (dm - df == 0) continue;
    const double u = (a.p_fa - a.p_miss) / (dm - df);
    if (u >= 0 && u <= 1) return 100 * (a.p_miss + u * dm);
  }
  return 100 * pts.back().p_miss;
}

inline double min_dcf_bruteforce(const std::vector<double>& tgt, const std::vector<double>& non, double p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pt : roc_bruteforce(tgt, non)) best = std::min(best, p * pt.p_miss + (1 - p) * pt.p_fa);
  return best / std::min(p, 1 - p);
}

// Isotonic regression by the max-min formula over tie blocks:
// fit_i = max_{j<=i} min_{k>=i} mean(y_j..y_k).
inline std::vector<double> isotonic_maxmin(const std::vector<double>& scores, const std::vector<uint8_t>& y) {
  std::vector<size_t> idx(scores.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  std::vector<double> bsum, bcnt;
  std::vector<size_t> block_of(scores.size());
  for (size_t i = 0; i < idx.size();) {
    double s = 0, c = 0;
    const double v = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == v) {
      s += y[idx[i]];
      c += 1;
      block_of[idx[i]] = bsum.size();
      ++i;
    }
    bsum.push_back(s);
    bcnt.push_back(c);
  }
  const size_t m = bsum.size();
  std::vector<double> ps(m + 1, 0), pc(m + 1, 0);
  for (size_t i = 0; i < m; ++i) ps[i + 1] = ps[i] + bsum[i], pc[i + 1] = pc[i] + bcnt[i];
  std::vector<double> fit(m, -1);
  for (size_t j = 0; j < m; ++j) {
    // min over k >= i of mean(j..k), for every i >= j, by a backward scan.
    std::vector<double> suffix_min(m);
    double run = std::numeric_limits<double>::infinity();
    for (size_t k = m; k-- > j;) {
      run = std::min(run, (ps[k + 1] - ps[j]) / (pc[k + 1] - pc[j]));
      suffix_min[k] = run;
    }
    for (size_t i = j; i < m; ++i) fit[i] = std::max(fit[i], suffix_min[i]);
  }
  std::vector<double> out(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) out[i] = fit[block_of[i]];
  return out;
}

inline Vector naive_mean_rows(const Matrix& X) {
  Vector m = Vector::Zero(X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    double s = 0;
    for (Eigen::Index r = 0; r < X.rows(); ++r) s += X(r, c);
    m(c) = s / static_cast<double>(X.rows());
  }
  return m;
}

inline double naive_cosine(const Vector& a, const Vector& b) {
  double d = 0, na = 0, nb = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    d += a(i) * b(i);
    na += a(i) * a(i);
    nb += b(i) * b(i);
  }
  return d / std::sqrt(na * nb);
}

}  // namespace oracle

#endif  // GHOSTVEC_TESTS_ORACLES_H_
