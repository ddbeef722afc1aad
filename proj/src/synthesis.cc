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

#include "ghostvec/synthesis.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "ghostvec/matrix_io.h"
#include "ghostvec/tsv.h"

namespace ghostvec {

namespace fs = std::filesystem;

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double to_logit(double v, const VoiceRange& r) {
  const double u = std::clamp((v - r.lo) / (r.hi - r.lo), 0.02, 0.98);
  return std::log(u / (1 - u));
}

double squash(double z, const VoiceRange& r) { return r.lo + (r.hi - r.lo) * logistic(z); }

}  // namespace

void VoiceMapConfig::validate() const {
  if (basis < 3) throw ParameterError("voice map: basis must be >= 3");
  for (const auto* r : {&f0, &formant_scale, &brightness, &noise_floor})
    if (!(r->hi > r->lo)) throw ParameterError("voice map: empty parameter range");
  if (!(f0.lo > 0) || !(formant_scale.lo > 0)) throw ParameterError("voice map: f0 and formant ranges must be positive");
  if (brightness.lo < 0 || brightness.hi > 1) throw ParameterError("voice map: brightness must lie in [0, 1]");
  if (noise_floor.lo < 0) throw ParameterError("voice map: negative noise floor");
}

VoiceMap::VoiceMap(Matrix basis, Matrix weights, const VoiceMapConfig& cfg)
    : basis_(std::move(basis)), weights_(std::move(weights)), cfg_(cfg) {
  if (basis_.cols() != weights_.rows() || weights_.cols() != 4)
    throw ShapeError("voice map: basis/weights shape mismatch");
}

VoiceMap VoiceMap::fit(const std::vector<Vector>& embeddings, const std::vector<VoiceParams>& voices,
                       const VoiceMapConfig& cfg) {
  cfg.validate();
  if (embeddings.size() != voices.size()) throw ShapeError("voice map: embeddings and voices differ in count");
  if (embeddings.size() < static_cast<size_t>(cfg.basis))
    throw InsufficiencyError("voice map: need at least " + std::to_string(cfg.basis) + " speakers, got " +
                             std::to_string(embeddings.size()));
  const Eigen::Index d = embeddings.front().size();
  if (d < cfg.basis) throw ShapeError("voice map: embedding dimension below basis size");
  Matrix M(static_cast<Eigen::Index>(embeddings.size()), d);
  Matrix Y(M.rows(), 4);
  for (size_t i = 0; i < embeddings.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (embeddings[i].size() != d) throw ShapeError("voice map: inconsistent embedding dimensions");
    if (!embeddings[i].allFinite()) throw InputError("voice map: non-finite embedding");
    M.row(r) = embeddings[i].transpose();
    Y(r, 0) = to_logit(voices[i].f0, cfg.f0);
    Y(r, 1) = to_logit(voices[i].formant_scale, cfg.formant_scale);
    Y(r, 2) = to_logit(voices[i].brightness, cfg.brightness);
    Y(r, 3) = to_logit(voices[i].noise_floor, cfg.noise_floor);
  }
  const Eigen::MatrixXd dense = M;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinV);
  Matrix basis = svd.matrixV().leftCols(cfg.basis);
  // Deterministic orientation: largest-magnitude entry of each column positive.
  for (Eigen::Index k = 0; k < basis.cols(); ++k) {
    Eigen::Index arg = 0;
    basis.col(k).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, k) < 0) basis.col(k) *= -1.0;
  }
  const Matrix C = M * basis;
  const Eigen::MatrixXd Cd = C;
  const Eigen::MatrixXd Yd = Y;
  Matrix W = Cd.colPivHouseholderQr().solve(Yd);
  VoiceMap map(std::move(basis), std::move(W), cfg);
  if (!(map.injectivity_margin() > 1e-9))
    throw DegenerateError("voice map: fitted map is not injective on the leading coordinates");
  return map;
}

Vector VoiceMap::coordinates(const Vector& X) const {
  if (X.size() != basis_.rows())
    throw ShapeError("voice map: embedding has " + std::to_string(X.size()) + " entries, expected " +
                     std::to_string(basis_.rows()));
  if (!X.allFinite()) throw InputError("voice map: non-finite embedding");
  return basis_.transpose() * X;
}

VoiceParams VoiceMap::operator()(const Vector& X) const {
  const Vector z = weights_.transpose() * coordinates(X);
  VoiceParams v;
  v.f0 = squash(z(0), cfg_.f0);
  v.formant_scale = squash(z(1), cfg_.formant_scale);
  v.brightness = squash(z(2), cfg_.brightness);
  v.noise_floor = squash(z(3), cfg_.noise_floor);
  return v;
}

VoiceParams VoiceMap::midpoint() const {
  return {cfg_.f0.mid(), cfg_.formant_scale.mid(), cfg_.brightness.mid(), cfg_.noise_floor.mid()};
}

double VoiceMap::injectivity_margin() const {
  const Eigen::MatrixXd w3 = weights_.topRows(3);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w3);
  return svd.singularValues().minCoeff();
}

void VoiceMap::save(const std::string& path) const {
  std::ostringstream os;
  os.precision(17);
  os << "GVVOICEMAP 2\n"
     << "f0 " << cfg_.f0.lo << ' ' << cfg_.f0.hi << '\n'
     << "formant_scale " << cfg_.formant_scale.lo << ' ' << cfg_.formant_scale.hi << '\n'
     << "brightness " << cfg_.brightness.lo << ' ' << cfg_.brightness.hi << '\n'
     << "noise_floor " << cfg_.noise_floor.lo << ' ' << cfg_.noise_floor.hi << '\n';
  write_matrix(os, basis_);
  write_matrix(os, weights_);
  write_file_atomic(path, os.str());
}

VoiceMap VoiceMap::load(const std::string& path) {
  std::istringstream is(read_file(path));
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (tag != "GVVOICEMAP") throw FormatError(path + ": not a voice map");
  if (version != 2) throw VersionError(path + ": voice map version " + std::to_string(version));
  VoiceMapConfig cfg;
  auto range = [&](const char* name, VoiceRange& r) {
    is >> tag >> r.lo >> r.hi;
    if (!is || tag != name) throw FormatError(path + ": expected " + std::string(name));
  };
  range("f0", cfg.f0);
  range("formant_scale", cfg.formant_scale);
  range("brightness", cfg.brightness);
  range("noise_floor", cfg.noise_floor);
  is.get();
  Matrix basis = read_matrix(is);
  Matrix weights = read_matrix(is);
  cfg.basis = static_cast<int>(basis.cols());
  return VoiceMap(std::move(basis), std::move(weights), cfg);
}

void SynthConfig::validate() const {
  if (frames_per_char < 1) throw ParameterError("synth: frames_per_char must be >= 1");
  if (nnls_iters < 0 || griffin_lim_iters < 0) throw ParameterError("synth: iteration counts must be >= 0");
}

Matrix mel_from_power(const Matrix& mel_energy) {
  return mel_energy.unaryExpr([](double e) { return std::log1p(std::max(e, 0.0) / kLogFloor); });
}

Matrix mel_from_waveform(const Waveform& wave, const FrameConfig& cfg) {
  const Matrix power = power_spectrogram(wave.samples, cfg);
  return mel_from_power(power * mel_filterbank(cfg).transpose());
}

Waveform render_text(const VoiceParams& voice, const std::string& text, const SynthConfig& cfg) {
  cfg.validate();
  if (text.empty()) throw ParameterError("synth: empty text");
  check_alphabet(text);
  const std::vector<int> frames(text.size(), cfg.frames_per_char);
  return render_voice(voice, text, frames, Prosody{}, cfg.noise_seed, cfg.frame);
}

Matrix synth_mel(const VoiceMap& map, const SynthesisRequest& req, const SynthConfig& cfg) {
  if (req.text.empty()) throw ParameterError("synth: empty text");
  check_alphabet(req.text);
  return mel_from_waveform(render_text(map(req.embedding), req.text, cfg), cfg.frame);
}

Waveform vocode(const Matrix& mel, const SynthConfig& cfg) {
  cfg.validate();
  const FrameConfig& fc = cfg.frame;
  if (mel.cols() != fc.mel_bins) throw ShapeError("vocode: expected " + std::to_string(fc.mel_bins) + " mel bins");
  if (mel.rows() < 1) throw InputError("vocode: empty mel");
  if (!mel.allFinite() || mel.minCoeff() < 0) throw InputError("vocode: mel must be finite and nonnegative");
  const Eigen::Index T = mel.rows();
  const int nf = fc.n_freq();
  const Matrix fb = mel_filterbank(fc);  // bins x nf
  const Matrix E = mel.unaryExpr([](double m) { return kLogFloor * std::expm1(m); });

  // Nonnegative linear power P with P fb^T ~ E, multiplicative updates.
  const Matrix EF = E * fb;  // T x nf
  Matrix P = EF;
  for (int it = 0; it < cfg.nnls_iters; ++it) {
    const Matrix denom = (P * fb.transpose()) * fb;
    for (Eigen::Index i = 0; i < P.size(); ++i) {
      const double d = denom.data()[i];
      P.data()[i] = d > 0 ? P.data()[i] * EF.data()[i] / d : 0.0;
    }
  }
  const Matrix A = P.cwiseMax(0.0).cwiseSqrt();

  const size_t n = static_cast<size_t>(fc.window) + static_cast<size_t>(T - 1) * fc.hop;
  Waveform out{std::vector<double>(n, 0.0), fc.sample_rate};
  if (A.maxCoeff() == 0) return out;

  const auto win = hamming_window(fc.window);
  std::vector<double> wsum(n, 0.0);
  for (Eigen::Index t = 0; t < T; ++t)
    for (int i = 0; i < fc.window; ++i) wsum[static_cast<size_t>(t) * fc.hop + i] += win[i] * win[i];

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::vector<std::complex<double>>> phase(static_cast<size_t>(T),
                                                       std::vector<std::complex<double>>(nf));
  Rng rng(cfg.phase_seed);
  for (auto& fr : phase)
    for (auto& c : fr) c = std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());

  std::vector<std::complex<double>> spec(nf);
  std::vector<double> buf(fc.n_fft), time;
  auto overlap_add = [&]() {
    std::fill(out.samples.begin(), out.samples.end(), 0.0);
    for (Eigen::Index t = 0; t < T; ++t) {
      for (int k = 0; k < nf; ++k) spec[k] = A(t, k) * phase[t][k];
      fft.inv(time, spec);
      const size_t off = static_cast<size_t>(t) * fc.hop;
      for (int i = 0; i < fc.window; ++i) out.samples[off + i] += win[i] * time[i];
    }
    for (size_t i = 0; i < n; ++i) out.samples[i] = wsum[i] > 1e-8 ? out.samples[i] / wsum[i] : 0.0;
  };
  for (int it = 0; it < cfg.griffin_lim_iters; ++it) {
    overlap_add();
    for (Eigen::Index t = 0; t < T; ++t) {
      const size_t off = static_cast<size_t>(t) * fc.hop;
      std::fill(buf.begin(), buf.end(), 0.0);
      for (int i = 0; i < fc.window; ++i) buf[i] = out.samples[off + i] * win[i];
      fft.fwd(spec, buf);
      for (int k = 0; k < nf; ++k) {
        const double mag = std::abs(spec[k]);
        if (mag > 0) phase[t][k] = spec[k] / mag;
      }
    }
  }
  overlap_add();
  double peak = 0;
  for (double s : out.samples) peak = std::max(peak, std::abs(s));
  if (peak > 1.0)
    for (double& s : out.samples) s /= peak;
  return out;
}

double pearson(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("pearson: shape mismatch");
  const auto x = a.reshaped().array() - a.mean();
  const auto y = b.reshaped().array() - b.mean();
  const double den = std::sqrt((x * x).sum() * (y * y).sum());
  if (den == 0) throw DegenerateError("pearson: zero variance");
  return (x * y).sum() / den;
}

std::vector<SynthJob> load_synth_jobs(const std::string& path) {
  const fs::path base = fs::path(path).parent_path();
  std::vector<SynthJob> jobs;
  for (const auto& line : split_lines(read_file(path))) {
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 3) throw FormatError(path + ": synth lines need utt_id, text, embedding file");
    check_alphabet(f[1]);
    const fs::path p(f[2]);
    jobs.push_back({f[0], f[1], (p.is_absolute() ? p : base / p).string()});
  }
  return jobs;
}

}  // namespace ghostvec
