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

#include "ghostvec/features.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "ghostvec/matrix_io.h"

namespace ghostvec {

int num_frames(size_t n_samples, const FrameConfig& cfg) {
  if (n_samples < static_cast<size_t>(cfg.window)) return 0;
  return 1 + static_cast<int>((n_samples - cfg.window) / cfg.hop);
}

size_t samples_for_frames(int frames, const FrameConfig& cfg) {
  if (frames <= 0) return 0;
  return static_cast<size_t>(cfg.window) + static_cast<size_t>(frames - 1) * cfg.hop;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

double mel_center_hz(int bin, const FrameConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min), hi = hz_to_mel(cfg.f_max);
  const double step = (hi - lo) / (cfg.mel_bins + 1);
  return mel_to_hz(lo + step * (bin + 1));
}

Matrix mel_filterbank(const FrameConfig& cfg) {
  const int n_freq = cfg.n_freq();
  Matrix fb = Matrix::Zero(cfg.mel_bins, n_freq);
  const double lo = hz_to_mel(cfg.f_min), hi = hz_to_mel(cfg.f_max);
  const double step = (hi - lo) / (cfg.mel_bins + 1);
  for (int m = 0; m < cfg.mel_bins; ++m) {
    const double left = lo + step * m, center = left + step, right = center + step;
    for (int k = 0; k < n_freq; ++k) {
      const double mel = hz_to_mel(static_cast<double>(k) * cfg.sample_rate / cfg.n_fft);
      double w = 0.0;
      if (mel > left && mel <= center)
        w = (mel - left) / step;
      else if (mel > center && mel < right)
        w = (right - mel) / step;
      fb(m, k) = w;
    }
  }
  return fb;
}

std::vector<double> hamming_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
  return w;
}

std::vector<std::complex<double>> rfft(std::span<const double> frame, int n_fft) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> in(n_fft, 0.0);
  std::copy_n(frame.begin(), std::min<size_t>(frame.size(), n_fft), in.begin());
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  out.resize(n_fft / 2 + 1);
  return out;
}

std::vector<double> irfft(const std::vector<std::complex<double>>& spectrum, int n_fft) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> out;
  fft.inv(out, spectrum, n_fft);
  return out;
}

Matrix power_spectrogram(std::span<const double> samples, const FrameConfig& cfg) {
  const int frames = num_frames(samples.size(), cfg);
  const int n_freq = cfg.n_freq();
  const auto window = hamming_window(cfg.window);
  Matrix power(frames, n_freq);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(cfg.n_fft, 0.0);
  std::vector<std::complex<double>> spec;
  for (int t = 0; t < frames; ++t) {
    const size_t offset = static_cast<size_t>(t) * cfg.hop;
    for (int i = 0; i < cfg.window; ++i) buf[i] = samples[offset + i] * window[i];
    fft.fwd(spec, buf);
    for (int k = 0; k < n_freq; ++k) power(t, k) = std::norm(spec[k]);
  }
  return power;
}

Matrix log_mel(std::span<const double> samples, const FrameConfig& cfg) {
  const Matrix power = power_spectrogram(samples, cfg);
  Matrix mel = power * mel_filterbank(cfg).transpose();
  return mel.unaryExpr([](double e) { return std::log(e + kLogFloor); });
}

Matrix deltas(const Matrix& m) {
  constexpr int kWindow = 2;
  constexpr double kNorm = 2.0 * (1 * 1 + 2 * 2);
  const Eigen::Index rows = m.rows();
  Matrix d = Matrix::Zero(rows, m.cols());
  auto clamp_row = [rows](Eigen::Index r) { return std::clamp<Eigen::Index>(r, 0, rows - 1); };
  for (Eigen::Index t = 0; t < rows; ++t) {
    for (int n = 1; n <= kWindow; ++n)
      d.row(t) += n * (m.row(clamp_row(t + n)) - m.row(clamp_row(t - n)));
    d.row(t) /= kNorm;
  }
  return d;
}

Matrix append_deltas(const Matrix& statics) {
  const Matrix d1 = deltas(statics);
  const Matrix d2 = deltas(d1);
  Matrix out(statics.rows(), statics.cols() * 3);
  out << statics, d1, d2;
  return out;
}

Matrix compute_features(const Waveform& wave, const FrameConfig& cfg) {
  if (cfg.mel_bins != kMelBins)
    throw ParameterError("compute_features: mel_bins must be " + std::to_string(kMelBins));
  if (wave.samples.size() < static_cast<size_t>(cfg.window))
    throw InputError("compute_features: waveform shorter than one analysis window (" +
                     std::to_string(wave.samples.size()) + " < " +
                     std::to_string(cfg.window) + " samples)");
  return append_deltas(log_mel(wave.samples, cfg));
}

namespace {

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}
uint32_t get_u32(const std::string& s, size_t at) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}
uint16_t get_u16(const std::string& s, size_t at) {
  return static_cast<uint16_t>(static_cast<unsigned char>(s[at]) |
                               (static_cast<unsigned char>(s[at + 1]) << 8));
}

}  // namespace

void write_wav(const std::string& path, const Waveform& wave) {
  const uint32_t data_bytes = static_cast<uint32_t>(wave.samples.size() * 2);
  std::string s;
  s.reserve(44 + data_bytes);
  s += "RIFF";
  put_u32(s, 36 + data_bytes);
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, 1);  // PCM
  put_u16(s, 1);  // mono
  put_u32(s, static_cast<uint32_t>(wave.sample_rate));
  put_u32(s, static_cast<uint32_t>(wave.sample_rate * 2));
  put_u16(s, 2);
  put_u16(s, 16);
  s += "data";
  put_u32(s, data_bytes);
  for (double x : wave.samples) {
    const double c = std::clamp(x, -1.0, 1.0);
    put_u16(s, static_cast<uint16_t>(static_cast<int16_t>(std::lround(c * 32767.0))));
  }
  write_file_atomic(path, s);
}

Waveform read_wav(const std::string& path) {
  const std::string s = read_file(path);
  if (s.size() < 44 || s.compare(0, 4, "RIFF") != 0 || s.compare(8, 4, "WAVE") != 0)
    throw FormatError("not a RIFF/WAVE file: " + path);
  Waveform w;
  size_t at = 12;
  bool have_fmt = false;
  while (at + 8 <= s.size()) {
    const std::string id = s.substr(at, 4);
    const uint32_t len = get_u32(s, at + 4);
    const size_t body = at + 8;
    if (body + len > s.size()) throw FormatError("truncated WAV chunk in " + path);
    if (id == "fmt ") {
      if (get_u16(s, body) != 1 || get_u16(s, body + 2) != 1 || get_u16(s, body + 14) != 16)
        throw FormatError("only 16-bit PCM mono WAV is supported: " + path);
      w.sample_rate = static_cast<int>(get_u32(s, body + 4));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("WAV data before fmt chunk: " + path);
      w.samples.resize(len / 2);
      for (size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = static_cast<int16_t>(get_u16(s, body + 2 * i)) / 32767.0;
      return w;
    }
    at = body + len + (len & 1);
  }
  throw FormatError("WAV without data chunk: " + path);
}

}  // namespace ghostvec
