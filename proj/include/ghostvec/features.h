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

#ifndef GHOSTVEC_FEATURES_H_
#define GHOSTVEC_FEATURES_H_

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "ghostvec/common.h"

namespace ghostvec {

inline constexpr int kMelBins = 40;
inline constexpr int kFeatureDim = 3 * kMelBins;  // static + delta + delta-delta
// Added to mel energies before the log; also the reference level for the
// nonnegative mel representation used by the synthesizer.
inline constexpr double kLogFloor = 1e-6;

struct FrameConfig {
  int sample_rate = 16000;
  int window = 400;  // 25 ms
  int hop = 160;     // 10 ms
  int n_fft = 512;
  int mel_bins = kMelBins;
  double f_min = 20.0;
  double f_max = 7800.0;

  int n_freq() const { return n_fft / 2 + 1; }
};

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;
};

// Frame count with edge snipping: 1 + (n - window) / hop.
int num_frames(size_t n_samples, const FrameConfig& cfg);
// Number of samples that yields exactly `frames` frames.
size_t samples_for_frames(int frames, const FrameConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);
// Center frequency of triangular filter `bin` in Hz.
double mel_center_hz(int bin, const FrameConfig& cfg);

// mel_bins x n_freq triangular weights (HTK mel scale).
Matrix mel_filterbank(const FrameConfig& cfg);
std::vector<double> hamming_window(int n);

// Real-input half-spectrum FFT helpers (n_fft points).
std::vector<std::complex<double>> rfft(std::span<const double> frame, int n_fft);
std::vector<double> irfft(const std::vector<std::complex<double>>& spectrum, int n_fft);

// T x n_freq power spectrum of Hamming-windowed frames.
Matrix power_spectrogram(std::span<const double> samples, const FrameConfig& cfg);
// T x mel_bins log(E + kLogFloor).
Matrix log_mel(std::span<const double> samples, const FrameConfig& cfg);

// Regression deltas over +-2 frames with edge replication.
Matrix deltas(const Matrix& m);
// [static | delta | delta-delta].
Matrix append_deltas(const Matrix& statics);

// T x 120 log-mel + deltas. Throws InputError when shorter than one window.
Matrix compute_features(const Waveform& wave, const FrameConfig& cfg = {});

// 16-bit PCM mono WAV.
void write_wav(const std::string& path, const Waveform& wave);
Waveform read_wav(const std::string& path);

}  // namespace ghostvec

#endif  // GHOSTVEC_FEATURES_H_
