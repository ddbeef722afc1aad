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

#include "ghostvec/voice.h"

#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

namespace ghostvec {

namespace {

constexpr std::string_view kUnvoiced = "fhkpst";

std::array<CharTemplate, 27> build_templates() {
  std::array<CharTemplate, 27> table{};
  for (int i = 0; i < 26; ++i) {
    const char c = static_cast<char>('a' + i);
    CharTemplate t;
    t.f1 = 280.0 + 110.0 * (i % 5);
    t.f2 = 900.0 + 260.0 * (i / 5);
    t.f3 = 2500.0 + 150.0 * ((i * 7) % 5);
    t.voiced = kUnvoiced.find(c) == std::string_view::npos;
    t.gain = 1.0;
    if (!t.voiced) {
      // Fricative-like: noise excitation through raised resonances.
      t.f1 *= 1.8;
      t.f2 *= 1.8;
      t.f3 *= 1.5;
      t.gain = 0.6;
    }
    table[i] = t;
  }
  table[26] = CharTemplate{0, 0, 0, false, 0.0};  // space
  return table;
}

const std::array<CharTemplate, 27>& templates() {
  static const std::array<CharTemplate, 27> table = build_templates();
  return table;
}

// Two-pole digital resonator (unity gain at DC).
struct Resonator {
  double y1 = 0, y2 = 0;
  double step(double x, double freq, double bw, double fs) {
    const double r = std::exp(-std::numbers::pi * bw / fs);
    const double c = -r * r;
    const double b = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / fs);
    const double a = 1.0 - b - c;
    const double y = a * x + b * y1 + c * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

constexpr double kOutputScale = 0.12;

}  // namespace

bool in_alphabet(char c) { return kAlphabet.find(c) != std::string_view::npos; }

void check_alphabet(std::string_view text) {
  for (char c : text)
    if (!in_alphabet(c))
      throw VocabError(std::string("character outside alphabet: '") + c + "'");
}

const CharTemplate& char_template(char c) {
  const auto pos = kAlphabet.find(c);
  if (pos == std::string_view::npos)
    throw VocabError(std::string("character outside alphabet: '") + c + "'");
  return templates()[pos];
}

Waveform render_voice(const VoiceParams& voice, std::string_view text,
                      std::span<const int> char_frames, const Prosody& prosody,
                      uint64_t noise_seed, const FrameConfig& cfg) {
  if (text.size() != char_frames.size())
    throw ShapeError("render_voice: one duration per character required");
  check_alphabet(text);
  if (!(voice.f0 > 0) || !(voice.formant_scale > 0))
    throw ParameterError("render_voice: f0 and formant_scale must be positive");
  const int total_frames = std::accumulate(char_frames.begin(), char_frames.end(), 0);
  const size_t n = samples_for_frames(total_frames, cfg);
  const double fs = cfg.sample_rate;

  Waveform out;
  out.sample_rate = cfg.sample_rate;
  out.samples.assign(n, 0.0);
  if (n == 0) return out;

  // Sample index where each character's span starts; frames are centred on
  // t*hop + window/2 so character k owns [start_k, start_{k+1}).
  std::vector<size_t> boundary(text.size() + 1, 0);
  {
    int acc = 0;
    for (size_t i = 0; i < text.size(); ++i) {
      boundary[i] = i == 0 ? 0 : static_cast<size_t>(acc) * cfg.hop + cfg.window / 2 - cfg.hop / 2;
      acc += char_frames[i];
    }
    boundary[text.size()] = n;
  }

  Rng rng(noise_seed);
  Resonator r1, r2, r3;
  double tilt_state = 0.0;
  const double tilt = 0.95 - 0.45 * std::clamp(voice.brightness, 0.0, 1.0);
  // Smoothed control trajectories.
  const double ctl_alpha = 1.0 - std::exp(-1.0 / (0.012 * fs));
  const double gain_alpha = 1.0 - std::exp(-1.0 / (0.006 * fs));
  const CharTemplate& first = char_template(text.front());
  double f1 = first.f1 > 0 ? first.f1 : 500.0, f2 = first.f2 > 0 ? first.f2 : 1500.0,
         f3 = first.f3 > 0 ? first.f3 : 2500.0;
  double voiced_gain = 0.0, noise_gain = 0.0;
  double phase = 0.0;

  size_t ci = 0;
  for (size_t i = 0; i < n; ++i) {
    while (ci + 1 < text.size() && i >= boundary[ci + 1]) ++ci;
    const CharTemplate& tpl = char_template(text[ci]);
    if (tpl.gain > 0) {
      f1 += ctl_alpha * (tpl.f1 - f1);
      f2 += ctl_alpha * (tpl.f2 - f2);
      f3 += ctl_alpha * (tpl.f3 - f3);
    }
    voiced_gain += gain_alpha * ((tpl.voiced ? tpl.gain : 0.0) - voiced_gain);
    noise_gain += gain_alpha * ((tpl.voiced ? 0.0 : tpl.gain) - noise_gain);

    const double t = static_cast<double>(i) / fs;
    const double f0 = voice.f0 * (1.0 + prosody.f0_drift_depth *
                                            std::sin(2.0 * std::numbers::pi * 0.9 * t +
                                                     prosody.f0_drift_phase));
    phase += f0 / fs;
    double pulse = 0.0;
    if (phase >= 1.0) {
      phase -= std::floor(phase);
      pulse = 1.0;
    }
    // Glottal tilt: one-pole lowpass on the impulse train.
    tilt_state = (1.0 - tilt) * pulse * std::sqrt(fs / f0) + tilt * tilt_state;
    const double excitation = voiced_gain * tilt_state + noise_gain * 0.35 * rng.normal();

    const double s = voice.formant_scale;
    double y = r1.step(excitation, f1 * s, 80.0 * s, fs);
    y = r2.step(y, f2 * s, 120.0 * s, fs);
    y = r3.step(y, f3 * s, 180.0 * s, fs);
    out.samples[i] = kOutputScale * y + voice.noise_floor * rng.normal();
  }
  return out;
}

}  // namespace ghostvec
