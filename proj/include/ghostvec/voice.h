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

#ifndef GHOSTVEC_VOICE_H_
#define GHOSTVEC_VOICE_H_

#include <cstdint>
#include <span>
#include <string_view>

#include "ghostvec/features.h"

namespace ghostvec {

// 26 lowercase letters + space. Index order defines the ASR char tokens.
inline constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz ";

bool in_alphabet(char c);
// Throws VocabError naming the offending character.
void check_alphabet(std::string_view text);

// Per-character spectral template: formant centers (Hz, before speaker
// warping), excitation type and level. Space is silence.
struct CharTemplate {
  double f1 = 0, f2 = 0, f3 = 0;
  bool voiced = true;
  double gain = 0;
};
const CharTemplate& char_template(char c);

// What the parametric source-filter renderer needs to voice a speaker.
struct VoiceParams {
  double f0 = 150.0;            // Hz
  double formant_scale = 1.0;   // multiplies every formant frequency
  double brightness = 0.5;      // [0,1], glottal source tilt (1 = brightest)
  double noise_floor = 0.004;   // background noise amplitude
};

// Utterance-level variation on top of a speaker's voice; all zero renders
// the canonical (synthesis) form.
struct Prosody {
  double f0_drift_depth = 0.0;  // relative depth of a slow f0 sinusoid
  double f0_drift_phase = 0.0;
};

// Renders `text` with `char_frames[i]` analysis frames for character i.
// Output length is samples_for_frames(sum(char_frames)) so framing yields
// exactly that many frames. The noise stream is drawn from `noise_seed`.
Waveform render_voice(const VoiceParams& voice, std::string_view text,
                      std::span<const int> char_frames, const Prosody& prosody,
                      uint64_t noise_seed, const FrameConfig& cfg = {});

}  // namespace ghostvec

#endif  // GHOSTVEC_VOICE_H_
