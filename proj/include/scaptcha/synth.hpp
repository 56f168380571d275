#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scaptcha/asr.hpp"
#include "scaptcha/audio.hpp"

namespace scaptcha::synth {

/// 26 letters, 10 digits and 20 command words.
std::vector<std::string> default_vocabulary();

struct UtteranceOptions {
  int sample_rate = kCanonicalSampleRate;
  double duration_s = 0.3;
};

/// Deterministic voiced "utterance" for a label: a harmonic source shaped by
/// three label-specific formants plus a breath-noise floor, under an
/// attack/release envelope. `take` jitters pitch, formants, phases and level
/// the way separate recordings of one word differ.
AudioBuffer utterance(const std::string& label, std::uint32_t take, const UtteranceOptions& options = {});

AudioBuffer white_noise(std::size_t samples, double stddev, std::uint64_t seed,
                        int sample_rate = kCanonicalSampleRate);

/// `takes` utterances of each label.
std::vector<LabeledAudio> corpus(const std::vector<std::string>& labels, std::uint32_t takes,
                                 const UtteranceOptions& options = {});

}  // namespace scaptcha::synth
