#pragma once

#include <gtest/gtest.h>

#include <functional>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "scaptcha/asr.hpp"
#include "scaptcha/audio.hpp"
#include "scaptcha/error.hpp"
#include "scaptcha/synth.hpp"

namespace scaptcha::test {

inline AudioBuffer buffer_of(std::vector<double> samples, int rate = kCanonicalSampleRate) {
  AudioBuffer b;
  b.samples = std::move(samples);
  b.sample_rate = rate;
  return b;
}

inline AudioBuffer random_buffer(std::mt19937_64& rng, std::size_t n, double amplitude = 1.0) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  AudioBuffer b;
  b.sample_rate = kCanonicalSampleRate;
  b.samples.resize(n);
  for (double& s : b.samples) s = u(rng);
  return b;
}

inline AudioBuffer cosine(std::size_t n, std::size_t k, double amplitude = 1.0) {
  AudioBuffer b;
  b.sample_rate = kCanonicalSampleRate;
  b.samples.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    b.samples[t] = amplitude * std::cos(2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n));
  }
  return b;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Kind of the scaptcha::Error thrown by f; records a failure when none is.
inline ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no scaptcha::Error thrown";
  return ErrorKind::InvalidArgument;
}

/// Five takes of every default vocabulary label, generated once per process.
inline const std::vector<LabeledAudio>& synth_corpus() {
  static const std::vector<LabeledAudio> corpus = synth::corpus(synth::default_vocabulary(), 5);
  return corpus;
}

inline const MockOracle& synth_mock() {
  static const MockOracle oracle(fit_mock(synth_corpus()));
  return oracle;
}

/// First take of `label` that the synthetic mock recognizes.
inline const AudioBuffer& enrolled(const std::string& label) {
  for (const auto& item : synth_corpus()) {
    if (item.label == label && synth_mock().transcribe(item.audio).text == label) return item.audio;
  }
  throw Error(ErrorKind::InputUnrecognized, "no recognized take for " + label);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("scaptcha_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace scaptcha::test
