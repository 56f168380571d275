#include "scaptcha/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace scaptcha::synth {
namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct Voice {
  double f0 = 120.0;
  std::array<double, 3> formant{};
  std::array<double, 3> bandwidth{};
  std::array<double, 3> gain{};
  double tilt = 0.6;
  double glide = 0.0;  // relative pitch change over the utterance
};

Voice voice_for(const std::string& label) {
  std::mt19937_64 rng(fnv1a(label));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Voice v;
  v.f0 = 90.0 + 140.0 * u(rng);
  v.formant = {250.0 + 650.0 * u(rng), 850.0 + 1750.0 * u(rng), 2300.0 + 1300.0 * u(rng)};
  v.bandwidth = {60.0 + 80.0 * u(rng), 80.0 + 120.0 * u(rng), 120.0 + 160.0 * u(rng)};
  v.gain = {1.0, 0.3 + 0.7 * u(rng), 0.1 + 0.5 * u(rng)};
  v.tilt = 0.3 + 0.9 * u(rng);
  v.glide = -0.08 + 0.16 * u(rng);
  return v;
}

double formant_gain(const Voice& v, double f) {
  double g = 0.0;
  for (std::size_t i = 0; i < v.formant.size(); ++i) {
    const double x = (f - v.formant[i]) / v.bandwidth[i];
    g += v.gain[i] / (1.0 + x * x);
  }
  return g;
}

}  // namespace

std::vector<std::string> default_vocabulary() {
  std::vector<std::string> v;
  for (char c = 'a'; c <= 'z'; ++c) v.emplace_back(1, c);
  for (const char* d : {"zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"}) v.emplace_back(d);
  for (const char* w : {"yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go", "forward", "backward",
                        "follow", "learn", "bed", "bird", "cat", "dog", "happy", "house"}) {
    v.emplace_back(w);
  }
  return v;
}

AudioBuffer utterance(const std::string& label, std::uint32_t take, const UtteranceOptions& options) {
  Voice v = voice_for(label);
  std::mt19937_64 rng(fnv1a(label) ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(take) + 1)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  v.f0 *= 1.0 + 0.04 * (u(rng) - 0.5);
  for (auto& f : v.formant) f *= 1.0 + 0.04 * (u(rng) - 0.5);
  const double level = 0.4 + 0.4 * u(rng);

  const double rate = options.sample_rate;
  const auto n = static_cast<std::size_t>(std::lround(options.duration_s * rate));
  const double nyquist_guard = 0.45 * rate;
  const std::size_t harmonics = static_cast<std::size_t>(nyquist_guard / (v.f0 * (1.0 + std::abs(v.glide))));

  std::vector<double> amp(harmonics + 1), phase(harmonics + 1);
  for (std::size_t h = 1; h <= harmonics; ++h) {
    const double f = v.f0 * static_cast<double>(h);
    amp[h] = formant_gain(v, f) / std::pow(static_cast<double>(h), v.tilt);
    phase[h] = 2.0 * std::numbers::pi * u(rng);
  }

  AudioBuffer out;
  out.sample_rate = options.sample_rate;
  out.samples.assign(n, 0.0);
  const double attack = 0.02 * rate;
  const double release = 0.04 * rate;
  const double duration = static_cast<double>(n) / rate;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    // Instantaneous phase of a linear pitch glide.
    const double cycles = v.f0 * (t + 0.5 * v.glide * t * t / duration);
    double s = 0.0;
    for (std::size_t h = 1; h <= harmonics; ++h) {
      s += amp[h] * std::sin(2.0 * std::numbers::pi * static_cast<double>(h) * cycles + phase[h]);
    }
    double env = 1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * 4.0 * t);
    const double idx = static_cast<double>(i);
    if (idx < attack) env *= 0.5 - 0.5 * std::cos(std::numbers::pi * idx / attack);
    const double tail = static_cast<double>(n - 1 - i);
    if (tail < release) env *= 0.5 - 0.5 * std::cos(std::numbers::pi * tail / release);
    out.samples[i] = env * s;
  }

  double peak = 0.0;
  for (double s : out.samples) peak = std::max(peak, std::abs(s));
  // Breath noise roughly 40 dB under the voiced peak.
  for (double& s : out.samples) s = s / peak + 0.01 * normal(rng);
  peak = 0.0;
  for (double s : out.samples) peak = std::max(peak, std::abs(s));
  for (double& s : out.samples) s *= level / peak;
  return out;
}

AudioBuffer white_noise(std::size_t samples, double stddev, std::uint64_t seed, int sample_rate) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.resize(samples);
  for (double& s : out.samples) s = std::clamp(normal(rng), -1.0, 1.0);
  return out;
}

std::vector<LabeledAudio> corpus(const std::vector<std::string>& labels, std::uint32_t takes,
                                 const UtteranceOptions& options) {
  std::vector<LabeledAudio> out;
  out.reserve(labels.size() * takes);
  for (const auto& label : labels) {
    for (std::uint32_t t = 0; t < takes; ++t) out.push_back({label, utterance(label, t, options)});
  }
  return out;
}

}  // namespace scaptcha::synth
