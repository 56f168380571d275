#include "scaptcha/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "scaptcha/error.hpp"

namespace scaptcha {
namespace {

void check_fraction(double f, const char* what) {
  if (!(f >= 0.0 && f <= 1.0)) {
    throw Error(ErrorKind::InvalidFraction, std::string(what) + " must lie in [0, 1], got " + std::to_string(f));
  }
}

// Allow alpha to overshoot the maximum by a few ulps when the caller derived
// it from a relative fraction.
constexpr double kAlphaSlack = 1e-12;

}  // namespace

double decimation_threshold(const Spectrum& spectrum, double td_fraction) {
  check_fraction(td_fraction, "decimation fraction");
  return td_fraction * max_magnitude(spectrum);
}

double clipping_threshold(const Spectrum& spectrum, double alpha) {
  const double peak = max_magnitude(spectrum);
  if (!(alpha >= 0.0 && alpha <= peak * (1.0 + kAlphaSlack))) {
    throw Error(ErrorKind::AlphaOutOfRange,
                "alpha " + std::to_string(alpha) + " outside [0, " + std::to_string(peak) + "]");
  }
  return std::max(0.0, peak - alpha);
}

Spectrum decimate(const Spectrum& spectrum, double td_fraction) {
  const double threshold = decimation_threshold(spectrum, td_fraction);
  Spectrum out = spectrum;
  const std::size_t n = out.size();
  for (std::size_t k = 0; k <= n / 2 && k < n; ++k) {
    const std::size_t mirror = (n - k) % n;
    const double m = std::max(std::abs(spectrum.bins[k]), std::abs(spectrum.bins[mirror]));
    if (m < threshold) {
      out.bins[k] = Complex{};
      out.bins[mirror] = Complex{};
    }
  }
  return out;
}

Spectrum clip(const Spectrum& spectrum, double alpha) {
  const double cap = clipping_threshold(spectrum, alpha);
  Spectrum out = spectrum;
  for (auto& bin : out.bins) {
    const double m = std::abs(bin);
    if (m > cap) bin = (cap == 0.0) ? Complex{} : bin * (cap / m);
  }
  return out;
}

AudioBuffer add_gaussian_noise(const AudioBuffer& buffer, double noise_std_fraction, std::uint64_t seed) {
  if (!(noise_std_fraction >= 0.0) || !std::isfinite(noise_std_fraction)) {
    throw Error(ErrorKind::InvalidFraction, "noise fraction must be finite and >= 0");
  }
  const double sigma = noise_std_fraction * peak_amplitude(buffer);
  if (sigma == 0.0) return buffer;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  AudioBuffer out = buffer;
  for (double& s : out.samples) s = std::clamp(s + normal(rng), -1.0, 1.0);
  return out;
}

AudioBuffer perturb_yeehaw(const AudioBuffer& buffer, double td_fraction, double alpha) {
  return idft(clip(decimate(dft(buffer), td_fraction), alpha));
}

AudioBuffer perturb_yeehaw_relative(const AudioBuffer& buffer, double td_fraction, double alpha_fraction) {
  check_fraction(alpha_fraction, "alpha fraction");
  const Spectrum decimated = decimate(dft(buffer), td_fraction);
  const double alpha = std::min(alpha_fraction * max_magnitude(decimated), max_magnitude(decimated));
  return idft(clip(decimated, alpha));
}

AudioBuffer perturb_decimate(const AudioBuffer& buffer, double td_fraction) {
  return idft(decimate(dft(buffer), td_fraction));
}

AudioBuffer perturb_framewise(const AudioBuffer& buffer, double td_fraction, double alpha_fraction,
                              std::size_t frame_size) {
  if (frame_size == 0 || frame_size >= buffer.size()) {
    return perturb_yeehaw_relative(buffer, td_fraction, alpha_fraction);
  }
  AudioBuffer out;
  out.sample_rate = buffer.sample_rate;
  out.samples.reserve(buffer.size());
  for (std::size_t start = 0; start < buffer.size(); start += frame_size) {
    const std::size_t end = std::min(buffer.size(), start + frame_size);
    AudioBuffer frame{{buffer.samples.begin() + static_cast<std::ptrdiff_t>(start),
                       buffer.samples.begin() + static_cast<std::ptrdiff_t>(end)},
                      buffer.sample_rate};
    if (peak_amplitude(frame) == 0.0) {
      out.samples.insert(out.samples.end(), frame.samples.begin(), frame.samples.end());
      continue;
    }
    const AudioBuffer p = perturb_yeehaw_relative(frame, td_fraction, alpha_fraction);
    out.samples.insert(out.samples.end(), p.samples.begin(), p.samples.end());
  }
  return out;
}

}  // namespace scaptcha
