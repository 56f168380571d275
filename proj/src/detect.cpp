#include "scaptcha/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "scaptcha/error.hpp"

namespace scaptcha {

SpectralStatsProvider::SpectralStatsProvider(std::vector<std::size_t> frame_sizes)
    : frame_sizes_(std::move(frame_sizes)) {
  if (frame_sizes_.empty()) throw Error(ErrorKind::InvalidArgument, "provider needs at least one frame size");
  for (auto f : frame_sizes_) {
    if (f < 2 * kBands) throw Error(ErrorKind::InvalidArgument, "frame size too small for the band layout");
  }
}

namespace {

// Per-band accumulators for one frame.
struct BandSums {
  double log_mag = 0.0;
  double log_mag_sq = 0.0;
  std::size_t zeros = 0;
  std::size_t count = 0;
};

constexpr double kZeroMagnitude = 1e-9;

std::vector<double> layer_features(const AudioBuffer& buffer, std::size_t frame) {
  constexpr std::size_t kBands = SpectralStatsProvider::kBands;
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + frame <= buffer.size(); s += frame / 2) starts.push_back(s);
  if (starts.empty()) starts.push_back(0);

  std::vector<double> window(frame);
  for (std::size_t i = 0; i < frame; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(frame));
  }

  const std::size_t half = frame / 2 + 1;
  std::vector<std::vector<BandSums>> per_frame(starts.size(), std::vector<BandSums>(kBands));
  std::vector<std::vector<double>> frame_power(starts.size(), std::vector<double>(half, 0.0));
#pragma omp parallel for schedule(static)
  for (std::size_t f = 0; f < starts.size(); ++f) {
    AudioBuffer chunk;
    chunk.sample_rate = buffer.sample_rate;
    chunk.samples.assign(frame, 0.0);
    for (std::size_t i = 0; i < frame && starts[f] + i < buffer.size(); ++i) {
      chunk.samples[i] = buffer.samples[starts[f] + i] * window[i];
    }
    const Spectrum s = dft(chunk);
    auto& sums = per_frame[f];
    for (std::size_t k = 0; k < half; ++k) {
      const double m = std::abs(s.bins[k]);
      frame_power[f][k] = m * m;
      const double lm = std::log1p(m);
      auto& b = sums[std::min(kBands - 1, k * kBands / half)];
      b.log_mag += lm;
      b.log_mag_sq += lm * lm;
      b.zeros += m <= kZeroMagnitude ? 1 : 0;
      ++b.count;
    }
  }

  std::vector<BandSums> total(kBands);
  for (const auto& sums : per_frame) {
    for (std::size_t b = 0; b < kBands; ++b) {
      total[b].log_mag += sums[b].log_mag;
      total[b].log_mag_sq += sums[b].log_mag_sq;
      total[b].zeros += sums[b].zeros;
      total[b].count += sums[b].count;
    }
  }

  // Welch estimate: per-bin power averaged over frames.
  std::vector<double> psd(half, 0.0);
  for (const auto& fp : frame_power) {
    for (std::size_t k = 0; k < half; ++k) psd[k] += fp[k];
  }
  std::vector<double> band_power(kBands, 0.0), band_log_power(kBands, 0.0);
  for (std::size_t k = 0; k < half; ++k) {
    const double p = psd[k] / static_cast<double>(starts.size());
    const std::size_t b = std::min(kBands - 1, k * kBands / half);
    band_power[b] += p;
    band_log_power[b] += std::log(std::max(p, std::numeric_limits<double>::min()));
  }

  std::vector<double> out(SpectralStatsProvider::kBands * SpectralStatsProvider::kStats, 0.0);
  for (std::size_t b = 0; b < kBands; ++b) {
    const auto& t = total[b];
    if (t.count == 0) continue;
    const double n = static_cast<double>(t.count);
    const double mean = t.log_mag / n;
    out[SpectralStatsProvider::kMeanBlock + b] = mean;
    out[SpectralStatsProvider::kStdBlock + b] = std::sqrt(std::max(0.0, t.log_mag_sq / n - mean * mean));
    const double bins = n / static_cast<double>(starts.size());
    const double arithmetic = band_power[b] / bins;
    // Flatness of an all-zero band is undefined; report 0.
    out[SpectralStatsProvider::kFlatnessBlock + b] =
        arithmetic > 0.0 ? std::min(1.0, std::exp(band_log_power[b] / bins) / arithmetic) : 0.0;
    out[SpectralStatsProvider::kZeroBlock + b] = static_cast<double>(t.zeros) / n;
  }
  return out;
}

}  // namespace

std::vector<ActivationVector> SpectralStatsProvider::extract(const AudioBuffer& buffer) const {
  if (buffer.empty()) throw Error(ErrorKind::EmptyInput, "no audio to extract activations from");
  std::vector<ActivationVector> out;
  out.reserve(frame_sizes_.size());
  for (std::size_t l = 0; l < frame_sizes_.size(); ++l) out.push_back({l, layer_features(buffer, frame_sizes_[l])});
  return out;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

ActivationVector compute_center(std::span<const ActivationVector> vectors, CenterRule rule, Execution exec) {
  if (vectors.empty()) throw Error(ErrorKind::EmptyInput, "no vectors to take a center of");
  const std::size_t dim = vectors.front().values.size();
  for (const auto& v : vectors) {
    if (v.values.size() != dim) throw Error(ErrorKind::DimensionMismatch, "vectors differ in dimensionality");
  }
  const std::size_t n = vectors.size();
  std::vector<double> score(n, 0.0);
  const bool parallel = exec == Execution::Parallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = l2_distance(vectors[i].values, vectors[j].values);
      acc = rule == CenterRule::Medoid ? acc + d : std::max(acc, d);
    }
    score[i] = acc;
  }
  const auto best = std::min_element(score.begin(), score.end());
  return vectors[static_cast<std::size_t>(best - score.begin())];
}

std::vector<double> distance_profile(const ActivationVector& center, std::span<const ActivationVector> vectors) {
  std::vector<double> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) out.push_back(l2_distance(center.values, v.values));
  return out;
}

Calibration calibrate_tau(std::span<const double> noise_distances, std::span<const double> captcha_distances) {
  if (noise_distances.empty() || captcha_distances.empty()) {
    throw Error(ErrorKind::DegenerateClasses, "both the noise and the captcha sets need at least one distance");
  }
  std::vector<double> noise(noise_distances.begin(), noise_distances.end());
  std::vector<double> captcha(captcha_distances.begin(), captcha_distances.end());
  std::sort(noise.begin(), noise.end());
  std::sort(captcha.begin(), captcha.end());
  std::vector<double> merged(noise);
  merged.insert(merged.end(), captcha.begin(), captcha.end());
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  if (merged.size() < 2) throw Error(ErrorKind::DegenerateClasses, "all distances are identical");

  auto above = [](const std::vector<double>& sorted, double tau) {
    return static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), tau));
  };
  std::optional<Calibration> best;
  double best_gap = 0.0;
  for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
    const double tau = 0.5 * (merged[i] + merged[i + 1]);
    const double tp = above(captcha, tau);
    const double fp = above(noise, tau);
    Calibration c;
    c.tau = tau;
    c.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    c.recall = tp / static_cast<double>(captcha.size());
    c.f1 = c.precision + c.recall > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    const double gap = std::abs(c.precision - c.recall);
    if (!best || gap < best_gap || (gap == best_gap && c.f1 > best->f1)) {
      best = c;
      best_gap = gap;
    }
  }
  return *best;
}

bool exceeds_any_tau(const DetectionProfile& profile, std::span<const ActivationVector> activations) {
  if (activations.size() != profile.layers.size()) {
    throw Error(ErrorKind::DimensionMismatch, "activation layer count differs from the profile");
  }
  for (std::size_t l = 0; l < activations.size(); ++l) {
    const auto& layer = profile.layers[l];
    if (l2_distance(layer.center.values, activations[l].values) > layer.calibration.tau) return true;
  }
  return false;
}

DetectionProfile calibrate_profile(std::span<const std::vector<ActivationVector>> noise,
                                   std::span<const std::vector<ActivationVector>> captcha, CenterRule rule) {
  if (noise.empty() || captcha.empty()) {
    throw Error(ErrorKind::DegenerateClasses, "both calibration sets need at least one sample");
  }
  const std::size_t layers = noise.front().size();
  DetectionProfile profile;
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<ActivationVector> noise_layer, captcha_layer;
    for (const auto& s : noise) noise_layer.push_back(s.at(l));
    for (const auto& s : captcha) captcha_layer.push_back(s.at(l));
    LayerProfile lp;
    lp.center = compute_center(noise_layer, rule);
    lp.calibration = calibrate_tau(distance_profile(lp.center, noise_layer), distance_profile(lp.center, captcha_layer));
    profile.layers.push_back(std::move(lp));
  }
  double tp = 0.0, fp = 0.0;
  for (const auto& s : captcha) tp += exceeds_any_tau(profile, s) ? 1.0 : 0.0;
  for (const auto& s : noise) fp += exceeds_any_tau(profile, s) ? 1.0 : 0.0;
  profile.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  profile.recall = tp / static_cast<double>(captcha.size());
  return profile;
}

std::string_view to_string(Verdict v) { return v == Verdict::Benign ? "benign" : "suspected_captcha"; }

Verdict classify_input(const AudioBuffer& buffer, const Transcript& transcript, const DetectionProfile& profile,
                       const ActivationProvider& provider) {
  if (!transcript.is_empty) return Verdict::Benign;
  return exceeds_any_tau(profile, provider.extract(buffer)) ? Verdict::SuspectedCaptcha : Verdict::Benign;
}

double evasion_probability(double recall, int captcha_length) {
  if (!(recall >= 0.0 && recall <= 1.0)) throw Error(ErrorKind::InvalidArgument, "recall must lie in [0, 1]");
  if (captcha_length < 1) throw Error(ErrorKind::InvalidArgument, "captcha length must be >= 1");
  return std::pow(1.0 - recall, captcha_length);
}

nlohmann::ordered_json to_json(const DetectionProfile& p) {
  nlohmann::ordered_json j;
  j["precision"] = p.precision;
  j["recall"] = p.recall;
  auto& layers = j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : p.layers) {
    nlohmann::ordered_json e;
    e["layer_index"] = l.center.layer_index;
    e["tau"] = l.calibration.tau;
    e["precision"] = l.calibration.precision;
    e["recall"] = l.calibration.recall;
    e["f1"] = l.calibration.f1;
    e["center"] = l.center.values;
    layers.push_back(std::move(e));
  }
  return j;
}

DetectionProfile detection_profile_from_json(const nlohmann::json& j) {
  DetectionProfile p;
  p.precision = j.at("precision").get<double>();
  p.recall = j.at("recall").get<double>();
  for (const auto& e : j.at("layers")) {
    LayerProfile l;
    l.center.layer_index = e.at("layer_index").get<std::size_t>();
    l.center.values = e.at("center").get<std::vector<double>>();
    l.calibration.tau = e.at("tau").get<double>();
    l.calibration.precision = e.value("precision", 0.0);
    l.calibration.recall = e.value("recall", 0.0);
    l.calibration.f1 = e.value("f1", 0.0);
    p.layers.push_back(std::move(l));
  }
  return p;
}

}  // namespace scaptcha
