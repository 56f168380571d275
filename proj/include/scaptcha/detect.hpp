#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scaptcha/asr.hpp"
#include "scaptcha/audio.hpp"
#include "scaptcha/reference.hpp"

namespace scaptcha {

struct ActivationVector {
  std::size_t layer_index = 0;
  std::vector<double> values;
};

/// Source of per-layer activations for a buffer. A white-box ASR can be
/// plugged in here; the default is SpectralStatsProvider.
class ActivationProvider {
 public:
  virtual ~ActivationProvider() = default;
  virtual std::vector<ActivationVector> extract(const AudioBuffer& buffer) const = 0;
  virtual std::size_t layers() const = 0;
};

/// Three "layers" of framewise spectral statistics at frame sizes 256, 512 and
/// 1024 (Hann window, half-frame hop). Each layer holds, for 32 equal-width
/// bands, four blocks of 32 values: mean and std of log(1 + |X|), spectral
/// flatness of the frame-averaged power, and the fraction of zero bins.
class SpectralStatsProvider final : public ActivationProvider {
 public:
  static constexpr std::size_t kBands = 32;
  static constexpr std::size_t kStats = 4;

  explicit SpectralStatsProvider(std::vector<std::size_t> frame_sizes = {256, 512, 1024});

  std::vector<ActivationVector> extract(const AudioBuffer& buffer) const override;
  std::size_t layers() const override { return frame_sizes_.size(); }

  /// Offsets of the stat blocks inside one layer vector.
  static constexpr std::size_t kMeanBlock = 0;
  static constexpr std::size_t kStdBlock = kBands;
  static constexpr std::size_t kFlatnessBlock = 2 * kBands;
  static constexpr std::size_t kZeroBlock = 3 * kBands;

 private:
  std::vector<std::size_t> frame_sizes_;
};

inline std::vector<ActivationVector> extract_activations(const ActivationProvider& provider,
                                                         const AudioBuffer& buffer) {
  return provider.extract(buffer);
}

double l2_distance(std::span<const double> a, std::span<const double> b);

enum class CenterRule { Medoid, Minimax };

/// The input vector minimising the sum (Medoid) or the maximum (Minimax) of
/// L2 distances to all inputs. Ties go to the lowest index.
ActivationVector compute_center(std::span<const ActivationVector> vectors, CenterRule rule = CenterRule::Medoid,
                                Execution exec = Execution::Parallel);

std::vector<double> distance_profile(const ActivationVector& center, std::span<const ActivationVector> vectors);

struct Calibration {
  double tau = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Sweeps tau over the midpoints between consecutive distinct distances and
/// picks the one with the smallest |precision - recall|, then the highest F1,
/// then the smallest tau. Distances above tau are classified as CAPTCHA.
Calibration calibrate_tau(std::span<const double> noise_distances, std::span<const double> captcha_distances);

struct LayerProfile {
  ActivationVector center;
  Calibration calibration;
};

struct DetectionProfile {
  std::vector<LayerProfile> layers;
  double precision = 0.0;  ///< OR-fused over layers, on the calibration sets
  double recall = 0.0;
};

/// Centers from the benign noise set, then one tau per layer.
DetectionProfile calibrate_profile(std::span<const std::vector<ActivationVector>> noise,
                                   std::span<const std::vector<ActivationVector>> captcha,
                                   CenterRule rule = CenterRule::Medoid);

/// True when any layer's distance to its center exceeds that layer's tau.
bool exceeds_any_tau(const DetectionProfile& profile, std::span<const ActivationVector> activations);

enum class Verdict { Benign, SuspectedCaptcha };
std::string_view to_string(Verdict v);

/// Suspected only for empty transcripts whose activations exceed tau on at
/// least one layer.
Verdict classify_input(const AudioBuffer& buffer, const Transcript& transcript, const DetectionProfile& profile,
                       const ActivationProvider& provider);

/// (1 - recall)^n: chance that no utterance of an n-utterance CAPTCHA is flagged.
double evasion_probability(double recall, int captcha_length);

nlohmann::ordered_json to_json(const DetectionProfile& profile);
DetectionProfile detection_profile_from_json(const nlohmann::json& j);

}  // namespace scaptcha
