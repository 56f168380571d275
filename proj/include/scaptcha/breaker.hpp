#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scaptcha/asr.hpp"
#include "scaptcha/craft.hpp"
#include "scaptcha/phonetics.hpp"

namespace scaptcha {

/// Materialises every sweep variant of `buffer`, in sweep_plan order.
std::vector<AudioBuffer> noise_sweep_variants(const AudioBuffer& buffer, const NoiseSweepConfig& sweep);

struct AdaptiveResult {
  Transcript transcript;
  Transcript original;               ///< transcript of the un-noised input
  std::vector<Transcript> variants;  ///< sweep_plan order
  std::size_t queries = 0;
};

/// Transcribes the input and all its sweep variants and keeps the most common
/// non-empty transcript. Ties go to the lowest noise level, then the lowest
/// realization (the un-noised input ranks first). Empty only if every
/// transcript was empty.
AdaptiveResult adaptive_transcribe(const Oracle& oracle, const AudioBuffer& buffer, const NoiseSweepConfig& sweep,
                                   Execution exec = Execution::Parallel);

struct SegmenterConfig {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  double voiced_ratio = 0.05;     ///< frame RMS threshold relative to the loudest frame
  double min_silence_ms = 200.0;  ///< shorter pauses do not split a segment
  double min_segment_ms = 100.0;
};

struct AudioSegment {
  SegmentBounds bounds;
  AudioBuffer audio;
};

/// Energy-based segmentation. Throws NoSegmentsFound on silence.
std::vector<AudioSegment> segment_challenge(const AudioBuffer& audio, const SegmenterConfig& cfg = {});

struct PhoneticMatch {
  std::string label;
  std::size_t distance = 0;
};

/// Vocabulary label with the smallest phonetic distance to the transcript
/// (first in vocabulary order on ties). nullopt for empty or out-of-vocabulary
/// transcripts; labels that are themselves out of vocabulary are skipped.
std::optional<PhoneticMatch> phonetic_map(std::string_view transcript, std::span<const std::string> vocabulary,
                                          const PronouncingDictionary& dict);

/// Learned table from recurring transcripts to true labels.
class StatMap {
 public:
  explicit StatMap(std::size_t min_support = 3) : min_support_(min_support) {}

  void update(std::string_view observed, std::string_view truth);
  /// Modal label for `observed` once it has min_support hits and no tie.
  std::optional<std::string> lookup(std::string_view observed) const;

  std::size_t min_support() const noexcept { return min_support_; }
  const std::map<std::string, std::map<std::string, std::size_t>>& counts() const noexcept { return counts_; }

  nlohmann::ordered_json to_json() const;
  static StatMap from_json(const nlohmann::json& j);

 private:
  std::size_t min_support_;
  std::map<std::string, std::map<std::string, std::size_t>> counts_;
};

StatMap statistical_map_update(StatMap map, std::string_view observed, std::string_view truth);

/// p^n: chance of breaking an n-utterance CAPTCHA when each label is broken
/// with probability p.
double break_probability(double per_label_success, int captcha_length);

/// (1 - e)^n: chance an adversary transcribes all n utterances when each one
/// evades it with probability e.
double transfer_failure_probability(double per_label_evasion, int captcha_length);

struct SegmentReport {
  SegmentBounds bounds;
  std::string transcript;
  std::optional<std::string> mapped_label;
  std::string mapping;  ///< "exact", "statistical", "phonetic" or "none"
  std::optional<std::size_t> phonetic_distance;
  std::size_t nonempty_variants = 0;
  std::optional<std::string> error;
};

struct BreakerReport {
  std::vector<SegmentReport> segments;
  std::string answer;
  bool success = false;
  std::size_t oracle_queries = 0;
  std::vector<std::string> expected;
  std::vector<std::vector<Transcript>> variant_transcripts;  ///< per segment, sweep_plan order
};

inline constexpr std::string_view kUnmappedToken = "_";

/// Segment -> adaptive transcription -> statistical map, else phonetic map ->
/// answer -> verify. Per-segment failures are recorded and never abort.
BreakerReport run_breaker(const CaptchaChallenge& challenge, const Oracle& oracle, const PronouncingDictionary& dict,
                          std::span<const std::string> vocabulary, const StatMap& stat_map,
                          const NoiseSweepConfig& sweep, const SegmenterConfig& segmenter = {});

nlohmann::ordered_json to_json(const BreakerReport& report);

}  // namespace scaptcha
