#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scaptcha/asr.hpp"
#include "scaptcha/audio.hpp"
#include "scaptcha/reference.hpp"

namespace scaptcha {

// ---------------------------------------------------------------------------
// Noise sweep shared by the crafting loop and the adaptive adversary.

struct NoiseSweepConfig {
  double min_fraction = 0.00001;
  double max_fraction = 0.20;
  std::size_t amplitude_count = 46;
  std::size_t realizations_per_amplitude = 5;
  std::uint64_t base_seed = 0;

  std::size_t total() const noexcept { return amplitude_count * realizations_per_amplitude; }
  void validate() const;
};

/// Log-spaced noise std fractions, both endpoints included.
std::vector<double> sweep_fractions(const NoiseSweepConfig& sweep);

/// Seed of variant (amplitude_index, realization) under base_seed.
std::uint64_t variant_seed(std::uint64_t base_seed, std::size_t amplitude_index, std::size_t realization);

struct SweepVariant {
  std::size_t amplitude_index = 0;
  std::size_t realization = 0;
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

/// Variant descriptors in canonical order: amplitude-major, realization-minor.
std::vector<SweepVariant> sweep_plan(const NoiseSweepConfig& sweep);

AudioBuffer make_variant(const AudioBuffer& buffer, const SweepVariant& variant);

/// Transcribes every variant of `buffer` (not the buffer itself). Results are
/// in sweep_plan order whichever execution is used. Oracles that are not
/// concurrent-safe always run serially.
std::vector<Transcript> transcribe_sweep(const Oracle& oracle, const AudioBuffer& buffer,
                                         const NoiseSweepConfig& sweep, Execution exec = Execution::Parallel);

// ---------------------------------------------------------------------------
// Binary search over a parameter grid.

struct SearchConfig {
  double lo = 0.0;
  double hi = 1.0;
  double tolerance = 1.0 / 256.0;
  std::size_t max_iterations = 64;

  void validate() const;
  /// Number of grid intervals: ceil((hi - lo) / tolerance).
  std::size_t intervals() const;
  /// Grid point i: lo + i * tolerance, with the last point pinned to hi.
  double value(std::size_t index) const;
  /// Upper bound on parameter evaluations: ceil(log2((hi - lo) / tol)) + 2.
  std::size_t probe_budget() const;
};

struct SearchOutcome {
  std::size_t index = 0;        ///< first passing grid index found (hi index when failed)
  bool success = false;         ///< the hi endpoint passed
  bool converged = false;       ///< bracket shrank to one interval
  std::size_t bracket_lo = 0;   ///< last index known to fail
  std::size_t bracket_hi = 0;   ///< first index known to pass
  std::vector<std::size_t> probes;  ///< indices evaluated, in order
};

/// Finds the smallest grid index whose predicate holds, assuming the predicate
/// is monotone (false ... false true ... true). Evaluates hi, then lo, then
/// bisects. On non-monotone predicates the returned bracket is still
/// consistent with every probe made.
SearchOutcome binary_search_grid(const SearchConfig& cfg, const std::function<bool(std::size_t)>& passes);

/// Exhaustive scan over the same grid; returns the first passing index or
/// nullopt. Used as the oracle for binary_search_grid.
std::optional<std::size_t> linear_scan_grid(const SearchConfig& cfg, const std::function<bool(std::size_t)>& passes);

// ---------------------------------------------------------------------------
// Crafting.

enum class Algorithm { Kenansville, Yeehaw };
std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view text);

struct TraceEntry {
  double parameter = 0.0;
  std::string transcript;           ///< transcript of the un-noised perturbed audio
  bool passed = false;
  std::size_t empty_variants = 0;   ///< Yeehaw only
  std::size_t variants = 0;         ///< Yeehaw only
};

struct CraftResult {
  Algorithm algorithm = Algorithm::Yeehaw;
  std::string label;
  AudioBuffer perturbed;
  double t_d_frac = 0.0;
  double alpha = 0.0;            ///< absolute clipping value
  double alpha_fraction = 0.0;   ///< alpha / max of the decimated spectrum
  double distortion_rmse = 0.0;
  std::size_t oracle_queries = 0;
  bool success = false;
  bool converged = false;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double tolerance = 0.0;
  std::uint64_t seed = 0;
  std::vector<TraceEntry> trace;
};

/// Smallest decimation fraction whose decimate-only output is no longer
/// transcribed as original_label.
CraftResult craft_kenansville(const AudioBuffer& buffer, const std::string& original_label, const Oracle& oracle,
                              const SearchConfig& cfg);

/// Smallest alpha (as a fraction of the decimated spectrum maximum) such that
/// the perturbed sample and all of its sweep variants transcribe empty.
/// When expected_label is given the clean buffer must transcribe to it.
CraftResult craft_yeehaw(const AudioBuffer& buffer, const Oracle& oracle, double t_d_frac,
                         const NoiseSweepConfig& sweep, const SearchConfig& cfg,
                         const std::optional<std::string>& expected_label = std::nullopt,
                         Execution exec = Execution::Parallel);

struct YeehawEvaluation {
  AudioBuffer perturbed;
  Transcript clean;
  std::vector<Transcript> variants;
  bool robust_empty = false;
};

/// The robust-empty criterion at one alpha fraction. Crafting and replay both
/// go through this.
YeehawEvaluation evaluate_yeehaw(const AudioBuffer& buffer, const Oracle& oracle, double t_d_frac,
                                 double alpha_fraction, const NoiseSweepConfig& sweep,
                                 Execution exec = Execution::Parallel);

// ---------------------------------------------------------------------------
// Challenges.

struct SegmentBounds {
  std::size_t begin = 0;  ///< first sample
  std::size_t end = 0;    ///< one past the last sample
};

struct CaptchaChallenge {
  AudioBuffer audio;
  std::vector<std::string> answer;
  std::vector<SegmentBounds> segments;
  int gap_ms = 0;
  std::uint64_t seed = 0;
};

struct LabeledResult {
  const CraftResult* result = nullptr;
  std::string label;
};

/// Concatenates perturbed utterances with gap_ms of silence between them.
/// `seed` is recorded with the challenge for provenance.
CaptchaChallenge assemble_captcha(std::span<const LabeledResult> results, int gap_ms, std::uint64_t seed);

/// Case-folded, whitespace-tokenized exact match against the answer.
bool verify_answer(const CaptchaChallenge& challenge, std::string_view answer);

// JSON records (audio excluded; it is stored as WAV beside the record).
nlohmann::ordered_json to_json(const CraftResult& result);
CraftResult craft_result_from_json(const nlohmann::json& j);
nlohmann::ordered_json challenge_manifest(const CaptchaChallenge& challenge);
CaptchaChallenge challenge_from_manifest(const nlohmann::json& j, AudioBuffer audio);

}  // namespace scaptcha
