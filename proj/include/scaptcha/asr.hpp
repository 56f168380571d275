#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scaptcha/audio.hpp"
#include "scaptcha/error.hpp"
#include "scaptcha/text.hpp"

namespace scaptcha {

struct Transcript {
  std::string text;
  bool is_empty = true;

  /// Trims surrounding whitespace and derives is_empty.
  static Transcript of(std::string_view text);
  static Transcript empty() { return of(""); }

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

/// Anything that maps audio to a transcript.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual Transcript transcribe(const AudioBuffer& buffer) const = 0;
  virtual std::string name() const = 0;
  /// False when calls must be serialized (remote services with rate limits).
  virtual bool concurrent_safe() const { return true; }
};

/// Adapts a callable; used for planted oracles in experiments and tests.
class CallbackOracle final : public Oracle {
 public:
  using Fn = std::function<Transcript(const AudioBuffer&)>;
  CallbackOracle(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  Transcript transcribe(const AudioBuffer& buffer) const override { return fn_(buffer); }
  std::string name() const override { return name_; }

 private:
  std::string name_;
  Fn fn_;
};

// ---------------------------------------------------------------------------
// Mock oracle: nearest-template classifier over band log-magnitudes with a
// distance rejection, a zero-bin rejection and a flat-top rejection.
// Decimation and clipping both
// push inputs toward the empty transcript.

inline constexpr std::size_t kMockBands = 64;

struct MockOracleModel {
  std::map<std::string, std::vector<std::vector<double>>> templates;
  double rejection_distance = 1.0;
  double zero_bin_rejection = 0.25;
  double plateau_rejection = 0.005;
};

struct LabeledAudio {
  std::string label;
  AudioBuffer audio;
};

struct MockFitOptions {
  double rejection_percentile = 99.0;
  double zero_bin_rejection = 0.25;
  double plateau_rejection = 0.005;
};

/// Level-invariant band features: log mean magnitude in 64 equal-width bands
/// from 0 Hz to Nyquist, centred on their mean.
std::vector<double> mock_features(const Spectrum& spectrum);

/// Fraction of bins in [0, N/2] whose magnitude is below 1e-6 of the maximum.
/// Silence counts as all-zero.
double zero_bin_fraction(const Spectrum& spectrum);

/// Bins in [0, N/2] sharing the peak magnitude to within 1e-9 relative.
/// Clipping flattens the top of the spectrum, so this count never decreases
/// as alpha grows.
std::size_t plateau_bins(const Spectrum& spectrum);

/// True when more than max(2, fraction * (N/2 + 1)) bins sit on the plateau.
bool plateau_rejected(const Spectrum& spectrum, double fraction);

MockOracleModel fit_mock(std::span<const LabeledAudio> corpus, const MockFitOptions& options = {});

class MockOracle final : public Oracle {
 public:
  explicit MockOracle(MockOracleModel model, std::string name = "mock");

  Transcript transcribe(const AudioBuffer& buffer) const override;
  std::string name() const override { return name_; }

  struct Decision {
    std::string nearest_label;
    double distance = 0.0;
    double zero_fraction = 0.0;
    std::size_t plateau = 0;
    bool rejected = false;
  };
  Decision decide(const AudioBuffer& buffer) const;

  const MockOracleModel& model() const noexcept { return model_; }

 private:
  MockOracleModel model_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// Remote client.

struct RemoteOracleConfig {
  std::string endpoint;            ///< http(s)://host[:port]/path
  std::string auth_token;          ///< sent as "Authorization: Bearer <token>" when non-empty
  int timeout_ms = 10000;
  int max_retries = 3;
  int min_interval_ms = 0;
  std::filesystem::path cache_path;  ///< one file per content hash; empty disables caching
  std::string transcript_key = "transcript";  ///< dotted path into the JSON response
  std::string content_type = "audio/wav";
  int backoff_ms = 200;

  void validate() const;
};

/// Hex SHA-256 of the canonical WAV encoding of a buffer.
std::string content_hash(const AudioBuffer& buffer);

/// Parses a response body and pulls the transcript string at a dotted key
/// path ("results.0.alternatives.0.transcript"). A missing key or null value
/// means "no speech" and maps to the empty transcript.
Transcript parse_transcript_response(std::string_view body, std::string_view key_path);

class RemoteOracle final : public Oracle {
 public:
  explicit RemoteOracle(RemoteOracleConfig config, std::string name = "remote");

  Transcript transcribe(const AudioBuffer& buffer) const override;
  std::string name() const override { return name_; }
  bool concurrent_safe() const override { return false; }

  /// Requests actually sent over the wire (cache hits excluded).
  std::size_t network_requests() const;

 private:
  std::optional<Transcript> cache_lookup(const std::string& key) const;
  void cache_store(const std::string& key, const Transcript& t) const;
  Transcript request(const std::vector<std::uint8_t>& wav) const;

  RemoteOracleConfig config_;
  std::string name_;
  mutable std::mutex mutex_;
  mutable std::optional<std::chrono::steady_clock::time_point> last_request_;
  mutable std::size_t network_requests_ = 0;
  mutable std::map<std::string, Transcript> memory_cache_;
};

// ---------------------------------------------------------------------------

struct SegmentTranscript {
  Transcript transcript;
  std::optional<ErrorKind> error;
  std::string error_message;
};

/// One transcript per segment, in order. A failing segment records its error
/// and an empty transcript; the batch continues.
std::vector<SegmentTranscript> transcribe_segmented(const Oracle& oracle, std::span<const AudioBuffer> segments);

}  // namespace scaptcha
