#include "scaptcha/asr.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

namespace scaptcha {

Transcript Transcript::of(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return Transcript{"", true};
  const auto last = text.find_last_not_of(" \t\r\n");
  return Transcript{std::string(text.substr(first, last - first + 1)), false};
}

// ---------------------------------------------------------------------------
// Mock oracle

namespace {

constexpr double kZeroBinRelative = 1e-6;
constexpr double kPlateauRelative = 1e-9;
constexpr double kLogFloorRelative = 1e-6;

double euclidean(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double percentile(std::vector<double> values, double pct) {
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values.front();
  const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(values.size() - 1, lo + 1);
  return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct Nearest {
  std::string label;
  double distance = std::numeric_limits<double>::infinity();
};

Nearest nearest_template(const MockOracleModel& model, std::span<const double> features) {
  Nearest best;
  for (const auto& [label, vectors] : model.templates) {
    for (const auto& t : vectors) {
      const double d = euclidean(features, t);
      if (d < best.distance) best = {label, d};
    }
  }
  return best;
}

}  // namespace

std::vector<double> mock_features(const Spectrum& spectrum) {
  const std::size_t half = spectrum.size() / 2 + 1;
  std::vector<double> sums(kMockBands, 0.0);
  std::vector<std::size_t> counts(kMockBands, 0);
  double peak = 0.0;
  for (std::size_t k = 0; k < half; ++k) {
    const double m = std::abs(spectrum.bins[k]);
    const std::size_t band = std::min(kMockBands - 1, k * kMockBands / half);
    sums[band] += m;
    ++counts[band];
    peak = std::max(peak, m);
  }
  const double floor = std::max(peak * kLogFloorRelative, std::numeric_limits<double>::min());
  std::vector<double> features(kMockBands);
  double mean = 0.0;
  for (std::size_t b = 0; b < kMockBands; ++b) {
    const double band_mean = counts[b] > 0 ? sums[b] / static_cast<double>(counts[b]) : 0.0;
    features[b] = std::log(band_mean + floor);
    mean += features[b];
  }
  mean /= static_cast<double>(kMockBands);
  for (double& f : features) f -= mean;
  return features;
}

double zero_bin_fraction(const Spectrum& spectrum) {
  const std::size_t half = spectrum.size() / 2 + 1;
  const double peak = max_magnitude(spectrum);
  if (peak == 0.0) return 1.0;
  const double threshold = peak * kZeroBinRelative;
  std::size_t zeros = 0;
  for (std::size_t k = 0; k < half; ++k) {
    if (std::abs(spectrum.bins[k]) < threshold) ++zeros;
  }
  return static_cast<double>(zeros) / static_cast<double>(half);
}

std::size_t plateau_bins(const Spectrum& spectrum) {
  const std::size_t half = spectrum.size() / 2 + 1;
  const double peak = max_magnitude(spectrum);
  if (peak == 0.0) return 0;
  const double level = peak * (1.0 - kPlateauRelative);
  std::size_t count = 0;
  for (std::size_t k = 0; k < half && k < spectrum.size(); ++k) {
    if (std::abs(spectrum.bins[k]) >= level) ++count;
  }
  return count;
}

bool plateau_rejected(const Spectrum& spectrum, double fraction) {
  const double half = static_cast<double>(spectrum.size() / 2 + 1);
  return static_cast<double>(plateau_bins(spectrum)) > std::max(2.0, fraction * half);
}

MockOracleModel fit_mock(std::span<const LabeledAudio> corpus, const MockFitOptions& options) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "mock oracle needs at least one labelled file");
  std::vector<std::vector<double>> features(corpus.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    features[i] = mock_features(dft(corpus[i].audio));
  }

  std::map<std::string, std::pair<std::vector<double>, std::size_t>> sums;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto& [acc, count] = sums[corpus[i].label];
    if (acc.empty()) acc.assign(kMockBands, 0.0);
    for (std::size_t b = 0; b < kMockBands; ++b) acc[b] += features[i][b];
    ++count;
  }

  MockOracleModel model;
  model.zero_bin_rejection = options.zero_bin_rejection;
  model.plateau_rejection = options.plateau_rejection;
  for (auto& [label, entry] : sums) {
    auto& [acc, count] = entry;
    for (double& v : acc) v /= static_cast<double>(count);
    model.templates[label].push_back(acc);
  }

  std::vector<double> nearest(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) nearest[i] = nearest_template(model, features[i]).distance;
  model.rejection_distance = std::max(percentile(nearest, options.rejection_percentile), 1e-9);
  return model;
}

MockOracle::MockOracle(MockOracleModel model, std::string name) : model_(std::move(model)), name_(std::move(name)) {
  if (model_.templates.empty()) throw Error(ErrorKind::EmptyCorpus, "mock model has no templates");
  for (const auto& [label, vectors] : model_.templates) {
    if (vectors.empty()) throw Error(ErrorKind::InvalidArgument, "label '" + label + "' has no template");
  }
  if (!(model_.rejection_distance > 0.0)) throw Error(ErrorKind::InvalidArgument, "rejection distance must be > 0");
}

MockOracle::Decision MockOracle::decide(const AudioBuffer& buffer) const {
  Decision d;
  if (buffer.empty()) {
    d.rejected = true;
    d.zero_fraction = 1.0;
    return d;
  }
  const Spectrum s = dft(buffer);
  d.zero_fraction = zero_bin_fraction(s);
  d.plateau = plateau_bins(s);
  const auto nearest = nearest_template(model_, mock_features(s));
  d.nearest_label = nearest.label;
  d.distance = nearest.distance;
  d.rejected = d.zero_fraction >= 1.0 || d.zero_fraction > model_.zero_bin_rejection ||
               plateau_rejected(s, model_.plateau_rejection) || d.distance > model_.rejection_distance;
  return d;
}

Transcript MockOracle::transcribe(const AudioBuffer& buffer) const {
  const Decision d = decide(buffer);
  return d.rejected ? Transcript::empty() : Transcript::of(d.nearest_label);
}

// ---------------------------------------------------------------------------
// Remote oracle

void RemoteOracleConfig::validate() const {
  if (endpoint.empty()) throw Error(ErrorKind::InvalidArgument, "remote oracle endpoint is empty");
  if (timeout_ms <= 0) throw Error(ErrorKind::InvalidArgument, "timeout must be > 0");
  if (max_retries < 0) throw Error(ErrorKind::InvalidArgument, "retries must be >= 0");
  if (min_interval_ms < 0) throw Error(ErrorKind::InvalidArgument, "min interval must be >= 0");
}

namespace {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0f]);
  }
  return out;
}

}  // namespace

std::string content_hash(const AudioBuffer& buffer) { return sha256_hex(encode_wav(buffer)); }

Transcript parse_transcript_response(std::string_view body, std::string_view key_path) {
  const auto json = nlohmann::json::parse(body, nullptr, false);
  if (json.is_discarded()) throw Error(ErrorKind::RemoteUnavailable, "response is not JSON");
  const nlohmann::json* node = &json;
  std::size_t start = 0;
  while (start <= key_path.size()) {
    const auto dot = key_path.find('.', start);
    const auto key = key_path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    if (node->is_array()) {
      std::size_t index = 0;
      try {
        index = std::stoul(std::string(key));
      } catch (const std::exception&) {
        return Transcript::empty();
      }
      if (index >= node->size()) return Transcript::empty();
      node = &(*node)[index];
    } else if (node->is_object()) {
      const auto it = node->find(std::string(key));
      if (it == node->end()) return Transcript::empty();
      node = &*it;
    } else {
      return Transcript::empty();
    }
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  if (!node->is_string()) return Transcript::empty();
  return Transcript::of(node->get<std::string>());
}

RemoteOracle::RemoteOracle(RemoteOracleConfig config, std::string name)
    : config_(std::move(config)), name_(std::move(name)) {
  config_.validate();
  if (!config_.cache_path.empty()) std::filesystem::create_directories(config_.cache_path);
}

std::size_t RemoteOracle::network_requests() const {
  std::lock_guard lock(mutex_);
  return network_requests_;
}

std::optional<Transcript> RemoteOracle::cache_lookup(const std::string& key) const {
  if (const auto it = memory_cache_.find(key); it != memory_cache_.end()) return it->second;
  if (config_.cache_path.empty()) return std::nullopt;
  std::ifstream in(config_.cache_path / key, std::ios::binary);
  if (!in) return std::nullopt;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Transcript::of(text);
}

void RemoteOracle::cache_store(const std::string& key, const Transcript& t) const {
  memory_cache_[key] = t;
  if (config_.cache_path.empty()) return;
  const auto tmp = config_.cache_path / (key + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << t.text;
  }
  std::filesystem::rename(tmp, config_.cache_path / key);
}

namespace {

struct Endpoint {
  std::string base;  // scheme://host:port
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

Transcript RemoteOracle::request(const std::vector<std::uint8_t>& wav) const {
  const auto [base, path] = split_endpoint(config_.endpoint);
  httplib::Client client(base);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!config_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + config_.auth_token);

  ErrorKind last_kind = ErrorKind::RemoteUnavailable;
  std::string last_message = "no attempt made";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
    if (last_request_ && config_.min_interval_ms > 0) {
      const auto ready = *last_request_ + std::chrono::milliseconds(config_.min_interval_ms);
      std::this_thread::sleep_until(ready);
    }
    last_request_ = std::chrono::steady_clock::now();
    ++network_requests_;
    auto res = client.Post(path, headers, reinterpret_cast<const char*>(wav.data()), wav.size(), config_.content_type);
    if (!res) {
      last_kind = ErrorKind::RemoteUnavailable;
      last_message = httplib::to_string(res.error());
      spdlog::warn("remote oracle {}: {} (attempt {})", name_, last_message, attempt + 1);
      continue;
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw Error(ErrorKind::AuthFailure, "endpoint answered HTTP " + std::to_string(status));
    }
    if (status == 429) {
      last_kind = ErrorKind::RateLimited;
      last_message = "HTTP 429";
      continue;
    }
    if (status >= 500) {
      last_kind = ErrorKind::RemoteUnavailable;
      last_message = "HTTP " + std::to_string(status);
      continue;
    }
    if (status == 204) return Transcript::empty();
    if (status < 200 || status >= 300) {
      throw Error(ErrorKind::RemoteUnavailable, "endpoint answered HTTP " + std::to_string(status));
    }
    return parse_transcript_response(res->body, config_.transcript_key);
  }
  throw Error(last_kind, last_message + " after " + std::to_string(config_.max_retries + 1) + " attempts");
}

Transcript RemoteOracle::transcribe(const AudioBuffer& buffer) const {
  const auto wav = encode_wav(buffer);
  const std::string key = sha256_hex(wav);
  std::lock_guard lock(mutex_);
  if (auto cached = cache_lookup(key)) return *cached;
  Transcript t = request(wav);
  cache_store(key, t);
  return t;
}

// ---------------------------------------------------------------------------

std::vector<SegmentTranscript> transcribe_segmented(const Oracle& oracle, std::span<const AudioBuffer> segments) {
  if (segments.empty()) throw Error(ErrorKind::EmptyInput, "no segments to transcribe");
  std::vector<SegmentTranscript> out(segments.size());
  const bool parallel = oracle.concurrent_safe();
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::size_t i = 0; i < segments.size(); ++i) {
    try {
      out[i].transcript = oracle.transcribe(segments[i]);
    } catch (const Error& e) {
      out[i].transcript = Transcript::empty();
      out[i].error = e.kind();
      out[i].error_message = e.what();
    } catch (const std::exception& e) {
      out[i].transcript = Transcript::empty();
      out[i].error = ErrorKind::RemoteUnavailable;
      out[i].error_message = e.what();
    }
  }
  return out;
}

}  // namespace scaptcha
