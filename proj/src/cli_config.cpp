#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "scaptcha/cli.hpp"
#include "scaptcha/error.hpp"
#include "scaptcha/text.hpp"

#ifndef SCAPTCHA_DATA_DIR
#define SCAPTCHA_DATA_DIR "data"
#endif

namespace scaptcha::cli {
namespace {

namespace fs = std::filesystem;

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> d = {
      {"run.seed", "0"},
      {"run.workers", "0"},
      {"run.output_dir", "out"},
      {"corpus.manifest", ""},
      {"oracles.names", "mock"},
      {"perturb.decimation_fraction", "0.02"},
      {"perturb.random_td", "false"},
      {"perturb.td_min", "0.01"},
      {"perturb.td_max", "0.05"},
      {"search.lo", "0"},
      {"search.hi", "1"},
      {"search.tolerance", "0.00390625"},
      {"search.max_iterations", "64"},
      {"sweep.min_fraction", "1e-5"},
      {"sweep.max_fraction", "0.2"},
      {"sweep.amplitude_count", "46"},
      {"sweep.realizations", "5"},
      {"sweep.base_seed", ""},
      {"captcha.length", "6"},
      {"captcha.gap_ms", "500"},
      {"captcha.source", "yeehaw"},
      {"captcha.results_dir", ""},
      {"attack.dictionary", SCAPTCHA_DATA_DIR "/cmudict-mini.txt"},
      {"attack.vocabulary", ""},
      {"attack.stat_map", ""},
      {"attack.min_support", "3"},
      {"segmenter.frame_ms", "25"},
      {"segmenter.hop_ms", "10"},
      {"segmenter.voiced_ratio", "0.05"},
      {"segmenter.min_silence_ms", "200"},
      {"segmenter.min_segment_ms", "100"},
      {"detect.noise_dir", ""},
      {"detect.captcha_dir", ""},
      {"detect.eval_dir", ""},
      {"detect.center_rule", "medoid"},
      {"report.results_dir", ""},
      {"report.attack_dir", ""},
      {"report.profile", ""},
  };
  return d;
}

const std::set<std::string>& oracle_fields() {
  static const std::set<std::string> f = {
      "kind",        "zero_bin_rejection", "plateau_rejection", "rejection_percentile", "endpoint",     "auth_token",
      "timeout_ms",  "max_retries",        "min_interval_ms",      "cache_path",   "transcript_key",
      "content_type", "backoff_ms",
  };
  return f;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string oracle_key(const std::string& name, const std::string& field) { return "oracle." + name + "." + field; }

}  // namespace

bool Config::known_key(const std::string& key) {
  if (default_values().count(key) > 0) return true;
  if (!key.starts_with("oracle.")) return false;
  const auto dot = key.rfind('.');
  if (dot <= 7) return false;
  return oracle_fields().count(key.substr(dot + 1)) > 0;
}

Config Config::defaults() {
  Config c;
  for (const auto& [k, v] : default_values()) c.values_[k] = Entry{v, fs::current_path()};
  // The built-in dictionary path is absolute or relative to the build tree.
  c.values_["attack.dictionary"].base = fs::path(SCAPTCHA_DATA_DIR).is_absolute() ? fs::path{} : fs::current_path();
  return c;
}

Config Config::parse(std::istream& in, const fs::path& base_dir, const std::string& source) {
  Config c = defaults();
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        throw Error(ErrorKind::UsageError, fmt::format("{}:{}: unterminated section header", source, line_no));
      }
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::UsageError, fmt::format("{}:{}: expected key = value", source, line_no));
    }
    const std::string key = trim(std::string_view(s).substr(0, eq));
    const std::string value = trim(std::string_view(s).substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    try {
      c.set(full, value, base_dir);
    } catch (const Error& e) {
      throw Error(ErrorKind::UsageError, fmt::format("{}:{}: unknown key '{}'", source, line_no, full));
    }
  }
  return c;
}

Config Config::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::UsageError, "cannot read config " + path.string());
  return parse(in, fs::absolute(path).parent_path(), path.string());
}

void Config::set(const std::string& key, const std::string& value, const fs::path& base_dir) {
  if (!known_key(key)) throw Error(ErrorKind::UsageError, "unknown config key '" + key + "'");
  values_[key] = Entry{value, base_dir};
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

const Config::Entry& Config::entry(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorKind::UsageError, "missing config key '" + key + "'");
  return it->second;
}

std::string Config::text(const std::string& key) const { return entry(key).value; }

double Config::number(const std::string& key) const {
  const std::string& v = entry(key).value;
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) {
    throw Error(ErrorKind::UsageError, fmt::format("'{}' must be a number, got '{}'", key, v));
  }
  return d;
}

long long Config::integer(const std::string& key) const {
  const std::string& v = entry(key).value;
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw Error(ErrorKind::UsageError, fmt::format("'{}' must be an integer, got '{}'", key, v));
  }
  return out;
}

bool Config::flag(const std::string& key) const {
  const std::string v = normalize_text(entry(key).value);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw Error(ErrorKind::UsageError, fmt::format("'{}' must be true or false, got '{}'", key, v));
}

std::vector<std::string> Config::list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(entry(key).value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

fs::path Config::path(const std::string& key) const {
  const Entry& e = entry(key);
  if (e.value.empty()) return {};
  const fs::path p(e.value);
  if (p.is_absolute() || e.base.empty()) return p.lexically_normal();
  return (e.base / p).lexically_normal();
}

RunConfig RunConfig::from(const Config& c) {
  RunConfig r;
  const long long seed = c.integer("run.seed");
  if (seed < 0) throw Error(ErrorKind::UsageError, "run.seed must be >= 0");
  r.seed = static_cast<std::uint64_t>(seed);
  r.workers = static_cast<int>(c.integer("run.workers"));
  if (r.workers < 0) throw Error(ErrorKind::UsageError, "run.workers must be >= 0");
  r.output_dir = c.path("run.output_dir");
  r.manifest = c.path("corpus.manifest");

  const auto names = c.list("oracles.names");
  if (names.empty()) throw Error(ErrorKind::UsageError, "oracles.names lists no oracle");
  for (const auto& name : names) {
    OracleSpec spec;
    spec.name = name;
    auto get = [&](const std::string& field) -> std::optional<std::string> {
      const std::string k = oracle_key(name, field);
      if (!c.has(k)) return std::nullopt;
      return c.text(k);
    };
    if (auto kind = get("kind")) spec.kind = *kind;
    if (spec.kind != "mock" && spec.kind != "remote") {
      throw Error(ErrorKind::UsageError, "oracle '" + name + "': kind must be mock or remote");
    }
    if (get("zero_bin_rejection")) spec.mock.zero_bin_rejection = c.number(oracle_key(name, "zero_bin_rejection"));
    if (get("plateau_rejection")) spec.mock.plateau_rejection = c.number(oracle_key(name, "plateau_rejection"));
    if (get("rejection_percentile")) {
      spec.mock.rejection_percentile = c.number(oracle_key(name, "rejection_percentile"));
    }
    if (auto v = get("endpoint")) spec.remote.endpoint = *v;
    if (auto v = get("auth_token")) spec.remote.auth_token = *v;
    if (get("timeout_ms")) spec.remote.timeout_ms = static_cast<int>(c.integer(oracle_key(name, "timeout_ms")));
    if (get("max_retries")) spec.remote.max_retries = static_cast<int>(c.integer(oracle_key(name, "max_retries")));
    if (get("min_interval_ms")) {
      spec.remote.min_interval_ms = static_cast<int>(c.integer(oracle_key(name, "min_interval_ms")));
    }
    if (get("cache_path")) spec.remote.cache_path = c.path(oracle_key(name, "cache_path"));
    if (auto v = get("transcript_key")) spec.remote.transcript_key = *v;
    if (auto v = get("content_type")) spec.remote.content_type = *v;
    if (get("backoff_ms")) spec.remote.backoff_ms = static_cast<int>(c.integer(oracle_key(name, "backoff_ms")));
    if (spec.kind == "remote") {
      try {
        spec.remote.validate();
      } catch (const Error& e) {
        throw Error(ErrorKind::UsageError, "oracle '" + name + "': " + e.what());
      }
    }
    r.oracles.push_back(std::move(spec));
  }

  r.decimation_fraction = c.number("perturb.decimation_fraction");
  r.random_td = c.flag("perturb.random_td");
  r.td_min = c.number("perturb.td_min");
  r.td_max = c.number("perturb.td_max");
  if (!(r.decimation_fraction >= 0.0 && r.decimation_fraction <= 1.0)) {
    throw Error(ErrorKind::UsageError, "perturb.decimation_fraction must lie in [0, 1]");
  }
  if (r.random_td && !(0.0 <= r.td_min && r.td_min <= r.td_max && r.td_max <= 1.0)) {
    throw Error(ErrorKind::UsageError, "perturb.td_min/td_max must satisfy 0 <= min <= max <= 1");
  }

  r.search.lo = c.number("search.lo");
  r.search.hi = c.number("search.hi");
  r.search.tolerance = c.number("search.tolerance");
  r.search.max_iterations = static_cast<std::size_t>(std::max(0LL, c.integer("search.max_iterations")));
  r.sweep.min_fraction = c.number("sweep.min_fraction");
  r.sweep.max_fraction = c.number("sweep.max_fraction");
  r.sweep.amplitude_count = static_cast<std::size_t>(std::max(0LL, c.integer("sweep.amplitude_count")));
  r.sweep.realizations_per_amplitude = static_cast<std::size_t>(std::max(0LL, c.integer("sweep.realizations")));
  r.sweep.base_seed = c.text("sweep.base_seed").empty() ? r.seed
                                                        : static_cast<std::uint64_t>(c.integer("sweep.base_seed"));
  try {
    r.search.validate();
    r.sweep.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::UsageError, e.what());
  }

  r.captcha_length = static_cast<int>(c.integer("captcha.length"));
  r.gap_ms = static_cast<int>(c.integer("captcha.gap_ms"));
  r.captcha_source = c.text("captcha.source");
  if (r.captcha_source != "yeehaw" && r.captcha_source != "kenansville" && r.captcha_source != "clean") {
    throw Error(ErrorKind::UsageError, "captcha.source must be yeehaw, kenansville or clean");
  }
  if (r.captcha_length < 1) throw Error(ErrorKind::UsageError, "captcha.length must be >= 1");
  if (r.gap_ms < 0) throw Error(ErrorKind::UsageError, "captcha.gap_ms must be >= 0");
  r.captcha_results_dir = c.path("captcha.results_dir");
  if (r.captcha_results_dir.empty() && r.captcha_source != "clean") {
    r.captcha_results_dir = r.output_dir / "craft" / r.captcha_source;
  }

  r.dictionary = c.path("attack.dictionary");
  r.vocabulary = c.list("attack.vocabulary");
  r.stat_map = c.path("attack.stat_map");
  r.min_support = static_cast<std::size_t>(std::max(1LL, c.integer("attack.min_support")));
  r.segmenter.frame_ms = c.number("segmenter.frame_ms");
  r.segmenter.hop_ms = c.number("segmenter.hop_ms");
  r.segmenter.voiced_ratio = c.number("segmenter.voiced_ratio");
  r.segmenter.min_silence_ms = c.number("segmenter.min_silence_ms");
  r.segmenter.min_segment_ms = c.number("segmenter.min_segment_ms");

  r.noise_dir = c.path("detect.noise_dir");
  r.detect_captcha_dir = c.path("detect.captcha_dir");
  if (r.detect_captcha_dir.empty()) r.detect_captcha_dir = r.output_dir / "craft" / "yeehaw";
  r.eval_dir = c.path("detect.eval_dir");
  const std::string rule = normalize_text(c.text("detect.center_rule"));
  if (rule == "medoid") {
    r.center_rule = CenterRule::Medoid;
  } else if (rule == "minimax") {
    r.center_rule = CenterRule::Minimax;
  } else {
    throw Error(ErrorKind::UsageError, "detect.center_rule must be medoid or minimax");
  }

  r.results_dir = c.path("report.results_dir");
  if (r.results_dir.empty()) r.results_dir = r.output_dir / "craft" / "yeehaw";
  r.attack_dir = c.path("report.attack_dir");
  if (r.attack_dir.empty()) r.attack_dir = r.output_dir / "attack";
  r.profile_path = c.path("report.profile");
  if (r.profile_path.empty()) r.profile_path = r.output_dir / "detect" / "profile.json";
  return r;
}

}  // namespace scaptcha::cli
