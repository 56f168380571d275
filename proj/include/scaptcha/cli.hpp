#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scaptcha/asr.hpp"
#include "scaptcha/breaker.hpp"
#include "scaptcha/craft.hpp"
#include "scaptcha/detect.hpp"

namespace scaptcha::cli {

enum ExitCode : int { kExitOk = 0, kExitPartial = 2, kExitUsage = 64 };

/// Flat key-value configuration with sectioned keys. `[search]` followed by
/// `tolerance = 0.01` defines `search.tolerance`. Relative paths resolve
/// against the directory the value came from: the config file's directory, or
/// the working directory for command-line overrides.
class Config {
 public:
  static Config defaults();
  static Config load(const std::filesystem::path& path);
  static Config parse(std::istream& in, const std::filesystem::path& base_dir, const std::string& source = "<config>");

  /// Rejects unknown keys with UsageError.
  void set(const std::string& key, const std::string& value, const std::filesystem::path& base_dir);
  bool has(const std::string& key) const;

  std::string text(const std::string& key) const;
  double number(const std::string& key) const;
  long long integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;
  /// Empty path when the value is empty.
  std::filesystem::path path(const std::string& key) const;

  static bool known_key(const std::string& key);

 private:
  struct Entry {
    std::string value;
    std::filesystem::path base;
  };
  const Entry& entry(const std::string& key) const;
  std::map<std::string, Entry> values_;
};

struct OracleSpec {
  std::string name;
  std::string kind = "mock";  ///< mock | remote
  MockFitOptions mock;
  RemoteOracleConfig remote;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 0;  ///< 0: OpenMP default
  std::filesystem::path output_dir;
  std::filesystem::path manifest;
  std::vector<OracleSpec> oracles;  ///< the first one crafts and attacks

  double decimation_fraction = 0.02;
  bool random_td = false;
  double td_min = 0.01;
  double td_max = 0.05;

  SearchConfig search;
  NoiseSweepConfig sweep;

  int captcha_length = 6;
  int gap_ms = 500;
  std::string captcha_source = "yeehaw";  ///< yeehaw | kenansville | clean
  std::filesystem::path captcha_results_dir;

  std::filesystem::path dictionary;
  std::vector<std::string> vocabulary;  ///< empty: labels of the manifest
  std::filesystem::path stat_map;
  std::size_t min_support = 3;
  SegmenterConfig segmenter;

  std::filesystem::path noise_dir;
  std::filesystem::path detect_captcha_dir;
  std::filesystem::path eval_dir;
  CenterRule center_rule = CenterRule::Medoid;

  std::filesystem::path results_dir;
  std::filesystem::path attack_dir;
  std::filesystem::path profile_path;

  static RunConfig from(const Config& config);
};

struct ManifestEntry {
  std::string file;  ///< as written in the manifest
  std::filesystem::path path;
  std::string label;
};

/// Two columns per line, `relative/path.wav<TAB>label`; blank lines and `#`
/// comments are skipped.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Mock oracles are fitted on the manifest corpus.
std::unique_ptr<Oracle> make_oracle(const OracleSpec& spec, const std::vector<ManifestEntry>& corpus);

/// `a/b.wav` -> `a__b`.
std::string output_stem(const std::string& file);

/// Formats a double with the shortest round-trip representation.
std::string format_number(double value);

inline const std::vector<std::string> kSummaryColumns = {"file", "label", "T_d",     "alpha", "RMSE",
                                                         "queries", "success", "seed", "error"};

/// One CSV row per craft record, derived only from the record JSON.
std::vector<std::string> summary_row(const nlohmann::json& record);
std::string summary_csv(const std::vector<nlohmann::ordered_json>& records);

std::string csv_escape(const std::string& field);
std::string csv_line(const std::vector<std::string>& fields);

int cmd_craft(const RunConfig& config, Algorithm algorithm);
int cmd_assemble(const RunConfig& config, std::vector<std::string> labels, std::optional<int> length,
                 const std::string& name);
int cmd_verify(const std::filesystem::path& challenge_wav, const std::string& answer);
int cmd_attack(const RunConfig& config, const std::filesystem::path& challenge_wav);
int cmd_detect(const RunConfig& config);
int cmd_report(const RunConfig& config);

/// Entry point for `spectral-captcha`.
int run(int argc, char** argv);

}  // namespace scaptcha::cli
