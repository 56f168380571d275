#include <omp.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "scaptcha/cli.hpp"
#include "scaptcha/error.hpp"
#include "scaptcha/perturb.hpp"
#include "scaptcha/phonetics.hpp"
#include "scaptcha/text.hpp"

namespace scaptcha::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path.string());
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::UsageError, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int pool_size(const RunConfig& config, const Oracle& oracle) {
  if (!oracle.concurrent_safe()) return 1;
  return config.workers > 0 ? config.workers : omp_get_max_threads();
}

std::vector<ManifestEntry> require_manifest(const RunConfig& config) {
  if (config.manifest.empty()) throw Error(ErrorKind::UsageError, "corpus.manifest is not set");
  return read_manifest(config.manifest);
}

/// Manifest entries are only needed to fit mock oracles.
std::vector<ManifestEntry> corpus_for_oracles(const RunConfig& config) {
  const bool needs_corpus =
      std::any_of(config.oracles.begin(), config.oracles.end(), [](const OracleSpec& s) { return s.kind == "mock"; });
  return needs_corpus ? require_manifest(config) : std::vector<ManifestEntry>{};
}

std::vector<std::string> manifest_labels(const std::vector<ManifestEntry>& entries) {
  std::set<std::string> labels;
  for (const auto& e : entries) labels.insert(e.label);
  return {labels.begin(), labels.end()};
}

ordered_json error_json(const std::exception& e) {
  ordered_json j;
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    j["kind"] = std::string(to_string(err->kind()));
  } else {
    j["kind"] = "InternalError";
  }
  j["message"] = e.what();
  return j;
}

fs::path challenge_manifest_path(const fs::path& wav) {
  fs::path p = wav;
  p.replace_extension(".json");
  return p;
}

CaptchaChallenge load_challenge(const fs::path& wav) {
  const fs::path manifest = challenge_manifest_path(wav);
  if (!fs::exists(manifest)) throw Error(ErrorKind::UsageError, "challenge manifest not found: " + manifest.string());
  if (!fs::exists(wav)) throw Error(ErrorKind::UsageError, "challenge audio not found: " + wav.string());
  return challenge_from_manifest(read_json(manifest), load_wav(wav));
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const {
    std::string out = csv_line(header);
    for (const auto& r : rows) out += csv_line(r);
    return out;
  }
};

void print_table(const std::string& title, const Table& t) {
  std::vector<std::size_t> width(t.header.size(), 0);
  auto measure = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size() && i < width.size(); ++i) width[i] = std::max(width[i], row[i].size());
  };
  measure(t.header);
  for (const auto& r : t.rows) measure(r);
  auto print_row = [&](const std::vector<std::string>& row) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) line += fmt::format("{:<{}}  ", row[i], width[i]);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    std::cout << line << "\n";
  };
  std::cout << title << "\n";
  print_row(t.header);
  for (const auto& r : t.rows) print_row(r);
  std::cout << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::UsageError, "cannot read manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw Error(ErrorKind::ParseError, fmt::format("{}:{}: expected <path>TAB<label>", path.string(), line_no));
    }
    ManifestEntry e;
    e.file = line.substr(0, tab);
    e.label = normalize_text(line.substr(tab + 1));
    e.path = (base / e.file).lexically_normal();
    out.push_back(std::move(e));
  }
  if (out.empty()) throw Error(ErrorKind::EmptyCorpus, "manifest lists no files: " + path.string());
  return out;
}

std::unique_ptr<Oracle> make_oracle(const OracleSpec& spec, const std::vector<ManifestEntry>& corpus) {
  if (spec.kind == "remote") return std::make_unique<RemoteOracle>(spec.remote, spec.name);
  std::vector<LabeledAudio> labeled(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) labeled[i] = {corpus[i].label, load_wav(corpus[i].path)};
  return std::make_unique<MockOracle>(fit_mock(labeled, spec.mock), spec.name);
}

std::string output_stem(const std::string& file) {
  fs::path p(file);
  p.replace_extension();
  std::string s = p.generic_string();
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '/') {
      out += "__";
    } else if (s[i] == '.' && (i == 0 || s[i - 1] == '/') && i + 1 < s.size() && s[i + 1] == '.') {
      out += "up";
      ++i;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::string format_number(double value) { return fmt::format("{}", value); }

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_escape(fields[i]);
  }
  return out + "\n";
}

std::vector<std::string> summary_row(const nlohmann::json& record) {
  std::vector<std::string> row;
  row.push_back(record.at("file").get<std::string>());
  row.push_back(record.at("label").get<std::string>());
  if (record.contains("result")) {
    const auto& r = record["result"];
    row.push_back(format_number(r.at("t_d_frac").get<double>()));
    row.push_back(format_number(r.at("alpha").get<double>()));
    row.push_back(format_number(r.at("distortion_rmse").get<double>()));
    row.push_back(std::to_string(r.at("oracle_queries").get<std::size_t>()));
    row.push_back(r.at("success").get<bool>() ? "true" : "false");
  } else {
    row.insert(row.end(), {"", "", "", "", "false"});
  }
  row.push_back(std::to_string(record.at("seed").get<std::uint64_t>()));
  row.push_back(record.contains("error") ? record["error"].at("kind").get<std::string>() : "");
  return row;
}

std::string summary_csv(const std::vector<ordered_json>& records) {
  std::string out = csv_line(kSummaryColumns);
  for (const auto& r : records) out += csv_line(summary_row(r));
  return out;
}

// ---------------------------------------------------------------------------

int cmd_craft(const RunConfig& config, Algorithm algorithm) {
  const auto entries = require_manifest(config);
  const auto oracle = make_oracle(config.oracles.front(), entries);
  const fs::path dir = config.output_dir / "craft" / std::string(to_string(algorithm));
  fs::create_directories(dir);
  const int workers = pool_size(config, *oracle);
  spdlog::info("craft {}: {} files, oracle '{}', {} worker(s)", to_string(algorithm), entries.size(), oracle->name(),
               workers);

  std::vector<ordered_json> records(entries.size());
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    ordered_json rec;
    rec["file"] = e.file;
    rec["label"] = e.label;
    rec["oracle"] = oracle->name();
    rec["seed"] = config.seed;
    try {
      const AudioBuffer audio = load_wav(e.path);
      CraftResult result;
      if (algorithm == Algorithm::Kenansville) {
        result = craft_kenansville(audio, e.label, *oracle, config.search);
      } else {
        double td = config.decimation_fraction;
        if (config.random_td) {
          std::mt19937_64 rng(variant_seed(config.seed, i, 0));
          td = config.td_min + (config.td_max - config.td_min) * std::generate_canonical<double, 53>(rng);
        }
        result = craft_yeehaw(audio, *oracle, td, config.sweep, config.search, e.label);
      }
      save_wav(result.perturbed, dir / (output_stem(e.file) + ".wav"));
      rec["result"] = to_json(result);
    } catch (const std::exception& ex) {
      rec["error"] = error_json(ex);
      spdlog::warn("{}: {}", e.file, ex.what());
    }
    records[i] = std::move(rec);
  }

  std::size_t failures = 0;
  std::size_t successes = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    write_json(dir / (output_stem(entries[i].file) + ".json"), records[i]);
    if (records[i].contains("error")) {
      ++failures;
    } else if (records[i]["result"]["success"].get<bool>()) {
      ++successes;
    }
  }
  write_text(dir / "summary.csv", summary_csv(records));
  std::cout << fmt::format("{}: {} of {} files crafted successfully, {} errors; results in {}\n", to_string(algorithm),
                           successes, entries.size(), failures, dir.string());
  return failures > 0 ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_assemble(const RunConfig& config, std::vector<std::string> labels, std::optional<int> length,
                 const std::string& name) {
  for (auto& l : labels) l = normalize_text(l);
  if (!labels.empty() && length && *length != static_cast<int>(labels.size())) {
    throw Error(ErrorKind::UsageError, "--length disagrees with the number of --labels");
  }
  if (length && *length < 1) throw Error(ErrorKind::UsageError, "--length must be >= 1");

  // First usable result per label, in file order.
  std::map<std::string, std::pair<CraftResult, std::string>> available;
  if (config.captcha_source == "clean") {
    for (const auto& e : require_manifest(config)) {
      if (available.count(e.label) > 0) continue;
      CraftResult r;
      r.label = e.label;
      r.perturbed = load_wav(e.path);
      r.success = true;
      available.emplace(e.label, std::make_pair(std::move(r), e.file));
    }
  } else {
    for (const auto& json_path : files_with_extension(config.captcha_results_dir, ".json")) {
      const auto rec = read_json(json_path);
      if (!rec.contains("result") || !rec["result"].value("success", false)) continue;
      const std::string label = rec.at("label").get<std::string>();
      if (available.count(label) > 0) continue;
      CraftResult r = craft_result_from_json(rec["result"]);
      fs::path wav = json_path;
      wav.replace_extension(".wav");
      r.perturbed = load_wav(wav);
      available.emplace(label, std::make_pair(std::move(r), rec.at("file").get<std::string>()));
    }
  }

  if (labels.empty()) {
    const int n = length.value_or(config.captcha_length);
    if (available.empty()) {
      throw Error(ErrorKind::MissingCraftedLabel, "no successful results in " + config.captcha_results_dir.string());
    }
    std::vector<std::string> pool;
    for (const auto& [label, r] : available) pool.push_back(label);
    std::mt19937_64 rng(config.seed);
    for (int i = 0; i < n; ++i) labels.push_back(pool[rng() % pool.size()]);
  }

  std::vector<LabeledResult> parts;
  ordered_json sources = ordered_json::array();
  for (const auto& label : labels) {
    const auto it = available.find(label);
    if (it == available.end()) {
      throw Error(ErrorKind::MissingCraftedLabel, "no successful " + config.captcha_source + " result for '" + label + "'");
    }
    parts.push_back({&it->second.first, label});
    sources.push_back(it->second.second);
  }
  const CaptchaChallenge challenge = assemble_captcha(parts, config.gap_ms, config.seed);

  const fs::path dir = config.output_dir / "challenges";
  fs::create_directories(dir);
  save_wav(challenge.audio, dir / (name + ".wav"));
  ordered_json manifest = challenge_manifest(challenge);
  manifest["source"] = config.captcha_source;
  manifest["files"] = sources;
  write_json(dir / (name + ".json"), manifest);
  std::cout << fmt::format("{}-utterance challenge written to {}\n", labels.size(), (dir / (name + ".wav")).string());
  return kExitOk;
}

int cmd_verify(const fs::path& challenge_wav, const std::string& answer) {
  const CaptchaChallenge challenge = load_challenge(challenge_wav);
  const bool ok = verify_answer(challenge, answer);
  std::cout << (ok ? "correct" : "incorrect") << "\n";
  return ok ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------

int cmd_attack(const RunConfig& config, const fs::path& challenge_wav) {
  const CaptchaChallenge challenge = load_challenge(challenge_wav);
  const auto corpus = corpus_for_oracles(config);
  std::vector<std::string> vocabulary = config.vocabulary;
  for (auto& v : vocabulary) v = normalize_text(v);
  if (vocabulary.empty()) vocabulary = manifest_labels(corpus.empty() ? require_manifest(config) : corpus);

  const auto oracle = make_oracle(config.oracles.front(), corpus);
  const PronouncingDictionary dict = PronouncingDictionary::load(config.dictionary);
  StatMap stat_map(config.min_support);
  if (!config.stat_map.empty() && fs::exists(config.stat_map)) stat_map = StatMap::from_json(read_json(config.stat_map));

  const int workers = pool_size(config, *oracle);
  omp_set_num_threads(workers);
  const BreakerReport report =
      run_breaker(challenge, *oracle, dict, vocabulary, stat_map, config.sweep, config.segmenter);

  const std::string stem = challenge_wav.stem().string();
  const fs::path dir = config.output_dir / "attack";
  ordered_json j;
  j["challenge"] = challenge_wav.filename().string();
  j["oracle"] = oracle->name();
  j["seed"] = challenge.seed;
  j["sweep_base_seed"] = config.sweep.base_seed;
  const ordered_json body = to_json(report);
  for (const auto& [k, v] : body.items()) j[k] = v;
  write_json(dir / (stem + ".report.json"), j);

  // Exact-match accuracy of the noised variants against the true label, per
  // noise level, with the RMSE each level adds.
  const auto plan = sweep_plan(config.sweep);
  const auto fractions = sweep_fractions(config.sweep);
  std::vector<double> rmse_sum(fractions.size(), 0.0);
  std::vector<std::size_t> correct(fractions.size(), 0), total(fractions.size(), 0);
  std::vector<AudioSegment> segments;
  try {
    segments = segment_challenge(challenge.audio, config.segmenter);
  } catch (const Error&) {
  }
  for (std::size_t s = 0; s < segments.size() && s < report.variant_transcripts.size(); ++s) {
    const auto& transcripts = report.variant_transcripts[s];
    if (transcripts.size() != plan.size()) continue;
    const std::string truth = s < challenge.answer.size() ? normalize_text(challenge.answer[s]) : std::string();
    for (std::size_t v = 0; v < plan.size(); ++v) {
      const std::size_t a = plan[v].amplitude_index;
      rmse_sum[a] += rmse(make_variant(segments[s].audio, plan[v]), segments[s].audio);
      ++total[a];
      if (!truth.empty() && normalize_text(transcripts[v].text) == truth) ++correct[a];
    }
  }
  Table acc{{"amplitude_index", "noise_fraction", "mean_rmse", "accuracy", "variants"}, {}};
  for (std::size_t a = 0; a < fractions.size(); ++a) {
    if (total[a] == 0) continue;
    acc.rows.push_back({std::to_string(a), format_number(fractions[a]),
                        format_number(rmse_sum[a] / static_cast<double>(total[a])),
                        format_number(static_cast<double>(correct[a]) / static_cast<double>(total[a])),
                        std::to_string(total[a])});
  }
  write_text(dir / (stem + ".accuracy.csv"), acc.csv());

  if (!config.stat_map.empty() && report.segments.size() == challenge.answer.size()) {
    for (std::size_t s = 0; s < report.segments.size(); ++s) {
      if (!normalize_text(report.segments[s].transcript).empty()) {
        stat_map.update(report.segments[s].transcript, challenge.answer[s]);
      }
    }
    write_json(config.stat_map, stat_map.to_json());
  }

  const bool segment_errors = std::any_of(report.segments.begin(), report.segments.end(),
                                          [](const SegmentReport& s) { return s.error.has_value(); });
  std::cout << fmt::format("answer '{}' expected '{}': {} ({} segments, {} oracle queries)\n", report.answer,
                           fmt::join(report.expected, " "), report.success ? "broken" : "not broken",
                           report.segments.size(), report.oracle_queries);
  return segment_errors ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_detect(const RunConfig& config) {
  if (config.noise_dir.empty()) throw Error(ErrorKind::UsageError, "detect.noise_dir is not set");
  struct Item {
    std::string set;
    std::string file;
    AudioBuffer audio;
    std::vector<ActivationVector> activations;
    Transcript transcript;
  };
  std::vector<Item> items;
  for (const auto& p : files_with_extension(config.noise_dir, ".wav")) {
    items.push_back({"noise", "noise/" + p.filename().string(), load_wav(p), {}, {}});
  }
  for (const auto& p : files_with_extension(config.detect_captcha_dir, ".wav")) {
    fs::path rec = p;
    rec.replace_extension(".json");
    if (fs::exists(rec)) {
      const auto j = read_json(rec);
      if (j.contains("result") && !j["result"].value("success", false)) continue;
    }
    items.push_back({"captcha", "captcha/" + p.filename().string(), load_wav(p), {}, {}});
  }
  if (!config.eval_dir.empty()) {
    for (const auto& p : files_with_extension(config.eval_dir, ".wav")) {
      items.push_back({"eval", "eval/" + p.filename().string(), load_wav(p), {}, {}});
    }
  }

  const SpectralStatsProvider provider;
  const int threads = config.workers > 0 ? config.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t i = 0; i < items.size(); ++i) items[i].activations = provider.extract(items[i].audio);

  std::vector<std::vector<ActivationVector>> noise, captcha;
  for (const auto& it : items) {
    if (it.set == "noise") noise.push_back(it.activations);
    if (it.set == "captcha") captcha.push_back(it.activations);
  }
  const DetectionProfile profile = calibrate_profile(noise, captcha, config.center_rule);

  const auto oracle = make_oracle(config.oracles.front(), corpus_for_oracles(config));
  const int workers = pool_size(config, *oracle);
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::size_t i = 0; i < items.size(); ++i) items[i].transcript = oracle->transcribe(items[i].audio);

  const std::size_t layers = profile.layers.size();
  Table cls{{"file", "set", "transcript", "exceeds_tau", "verdict"}, {}};
  for (std::size_t l = 0; l < layers; ++l) cls.header.push_back(fmt::format("distance_{}", l));
  std::vector<std::size_t> tp(layers + 1, 0), fp(layers + 1, 0), fn(layers + 1, 0);
  std::map<std::pair<std::size_t, std::string>, std::vector<double>> by_class;
  for (const auto& it : items) {
    const bool exceeds = exceeds_any_tau(profile, it.activations);
    const Verdict verdict = classify_input(it.audio, it.transcript, profile, provider);
    std::vector<std::string> row{it.file, it.set, it.transcript.text, exceeds ? "true" : "false",
                                 std::string(to_string(verdict))};
    for (std::size_t l = 0; l < layers; ++l) {
      const double d = distance_profile(profile.layers[l].center, std::span(&it.activations[l], 1)).front();
      row.push_back(format_number(d));
      if (it.set != "eval") {
        by_class[{l, it.set}].push_back(d);
        const bool flagged = d > profile.layers[l].calibration.tau;
        if (flagged && it.set == "captcha") ++tp[l];
        if (flagged && it.set == "noise") ++fp[l];
        if (!flagged && it.set == "captcha") ++fn[l];
      }
    }
    if (it.set == "captcha") (exceeds ? tp[layers] : fn[layers])++;
    if (it.set == "noise" && exceeds) ++fp[layers];
    cls.rows.push_back(std::move(row));
  }

  auto ratio = [](std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; };
  ordered_json metrics;
  metrics["noise_files"] = noise.size();
  metrics["captcha_files"] = captcha.size();
  metrics["precision"] = ratio(tp[layers], tp[layers] + fp[layers]);
  metrics["recall"] = ratio(tp[layers], tp[layers] + fn[layers]);
  auto& lm = metrics["layers"] = ordered_json::array();
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& c = profile.layers[l].calibration;
    lm.push_back({{"tau", c.tau},
                  {"calibrated_precision", c.precision},
                  {"calibrated_recall", c.recall},
                  {"precision", ratio(tp[l], tp[l] + fp[l])},
                  {"recall", ratio(tp[l], tp[l] + fn[l])}});
  }

  Table cdf{{"layer", "class", "distance", "cdf"}, {}};
  for (auto& [key, values] : by_class) {
    std::sort(values.begin(), values.end());
    for (std::size_t i = 0; i < values.size(); ++i) {
      cdf.rows.push_back({std::to_string(key.first), key.second, format_number(values[i]),
                          format_number(static_cast<double>(i + 1) / static_cast<double>(values.size()))});
    }
  }

  Table evasion{{"captcha_length", "recall", "evasion_probability", "evasion_percent"}, {}};
  for (int n = 1; n <= 10; ++n) {
    const double p = evasion_probability(profile.recall, n);
    evasion.rows.push_back({std::to_string(n), format_number(profile.recall), format_number(p), format_number(100.0 * p)});
  }

  const fs::path dir = config.output_dir / "detect";
  write_json(dir / "profile.json", to_json(profile));
  write_json(dir / "metrics.json", metrics);
  write_text(dir / "classification.csv", cls.csv());
  write_text(dir / "cdf.csv", cdf.csv());
  write_text(dir / "evasion.csv", evasion.csv());
  std::cout << fmt::format("detector: precision {} recall {} over {} noise and {} captcha files\n",
                           format_number(profile.precision), format_number(profile.recall), noise.size(),
                           captcha.size());
  print_table("evasion probability by CAPTCHA length", evasion);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_report(const RunConfig& config) {
  struct Sample {
    std::string file;
    std::string label;
    std::string source;
    AudioBuffer audio;
  };
  std::vector<Sample> samples;
  if (fs::is_directory(config.results_dir)) {
    for (const auto& json_path : files_with_extension(config.results_dir, ".json")) {
      const auto rec = read_json(json_path);
      if (!rec.contains("result") || !rec["result"].value("success", false)) continue;
      fs::path wav = json_path;
      wav.replace_extension(".wav");
      samples.push_back({rec.at("file").get<std::string>(), rec.at("label").get<std::string>(),
                         rec.value("oracle", std::string("unknown")), load_wav(wav)});
    }
  }

  const auto corpus = corpus_for_oracles(config);
  std::vector<std::unique_ptr<Oracle>> oracles;
  for (const auto& spec : config.oracles) oracles.push_back(make_oracle(spec, corpus));
  const PronouncingDictionary dict = PronouncingDictionary::load(config.dictionary);

  // transcripts[o][s]
  std::vector<std::vector<Transcript>> transcripts(oracles.size(), std::vector<Transcript>(samples.size()));
  for (std::size_t o = 0; o < oracles.size(); ++o) {
    const int workers = pool_size(config, *oracles[o]);
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (std::size_t s = 0; s < samples.size(); ++s) transcripts[o][s] = oracles[o]->transcribe(samples[s].audio);
  }

  std::set<std::string> sources;
  for (const auto& s : samples) sources.insert(s.source);
  ordered_json out;
  out["results_dir"] = config.results_dir.filename().string();
  out["samples"] = samples.size();
  out["seed"] = config.seed;
  const fs::path dir = config.output_dir / "report";
  fs::create_directories(dir);

  // (a) evasion matrix: share of source-crafted samples each target transcribes as empty.
  std::vector<double> evasion_rate(oracles.size(), 0.0);
  for (std::size_t o = 0; o < oracles.size(); ++o) {
    std::size_t empty = 0;
    for (const auto& t : transcripts[o]) empty += t.is_empty ? 1 : 0;
    evasion_rate[o] = samples.empty() ? 0.0 : static_cast<double>(empty) / static_cast<double>(samples.size());
  }
  if (oracles.size() >= 2) {
    Table matrix{{"source"}, {}};
    for (const auto& o : oracles) matrix.header.push_back(o->name());
    for (const auto& src : sources) {
      std::vector<std::string> row{src};
      for (std::size_t o = 0; o < oracles.size(); ++o) {
        std::size_t n = 0, empty = 0;
        for (std::size_t s = 0; s < samples.size(); ++s) {
          if (samples[s].source != src) continue;
          ++n;
          empty += transcripts[o][s].is_empty ? 1 : 0;
        }
        row.push_back(format_number(n == 0 ? 0.0 : static_cast<double>(empty) / static_cast<double>(n)));
      }
      matrix.rows.push_back(std::move(row));
    }
    write_text(dir / "evasion_matrix.csv", matrix.csv());
    print_table("cross-oracle evasion rate (rows: crafting oracle, columns: target oracle)", matrix);
    out["matrix"] = "evasion_matrix.csv";
  } else {
    const std::string notice = "cross-oracle evasion matrix omitted: only one oracle is configured";
    std::cout << notice << "\n\n";
    out["matrix"] = nullptr;
    out["notice"] = notice;
  }

  // (b) phonetic Levenshtein between label and transcript, not normalized by length.
  Table phon{{"oracle", "samples", "skipped_out_of_vocabulary", "mean_phonetic_levenshtein_unnormalized",
              "evasion_rate"},
             {}};
  for (std::size_t o = 0; o < oracles.size(); ++o) {
    double sum = 0.0;
    std::size_t n = 0, skipped = 0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      try {
        sum += static_cast<double>(phonetic_distance(samples[s].label, transcripts[o][s].text, dict));
        ++n;
      } catch (const OutOfVocabularyError&) {
        ++skipped;
      }
    }
    phon.rows.push_back({oracles[o]->name(), std::to_string(n), std::to_string(skipped),
                         n == 0 ? std::string() : format_number(sum / static_cast<double>(n)),
                         format_number(evasion_rate[o])});
  }
  write_text(dir / "phonetic.csv", phon.csv());
  print_table("phonetic distance of transcripts to the true label", phon);

  // (c) probability tables.
  Table prob{{"quantity", "source", "per_label_rate", "captcha_length", "probability", "percent", "published"}, {}};
  auto add = [&](const std::string& quantity, const std::string& source, double rate, int n, double p,
                 const std::string& published) {
    prob.rows.push_back({quantity, source, format_number(rate), std::to_string(n), format_number(p),
                         format_number(100.0 * p), published});
  };
  add("transfer_failure", "published", 0.81, 6, transfer_failure_probability(0.81, 6), "4e-05");
  add("break", "published", 0.51, 6, break_probability(0.51, 6), "1.76e-02");
  add("break", "published", 0.41, 6, break_probability(0.41, 6), "4.75e-03");
  add("evasion", "published", 0.89, 6, evasion_probability(0.89, 6), "1.77e-04 % (1.77e-06 as a fraction)");
  if (!samples.empty()) {
    for (std::size_t o = 0; o < oracles.size(); ++o) {
      for (int n = 1; n <= 10; ++n) {
        add("transfer_failure", oracles[o]->name(), evasion_rate[o], n,
            transfer_failure_probability(evasion_rate[o], n), "");
      }
    }
  }
  if (fs::is_directory(config.attack_dir)) {
    std::size_t segments = 0, correct = 0;
    for (const auto& p : files_with_extension(config.attack_dir, ".json")) {
      const auto rep = read_json(p);
      const auto expected = rep.at("expected").get<std::vector<std::string>>();
      const auto& segs = rep.at("segments");
      for (std::size_t s = 0; s < expected.size(); ++s) {
        ++segments;
        if (s < segs.size() && segs[s].at("mapped_label").is_string() &&
            normalize_text(segs[s]["mapped_label"].get<std::string>()) == normalize_text(expected[s])) {
          ++correct;
        }
      }
    }
    if (segments > 0) {
      const double p = static_cast<double>(correct) / static_cast<double>(segments);
      for (int n = 1; n <= 10; ++n) add("break", "attack", p, n, break_probability(p, n), "");
    }
  }
  if (fs::exists(config.profile_path)) {
    const DetectionProfile profile = detection_profile_from_json(read_json(config.profile_path));
    for (int n = 1; n <= 10; ++n) add("evasion", "detector", profile.recall, n, evasion_probability(profile.recall, n), "");
  }
  write_text(dir / "probabilities.csv", prob.csv());
  print_table("probability tables", prob);

  out["tables"] = {"phonetic.csv", "probabilities.csv"};
  write_json(dir / "report.json", out);
  return kExitOk;
}

}  // namespace scaptcha::cli
