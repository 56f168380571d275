#include "scaptcha/craft.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "scaptcha/error.hpp"
#include "scaptcha/perturb.hpp"
#include "scaptcha/text.hpp"

namespace scaptcha {

// ---------------------------------------------------------------------------
// Sweep

void NoiseSweepConfig::validate() const {
  if (amplitude_count == 0 || realizations_per_amplitude == 0) {
    throw Error(ErrorKind::InvalidArgument, "sweep needs at least one amplitude and one realization");
  }
  if (!(min_fraction >= 0.0) || !(max_fraction >= min_fraction)) {
    throw Error(ErrorKind::InvalidArgument, "sweep fractions must satisfy 0 <= min <= max");
  }
  if (amplitude_count > 1 && !(min_fraction > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "log-spaced sweep needs min_fraction > 0");
  }
}

std::vector<double> sweep_fractions(const NoiseSweepConfig& sweep) {
  sweep.validate();
  std::vector<double> out(sweep.amplitude_count);
  if (sweep.amplitude_count == 1) {
    out[0] = sweep.min_fraction;
    return out;
  }
  const double log_lo = std::log(sweep.min_fraction);
  const double log_hi = std::log(sweep.max_fraction);
  const auto last = static_cast<double>(sweep.amplitude_count - 1);
  for (std::size_t a = 0; a < sweep.amplitude_count; ++a) {
    out[a] = std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(a) / last);
  }
  out.front() = sweep.min_fraction;
  out.back() = sweep.max_fraction;
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t variant_seed(std::uint64_t base_seed, std::size_t amplitude_index, std::size_t realization) {
  std::uint64_t h = splitmix64(base_seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(amplitude_index));
  return splitmix64(h ^ (static_cast<std::uint64_t>(realization) << 32));
}

std::vector<SweepVariant> sweep_plan(const NoiseSweepConfig& sweep) {
  const auto fractions = sweep_fractions(sweep);
  std::vector<SweepVariant> plan;
  plan.reserve(sweep.total());
  for (std::size_t a = 0; a < sweep.amplitude_count; ++a) {
    for (std::size_t r = 0; r < sweep.realizations_per_amplitude; ++r) {
      plan.push_back({a, r, fractions[a], variant_seed(sweep.base_seed, a, r)});
    }
  }
  return plan;
}

AudioBuffer make_variant(const AudioBuffer& buffer, const SweepVariant& variant) {
  return add_gaussian_noise(buffer, variant.fraction, variant.seed);
}

std::vector<Transcript> transcribe_sweep(const Oracle& oracle, const AudioBuffer& buffer,
                                         const NoiseSweepConfig& sweep, Execution exec) {
  const auto plan = sweep_plan(sweep);
  std::vector<Transcript> out(plan.size());
  std::vector<std::exception_ptr> errors(plan.size());
  const bool parallel = exec == Execution::Parallel && oracle.concurrent_safe();
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::size_t i = 0; i < plan.size(); ++i) {
    try {
      out[i] = oracle.transcribe(make_variant(buffer, plan[i]));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid search

void SearchConfig::validate() const {
  if (!(lo < hi)) throw Error(ErrorKind::InvalidArgument, "search needs lo < hi");
  if (!(tolerance > 0.0)) throw Error(ErrorKind::InvalidArgument, "search tolerance must be > 0");
  if (max_iterations < 1) throw Error(ErrorKind::InvalidArgument, "search needs max_iterations >= 1");
}

std::size_t SearchConfig::intervals() const {
  const double ratio = (hi - lo) / tolerance;
  // Ratios that are whole numbers up to rounding noise are not rounded up.
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) <= 1e-9 * std::max(1.0, rounded)) return std::max<std::size_t>(1, static_cast<std::size_t>(rounded));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(ratio)));
}

double SearchConfig::value(std::size_t index) const {
  const std::size_t n = intervals();
  if (index >= n) return hi;
  return lo + static_cast<double>(index) * tolerance;
}

std::size_t SearchConfig::probe_budget() const {
  const double ratio = (hi - lo) / tolerance;
  const double bits = ratio <= 1.0 ? 0.0 : std::ceil(std::log2(ratio) - 1e-12);
  return static_cast<std::size_t>(bits) + 2;
}

SearchOutcome binary_search_grid(const SearchConfig& cfg, const std::function<bool(std::size_t)>& passes) {
  cfg.validate();
  const std::size_t n = cfg.intervals();
  SearchOutcome out;
  auto probe = [&](std::size_t i) {
    out.probes.push_back(i);
    return passes(i);
  };

  if (!probe(n)) {
    out.index = n;
    out.bracket_lo = n;
    out.bracket_hi = n;
    return out;
  }
  out.success = true;
  if (probe(0)) {
    out.index = 0;
    out.converged = true;
    return out;
  }
  std::size_t lo = 0;
  std::size_t hi = n;
  std::size_t iterations = 0;
  while (hi - lo > 1 && iterations < cfg.max_iterations) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (probe(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
    ++iterations;
  }
  out.index = hi;
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.converged = hi - lo <= 1;
  return out;
}

std::optional<std::size_t> linear_scan_grid(const SearchConfig& cfg, const std::function<bool(std::size_t)>& passes) {
  cfg.validate();
  const std::size_t n = cfg.intervals();
  for (std::size_t i = 0; i <= n; ++i) {
    if (passes(i)) return i;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Crafting

std::string_view to_string(Algorithm a) {
  return a == Algorithm::Kenansville ? "kenansville" : "yeehaw";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "kenansville") return Algorithm::Kenansville;
  if (text == "yeehaw") return Algorithm::Yeehaw;
  throw Error(ErrorKind::UsageError, "unknown algorithm '" + std::string(text) + "' (kenansville | yeehaw)");
}

CraftResult craft_kenansville(const AudioBuffer& buffer, const std::string& original_label, const Oracle& oracle,
                              const SearchConfig& cfg) {
  cfg.validate();
  if (cfg.lo < 0.0 || cfg.hi > 1.0) throw Error(ErrorKind::InvalidFraction, "decimation bounds must lie in [0, 1]");
  CraftResult result;
  result.algorithm = Algorithm::Kenansville;
  result.label = original_label;
  result.tolerance = cfg.tolerance;

  const std::string expected = normalize_text(original_label);
  const Transcript clean = oracle.transcribe(buffer);
  ++result.oracle_queries;
  if (normalize_text(clean.text) != expected) {
    throw Error(ErrorKind::InputUnrecognized,
                "clean audio transcribed as '" + clean.text + "', expected '" + original_label + "'");
  }

  const Spectrum spectrum = dft(buffer);
  auto perturbed_at = [&](std::size_t i) { return idft(decimate(spectrum, cfg.value(i))); };
  auto passes = [&](std::size_t i) {
    const Transcript t = oracle.transcribe(perturbed_at(i));
    ++result.oracle_queries;
    const bool flipped = normalize_text(t.text) != expected;
    result.trace.push_back({cfg.value(i), t.text, flipped, 0, 0});
    return flipped;
  };
  const SearchOutcome s = binary_search_grid(cfg, passes);

  result.success = s.success;
  result.converged = s.converged;
  result.t_d_frac = cfg.value(s.index);
  result.bracket_lo = cfg.value(s.bracket_lo);
  result.bracket_hi = cfg.value(s.bracket_hi);
  result.perturbed = perturbed_at(s.index);
  result.distortion_rmse = rmse(buffer, result.perturbed);
  return result;
}

namespace {

YeehawEvaluation evaluate_decimated(const Spectrum& decimated, const Oracle& oracle, double alpha_fraction,
                                    const NoiseSweepConfig& sweep, Execution exec) {
  const double peak = max_magnitude(decimated);
  YeehawEvaluation e;
  e.perturbed = idft(clip(decimated, std::min(alpha_fraction * peak, peak)));
  e.clean = oracle.transcribe(e.perturbed);
  e.variants = transcribe_sweep(oracle, e.perturbed, sweep, exec);
  e.robust_empty = e.clean.is_empty &&
                   std::all_of(e.variants.begin(), e.variants.end(), [](const Transcript& t) { return t.is_empty; });
  return e;
}

}  // namespace

YeehawEvaluation evaluate_yeehaw(const AudioBuffer& buffer, const Oracle& oracle, double t_d_frac,
                                 double alpha_fraction, const NoiseSweepConfig& sweep, Execution exec) {
  if (!(alpha_fraction >= 0.0 && alpha_fraction <= 1.0)) {
    throw Error(ErrorKind::AlphaOutOfRange, "alpha fraction must lie in [0, 1]");
  }
  return evaluate_decimated(decimate(dft(buffer), t_d_frac), oracle, alpha_fraction, sweep, exec);
}

CraftResult craft_yeehaw(const AudioBuffer& buffer, const Oracle& oracle, double t_d_frac,
                         const NoiseSweepConfig& sweep, const SearchConfig& cfg,
                         const std::optional<std::string>& expected_label, Execution exec) {
  cfg.validate();
  sweep.validate();
  if (cfg.lo < 0.0 || cfg.hi > 1.0) throw Error(ErrorKind::AlphaOutOfRange, "alpha fraction bounds must lie in [0, 1]");
  CraftResult result;
  result.algorithm = Algorithm::Yeehaw;
  result.label = expected_label.value_or("");
  result.t_d_frac = t_d_frac;
  result.tolerance = cfg.tolerance;
  result.seed = sweep.base_seed;

  if (expected_label) {
    const Transcript clean = oracle.transcribe(buffer);
    ++result.oracle_queries;
    if (normalize_text(clean.text) != normalize_text(*expected_label)) {
      throw Error(ErrorKind::InputUnrecognized,
                  "clean audio transcribed as '" + clean.text + "', expected '" + *expected_label + "'");
    }
  }

  const Spectrum decimated = decimate(dft(buffer), t_d_frac);
  const double peak = max_magnitude(decimated);
  std::optional<std::pair<std::size_t, AudioBuffer>> last;
  auto passes = [&](std::size_t i) {
    YeehawEvaluation e = evaluate_decimated(decimated, oracle, cfg.value(i), sweep, exec);
    result.oracle_queries += 1 + e.variants.size();
    const auto empties = static_cast<std::size_t>(
        std::count_if(e.variants.begin(), e.variants.end(), [](const Transcript& t) { return t.is_empty; }));
    result.trace.push_back({cfg.value(i), e.clean.text, e.robust_empty, empties, e.variants.size()});
    last = {i, std::move(e.perturbed)};
    return e.robust_empty;
  };
  const SearchOutcome s = binary_search_grid(cfg, passes);

  result.success = s.success;
  result.converged = s.converged;
  result.alpha_fraction = cfg.value(s.index);
  result.alpha = std::min(result.alpha_fraction * peak, peak);
  result.bracket_lo = cfg.value(s.bracket_lo);
  result.bracket_hi = cfg.value(s.bracket_hi);
  if (last && last->first == s.index) {
    result.perturbed = std::move(last->second);
  } else {
    result.perturbed = idft(clip(decimated, result.alpha));
  }
  result.distortion_rmse = rmse(buffer, result.perturbed);
  return result;
}

// ---------------------------------------------------------------------------
// Challenges

CaptchaChallenge assemble_captcha(std::span<const LabeledResult> results, int gap_ms, std::uint64_t seed) {
  if (results.empty()) throw Error(ErrorKind::EmptyInput, "no utterances to assemble");
  if (gap_ms < 0) throw Error(ErrorKind::InvalidArgument, "gap must be >= 0 ms");
  const int rate = results.front().result->perturbed.sample_rate;
  for (const auto& r : results) {
    if (r.result == nullptr || !r.result->success) {
      throw Error(ErrorKind::UnsuccessfulResult, "utterance '" + r.label + "' was not crafted successfully");
    }
    if (r.result->perturbed.sample_rate != rate) {
      throw Error(ErrorKind::MixedSampleRates, "utterances have different sample rates");
    }
    if (r.result->perturbed.empty()) throw Error(ErrorKind::EmptyInput, "utterance '" + r.label + "' is empty");
  }
  const auto gap = static_cast<std::size_t>(static_cast<long long>(gap_ms) * rate / 1000);
  CaptchaChallenge c;
  c.audio.sample_rate = rate;
  c.gap_ms = gap_ms;
  c.seed = seed;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i > 0) c.audio.samples.insert(c.audio.samples.end(), gap, 0.0);
    const auto& samples = results[i].result->perturbed.samples;
    const std::size_t begin = c.audio.samples.size();
    c.audio.samples.insert(c.audio.samples.end(), samples.begin(), samples.end());
    c.segments.push_back({begin, c.audio.samples.size()});
    c.answer.push_back(results[i].label);
  }
  return c;
}

bool verify_answer(const CaptchaChallenge& challenge, std::string_view answer) {
  const auto given = tokenize(answer);
  if (given.size() != challenge.answer.size()) return false;
  for (std::size_t i = 0; i < given.size(); ++i) {
    if (given[i] != normalize_text(challenge.answer[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::ordered_json to_json(const CraftResult& r) {
  nlohmann::ordered_json j;
  j["algorithm"] = to_string(r.algorithm);
  j["label"] = r.label;
  j["success"] = r.success;
  j["t_d_frac"] = r.t_d_frac;
  j["alpha"] = r.alpha;
  j["alpha_fraction"] = r.alpha_fraction;
  j["distortion_rmse"] = r.distortion_rmse;
  j["oracle_queries"] = r.oracle_queries;
  j["converged"] = r.converged;
  j["bracket"] = {r.bracket_lo, r.bracket_hi};
  j["tolerance"] = r.tolerance;
  j["seed"] = r.seed;
  j["sample_rate"] = r.perturbed.sample_rate;
  j["samples"] = r.perturbed.size();
  auto& trace = j["trace"] = nlohmann::ordered_json::array();
  for (const auto& t : r.trace) {
    nlohmann::ordered_json e;
    e["parameter"] = t.parameter;
    e["transcript"] = t.transcript;
    e["passed"] = t.passed;
    if (r.algorithm == Algorithm::Yeehaw) {
      e["empty_variants"] = t.empty_variants;
      e["variants"] = t.variants;
    }
    trace.push_back(std::move(e));
  }
  return j;
}

CraftResult craft_result_from_json(const nlohmann::json& j) {
  CraftResult r;
  r.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  r.label = j.at("label").get<std::string>();
  r.success = j.at("success").get<bool>();
  r.t_d_frac = j.at("t_d_frac").get<double>();
  r.alpha = j.at("alpha").get<double>();
  r.alpha_fraction = j.at("alpha_fraction").get<double>();
  r.distortion_rmse = j.at("distortion_rmse").get<double>();
  r.oracle_queries = j.at("oracle_queries").get<std::size_t>();
  r.converged = j.value("converged", false);
  if (j.contains("bracket")) {
    r.bracket_lo = j["bracket"].at(0).get<double>();
    r.bracket_hi = j["bracket"].at(1).get<double>();
  }
  r.tolerance = j.value("tolerance", 0.0);
  r.seed = j.value("seed", std::uint64_t{0});
  r.perturbed.sample_rate = j.value("sample_rate", kCanonicalSampleRate);
  for (const auto& e : j.value("trace", nlohmann::json::array())) {
    r.trace.push_back({e.at("parameter").get<double>(), e.at("transcript").get<std::string>(),
                       e.at("passed").get<bool>(), e.value("empty_variants", std::size_t{0}),
                       e.value("variants", std::size_t{0})});
  }
  return r;
}

nlohmann::ordered_json challenge_manifest(const CaptchaChallenge& c) {
  nlohmann::ordered_json j;
  j["answer"] = c.answer;
  j["sample_rate"] = c.audio.sample_rate;
  j["gap_ms"] = c.gap_ms;
  j["seed"] = c.seed;
  auto& segs = j["segments"] = nlohmann::ordered_json::array();
  for (const auto& s : c.segments) segs.push_back({s.begin, s.end});
  return j;
}

CaptchaChallenge challenge_from_manifest(const nlohmann::json& j, AudioBuffer audio) {
  CaptchaChallenge c;
  c.audio = std::move(audio);
  c.answer = j.at("answer").get<std::vector<std::string>>();
  c.gap_ms = j.value("gap_ms", 0);
  c.seed = j.value("seed", std::uint64_t{0});
  for (const auto& s : j.value("segments", nlohmann::json::array())) {
    c.segments.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
  }
  if (c.segments.size() != c.answer.size()) {
    throw Error(ErrorKind::ParseError, "challenge manifest: answer length differs from segment count");
  }
  return c;
}

}  // namespace scaptcha
