#include "scaptcha/breaker.hpp"

#include <algorithm>
#include <cmath>

#include "scaptcha/error.hpp"
#include "scaptcha/text.hpp"

namespace scaptcha {

std::vector<AudioBuffer> noise_sweep_variants(const AudioBuffer& buffer, const NoiseSweepConfig& sweep) {
  const auto plan = sweep_plan(sweep);
  std::vector<AudioBuffer> out(plan.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < plan.size(); ++i) out[i] = make_variant(buffer, plan[i]);
  return out;
}

AdaptiveResult adaptive_transcribe(const Oracle& oracle, const AudioBuffer& buffer, const NoiseSweepConfig& sweep,
                                   Execution exec) {
  AdaptiveResult r;
  r.original = oracle.transcribe(buffer);
  r.variants = transcribe_sweep(oracle, buffer, sweep, exec);
  r.queries = 1 + r.variants.size();

  // Candidates in priority order: original first, then sweep_plan order,
  // which is already (amplitude, realization) ascending.
  std::map<std::string, std::pair<std::size_t, std::size_t>> votes;  // text -> (count, first position)
  auto vote = [&](const Transcript& t, std::size_t position) {
    if (t.is_empty) return;
    auto [it, inserted] = votes.try_emplace(t.text, 0, position);
    ++it->second.first;
  };
  vote(r.original, 0);
  for (std::size_t i = 0; i < r.variants.size(); ++i) vote(r.variants[i], i + 1);

  const std::pair<const std::string, std::pair<std::size_t, std::size_t>>* best = nullptr;
  for (const auto& entry : votes) {
    if (best == nullptr || entry.second.first > best->second.first ||
        (entry.second.first == best->second.first && entry.second.second < best->second.second)) {
      best = &entry;
    }
  }
  r.transcript = best == nullptr ? Transcript::empty() : Transcript::of(best->first);
  return r;
}

std::vector<AudioSegment> segment_challenge(const AudioBuffer& audio, const SegmenterConfig& cfg) {
  if (audio.empty()) throw Error(ErrorKind::EmptyInput, "nothing to segment");
  const double rate = audio.sample_rate;
  const auto ms_to_samples = [&](double ms) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(ms * rate / 1000.0)));
  };
  const std::size_t frame = ms_to_samples(cfg.frame_ms);
  const std::size_t hop = ms_to_samples(cfg.hop_ms);
  const std::size_t n = audio.size();

  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < n; s += hop) {
    starts.push_back(s);
    if (s + frame >= n) break;
  }
  std::vector<double> energy(starts.size());
#pragma omp parallel for schedule(static)
  for (std::size_t f = 0; f < starts.size(); ++f) {
    const std::size_t end = std::min(n, starts[f] + frame);
    double acc = 0.0;
    for (std::size_t i = starts[f]; i < end; ++i) acc += audio.samples[i] * audio.samples[i];
    energy[f] = std::sqrt(acc / static_cast<double>(end - starts[f]));
  }
  const double loudest = *std::max_element(energy.begin(), energy.end());
  if (loudest == 0.0) throw Error(ErrorKind::NoSegmentsFound, "input is silent");
  const double threshold = cfg.voiced_ratio * loudest;

  std::vector<SegmentBounds> runs;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    if (energy[f] < threshold) continue;
    const SegmentBounds b{starts[f], std::min(n, starts[f] + frame)};
    if (!runs.empty() && b.begin <= runs.back().end) {
      runs.back().end = b.end;
    } else {
      runs.push_back(b);
    }
  }

  const std::size_t min_gap = ms_to_samples(cfg.min_silence_ms);
  std::vector<SegmentBounds> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && r.begin - merged.back().end < min_gap) {
      merged.back().end = r.end;
    } else {
      merged.push_back(r);
    }
  }

  const std::size_t min_len = ms_to_samples(cfg.min_segment_ms);
  std::vector<AudioSegment> out;
  for (const auto& b : merged) {
    if (b.end - b.begin < min_len) continue;
    AudioSegment seg;
    seg.bounds = b;
    seg.audio.sample_rate = audio.sample_rate;
    seg.audio.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(b.begin),
                             audio.samples.begin() + static_cast<std::ptrdiff_t>(b.end));
    out.push_back(std::move(seg));
  }
  if (out.empty()) throw Error(ErrorKind::NoSegmentsFound, "no voiced run longer than the minimum segment length");
  return out;
}

std::optional<PhoneticMatch> phonetic_map(std::string_view transcript, std::span<const std::string> vocabulary,
                                          const PronouncingDictionary& dict) {
  if (vocabulary.empty()) throw Error(ErrorKind::InvalidArgument, "phonetic mapping needs a vocabulary");
  if (normalize_text(transcript).empty()) return std::nullopt;
  try {
    to_phonemes(dict, transcript);
  } catch (const OutOfVocabularyError&) {
    return std::nullopt;
  }
  std::optional<PhoneticMatch> best;
  for (const auto& label : vocabulary) {
    std::size_t d = 0;
    try {
      d = phonetic_distance(transcript, label, dict);
    } catch (const OutOfVocabularyError&) {
      continue;
    }
    if (!best || d < best->distance) best = PhoneticMatch{label, d};
  }
  return best;
}

void StatMap::update(std::string_view observed, std::string_view truth) {
  ++counts_[normalize_text(observed)][normalize_text(truth)];
}

std::optional<std::string> StatMap::lookup(std::string_view observed) const {
  const auto it = counts_.find(normalize_text(observed));
  if (it == counts_.end()) return std::nullopt;
  const std::string* label = nullptr;
  std::size_t top = 0;
  bool tied = false;
  for (const auto& [candidate, count] : it->second) {
    if (count > top) {
      top = count;
      label = &candidate;
      tied = false;
    } else if (count == top) {
      tied = true;
    }
  }
  if (label == nullptr || tied || top < min_support_) return std::nullopt;
  return *label;
}

nlohmann::ordered_json StatMap::to_json() const {
  nlohmann::ordered_json j;
  j["min_support"] = min_support_;
  j["counts"] = counts_;
  return j;
}

StatMap StatMap::from_json(const nlohmann::json& j) {
  StatMap m(j.value("min_support", std::size_t{3}));
  if (j.contains("counts")) m.counts_ = j["counts"].get<std::map<std::string, std::map<std::string, std::size_t>>>();
  return m;
}

StatMap statistical_map_update(StatMap map, std::string_view observed, std::string_view truth) {
  map.update(observed, truth);
  return map;
}

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, std::string(what) + " must lie in [0, 1]");
}

void check_length(int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "captcha length must be >= 1");
}

}  // namespace

double break_probability(double per_label_success, int captcha_length) {
  check_probability(per_label_success, "per-label success");
  check_length(captcha_length);
  return std::pow(per_label_success, captcha_length);
}

double transfer_failure_probability(double per_label_evasion, int captcha_length) {
  check_probability(per_label_evasion, "per-label evasion");
  check_length(captcha_length);
  return std::pow(1.0 - per_label_evasion, captcha_length);
}

BreakerReport run_breaker(const CaptchaChallenge& challenge, const Oracle& oracle, const PronouncingDictionary& dict,
                          std::span<const std::string> vocabulary, const StatMap& stat_map,
                          const NoiseSweepConfig& sweep, const SegmenterConfig& segmenter) {
  BreakerReport report;
  report.expected = challenge.answer;
  std::vector<AudioSegment> segments;
  try {
    segments = segment_challenge(challenge.audio, segmenter);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoSegmentsFound && e.kind() != ErrorKind::EmptyInput) throw;
    return report;
  }

  std::vector<std::string> tokens;
  for (const auto& seg : segments) {
    SegmentReport s;
    s.bounds = seg.bounds;
    std::vector<Transcript> variants;
    try {
      AdaptiveResult a = adaptive_transcribe(oracle, seg.audio, sweep);
      report.oracle_queries += a.queries;
      s.transcript = a.transcript.text;
      s.nonempty_variants = static_cast<std::size_t>(
          std::count_if(a.variants.begin(), a.variants.end(), [](const Transcript& t) { return !t.is_empty; }));
      variants = std::move(a.variants);
    } catch (const std::exception& e) {
      s.error = e.what();
    }

    const std::string norm = normalize_text(s.transcript);
    if (!norm.empty()) {
      const auto exact = std::find_if(vocabulary.begin(), vocabulary.end(),
                                      [&](const std::string& l) { return normalize_text(l) == norm; });
      if (auto learned = stat_map.lookup(norm)) {
        s.mapped_label = *learned;
        s.mapping = "statistical";
      } else if (exact != vocabulary.end()) {
        s.mapped_label = *exact;
        s.mapping = "exact";
      } else if (auto match = phonetic_map(norm, vocabulary, dict)) {
        s.mapped_label = match->label;
        s.phonetic_distance = match->distance;
        s.mapping = "phonetic";
      }
    }
    if (s.mapping.empty()) s.mapping = "none";
    tokens.push_back(s.mapped_label.value_or(std::string(kUnmappedToken)));
    report.segments.push_back(std::move(s));
    report.variant_transcripts.push_back(std::move(variants));
  }

  for (const auto& t : tokens) {
    if (!report.answer.empty()) report.answer += ' ';
    report.answer += t;
  }
  report.success = verify_answer(challenge, report.answer);
  return report;
}

nlohmann::ordered_json to_json(const BreakerReport& r) {
  nlohmann::ordered_json j;
  j["answer"] = r.answer;
  j["expected"] = r.expected;
  j["success"] = r.success;
  j["oracle_queries"] = r.oracle_queries;
  auto& segs = j["segments"] = nlohmann::ordered_json::array();
  for (const auto& s : r.segments) {
    nlohmann::ordered_json e;
    e["begin"] = s.bounds.begin;
    e["end"] = s.bounds.end;
    e["transcript"] = s.transcript;
    e["mapped_label"] = s.mapped_label ? nlohmann::ordered_json(*s.mapped_label) : nlohmann::ordered_json(nullptr);
    e["mapping"] = s.mapping;
    e["phonetic_distance"] =
        s.phonetic_distance ? nlohmann::ordered_json(*s.phonetic_distance) : nlohmann::ordered_json(nullptr);
    e["nonempty_variants"] = s.nonempty_variants;
    if (s.error) e["error"] = *s.error;
    segs.push_back(std::move(e));
  }
  return j;
}

}  // namespace scaptcha
