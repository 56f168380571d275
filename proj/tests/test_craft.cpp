#include <gtest/gtest.h>

#include <cmath>
#include <atomic>
#include <cstring>
#include <random>
#include <set>
#include <unordered_map>

#include "scaptcha/craft.hpp"
#include "scaptcha/error.hpp"
#include "scaptcha/perturb.hpp"
#include "planted.hpp"
#include "support.hpp"

using namespace scaptcha;
using namespace scaptcha::test;

namespace {

}  // namespace

// ---------------------------------------------------------------------------

TEST(NoiseSweep, DefaultPlanIsLogSpacedAndSeeded) {
  const NoiseSweepConfig sweep;
  EXPECT_EQ(sweep.total(), 230u);
  const auto f = sweep_fractions(sweep);
  ASSERT_EQ(f.size(), 46u);
  EXPECT_DOUBLE_EQ(f.front(), 0.00001);
  EXPECT_DOUBLE_EQ(f.back(), 0.20);
  const double ratio = std::pow(0.20 / 0.00001, 1.0 / 45.0);
  for (std::size_t i = 1; i < f.size(); ++i) EXPECT_NEAR(f[i] / f[i - 1], ratio, 1e-9);

  const auto plan = sweep_plan(sweep);
  ASSERT_EQ(plan.size(), 230u);
  std::set<std::uint64_t> seeds;
  for (const auto& v : plan) seeds.insert(v.seed);
  EXPECT_EQ(seeds.size(), 230u);
  EXPECT_EQ(plan[7].amplitude_index, 1u);
  EXPECT_EQ(plan[7].realization, 2u);
  EXPECT_EQ(plan[7].seed, variant_seed(0, 1, 2));

  NoiseSweepConfig other = sweep;
  other.base_seed = 1;
  EXPECT_NE(sweep_plan(other)[0].seed, plan[0].seed);
}

TEST(NoiseSweep, Validation) {
  NoiseSweepConfig s;
  s.amplitude_count = 0;
  EXPECT_EQ(kind_of([&] { s.validate(); }), ErrorKind::InvalidArgument);
  s = {};
  s.min_fraction = 0.0;
  EXPECT_EQ(kind_of([&] { s.validate(); }), ErrorKind::InvalidArgument);
  s.amplitude_count = 1;
  s.realizations_per_amplitude = 1;
  s.max_fraction = 0.0;
  EXPECT_NO_THROW(s.validate());
}

TEST(NoiseSweep, ParallelMatchesSerial) {
  const AudioBuffer& x = synth_corpus()[3].audio;
  const auto parallel = transcribe_sweep(synth_mock(), x, NoiseSweepConfig{}, Execution::Parallel);
  const auto serial = transcribe_sweep(synth_mock(), x, NoiseSweepConfig{}, Execution::Serial);
  EXPECT_EQ(parallel, serial);
}

TEST(NoiseSweep, ErrorsPropagate) {
  const CallbackOracle failing("failing", [](const AudioBuffer&) -> Transcript {
    throw Error(ErrorKind::RemoteUnavailable, "down");
  });
  EXPECT_EQ(kind_of([&] { transcribe_sweep(failing, buffer_of({0.1, 0.2}), NoiseSweepConfig{}); }),
            ErrorKind::RemoteUnavailable);
}

// ---------------------------------------------------------------------------

TEST(SearchGrid, Geometry) {
  SearchConfig c;
  EXPECT_EQ(c.intervals(), 256u);
  EXPECT_DOUBLE_EQ(c.value(0), 0.0);
  EXPECT_DOUBLE_EQ(c.value(128), 0.5);
  EXPECT_DOUBLE_EQ(c.value(256), 1.0);
  EXPECT_EQ(c.probe_budget(), 10u);
  c.tolerance = 0.3;
  EXPECT_EQ(c.intervals(), 4u);
  EXPECT_DOUBLE_EQ(c.value(4), 1.0);
  EXPECT_EQ(c.probe_budget(), 4u);
  c.tolerance = 2.0;
  EXPECT_EQ(c.intervals(), 1u);
  EXPECT_EQ(c.probe_budget(), 2u);

  SearchConfig bad;
  bad.lo = 1.0;
  EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::InvalidArgument);
  bad = {};
  bad.tolerance = 0.0;
  EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::InvalidArgument);
  bad = {};
  bad.max_iterations = 0;
  EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::InvalidArgument);
}

TEST(SearchGrid, MatchesLinearScanWithinBudget) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    SearchConfig c;
    c.lo = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    c.hi = c.lo + std::uniform_real_distribution<double>(0.01, 3.0)(rng);
    c.tolerance = std::uniform_real_distribution<double>(0.0005, 0.2)(rng);
    const std::size_t n = c.intervals();
    const std::size_t boundary = std::uniform_int_distribution<std::size_t>(0, n + 1)(rng);
    auto pred = [&](std::size_t i) { return i >= boundary; };
    const auto scan = linear_scan_grid(c, pred);
    const auto out = binary_search_grid(c, pred);
    EXPECT_LE(out.probes.size(), c.probe_budget());
    if (!scan) {
      EXPECT_FALSE(out.success);
      continue;
    }
    EXPECT_TRUE(out.success);
    EXPECT_TRUE(out.converged);
    EXPECT_EQ(out.index, *scan);
  }
}

TEST(SearchGrid, WholeBracketWithinToleranceProbesEndpointsOnly) {
  SearchConfig c;
  c.tolerance = 1.5;
  std::size_t calls = 0;
  const auto out = binary_search_grid(c, [&](std::size_t i) {
    ++calls;
    return i == 1;
  });
  EXPECT_EQ(calls, 2u);
  EXPECT_EQ(out.probes, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(out.index, 1u);
  EXPECT_TRUE(out.converged);
}

TEST(SearchGrid, NonMonotoneKeepsConsistentBracket) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    SearchConfig c;
    c.tolerance = 1.0 / 64.0;
    std::vector<bool> table(c.intervals() + 1);
    for (std::size_t i = 0; i < table.size(); ++i) table[i] = rng() % 2 == 0;
    const auto out = binary_search_grid(c, [&](std::size_t i) { return static_cast<bool>(table[i]); });
    if (!table.back()) {
      EXPECT_FALSE(out.success);
      continue;
    }
    EXPECT_TRUE(table[out.bracket_hi] || out.bracket_hi == out.index);
    EXPECT_TRUE(table[out.index]);
    if (out.index > 0) EXPECT_FALSE(table[out.bracket_lo]);
  }
}

TEST(SearchGrid, IterationCapLeavesBracketOpen) {
  SearchConfig c;
  c.max_iterations = 2;
  const auto out = binary_search_grid(c, [](std::size_t i) { return i >= 100; });
  EXPECT_TRUE(out.success);
  EXPECT_FALSE(out.converged);
  EXPECT_EQ(out.probes.size(), 4u);
  EXPECT_GT(out.bracket_hi - out.bracket_lo, 1u);
}

// ---------------------------------------------------------------------------

TEST(Kenansville, PlantedBoundary) {
  std::mt19937_64 rng(3);
  const AudioBuffer x = random_buffer(rng, 2048, 0.5);
  const CallbackOracle oracle = planted_decimation_oracle(x, 0.37, "two");
  SearchConfig cfg;
  const CraftResult r = craft_kenansville(x, "two", oracle, cfg);
  EXPECT_TRUE(r.success);
  EXPECT_TRUE(r.converged);
  EXPECT_GE(r.t_d_frac, 0.37 - cfg.tolerance);
  EXPECT_LE(r.t_d_frac, 0.37 + cfg.tolerance);

  const auto scan = linear_scan_grid(cfg, [&](std::size_t i) {
    return oracle.transcribe(perturb_decimate(x, cfg.value(i))).text != "two";
  });
  ASSERT_TRUE(scan.has_value());
  EXPECT_DOUBLE_EQ(r.t_d_frac, cfg.value(*scan));
  EXPECT_EQ(r.oracle_queries, 1 + r.trace.size());
  EXPECT_LE(r.trace.size(), cfg.probe_budget());
  EXPECT_EQ(r.perturbed.samples, perturb_decimate(x, r.t_d_frac).samples);
  EXPECT_DOUBLE_EQ(r.distortion_rmse, rmse(x, r.perturbed));
}

TEST(Kenansville, NeverFlips) {
  const AudioBuffer x = cosine(256, 5, 0.5);
  const CallbackOracle oracle("steady", [](const AudioBuffer&) { return Transcript::of("two"); });
  SearchConfig cfg;
  cfg.hi = 0.5;
  const CraftResult r = craft_kenansville(x, "two", oracle, cfg);
  EXPECT_FALSE(r.success);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_DOUBLE_EQ(r.trace[0].parameter, 0.5);
  EXPECT_EQ(r.perturbed.samples, perturb_decimate(x, 0.5).samples);
}

TEST(Kenansville, Preconditions) {
  const AudioBuffer x = cosine(256, 5, 0.5);
  const CallbackOracle oracle("steady", [](const AudioBuffer&) { return Transcript::of("three"); });
  EXPECT_EQ(kind_of([&] { craft_kenansville(x, "two", oracle, {}); }), ErrorKind::InputUnrecognized);
  const CallbackOracle failing("failing", [](const AudioBuffer&) -> Transcript {
    throw Error(ErrorKind::AuthFailure, "no");
  });
  EXPECT_EQ(kind_of([&] { craft_kenansville(x, "two", failing, {}); }), ErrorKind::AuthFailure);
  // Case and spacing do not matter for the clean check.
  const CallbackOracle shouting("shouting", [](const AudioBuffer&) { return Transcript::of(" TWO "); });
  SearchConfig cfg;
  cfg.tolerance = 0.5;
  EXPECT_NO_THROW(craft_kenansville(x, "two", shouting, cfg));
}

// ---------------------------------------------------------------------------

class YeehawPlanted : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    x_ = new AudioBuffer(tonal(256, 9));
    sweep_ = new NoiseSweepConfig();
    sweep_->base_seed = 77;
    registry_ = new YeehawRegistry(*x_, 0.02, *sweep_, SearchConfig{});
  }
  static void TearDownTestSuite() {
    delete registry_;
    delete sweep_;
    delete x_;
  }
  static AudioBuffer* x_;
  static NoiseSweepConfig* sweep_;
  static YeehawRegistry* registry_;
};
AudioBuffer* YeehawPlanted::x_ = nullptr;
NoiseSweepConfig* YeehawPlanted::sweep_ = nullptr;
YeehawRegistry* YeehawPlanted::registry_ = nullptr;

TEST_F(YeehawPlanted, BoundaryAtSixTenths) {
  const SearchConfig cfg;
  const std::size_t boundary = static_cast<std::size_t>(std::ceil(0.6 / cfg.tolerance));
  const CallbackOracle oracle = registry_->oracle(boundary);
  const CraftResult r = craft_yeehaw(*x_, oracle, 0.02, *sweep_, cfg);
  EXPECT_EQ(registry_->misses(), 0u);
  EXPECT_TRUE(r.success);
  EXPECT_NEAR(r.alpha_fraction, 0.6, cfg.tolerance);

  const auto scan = linear_scan_grid(cfg, [&](std::size_t i) {
    return evaluate_yeehaw(*x_, oracle, 0.02, cfg.value(i), *sweep_).robust_empty;
  });
  ASSERT_TRUE(scan.has_value());
  EXPECT_DOUBLE_EQ(r.alpha_fraction, cfg.value(*scan));

  EXPECT_LE(r.trace.size(), cfg.probe_budget());
  EXPECT_EQ(r.oracle_queries, r.trace.size() * (1 + sweep_->total()));
  for (const auto& t : r.trace) EXPECT_EQ(t.variants, 230u);
  EXPECT_EQ(r.seed, 77u);
  const double peak = max_magnitude(decimate(dft(*x_), 0.02));
  EXPECT_NEAR(r.alpha, r.alpha_fraction * peak, 1e-12 * peak);
  EXPECT_EQ(r.perturbed.samples, perturb_yeehaw_relative(*x_, 0.02, r.alpha_fraction).samples);
}

TEST_F(YeehawPlanted, RandomBoundariesMatchScan) {
  const SearchConfig cfg;
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t boundary = std::uniform_int_distribution<std::size_t>(0, cfg.intervals())(rng);
    const CallbackOracle oracle = registry_->oracle(boundary);
    const CraftResult r = craft_yeehaw(*x_, oracle, 0.02, *sweep_, cfg, std::nullopt, Execution::Serial);
    EXPECT_TRUE(r.success);
    EXPECT_DOUBLE_EQ(r.alpha_fraction, cfg.value(boundary));
    EXPECT_LE(r.trace.size(), cfg.probe_budget());
  }
  EXPECT_EQ(registry_->misses(), 0u);
}

TEST_F(YeehawPlanted, NeverEmpty) {
  const SearchConfig cfg;
  const CallbackOracle oracle = registry_->oracle(cfg.intervals() + 1);
  const CraftResult r = craft_yeehaw(*x_, oracle, 0.02, *sweep_, cfg);
  EXPECT_FALSE(r.success);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_DOUBLE_EQ(r.alpha_fraction, 1.0);
}

TEST(Yeehaw, AlwaysEmptyOracleGivesLoAndNoDistortion) {
  const AudioBuffer x = tonal(512, 4);
  const CallbackOracle silent("silent", [](const AudioBuffer&) { return Transcript::empty(); });
  const CraftResult r = craft_yeehaw(x, silent, 0.0, NoiseSweepConfig{}, SearchConfig{});
  EXPECT_TRUE(r.success);
  EXPECT_DOUBLE_EQ(r.alpha_fraction, 0.0);
  EXPECT_DOUBLE_EQ(r.alpha, 0.0);
  EXPECT_LT(r.distortion_rmse, 1e-12);
  EXPECT_EQ(r.trace.size(), 2u);
}

TEST(Yeehaw, Preconditions) {
  const AudioBuffer x = tonal(256, 4);
  const CallbackOracle word("word", [](const AudioBuffer&) { return Transcript::of("word"); });
  EXPECT_EQ(kind_of([&] { craft_yeehaw(x, word, 0.0, {}, {}, std::string("other")); }),
            ErrorKind::InputUnrecognized);
  SearchConfig out_of_range;
  out_of_range.hi = 1.5;
  EXPECT_EQ(kind_of([&] { craft_yeehaw(x, word, 0.0, {}, out_of_range); }), ErrorKind::AlphaOutOfRange);
  EXPECT_EQ(kind_of([&] { evaluate_yeehaw(x, word, 0.0, -0.1, {}); }), ErrorKind::AlphaOutOfRange);
}

TEST(Yeehaw, MockSoundnessMinimalityAndDominance) {
  const SearchConfig cfg;
  NoiseSweepConfig sweep;
  sweep.base_seed = 5;
  NoiseSweepConfig noiseless;
  noiseless.amplitude_count = 1;
  noiseless.realizations_per_amplitude = 1;
  noiseless.min_fraction = 0.0;
  noiseless.max_fraction = 0.0;
  for (const char* label : {"two", "yes", "k"}) {
    const AudioBuffer* x = nullptr;
    for (const auto& item : synth_corpus()) {
      if (item.label == label && synth_mock().transcribe(item.audio).text == label) {
        x = &item.audio;
        break;
      }
    }
    ASSERT_NE(x, nullptr) << label;
    const CraftResult r = craft_yeehaw(*x, synth_mock(), 0.02, sweep, cfg, std::string(label));
    ASSERT_TRUE(r.success) << label;
    EXPECT_TRUE(evaluate_yeehaw(*x, synth_mock(), 0.02, r.alpha_fraction, sweep).robust_empty) << label;
    if (r.alpha_fraction > cfg.lo) {
      EXPECT_FALSE(evaluate_yeehaw(*x, synth_mock(), 0.02, r.alpha_fraction - cfg.tolerance, sweep).robust_empty)
          << label;
    }
    const CraftResult quiet = craft_yeehaw(*x, synth_mock(), 0.02, noiseless, cfg);
    EXPECT_LE(quiet.alpha_fraction, r.alpha_fraction) << label;
  }
}

// ---------------------------------------------------------------------------

namespace {

CraftResult clip_result(std::size_t samples, int rate, bool success = true) {
  CraftResult r;
  r.success = success;
  r.perturbed.sample_rate = rate;
  r.perturbed.samples.assign(samples, 0.25);
  return r;
}

}  // namespace

TEST(Assemble, SixClipsWithGaps) {
  std::vector<CraftResult> clips;
  for (int i = 0; i < 6; ++i) clips.push_back(clip_result(16000, 16000));
  std::vector<LabeledResult> labeled;
  const std::vector<std::string> labels = {"two", "seven", "k", "a", "nine", "yes"};
  for (int i = 0; i < 6; ++i) labeled.push_back({&clips[i], labels[i]});
  const CaptchaChallenge c = assemble_captcha(labeled, 500, 42);
  EXPECT_EQ(c.audio.size(), 6u * 16000 + 5u * 8000);
  EXPECT_EQ(c.answer, labels);
  ASSERT_EQ(c.segments.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(c.segments[i].begin, i * 24000);
    EXPECT_EQ(c.segments[i].end, i * 24000 + 16000);
    if (i > 0) EXPECT_GT(c.segments[i].begin, c.segments[i - 1].end);
  }
  EXPECT_DOUBLE_EQ(c.audio.samples[16000], 0.0);
  EXPECT_DOUBLE_EQ(c.audio.samples[24000], 0.25);
  EXPECT_EQ(c.seed, 42u);
}

TEST(Assemble, SingleAndErrors) {
  CraftResult one = clip_result(100, 8000);
  const std::vector<LabeledResult> single = {{&one, "a"}};
  const CaptchaChallenge c = assemble_captcha(single, 500, 0);
  EXPECT_EQ(c.audio.size(), 100u);
  ASSERT_EQ(c.segments.size(), 1u);
  EXPECT_EQ(c.segments[0].end, 100u);

  CraftResult other = clip_result(100, 16000);
  const std::vector<LabeledResult> mixed = {{&one, "a"}, {&other, "b"}};
  EXPECT_EQ(kind_of([&] { assemble_captcha(mixed, 500, 0); }), ErrorKind::MixedSampleRates);
  CraftResult failed = clip_result(100, 8000, false);
  const std::vector<LabeledResult> bad = {{&one, "a"}, {&failed, "b"}};
  EXPECT_EQ(kind_of([&] { assemble_captcha(bad, 500, 0); }), ErrorKind::UnsuccessfulResult);
  EXPECT_EQ(kind_of([&] { assemble_captcha(std::vector<LabeledResult>{}, 500, 0); }), ErrorKind::EmptyInput);
}

TEST(Verify, ExactTokenMatch) {
  CaptchaChallenge c;
  c.answer = {"two", "seven", "k"};
  EXPECT_TRUE(verify_answer(c, "two seven K"));
  EXPECT_TRUE(verify_answer(c, "  TWO\tseven  k "));
  EXPECT_FALSE(verify_answer(c, "two seven k k"));
  EXPECT_FALSE(verify_answer(c, "two seven"));
  EXPECT_FALSE(verify_answer(c, ""));
  c.answer = {"a", "b", "c", "d", "e", "f"};
  EXPECT_TRUE(verify_answer(c, "a b c d e f"));
  EXPECT_FALSE(verify_answer(c, "a b c x e f"));
  EXPECT_FALSE(verify_answer(c, "b a c d e f"));
}

TEST(CraftJson, RoundTrip) {
  const AudioBuffer x = tonal(256, 2);
  const CallbackOracle oracle("cut", [](const AudioBuffer& b) {
    return max_magnitude(dft(b)) < 20.0 ? Transcript::empty() : Transcript::of("word");
  });
  NoiseSweepConfig sweep;
  sweep.amplitude_count = 2;
  sweep.realizations_per_amplitude = 2;
  sweep.base_seed = 3;
  const CraftResult r = craft_yeehaw(x, oracle, 0.01, sweep, SearchConfig{});
  const auto j = to_json(r);
  CraftResult back = craft_result_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_TRUE(back.perturbed.empty());
  back.perturbed = r.perturbed;
  EXPECT_EQ(to_json(back).dump(), j.dump());
  EXPECT_EQ(j["trace"].size(), r.trace.size());
  EXPECT_EQ(j["samples"], 256u);
}

TEST(ChallengeJson, RoundTrip) {
  CraftResult a = clip_result(50, 8000);
  CraftResult b = clip_result(70, 8000);
  const std::vector<LabeledResult> labeled = {{&a, "two"}, {&b, "k"}};
  const CaptchaChallenge c = assemble_captcha(labeled, 10, 9);
  const auto j = challenge_manifest(c);
  const CaptchaChallenge back = challenge_from_manifest(nlohmann::json::parse(j.dump()), c.audio);
  EXPECT_EQ(back.answer, c.answer);
  ASSERT_EQ(back.segments.size(), 2u);
  EXPECT_EQ(back.segments[1].begin, c.segments[1].begin);
  EXPECT_EQ(back.segments[1].end, c.segments[1].end);
  EXPECT_EQ(back.gap_ms, 10);
  EXPECT_EQ(back.seed, 9u);
}
