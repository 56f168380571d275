// Writes a synthetic labelled corpus, a white-noise set and a starter config.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "scaptcha/audio.hpp"
#include "scaptcha/error.hpp"
#include "scaptcha/synth.hpp"

namespace fs = std::filesystem;
using namespace scaptcha;

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic spoken-label corpus for spectral-captcha", "spectral-captcha-synth"};
  fs::path out = "corpus";
  std::vector<std::string> labels;
  std::uint32_t takes = 5;
  std::size_t noise_files = 0;
  std::uint64_t seed = 0;
  double duration = 0.3;
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("--labels", labels, "Labels (default: 26 letters, 10 digits, 20 words)")->delimiter(',');
  app.add_option("--takes", takes, "Recordings per label")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--noise", noise_files, "White-noise files for detector calibration")->capture_default_str();
  app.add_option("--seed", seed, "Seed for the noise levels")->capture_default_str();
  app.add_option("--duration", duration, "Utterance length in seconds")->capture_default_str()->check(
      CLI::Range(0.05, 5.0));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 64;
  }
  if (labels.empty()) labels = synth::default_vocabulary();

  try {
    fs::create_directories(out / "audio");
    std::ofstream manifest(out / "manifest.tsv");
    synth::UtteranceOptions options;
    options.duration_s = duration;
    for (const auto& label : labels) {
      for (std::uint32_t t = 0; t < takes; ++t) {
        const std::string file = fmt::format("audio/{}_{}.wav", label, t);
        save_wav(synth::utterance(label, t, options), out / file);
        manifest << file << '\t' << label << '\n';
      }
    }
    if (noise_files > 0) {
      fs::create_directories(out / "noise");
      std::mt19937_64 rng(seed);
      const auto samples = static_cast<std::size_t>(duration * kCanonicalSampleRate);
      for (std::size_t i = 0; i < noise_files; ++i) {
        const double level = 0.01 + 0.29 * std::generate_canonical<double, 53>(rng);
        save_wav(synth::white_noise(samples, level, rng()), out / fmt::format("noise/noise_{:03}.wav", i));
      }
    }
    std::ofstream config(out / "config.ini");
    config << "[run]\nseed = " << seed << "\noutput_dir = results\n\n"
           << "[corpus]\nmanifest = manifest.tsv\n\n"
           << "[oracles]\nnames = mock\n\n"
           << "[oracle.mock]\nkind = mock\n\n"
           << "[detect]\nnoise_dir = " << (noise_files > 0 ? "noise" : "") << "\n";
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  std::cout << fmt::format("{} files for {} labels written to {}\n", labels.size() * takes, labels.size(), out.string());
  return 0;
}
