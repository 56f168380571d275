#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "scaptcha/cli.hpp"
#include "scaptcha/error.hpp"

namespace scaptcha::cli {
namespace {

namespace fs = std::filesystem;

/// `--key value` and `--key=value` pairs left over after CLI11 parsing.
void apply_overrides(Config& config, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (!arg.starts_with("--") || arg.size() == 2) {
      throw Error(ErrorKind::UsageError, "unexpected argument '" + arg + "'");
    }
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw Error(ErrorKind::UsageError, "missing value for --" + key);
      value = extras[++i];
    }
    config.set(key, value, fs::current_path());
  }
}

}  // namespace

int run(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("spectral-captcha");
  spdlog::set_default_logger(logger);

  CLI::App app{"Spectral audio CAPTCHA toolkit: craft, assemble, verify, attack, detect, report",
               "spectral-captcha"};
  app.require_subcommand(1);
  std::string config_path;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  auto add = [&](const std::string& name, const std::string& description) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", config_path, "Configuration file")->check(CLI::ExistingFile);
    sub->allow_extras();
    sub->footer("Any configuration key can be overridden with --section.key value.");
    return sub;
  };

  std::string algorithm = "yeehaw";
  CLI::App* craft = add("craft", "Craft perturbed audio for every file of the corpus manifest");
  craft->add_option("--algorithm", algorithm, "kenansville or yeehaw")->capture_default_str();

  std::vector<std::string> labels;
  int length = 0;
  std::string name = "challenge";
  CLI::App* assemble = add("assemble", "Concatenate crafted utterances into a challenge");
  assemble->add_option("--labels", labels, "Labels in challenge order")->delimiter(',');
  assemble->add_option("--length", length, "Number of utterances when --labels is not given");
  assemble->add_option("--name", name, "Output name inside <output_dir>/challenges")->capture_default_str();

  std::string challenge;
  std::string answer;
  CLI::App* verify = add("verify", "Check an answer against a challenge");
  verify->add_option("--challenge", challenge, "Challenge WAV (manifest alongside)")->required();
  verify->add_option("--answer", answer, "Space-separated answer")->required();

  CLI::App* attack = add("attack", "Run the adaptive breaker against a challenge");
  attack->add_option("--challenge", challenge, "Challenge WAV (manifest alongside)")->required();

  CLI::App* detect = add("detect", "Calibrate the empty-transcript detector");
  CLI::App* report = add("report", "Transferability, phonetic distance and probability tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    CLI::App* sub = app.get_subcommands().front();
    Config config = config_path.empty() ? Config::defaults() : Config::load(config_path);
    apply_overrides(config, sub->remaining());
    if (sub == verify) return cmd_verify(challenge, answer);

    const RunConfig run_config = RunConfig::from(config);
    if (sub == craft) return cmd_craft(run_config, parse_algorithm(algorithm));
    if (sub == assemble) {
      std::optional<int> len;
      if (assemble->count("--length") > 0) len = length;
      return cmd_assemble(run_config, labels, len, name);
    }
    if (sub == attack) return cmd_attack(run_config, challenge);
    if (sub == detect) return cmd_detect(run_config);
    if (sub == report) return cmd_report(run_config);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.kind() == ErrorKind::UsageError ? kExitUsage : kExitPartial;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitPartial;
  }
  return kExitUsage;
}

}  // namespace scaptcha::cli
