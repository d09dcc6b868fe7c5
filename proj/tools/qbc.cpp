// qbc: run, list and validate commitment experiments.

#include <CLI11.hpp>

#include <iostream>

#include "qbc/harness.hpp"

namespace {

int validate_only(const std::string& target) {
  try {
    const qbc::ExperimentConfig c = qbc::resolve_config(target);
    std::cout << "ok: scenario " << c.scenario << ", seed " << c.seed << "\n";
    return qbc::kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return qbc::kExitInvalidConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for relativistic bit commitment with a certificate of classicality"};
  app.require_subcommand(1);

  std::string target;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;

  auto* run = app.add_subcommand("run", "run a config file or a shipped scenario");
  run->add_option("config", target, "INI config path or scenario name")->required();
  run->add_option("--seed", seed, "override experiment.seed");
  run->add_option("--trials", trials, "override experiment.trials");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--format", format, "summary, machine or both")
      ->check(CLI::IsMember({"summary", "machine", "both"}));

  auto* list = app.add_subcommand("list", "list shipped scenarios");

  auto* validate = app.add_subcommand("validate", "parse and validate a config");
  validate->add_option("config", target, "INI config path or scenario name")->required();

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& [name, description] : qbc::list_scenarios()) std::cout << name << "  " << description << "\n";
    return qbc::kExitOk;
  }
  if (validate->parsed()) return validate_only(target);

  qbc::ExperimentConfig config;
  try {
    config = qbc::resolve_config(target);
    if (seed) {
      config.seed = *seed;
      config.protocol.seed = *seed;
    }
    if (trials) config.trials = *trials;
    if (out_dir) config.output.dir = *out_dir;
    if (format) config.output.format = qbc::parse_format(*format);
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return qbc::kExitInvalidConfig;
  }

  qbc::ExperimentResult result;
  int code = 0;
  try {
    code = qbc::run_experiment(config, &result);
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return qbc::kExitInvalidConfig;
  }
  std::cout << qbc::render_summary(config, result);
  if (code == qbc::kExitCausalAbort) {
    std::cerr << "causal abort:\n";
    for (const auto& rec : result.records) {
      if (rec.at("record") == "violation") std::cerr << "  " << rec.at("violation").at("detail").get<std::string>() << "\n";
    }
  }
  return code;
}
