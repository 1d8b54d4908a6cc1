// Command-line front end: run experiments, run the property suite, list models.
//
// Exit codes: 0 success, 1 configuration error, 2 integration failure,
// 3 verification failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ekahan/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIntegration = 2;
constexpr int kExitVerification = 3;

constexpr const char* kOutputEnv = "EKAHAN_OUTPUT_DIR";

std::vector<std::pair<std::string, std::string>> split_overrides(const std::vector<std::string>& items) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ekahan::ConfigError("--set expects key=value, got '" + item + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

int run_command(const std::string& config_path, const std::vector<std::string>& sets,
                const std::string& output_flag, bool quiet) {
  auto overrides = split_overrides(sets);
  if (const char* env = std::getenv(kOutputEnv); env && *env) overrides.emplace_back("output_dir", env);
  if (!output_flag.empty()) overrides.emplace_back("output_dir", output_flag);

  ekahan::ExperimentConfig config;
  if (config_path.empty()) {
    std::istringstream empty;
    config = ekahan::parse_config(empty, overrides);
  } else {
    std::ifstream in(config_path);
    if (!in) throw ekahan::ConfigError("cannot read config file '" + config_path + "'");
    config = ekahan::parse_config(in, overrides);
  }

  const auto result = ekahan::run_experiment(config, quiet ? nullptr : &std::cout);
  if (!quiet)
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << '\n';
  if (!result.ok()) {
    for (const auto& f : result.failures) std::cerr << "integration failure: " << f << '\n';
    return kExitIntegration;
  }
  return kExitOk;
}

int verify_command(const std::string& output_flag, bool quiet) {
  std::string dir = output_flag;
  if (dir.empty())
    if (const char* env = std::getenv(kOutputEnv); env && *env) dir = env;
  const auto report = ekahan::run_verification_suite(quiet ? nullptr : &std::cout);
  const std::string json = report.to_json();
  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    const auto path = std::filesystem::path(dir) / "verify_summary.json";
    std::ofstream(path) << json << '\n';
    if (!quiet) std::cout << "wrote " << path.string() << '\n';
  } else {
    std::cout << json << '\n';
  }
  std::cout << (report.ok() ? "verification passed" : "verification FAILED") << '\n';
  return report.ok() ? kExitOk : kExitVerification;
}

int list_models_command() {
  for (auto id : {ekahan::ModelId::henon_heiles, ekahan::ModelId::fpu, ekahan::ModelId::zk}) {
    const auto c = ekahan::default_config(id);
    std::cout << ekahan::model_name(id) << "  T=" << c.t_final << "  h_list=";
    for (std::size_t i = 0; i < c.h_list.size(); ++i)
      std::cout << (i ? "," : "") << ekahan::format_step(c.h_list[i]);
    std::cout << "  schemes=";
    for (std::size_t i = 0; i < c.schemes.size(); ++i)
      std::cout << (i ? "," : "") << ekahan::scheme_name(c.schemes[i]);
    std::cout << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exponential Kahan integrator experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string output_dir;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "Run an experiment and write CSV results");
  run->add_option("config", config_path, "key = value configuration file");
  run->add_option("-s,--set", sets, "Override a configuration key (key=value), repeatable");
  run->add_option("-o,--output-dir", output_dir, "Output directory (overrides config and $EKAHAN_OUTPUT_DIR)");
  run->add_flag("-q,--quiet", quiet, "Suppress progress output");

  auto* verify = app.add_subcommand("verify", "Run the property suite and write a JSON summary");
  verify->add_option("-o,--output-dir", output_dir, "Directory for verify_summary.json");
  verify->add_flag("-q,--quiet", quiet, "Only print the final verdict");

  app.add_subcommand("list-models", "List models and their default experiment settings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return run_command(config_path, sets, output_dir, quiet);
    if (*verify) return verify_command(output_dir, quiet);
    return list_models_command();
  } catch (const ekahan::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIntegration;
  }
}
