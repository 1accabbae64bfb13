#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "horolab/acceptance.hpp"
#include "horolab/error.hpp"
#include "horolab/experiment.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitError = 2;

std::string experiment_table() {
  std::string out = "Experiments (name: pipeline):\n";
  for (const auto& e : horolab::experiments()) out += "  " + e.name + ": " + e.pipeline + "\n";
  return out;
}

int run_command(const std::string& config_path, std::string out_dir, int jobs) {
  const horolab::ExperimentConfig config = horolab::load_config(config_path);
  if (out_dir.empty())
    if (const char* env = std::getenv("HOROLAB_OUT_DIR")) out_dir = env;
  const horolab::ExperimentReport report = horolab::run_experiment(config, jobs);
  const std::string path = horolab::write_report(report, config, out_dir);
  std::printf("%s: %s, %zu rows, max_deviation %.6g -> %s\n", report.experiment.c_str(),
              report.pass ? "pass" : "FAIL", report.rows.size(), report.max_deviation, path.c_str());
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  for (const auto& f : report.failures) std::fprintf(stderr, "failed: %s\n", f.c_str());
  return report.pass ? kExitPass : kExitPropertyFailure;
}

int list_command() {
  for (const auto& e : horolab::experiments()) {
    std::printf("%s\n  %s\n  tolerances:", e.name.c_str(), e.pipeline.c_str());
    for (const auto& [name, value] : e.tolerances) std::printf(" %s=%g", name.c_str(), value);
    std::printf("\n");
    if (!e.parameters.empty()) {
      std::printf("  parameters:");
      for (const auto& p : e.parameters) std::printf(" %s", p.c_str());
      std::printf("\n");
    }
  }
  return kExitPass;
}

int verify_command(int jobs) {
  bool all = true;
  horolab::run_acceptance(jobs, [&](const horolab::CriterionResult& r) {
    std::printf("%s\n", horolab::format_result(r).c_str());
    std::fflush(stdout);
    all = all && r.pass;
  });
  return all ? kExitPass : kExitPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"horolab: horospherical geometry experiments on model manifolds"};
  app.set_version_flag("--version", horolab::version());
  app.require_subcommand(1);
  app.footer("Exit codes: 0 pass, 1 property failure, 2 configuration or solver error.\n"
             "HOROLAB_OUT_DIR overrides the report directory when --out is not given.\n\n" +
             experiment_table());

  std::string config_path, out_dir;
  int jobs = 1;
  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "YAML or JSON experiment config")->required();
  run->add_option("--out", out_dir, "Directory for the report file");
  run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  run->footer(experiment_table());

  app.add_subcommand("list-experiments", "List experiments, pipelines and default tolerances");

  int verify_jobs = 4;
  CLI::App* verify = app.add_subcommand("verify-paper", "Run the acceptance suite");
  verify->add_option("--jobs", verify_jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitError;
  }

  try {
    if (app.got_subcommand("run")) return run_command(config_path, out_dir, jobs);
    if (app.got_subcommand("list-experiments")) return list_command();
    return verify_command(verify_jobs);
  } catch (const horolab::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
}
