// ims: run, verify and inspect flux-incompressible Maxwell-Stefan scenarios.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "ims/io.hpp"
#include "ims/verification.hpp"

namespace {

ims::RunConfig load(const std::string& what) {
  if (std::filesystem::exists(what)) return ims::parse_config(what);
  if (auto p = ims::find_preset(what)) return *p;
  ims::fail(ims::ErrorCode::IoError, "no config file or preset named '" + what + "'");
}

void print_error(const ims::Error& e) {
  std::cerr << "error: " << e.what() << "\n";
  if (const auto* v = dynamic_cast<const ims::ValidationError*>(&e))
    for (const auto& issue : v->issues()) std::cerr << "  " << issue.key << ": " << issue.reason << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flux-incompressible Maxwell-Stefan solver and verifier on the periodic torus"};
  app.require_subcommand(1);

  std::string output_dir;
  long long seed = -1;
  double snapshot_every = -1;
  bool quiet = false;
  std::string run_target;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario from a config file or preset name");
  run_cmd->add_option("config", run_target, "Config file (JSON) or preset name")->required();

  auto* verify_cmd = app.add_subcommand("verify", "Run the invariant and property suite on built-in scenarios");

  std::string cert_target;
  auto* cert_cmd = app.add_subcommand("certificate", "Print the regime certificate of a configuration");
  cert_cmd->add_option("config", cert_target, "Config file (JSON) or preset name")->required();

  auto* presets_cmd = app.add_subcommand("presets", "List the built-in scenarios");

  for (auto* cmd : {&app, run_cmd}) {
    cmd->add_option("--output-dir", output_dir, "Directory for diagnostics.csv, summary.txt and snapshots/");
    cmd->add_option("--seed", seed, "Seed for random initial perturbations")->check(CLI::NonNegativeNumber);
    cmd->add_option("--snapshot-every", snapshot_every, "Write a field snapshot every <t> time units")
        ->check(CLI::NonNegativeNumber);
  }
  for (auto* cmd : {&app, run_cmd, verify_cmd, cert_cmd, presets_cmd}) cmd->add_flag("--quiet", quiet, "Only print errors");
  CLI11_PARSE(app, argc, argv);

  try {
    if (*presets_cmd) {
      for (const auto& p : ims::presets()) std::cout << p.name << "\n    " << p.description << "\n";
      return 0;
    }
    if (*cert_cmd) {
      const auto cfg = load(cert_target);
      std::cout << ims::certificate_text(ims::certificate_for(cfg));
      return 0;
    }
    if (*verify_cmd) {
      bool all = true;
      ims::verify::run_builtin_suite([&](const ims::verify::Verdict& v) {
        all = all && v.passed;
        if (!quiet || !v.passed) std::cout << ims::verify::line(v) << std::endl;
      });
      if (!quiet) std::cout << (all ? "all criteria passed" : "some criteria failed") << "\n";
      return all ? 0 : 1;
    }
    if (*run_cmd) {
      ims::ScenarioOverrides ov;
      if (!output_dir.empty()) ov.output_dir = output_dir;
      if (seed >= 0) ov.seed = static_cast<std::uint64_t>(seed);
      if (snapshot_every >= 0) ov.snapshot_every = snapshot_every;
      const auto res = ims::run_scenario(load(run_target), ov);
      if (!quiet) {
        std::cout << res.summary;
        std::cout << "artifacts written to " << res.output_dir.string() << "\n";
      }
      if (res.record.termination)
        std::cerr << "run stopped: " << ims::to_string(res.record.termination->code) << ": "
                  << res.record.termination->message << "\n";
      return res.exit_code;
    }
  } catch (const ims::Error& e) {
    print_error(e);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
