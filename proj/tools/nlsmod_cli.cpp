// nlsmod command line: run, sweep, verify.
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "nlsmod/nlsmod.hpp"

namespace {

void print_checks(const std::vector<nlsmod::Check>& checks) {
  for (const auto& c : checks) {
    std::printf("%-34s %s  estimate=%.6g target=%.6g tol=%.3g", c.name.c_str(),
                c.pass ? "PASS" : "FAIL", c.estimate, c.target, c.tolerance);
    if (!c.note.empty()) std::printf("  (%s)", c.note.c_str());
    std::printf("\n");
  }
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pseudo-conformal NLS runs and checks"};
  app.require_subcommand(1);

  std::string config, out_dir, checkpoint, b_list;
  bool plots = false;

  auto* run = app.add_subcommand("run", "evolve one configuration and evaluate every check");
  run->add_option("--config", config, "key = value configuration file")->required();
  run->add_option("--out", out_dir, "output directory (overrides output.dir)");
  run->add_option("--checkpoint", checkpoint, "checkpoint directory; resumes if a cursor exists");
  run->add_flag("--plots", plots, "write SVG plots");

  auto* sweep = app.add_subcommand("sweep", "run a list of b values and tabulate threshold flags");
  sweep->add_option("--config", config, "base configuration")->required();
  sweep->add_option("--b", b_list, "comma-separated b values, ascending")->required();
  sweep->add_option("--out", out_dir, "directory for sweep.json");

  auto* verify = app.add_subcommand("verify", "oracle and invariant suites only");
  verify->add_option("--config", config, "configuration file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = nlsmod::load_config(config);
    if (*run) {
      nlsmod::RunOptions o;
      if (!out_dir.empty()) o.out_dir = out_dir;
      if (!checkpoint.empty()) o.checkpoint = checkpoint;
      o.plots = plots;
      const auto r = nlsmod::run_simulation(cfg, o);
      std::printf("steps %ld, snapshots %zu, K = %.6g (measured %.6g)\n", r.trajectory.steps_taken,
                  r.trajectory.snapshots.size(), r.K.K, r.K.measured);
      if (!r.complete) {
        std::printf("halted before the end; rerun with the same --checkpoint to resume\n");
        return 1;
      }
      print_checks(r.checks);
      for (const auto& f : r.verdict["flags"]) std::printf("flag: %s\n", f.get<std::string>().c_str());
      std::printf("verdict: %s\n", r.pass ? "PASS" : "FAIL");
      return r.pass ? 0 : 1;
    }
    if (*sweep) {
      const auto table = nlsmod::sweep_b(cfg, parse_list(b_list));
      std::printf("%10s %14s %6s %12s %6s %6s\n", "b", "psi_max", "4K", "sup|f0|", "1/2", "pass");
      bool all = true;
      for (const auto& r : table.rows) {
        if (!r.error.empty()) {
          std::printf("%10.4g  error: %s\n", r.b, r.error.c_str());
          all = false;
          continue;
        }
        std::printf("%10.4g %14.6g %6s %12.6g %6s %6s\n", r.b, r.psi_max, r.psi_flag ? "yes" : "no",
                    r.f0_sup, r.f0_flag ? "yes" : "no", r.pass ? "yes" : "no");
        all = all && r.pass;
      }
      if (table.b0_hat) std::printf("smallest b with Psi <= 4K: %g\n", *table.b0_hat);
      if (table.b1_hat) std::printf("smallest b with both bounds: %g\n", *table.b1_hat);
      for (const auto& f : table.flags) std::printf("flag: %s\n", f.c_str());
      const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
      nlsmod::io::write_json(std::filesystem::path(dir) / "sweep.json", table.to_json());
      return all && table.flags.empty() ? 0 : 1;
    }
    if (*verify) {
      const auto checks = nlsmod::verify_suite(cfg);
      print_checks(checks);
      bool all = true;
      for (const auto& c : checks) all = all && c.pass;
      std::printf("verdict: %s\n", all ? "PASS" : "FAIL");
      return all ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
