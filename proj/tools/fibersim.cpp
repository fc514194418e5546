#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "fiber/complexity.hpp"
#include "fiber/dbp.hpp"
#include "fiber/experiment.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int cmd_run(const std::string& config_path, const std::string& setup,
            const std::string& preset, const std::string& out_dir,
            std::uint64_t seed, bool seed_given) {
  fiber::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = fiber::config_from_json(slurp(config_path));
  } else {
    if (setup.size() != 1)
      throw std::invalid_argument("setup must be one of A, B, C, D");
    cfg = fiber::make_setup(setup[0], preset);
  }
  if (seed_given) cfg.seed = seed;

  const fiber::SweepResult res = fiber::run_experiment(cfg, out_dir);
  std::printf("%zu rows -> %s\n", res.rows.size(), out_dir.c_str());
  if (!res.ok) {
    for (const std::string& e : res.errors) std::fprintf(stderr, "failed: %s\n", e.c_str());
    return 2;
  }
  std::fputs(fiber::summary_to_text(fiber::summarize(res.rows)).c_str(), stdout);
  return 0;
}

int cmd_report(const std::string& in_dir) {
  const auto rows =
      fiber::rows_from_csv(slurp((std::filesystem::path(in_dir) / "results.csv").string()));
  const auto summary = fiber::summarize(rows);
  std::ofstream out(std::filesystem::path(in_dir) / "summary.csv",
                    std::ios::binary | std::ios::trunc);
  out << fiber::summary_to_csv(summary);
  std::fputs(fiber::summary_to_text(summary).c_str(), stdout);
  return 0;
}

int cmd_complexity(const std::string& plan_path, double baud_hz, double rolloff) {
  const fiber::DbpPlan plan = fiber::plan_from_text(slurp(plan_path));
  const double rate = 2.0 * baud_hz;
  const int cdc_taps =
      fiber::min_fir_taps(std::abs(plan.total_dc_ps_nm()), (1.0 + rolloff) * baud_hz, rate);
  fiber::ComplexityInput ci;
  ci.n_steps = static_cast<int>(plan.n_nonlinear());
  ci.cdc_taps = cdc_taps;
  ci.block_n = fiber::choose_block_n(cdc_taps);
  ci.sps = 2;
  ci.fir_half_taps = plan.fir_half_taps;
  std::printf("stages          %d\n", ci.n_steps);
  std::printf("block           %d\n", ci.block_n);
  std::printf("cdc taps        %d\n", ci.cdc_taps);
  std::printf("fd RMpS         %.1f\n", fiber::rmps_frequency(ci));
  std::printf("td RMpS         %.1f\n", fiber::rmps_time(ci));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dispersion-managed transmission sweeps and equalizer budgets"};
  app.require_subcommand(1);

  std::string config_path, setup = "A", preset = "desk", out_dir = "results";
  std::uint64_t seed = 1;
  auto* run = app.add_subcommand("run", "run a sweep and write artifacts");
  run->add_option("--config", config_path, "config JSON (overrides --setup/--preset)");
  run->add_option("--setup", setup, "A, B, C or D");
  run->add_option("--preset", preset, "desk or full");
  run->add_option("--out", out_dir, "output directory");
  auto* seed_opt = run->add_option("--seed", seed, "master seed");

  std::string in_dir;
  auto* report = app.add_subcommand("report", "summarize a results directory");
  report->add_option("--in", in_dir, "directory holding results.csv")->required();

  std::string plan_path;
  double baud_hz = 32e9, rolloff = 0.06;
  auto* complexity = app.add_subcommand("complexity", "cost of a saved plan");
  complexity->add_option("--plan", plan_path, "plan text file")->required();
  complexity->add_option("--baud", baud_hz, "symbol rate [Hz]");
  complexity->add_option("--rolloff", rolloff, "pulse roll-off");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed())
      return cmd_run(config_path, setup, preset, out_dir, seed, seed_opt->count() > 0);
    if (report->parsed()) return cmd_report(in_dir);
    return cmd_complexity(plan_path, baud_hz, rolloff);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
