#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "rwf/analysis/analysis.hpp"
#include "rwf/cli/config.hpp"
#include "rwf/cli/runner.hpp"
#include "rwf/core/errors.hpp"

namespace {

using namespace rwf;

constexpr int kExitError = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitCheckFailed = 3;

void print_record(const cli::MetricRecord& r) {
  std::printf("iter %8zu  lr %.3e  loss %.6e  test %.6g  dw %.4f\n", r.iteration, r.learning_rate, r.loss,
              r.test_metric, r.weight_change);
  std::fflush(stdout);
}

int cmd_run(const std::string& path, const std::string& output_dir, bool quiet) {
  cli::RunConfig config = cli::load_config(path);
  if (!output_dir.empty()) config.output_dir = output_dir;
  cli::RunOptions opts;
  if (!quiet) opts.on_record = print_record;
  const cli::RunResult r = cli::run(config, opts);
  std::printf("%s: %s after %zu iterations (%.1f s), outputs in %s\n", config.task.c_str(),
              r.status == cli::RunStatus::kCompleted ? "completed" : "DIVERGED", r.iterations_completed, r.seconds,
              r.output_dir.string().c_str());
  if (r.status == cli::RunStatus::kDiverged) {
    std::fprintf(stderr, "%s\n", r.message.c_str());
    return kExitDiverged;
  }
  return 0;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::optional<double>& threshold, const std::string& out) {
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  const cli::Comparison c = cli::compare_runs(paths, threshold);
  const std::string csv = cli::format_comparison_csv(c);
  std::cout << "task " << c.task << ", metric " << c.metric_name << (c.higher_is_better ? " (higher is better)" : "")
            << ", threshold " << c.threshold << "\n"
            << csv;
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream(std::filesystem::path(out) / "comparison.csv") << csv;
    std::ofstream(std::filesystem::path(out) / "comparison.json") << cli::comparison_json(c).dump(2) << "\n";
  }
  return 0;
}

int cmd_verify(std::size_t seeds) {
  bool ok = true;
  auto line = [&](bool pass, const std::string& text) {
    ok = ok && pass;
    std::printf("[%s] %s\n", pass ? "PASS" : "FAIL", text.c_str());
  };
  for (auto [depth, width] : {std::pair<std::size_t, std::size_t>{2, 16}, {3, 64}}) {
    const auto s = analysis::theorem2_study(depth, width, seeds, 1e-2);
    double lo = INFINITY, hi = -INFINITY, ilo = INFINITY, ihi = -INFINITY;
    for (double r : s.ratios) lo = std::min(lo, r), hi = std::max(hi, r);
    for (double r : s.isotropic_ratios) ilo = std::min(ilo, r), ihi = std::max(ihi, r);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "raw-scale SGD step, depth %zu width %zu: halving ratio in [%.4f, %.4f] (isotropic rate form: "
                  "[%.3f, %.3f])",
                  depth, width, lo, hi, ilo, ihi);
    line(lo >= 3.5 && hi <= 4.5, buf);
  }
  const auto t1 = analysis::theorem1_study(seeds, {1.0, 10.0, 100.0, 1000.0});
  double worst = 0.0;
  bool monotone = true;
  for (const auto& d : t1.distances) {
    worst = std::max(worst, d.back() / d.front());
    for (std::size_t k = 1; k < d.size(); ++k) monotone = monotone && d[k] <= d[k - 1];
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "orbit distance at M=1000 / M=1: worst %.3e over %zu pairs, monotone %s", worst,
                seeds, monotone ? "yes" : "no");
  line(worst < 1e-2 && monotone, buf);
  const auto g = analysis::gradient_oracle(100, 2024);
  std::snprintf(buf, sizeof buf, "finite differences over %zu networks: params %.2e, input jvp %.2e, residual %.2e",
                g.cases, g.max_param_rel_err, g.max_jvp_rel_err, g.max_pde_rel_err);
  line(std::max({g.max_param_rel_err, g.max_jvp_rel_err, g.max_pde_rel_err}) < 1e-5, buf);
  return ok ? 0 : kExitCheckFailed;
}

int cmd_ablate(const std::string& task, const std::vector<double>& mus, const std::vector<double>& sigmas,
               const std::string& config_path, std::optional<std::size_t> iterations, const std::string& output_dir) {
  cli::RunConfig base = config_path.empty() ? cli::default_config(task) : cli::load_config(config_path);
  if (base.task != task) throw ArgumentError("config task '" + base.task + "' does not match '" + task + "'");
  if (iterations) base.iterations = *iterations;
  if (!output_dir.empty()) base.output_dir = output_dir;
  const auto cells = cli::ablate_rwf(base, mus, sigmas);
  std::string csv = "mu,sigma,status,final_loss,final_metric,run_dir\n";
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cells) {
    char row[256];
    std::snprintf(row, sizeof row, "%.17g,%.17g,%s,%.17g,%.17g,", c.mu, c.sigma,
                  c.status == cli::RunStatus::kCompleted ? "completed" : "diverged", c.final_loss, c.final_metric);
    csv += row + c.output_dir.string() + "\n";
    j.push_back({{"mu", c.mu},
                 {"sigma", c.sigma},
                 {"status", c.status == cli::RunStatus::kCompleted ? "completed" : "diverged"},
                 {"final_loss", std::isfinite(c.final_loss) ? nlohmann::json(c.final_loss) : nlohmann::json()},
                 {"final_metric", std::isfinite(c.final_metric) ? nlohmann::json(c.final_metric) : nlohmann::json()},
                 {"run_dir", c.output_dir.string()}});
  }
  std::cout << csv;
  if (!cells.empty()) {
    const auto root = cells.front().output_dir.parent_path();
    std::ofstream(root / "ablation.csv") << csv;
    std::ofstream(root / "ablation.json") << j.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coordinate-network benchmarks with random weight factorization"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Train one configuration");
  std::string config_path, run_out;
  bool quiet = false;
  run->add_option("config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  run->add_option("--output-dir", run_out, "Overrides output_dir");
  run->add_flag("--quiet", quiet, "No per-record progress");

  auto* compare = app.add_subcommand("compare", "Tabulate completed runs of one task");
  std::vector<std::string> dirs;
  std::optional<double> threshold;
  std::string compare_out;
  compare->add_option("dirs", dirs, "Run directories")->required()->expected(2, -1);
  compare->add_option("--threshold", threshold, "Metric level for iterations_to_threshold");
  compare->add_option("--out", compare_out, "Directory for comparison.csv and comparison.json");

  auto* verify = app.add_subcommand("verify-theorems", "Orbit-distance, effective-rate and derivative checks");
  std::size_t seeds = 20;
  verify->add_option("--seeds", seeds, "Random networks per check")->check(CLI::PositiveNumber);

  auto* ablate = app.add_subcommand("ablate-rwf", "RWF initialization grid over mu and sigma");
  std::string task, base_config, ablate_out;
  std::vector<double> mus{0.5, 1.0, 2.0}, sigmas{0.01, 0.1, 0.5};
  std::optional<std::size_t> iterations;
  ablate->add_option("task", task, "Task name")->required()->check(CLI::IsMember(rwf::cli::task_names()));
  ablate->add_option("--mu-grid", mus, "Comma-separated mu values")->delimiter(',');
  ablate->add_option("--sigma-grid", sigmas, "Comma-separated sigma values")->delimiter(',');
  ablate->add_option("--config", base_config, "Base configuration (defaults to the task defaults)");
  ablate->add_option("--iterations", iterations, "Overrides the iteration count");
  ablate->add_option("--output-dir", ablate_out, "Root for the grid's run directories");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, run_out, quiet);
    if (*compare) return cmd_compare(dirs, threshold, compare_out);
    if (*verify) return cmd_verify(seeds);
    if (*ablate) return cmd_ablate(task, mus, sigmas, base_config, iterations, ablate_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
