#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rwf/cli/config.hpp"

namespace rwf::cli {

/// One row of metrics.csv. learning_rate is the rate of the most recent update.
struct MetricRecord {
  std::size_t iteration = 0;
  double learning_rate = 0.0;
  double loss = 0.0;
  double loss_data = 0.0;
  double loss_residual = 0.0;   // NaN when the task has no residual term
  double test_metric = 0.0;
  double weight_change = 0.0;
};

enum class RunStatus { kCompleted, kDiverged };

struct RunResult {
  RunConfig config;
  std::vector<MetricRecord> records;
  RunStatus status = RunStatus::kCompleted;
  std::string message;
  std::size_t iterations_completed = 0;
  std::string metric_name;
  bool higher_is_better = false;
  std::vector<double> ntk_initial, ntk_final;  // descending, empty unless ntk_points > 0
  std::filesystem::path output_dir;            // empty when nothing was written
  double seconds = 0.0;

  /// Last logged record; throws StateError when nothing was logged.
  const MetricRecord& final_record() const;
  double best_test_metric() const;
};

struct RunOptions {
  bool write_outputs = true;
  std::function<void(const MetricRecord&)> on_record;
};

/// Trains with Adam, logging at iteration 0, every log_every updates and at the end.
/// Never throws on divergence: the result carries kDiverged and the records so far.
RunResult run(const RunConfig& config, const RunOptions& options = {});

/// output_dir, or a name derived from the config; relative paths go under
/// $RWF_OUTPUT_ROOT (default "runs").
std::filesystem::path resolve_output_dir(const RunConfig& config);

inline constexpr const char* kMetricsHeader =
    "iteration,learning_rate,loss,loss_data,loss_residual,test_metric,weight_change";
std::string format_metrics_csv(const std::vector<MetricRecord>& records);
std::vector<MetricRecord> parse_metrics_csv(const std::string& text);
nlohmann::json summary_json(const RunResult& result);

/// Writes metrics.csv, summary.json, config.json, checkpoint.bin (and ntk.csv).
void write_outputs(const RunResult& result, const std::filesystem::path& dir);

struct ComparisonRow {
  std::string run_dir;
  std::string parameterization;
  double final_metric = 0.0;
  double best_metric = 0.0;
  double final_loss = 0.0;
  std::string status;
  long iterations_to_threshold = -1;  // -1: never reached
};

struct Comparison {
  std::string task;
  std::string metric_name;
  bool higher_is_better = false;
  double threshold = 0.0;
  std::vector<ComparisonRow> rows;  // best final metric first
};

/// Reads summary.json and metrics.csv of each directory. The default threshold is the
/// worst final metric among the runs. Throws ArgumentError on fewer than two runs or
/// mixed tasks, and std::runtime_error naming the directory when files are missing.
Comparison compare_runs(const std::vector<std::filesystem::path>& dirs, std::optional<double> threshold = {});
std::string format_comparison_csv(const Comparison& c);
nlohmann::json comparison_json(const Comparison& c);

struct AblationCell {
  double mu = 0.0, sigma = 0.0;
  RunStatus status = RunStatus::kCompleted;
  double final_loss = 0.0;
  double final_metric = 0.0;
  std::filesystem::path output_dir;
};

/// RWF runs over mu x sigma with everything else taken from `base`.
std::vector<AblationCell> ablate_rwf(const RunConfig& base, const std::vector<double>& mus,
                                     const std::vector<double>& sigmas, const RunOptions& options = {});

}  // namespace rwf::cli
