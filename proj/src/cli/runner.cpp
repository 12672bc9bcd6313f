#include "rwf/cli/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "rwf/analysis/analysis.hpp"
#include "rwf/cli/problem.hpp"
#include "rwf/core/errors.hpp"
#include "rwf/nn/checkpoint.hpp"
#include "rwf/nn/network.hpp"
#include "rwf/optim/optim.hpp"

namespace rwf::cli {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTrainStream = 3;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Shortest form that reads back to the same double: 0.1 rather than 0.10000000000000001.
std::string short_fmt(double v) {
  char buf[40];
  for (int digits = 1; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// JSON has no NaN/inf; they are written as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& v) {
  return v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> ntk_spectrum(Problem& problem, std::size_t points) {
  auto setup = problem.ntk_inputs(points);
  if (!setup) return {};
  return analysis::ntk_eigenvalues(analysis::empirical_ntk(problem.params(), setup->first, setup->second));
}

}  // namespace

const MetricRecord& RunResult::final_record() const {
  if (records.empty()) throw StateError("run has no logged records");
  return records.back();
}

double RunResult::best_test_metric() const {
  double best = higher_is_better ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    if (std::isnan(r.test_metric)) continue;
    best = higher_is_better ? std::max(best, r.test_metric) : std::min(best, r.test_metric);
  }
  return best;
}

std::filesystem::path resolve_output_dir(const RunConfig& config) {
  std::filesystem::path dir = config.output_dir;
  if (dir.empty()) {
    dir = config.task + "_" + std::string(nn::to_string(config.parameterization)) + "_seed" +
          std::to_string(config.seed);
  }
  if (dir.is_absolute()) return dir;
  const char* root = std::getenv("RWF_OUTPUT_ROOT");
  return std::filesystem::path(root && *root ? root : "runs") / dir;
}

RunResult run(const RunConfig& config, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  result.config = config;

  auto problem = make_problem(config);
  ad::Tape& tape = problem->tape();
  result.metric_name = problem->metric_name();
  result.higher_is_better = problem->higher_is_better();
  const auto layers = problem->layers();
  const auto initial_weights = nn::effective_weights(layers, problem->params());
  if (config.ntk_points > 0) result.ntk_initial = ntk_spectrum(*problem, config.ntk_points);

  auto state = optim::AdamState::zeros_like(problem->params());
  Rng rng = make_rng(config.seed, kTrainStream);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    for (std::size_t i = 0;; ++i) {
      problem->prepare(i, rng);
      tape.forward();
      const double loss = tape.value(problem->loss()).item();
      if (!std::isfinite(loss)) throw TrainingDiverged(i, "non-finite loss");
      if (i % config.log_every == 0 || i == config.iterations) {
        MetricRecord rec{.iteration = i,
                         .learning_rate = optim::rate_at(config.schedule, i),
                         .loss = loss,
                         .loss_data = problem->loss_data().valid() ? tape.value(problem->loss_data()).item() : nan,
                         .loss_residual =
                             problem->loss_residual().valid() ? tape.value(problem->loss_residual()).item() : nan,
                         .test_metric = problem->test_metric(),
                         .weight_change = analysis::relative_weight_change(
                             nn::effective_weights(layers, problem->params()), initial_weights)};
        result.records.push_back(rec);
        if (options.on_record) options.on_record(rec);
      }
      if (i == config.iterations) break;
      const auto grads = tape.backward(problem->loss());
      optim::adam_step(state, problem->params(), grads, optim::rate_at(config.schedule, i + 1), i);
      result.iterations_completed = i + 1;
    }
    if (config.ntk_points > 0) result.ntk_final = ntk_spectrum(*problem, config.ntk_points);
  } catch (const TrainingDiverged& e) {
    result.status = RunStatus::kDiverged;
    result.message = e.what();
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (options.write_outputs) {
    result.output_dir = resolve_output_dir(config);
    write_outputs(result, result.output_dir);
    nn::save_checkpoint(result.output_dir / "checkpoint.bin", problem->params(), problem->buffers());
  }
  return result;
}

std::string format_metrics_csv(const std::vector<MetricRecord>& records) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.iteration) + "," + fmt(r.learning_rate) + "," + fmt(r.loss) + "," + fmt(r.loss_data) +
           "," + fmt(r.loss_residual) + "," + fmt(r.test_metric) + "," + fmt(r.weight_change) + "\n";
  }
  return out;
}

std::vector<MetricRecord> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw std::runtime_error("metrics.csv: unexpected header");
  std::vector<MetricRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
    if (v.size() != 7) throw std::runtime_error("metrics.csv: malformed row '" + line + "'");
    out.push_back({static_cast<std::size_t>(v[0]), v[1], v[2], v[3], v[4], v[5], v[6]});
  }
  return out;
}

json summary_json(const RunResult& r) {
  json j;
  j["task"] = r.config.task;
  j["parameterization"] = std::string(nn::to_string(r.config.parameterization));
  j["architecture"] = std::string(nn::to_string(r.config.architecture));
  j["seed"] = r.config.seed;
  j["status"] = r.status == RunStatus::kCompleted ? "completed" : "diverged";
  if (!r.message.empty()) j["message"] = r.message;
  j["iterations"] = r.config.iterations;
  j["iterations_completed"] = r.iterations_completed;
  j["metric"] = r.metric_name;
  j["higher_is_better"] = r.higher_is_better;
  if (!r.records.empty()) {
    const auto& f = r.final_record();
    j["final"] = {{"iteration", f.iteration},
                  {"loss", number(f.loss)},
                  {"loss_data", number(f.loss_data)},
                  {"loss_residual", number(f.loss_residual)},
                  {"test_metric", number(f.test_metric)},
                  {"weight_change", number(f.weight_change)}};
    j["best_test_metric"] = number(r.best_test_metric());
  }
  if (!r.ntk_initial.empty()) j["ntk_eigenvalues"]["initial"] = r.ntk_initial;
  if (!r.ntk_final.empty()) j["ntk_eigenvalues"]["final"] = r.ntk_final;
  j["seconds"] = r.seconds;
  return j;
}

void write_outputs(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "metrics.csv", format_metrics_csv(result.records));
  write_file(dir / "summary.json", summary_json(result).dump(2) + "\n");
  write_file(dir / "config.json", to_json(result.config).dump(2) + "\n");
  if (!result.ntk_initial.empty()) {
    std::string csv = "index,initial,final\n";
    for (std::size_t k = 0; k < result.ntk_initial.size(); ++k) {
      csv += std::to_string(k + 1) + "," + fmt(result.ntk_initial[k]) + "," +
             (k < result.ntk_final.size() ? fmt(result.ntk_final[k]) : "nan") + "\n";
    }
    write_file(dir / "ntk.csv", csv);
  }
}

Comparison compare_runs(const std::vector<std::filesystem::path>& dirs, std::optional<double> threshold) {
  if (dirs.size() < 2) throw ArgumentError("compare needs at least two run directories");
  Comparison c;
  std::vector<std::vector<MetricRecord>> series;
  for (const auto& dir : dirs) {
    const auto summary_path = dir / "summary.json";
    if (!std::filesystem::exists(summary_path)) {
      throw std::runtime_error("run directory '" + dir.string() + "' has no summary.json");
    }
    json s;
    try {
      s = json::parse(read_file(summary_path));
    } catch (const json::parse_error& e) {
      throw std::runtime_error("run directory '" + dir.string() + "': malformed summary.json");
    }
    const std::string task = s.at("task").get<std::string>();
    if (c.task.empty()) {
      c.task = task;
      c.metric_name = s.at("metric").get<std::string>();
      c.higher_is_better = s.at("higher_is_better").get<bool>();
    } else if (task != c.task) {
      throw ArgumentError("task mismatch: '" + dir.string() + "' is " + task + ", expected " + c.task);
    }
    ComparisonRow row;
    row.run_dir = dir.string();
    row.parameterization = s.at("parameterization").get<std::string>();
    row.status = s.at("status").get<std::string>();
    if (s.contains("final")) {
      row.final_metric = number_or_nan(s["final"]["test_metric"]);
      row.final_loss = number_or_nan(s["final"]["loss"]);
      row.best_metric = number_or_nan(s["best_test_metric"]);
    }
    const auto metrics_path = dir / "metrics.csv";
    if (!std::filesystem::exists(metrics_path)) {
      throw std::runtime_error("run directory '" + dir.string() + "' has no metrics.csv");
    }
    series.push_back(parse_metrics_csv(read_file(metrics_path)));
    c.rows.push_back(row);
  }
  auto better = [&](double a, double b) {
    if (std::isnan(b)) return !std::isnan(a);
    if (std::isnan(a)) return false;
    return c.higher_is_better ? a > b : a < b;
  };
  auto reaches = [&](double v, double t) { return c.higher_is_better ? v >= t : v <= t; };
  if (threshold) {
    c.threshold = *threshold;
  } else {
    c.threshold = c.rows[0].final_metric;
    for (const auto& r : c.rows) {
      if (better(c.threshold, r.final_metric)) c.threshold = r.final_metric;
    }
  }
  for (std::size_t k = 0; k < c.rows.size(); ++k) {
    for (const auto& rec : series[k]) {
      if (reaches(rec.test_metric, c.threshold)) {
        c.rows[k].iterations_to_threshold = static_cast<long>(rec.iteration);
        break;
      }
    }
  }
  std::stable_sort(c.rows.begin(), c.rows.end(),
                   [&](const ComparisonRow& a, const ComparisonRow& b) { return better(a.final_metric, b.final_metric); });
  return c;
}

std::string format_comparison_csv(const Comparison& c) {
  std::string out = "run_dir,parameterization,status,final_metric,best_metric,final_loss,iterations_to_threshold\n";
  for (const auto& r : c.rows) {
    out += r.run_dir + "," + r.parameterization + "," + r.status + "," + fmt(r.final_metric) + "," +
           fmt(r.best_metric) + "," + fmt(r.final_loss) + "," + std::to_string(r.iterations_to_threshold) + "\n";
  }
  return out;
}

json comparison_json(const Comparison& c) {
  json rows = json::array();
  for (const auto& r : c.rows) {
    rows.push_back({{"run_dir", r.run_dir},
                    {"parameterization", r.parameterization},
                    {"status", r.status},
                    {"final_metric", number(r.final_metric)},
                    {"best_metric", number(r.best_metric)},
                    {"final_loss", number(r.final_loss)},
                    {"iterations_to_threshold", r.iterations_to_threshold}});
  }
  return {{"task", c.task},
          {"metric", c.metric_name},
          {"higher_is_better", c.higher_is_better},
          {"threshold", number(c.threshold)},
          {"rows", rows}};
}

std::vector<AblationCell> ablate_rwf(const RunConfig& base, const std::vector<double>& mus,
                                     const std::vector<double>& sigmas, const RunOptions& options) {
  std::vector<AblationCell> cells;
  const std::filesystem::path root = base.output_dir.empty() ? std::filesystem::path("ablate_" + base.task)
                                                             : std::filesystem::path(base.output_dir);
  for (double mu : mus) {
    for (double sigma : sigmas) {
      RunConfig c = base;
      c.parameterization = nn::Parameterization::kFactorized;
      c.rwf = {.mu = mu, .sigma = sigma};
      c.output_dir = (root / ("mu" + short_fmt(mu) + "_sigma" + short_fmt(sigma))).string();
      const RunResult r = run(c, options);
      const double nan = std::numeric_limits<double>::quiet_NaN();
      const bool logged = !r.records.empty();
      cells.push_back({mu, sigma, r.status, logged ? r.final_record().loss : nan,
                       logged ? r.final_record().test_metric : nan, r.output_dir});
    }
  }
  return cells;
}

}  // namespace rwf::cli
