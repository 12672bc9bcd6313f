#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rwf/nn/dense.hpp"
#include "rwf/nn/embedding.hpp"
#include "rwf/nn/network.hpp"
#include "rwf/optim/optim.hpp"
#include "rwf/tasks/advection.hpp"

namespace rwf::cli {

struct Regression1dOptions {
  std::size_t points = 256;      // training points; as many interleaved test points
  double length_scale = 0.02;
};

struct Image2dOptions {
  std::size_t size = 64;         // test resolution; training uses every other pixel
  std::size_t channels = 3;
  std::string image;             // PNM path; empty means a procedural image
};

struct Ct2dOptions {
  std::size_t size = 64;
  std::size_t projections = 20;
  std::size_t bins = 0;          // 0: same as size
  double perturbation = 0.0;     // per-seed jitter of the phantom ellipses
};

enum class AdvectionStrategy { kRegular, kCurriculum, kCausal };

struct AdvectionOptions {
  double c = 50.0;
  double lambda_ic = 100.0;
  double lambda_r = 1.0;
  std::size_t n_ic = 128;
  std::size_t n_r = 1024;
  AdvectionStrategy strategy = AdvectionStrategy::kRegular;
  std::size_t chunks = 16;
  double causal_eps = 0.1;
  std::vector<tasks::SpeedRung> ladder;  // empty with curriculum: c = 10 for the first third
  std::size_t eval_nx = 256;
  std::size_t eval_nt = 100;
};

struct DiffusionReactionOptions {
  std::size_t train_functions = 5000;
  std::size_t test_functions = 100;
  std::size_t points_per_function = 100;
  std::size_t batch = 10000;
  double length_scale = 0.2;
  std::size_t nx = 100;
  std::size_t nt = 100;
  double diffusion = 0.01;
  double reaction = 0.01;
  std::size_t latent = 0;        // 0: same as width
  std::string cache;             // dataset cache file; generated and written when missing
};

using TaskOptions =
    std::variant<Regression1dOptions, Image2dOptions, Ct2dOptions, AdvectionOptions, DiffusionReactionOptions>;

struct EmbeddingConfig {
  nn::Embedding::Kind kind = nn::Embedding::Kind::kIdentity;
  std::size_t features = 0;
  double scale = 1.0;
};

struct RunConfig {
  std::string task;
  nn::Architecture architecture = nn::Architecture::kMlp;
  std::size_t depth = 3;
  std::size_t width = 128;
  nn::Activation activation = nn::Activation::kRelu;
  nn::Parameterization parameterization = nn::Parameterization::kPlain;
  nn::FactorizationInit rwf;
  EmbeddingConfig embedding;
  optim::Schedule schedule;
  std::size_t iterations = 0;
  std::size_t log_every = 100;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::size_t ntk_points = 0;    // > 0: eigenvalues of the NTK on that many training inputs
  TaskOptions options;
};

const std::vector<std::string>& task_names();

/// Per-task defaults before any user value is applied.
RunConfig default_config(const std::string& task);

/// Validated config with defaults. Throws ParseError naming the offending path for
/// malformed JSON, unknown keys, type mismatches, bad enum strings and out-of-range values.
RunConfig parse_config(const std::string& text);
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved config; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& config);

}  // namespace rwf::cli
