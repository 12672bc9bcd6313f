#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rwf/ad/param_set.hpp"
#include "rwf/ad/tape.hpp"
#include "rwf/analysis/analysis.hpp"
#include "rwf/cli/config.hpp"
#include "rwf/core/rng.hpp"
#include "rwf/core/tensor_file.hpp"
#include "rwf/nn/dense.hpp"

namespace rwf::cli {

/// A task instance: data, network, loss graph and evaluation. The tape is built once;
/// prepare() only swaps in the points for the coming step.
class Problem {
 public:
  virtual ~Problem() = default;
  Problem(const Problem&) = delete;
  Problem& operator=(const Problem&) = delete;

  ad::ParamSet& params() noexcept { return params_; }
  ad::Tape& tape() noexcept { return *tape_; }

  /// Sets placeholders for `step` (minibatch, collocation points, curriculum speed).
  virtual void prepare(std::size_t step, Rng& rng) = 0;
  ad::Var loss() const noexcept { return loss_; }
  /// Components for the metrics stream; invalid when the task has none.
  ad::Var loss_data() const noexcept { return loss_data_; }
  ad::Var loss_residual() const noexcept { return loss_residual_; }

  /// Held-out metric with the current parameters.
  virtual double test_metric() = 0;
  virtual std::string metric_name() const = 0;
  virtual bool higher_is_better() const { return false; }

  /// Layers whose effective weights enter the relative weight change.
  virtual std::vector<const nn::DenseLayer*> layers() const = 0;

  /// Scalar network and training inputs for the NTK; empty when the task has none.
  virtual std::optional<std::pair<analysis::NetBuilder, Tensor>> ntk_inputs(std::size_t points) const {
    (void)points;
    return std::nullopt;
  }
  /// Fixed tensors saved next to the parameters (embedding frequencies).
  virtual NamedTensors buffers() const { return {}; }

 protected:
  Problem() = default;
  void make_tape() { tape_ = std::make_unique<ad::Tape>(params_); }

  ad::ParamSet params_;
  std::unique_ptr<ad::Tape> tape_;
  ad::Var loss_, loss_data_, loss_residual_;
};

/// Streams for data generation and network initialization, both derived from the seed.
std::unique_ptr<Problem> make_problem(const RunConfig& config);

}  // namespace rwf::cli
