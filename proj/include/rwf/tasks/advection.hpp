#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "rwf/ad/tape.hpp"
#include "rwf/core/rng.hpp"
#include "rwf/core/tensor.hpp"

namespace rwf::tasks {

/// One rung of a curriculum: speed `c` is used for steps < `until`.
struct SpeedRung {
  std::size_t until = std::numeric_limits<std::size_t>::max();
  double c = 50.0;
};

/// u_t + c u_x = 0 on x in [0, 2 pi), t in [0, 1], u(x, 0) = sin x, periodic in x.
struct AdvectionConfig {
  double c = 50.0;
  double lambda_ic = 100.0;
  double lambda_r = 1.0;
  std::size_t n_ic = 128;
  std::size_t n_r = 1024;
  bool causal = false;
  std::size_t chunks = 16;
  double causal_eps = 0.1;
  std::vector<SpeedRung> ladder;  // empty: always c
};

/// Piecewise-constant speed; step == until already belongs to the next rung.
double curriculum_speed(std::size_t step, const std::vector<SpeedRung>& ladder);

/// c = 10 for the first third of `iterations`, `target` afterwards.
std::vector<SpeedRung> default_curriculum(std::size_t iterations, double target);

/// w_1 = 1, w_i = exp(-eps * sum_{k<i} L_k).
std::vector<double> causal_weights(const std::vector<double>& chunk_losses, double eps);

/// Chunk index floor(t M), clamped to [0, M-1].
std::size_t causal_chunk(double t, std::size_t chunks);

double advection_exact(double x, double t, double c);

using FieldBuilder = std::function<ad::Var(ad::Tape&, ad::Var)>;

/// r = du/dt + c du/dx for inputs (x, t), recorded as tape nodes. `direction` is a
/// constant [2] holding (c, 1); changing it with Tape::set changes the speed.
ad::Var advection_residual(ad::Tape& tape, ad::Var u, ad::Var xt, ad::Var direction);

/// Loss graph lambda_ic L_ic + lambda_r L_r with fresh uniform points on every sample().
/// Without causal weighting L_r = mean(r^2); with it, L_r = (1/M) sum_i w_i L_i where L_i
/// is the mean squared residual of chunk i and the w_i are stop-gradient coefficients.
class AdvectionLoss {
 public:
  AdvectionLoss(ad::Tape& tape, const FieldBuilder& field, const AdvectionConfig& config);

  /// Draws N_ic initial points and N_r collocation points and sets the speed.
  void sample(Rng& rng, double c);
  /// Uses explicit point sets instead (x_ic: [N_ic] positions, xt: [N_r x 2]).
  void set_points(const std::vector<double>& x_ic, const Tensor& xt, double c);

  ad::Var total() const noexcept { return total_; }
  ad::Var ic_loss() const noexcept { return ic_; }      // unweighted L_ic
  ad::Var residual_loss() const noexcept { return r_; }  // unweighted L_r
  ad::Var residual() const noexcept { return residual_; }
  ad::Var chunk_losses() const noexcept { return chunk_losses_; }
  ad::Var chunk_weights() const noexcept { return chunk_weights_; }
  const AdvectionConfig& config() const noexcept { return config_; }

 private:
  ad::Tape* tape_;
  AdvectionConfig config_;
  ad::Var x_ic_, target_ic_, x_r_, direction_, chunk_matrix_;
  ad::Var residual_, chunk_losses_, chunk_weights_;
  ad::Var ic_, r_, total_;
};

/// Evaluation grid [nx * nt x 2] of (x, t) and the exact solution on it.
Tensor advection_grid(std::size_t nx, std::size_t nt);
std::vector<double> advection_exact_on(const Tensor& xt, double c);

}  // namespace rwf::tasks
