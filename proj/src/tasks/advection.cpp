#include "rwf/tasks/advection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rwf/core/errors.hpp"

namespace rwf::tasks {

double curriculum_speed(std::size_t step, const std::vector<SpeedRung>& ladder) {
  if (ladder.empty()) throw ArgumentError("curriculum ladder is empty");
  for (const auto& rung : ladder) {
    if (step < rung.until) return rung.c;
  }
  return ladder.back().c;
}

std::vector<SpeedRung> default_curriculum(std::size_t iterations, double target) {
  return {{iterations / 3, 10.0}, {std::numeric_limits<std::size_t>::max(), target}};
}

std::vector<double> causal_weights(const std::vector<double>& chunk_losses, double eps) {
  if (chunk_losses.empty()) throw ArgumentError("causal weights need at least one chunk");
  std::vector<double> w(chunk_losses.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(-eps * acc);
    acc += chunk_losses[i];
  }
  return w;
}

std::size_t causal_chunk(double t, std::size_t chunks) {
  const double k = std::floor(t * static_cast<double>(chunks));
  if (k < 0.0) return 0;
  return std::min(static_cast<std::size_t>(k), chunks - 1);
}

double advection_exact(double x, double t, double c) { return std::sin(x - c * t); }

ad::Var advection_residual(ad::Tape& tape, ad::Var u, ad::Var xt, ad::Var direction) {
  // (c, 1) . (u_x, u_t) is a single directional derivative.
  return tape.tangent(u, xt, direction);
}

AdvectionLoss::AdvectionLoss(ad::Tape& tape, const FieldBuilder& field, const AdvectionConfig& config)
    : tape_(&tape), config_(config) {
  if (config.n_ic == 0 || config.n_r == 0) throw ArgumentError("advection batch sizes must be positive");
  if (config.causal && config.chunks == 0) throw ArgumentError("causal training needs at least one chunk");

  x_ic_ = tape.placeholder("x_ic");
  target_ic_ = tape.placeholder("u_ic");
  x_r_ = tape.placeholder("x_r");
  direction_ = tape.constant(Tensor::vector({config.c, 1.0}));

  ad::Var u_ic = field(tape, x_ic_);
  ad::Var u_r = field(tape, x_r_);
  ad::Tape::Scope scope(tape, "advection");
  residual_ = advection_residual(tape, u_r, x_r_, direction_);
  ic_ = tape.mean(tape.square(tape.sub(u_ic, target_ic_)));
  ad::Var r2 = tape.square(residual_);
  if (config.causal) {
    const std::size_t m = config.chunks;
    chunk_matrix_ = tape.constant(Tensor::matrix(m, config.n_r));
    chunk_losses_ = tape.matmul(chunk_matrix_, r2);  // [M x 1] chunk means
    Tensor lower = Tensor::matrix(m, m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < i; ++k) lower(i, k) = 1.0;
    }
    ad::Var before = tape.matmul(tape.constant(std::move(lower)), tape.stop_gradient(chunk_losses_));
    chunk_weights_ = tape.exp(tape.scale(before, -config.causal_eps));
    r_ = tape.mean(tape.mul(chunk_weights_, chunk_losses_));
  } else {
    r_ = tape.mean(r2);
  }
  total_ = tape.add(tape.scale(ic_, config.lambda_ic), tape.scale(r_, config.lambda_r));
}

void AdvectionLoss::sample(Rng& rng, double c) {
  std::vector<double> x_ic(config_.n_ic);
  for (double& x : x_ic) x = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  Tensor xt = Tensor::matrix(config_.n_r, 2);
  for (std::size_t i = 0; i < config_.n_r; ++i) {
    xt(i, 0) = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    xt(i, 1) = uniform(rng, 0.0, 1.0);
  }
  set_points(x_ic, xt, c);
}

void AdvectionLoss::set_points(const std::vector<double>& x_ic, const Tensor& xt, double c) {
  if (x_ic.size() != config_.n_ic || xt.rank() != 2 || xt.rows() != config_.n_r || xt.cols() != 2) {
    throw DimensionError("advection point sets do not match the configured batch sizes");
  }
  Tensor ic = Tensor::matrix(config_.n_ic, 2);
  Tensor target = Tensor::matrix(config_.n_ic, 1);
  for (std::size_t i = 0; i < config_.n_ic; ++i) {
    ic(i, 0) = x_ic[i];
    target(i, 0) = std::sin(x_ic[i]);
  }
  tape_->set(x_ic_, std::move(ic));
  tape_->set(target_ic_, std::move(target));
  tape_->set(direction_, Tensor::vector({c, 1.0}));
  if (config_.causal) {
    const std::size_t m = config_.chunks;
    std::vector<std::size_t> counts(m, 0), chunk(config_.n_r);
    for (std::size_t i = 0; i < config_.n_r; ++i) {
      chunk[i] = causal_chunk(xt(i, 1), m);
      ++counts[chunk[i]];
    }
    Tensor cm = Tensor::matrix(m, config_.n_r);
    for (std::size_t i = 0; i < config_.n_r; ++i) cm(chunk[i], i) = 1.0 / static_cast<double>(counts[chunk[i]]);
    tape_->set(chunk_matrix_, std::move(cm));
  }
  tape_->set(x_r_, xt);
}

Tensor advection_grid(std::size_t nx, std::size_t nt) {
  Tensor xt = Tensor::matrix(nx * nt, 2);
  for (std::size_t j = 0; j < nt; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      xt(j * nx + i, 0) = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(nx);
      xt(j * nx + i, 1) = nt > 1 ? static_cast<double>(j) / static_cast<double>(nt - 1) : 0.0;
    }
  }
  return xt;
}

std::vector<double> advection_exact_on(const Tensor& xt, double c) {
  std::vector<double> u(xt.rows());
  for (std::size_t i = 0; i < xt.rows(); ++i) u[i] = advection_exact(xt(i, 0), xt(i, 1), c);
  return u;
}

}  // namespace rwf::tasks
