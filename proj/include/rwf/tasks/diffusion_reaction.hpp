#pragma once

#include <filesystem>
#include <vector>

#include "rwf/ad/tape.hpp"
#include "rwf/core/rng.hpp"
#include "rwf/core/tensor.hpp"
#include "rwf/nn/network.hpp"

namespace rwf::tasks {

/// u_t = D u_xx + k u^2 + a(x) on [0, 1] x [0, T], u(x, 0) = 0, u(0, t) = u(1, t) = 0.
struct DrSolverParams {
  double diffusion = 0.01;
  double reaction = 0.01;
  std::size_t nx = 100;  // grid points including both boundaries
  std::size_t nt = 100;  // time levels including t = 0
  double t_final = 1.0;
  double picard_tol = 1e-10;
  std::size_t picard_max = 100;
};

/// Crank-Nicolson in time, second-order central differences in space; the reaction term
/// is linearized as u^(m) u^(m+1) and iterated (lagged Picard) until the max update is
/// below picard_tol. Returns [nt x nx], row n = time level n. Throws NumericalError when
/// Picard does not converge within picard_max iterations.
Tensor solve_dr_fd(const std::vector<double>& source, const DrSolverParams& params);

/// Solves tridiagonal (sub, diag, super) x = rhs in place (Thomas algorithm).
void thomas_solve(const std::vector<double>& sub, const std::vector<double>& diag, const std::vector<double>& super,
                  std::vector<double>& rhs);

struct DrDatasetSpec {
  std::size_t functions = 500;
  std::size_t points_per_function = 100;
  double length_scale = 0.2;
  DrSolverParams solver;
};

/// Sources on the solver's x grid (the m = nx sensors), full solutions, and P random
/// grid measurements per function.
struct DrDataset {
  Tensor sensors;    // [N x nx]
  Tensor solutions;  // [N x nt*nx], time-major
  Tensor coords;     // [N*P x 2] as (x, t)
  Tensor targets;    // [N*P x 1]
  std::vector<std::size_t> owner;  // function index of each measurement
  std::size_t nx = 0, nt = 0;
};

DrDataset make_dr_dataset(Rng& rng, const DrDatasetSpec& spec);
void save_dr_dataset(const std::filesystem::path& path, const DrDataset& data);
DrDataset load_dr_dataset(const std::filesystem::path& path);

/// Full solver grid as (x, t) rows, time-major: [nt*nx x 2].
Tensor dr_grid_coordinates(std::size_t nx, std::size_t nt, double t_final = 1.0);

/// Mean squared error of the paired DeepONet prediction against `targets` [B x 1].
ad::Var deeponet_loss(ad::Tape& tape, const nn::DeepOnet& net, ad::Var sensors, ad::Var coords, ad::Var targets);

}  // namespace rwf::tasks
