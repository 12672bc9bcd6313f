#include "rwf/tasks/diffusion_reaction.hpp"

#include <cmath>

#include "rwf/core/errors.hpp"
#include "rwf/core/tensor_file.hpp"
#include "rwf/tasks/grf.hpp"

namespace rwf::tasks {

void thomas_solve(const std::vector<double>& sub, const std::vector<double>& diag, const std::vector<double>& super,
                  std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  if (sub.size() != n || super.size() != n || rhs.size() != n) throw DimensionError("thomas_solve size mismatch");
  if (n == 0) return;
  std::vector<double> c(n);
  double beta = diag[0];
  if (beta == 0.0) throw NumericalError("thomas_solve: zero pivot");
  c[0] = super[0] / beta;
  rhs[0] /= beta;
  for (std::size_t i = 1; i < n; ++i) {
    beta = diag[i] - sub[i] * c[i - 1];
    if (beta == 0.0) throw NumericalError("thomas_solve: zero pivot");
    c[i] = super[i] / beta;
    rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

Tensor solve_dr_fd(const std::vector<double>& source, const DrSolverParams& p) {
  if (p.nx < 3 || p.nt < 2) throw ArgumentError("DR solver needs nx >= 3 and nt >= 2");
  if (source.size() != p.nx) {
    throw DimensionError("DR source has " + std::to_string(source.size()) + " values, grid has " +
                         std::to_string(p.nx));
  }
  const std::size_t m = p.nx - 2;  // interior unknowns
  const double h = 1.0 / static_cast<double>(p.nx - 1);
  const double dt = p.t_final / static_cast<double>(p.nt - 1);
  const double r = p.diffusion / (h * h);

  Tensor u = Tensor::matrix(p.nt, p.nx);
  std::vector<double> prev(p.nx, 0.0), iter(p.nx, 0.0), rhs_base(m), rhs(m);
  std::vector<double> sub(m, -0.5 * r), super(m, -0.5 * r), diag(m);
  sub[0] = 0.0;
  super[m - 1] = 0.0;

  for (std::size_t n = 1; n < p.nt; ++n) {
    for (std::size_t i = 1; i + 1 < p.nx; ++i) {
      const double lap = prev[i - 1] - 2.0 * prev[i] + prev[i + 1];
      rhs_base[i - 1] = prev[i] / dt + 0.5 * r * lap + 0.5 * p.reaction * prev[i] * prev[i] + source[i];
    }
    iter = prev;
    bool converged = false;
    for (std::size_t k = 0; k < p.picard_max; ++k) {
      for (std::size_t i = 0; i < m; ++i) diag[i] = 1.0 / dt + r - 0.5 * p.reaction * iter[i + 1];
      rhs = rhs_base;
      thomas_solve(sub, diag, super, rhs);
      double change = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        change = std::max(change, std::abs(rhs[i] - iter[i + 1]));
        iter[i + 1] = rhs[i];
      }
      if (!std::isfinite(change)) break;
      if (change < p.picard_tol) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw NumericalError("DR solver: Picard iteration did not converge at time level " + std::to_string(n));
    }
    prev = iter;
    std::copy(prev.begin(), prev.end(), u.ptr() + n * p.nx);
  }
  return u;
}

Tensor dr_grid_coordinates(std::size_t nx, std::size_t nt, double t_final) {
  Tensor xt = Tensor::matrix(nx * nt, 2);
  for (std::size_t n = 0; n < nt; ++n) {
    for (std::size_t i = 0; i < nx; ++i) {
      xt(n * nx + i, 0) = static_cast<double>(i) / static_cast<double>(nx - 1);
      xt(n * nx + i, 1) = t_final * static_cast<double>(n) / static_cast<double>(nt - 1);
    }
  }
  return xt;
}

DrDataset make_dr_dataset(Rng& rng, const DrDatasetSpec& spec) {
  if (spec.functions == 0 || spec.points_per_function == 0) throw ArgumentError("DR dataset sizes must be positive");
  const auto& sp = spec.solver;
  GrfSampler grf(linspace(0.0, 1.0, sp.nx), spec.length_scale);
  const Tensor grid = dr_grid_coordinates(sp.nx, sp.nt, sp.t_final);
  const std::size_t cells = sp.nx * sp.nt;
  const std::size_t P = spec.points_per_function;

  DrDataset d;
  d.nx = sp.nx;
  d.nt = sp.nt;
  d.sensors = Tensor::matrix(spec.functions, sp.nx);
  d.solutions = Tensor::matrix(spec.functions, cells);
  d.coords = Tensor::matrix(spec.functions * P, 2);
  d.targets = Tensor::matrix(spec.functions * P, 1);
  d.owner.resize(spec.functions * P);
  std::uniform_int_distribution<std::size_t> pick(0, cells - 1);
  for (std::size_t f = 0; f < spec.functions; ++f) {
    const auto a = grf.sample(rng);
    std::copy(a.begin(), a.end(), d.sensors.ptr() + f * sp.nx);
    const Tensor u = solve_dr_fd(a, sp);
    std::copy(u.data().begin(), u.data().end(), d.solutions.ptr() + f * cells);
    for (std::size_t k = 0; k < P; ++k) {
      const std::size_t cell = pick(rng), row = f * P + k;
      d.coords(row, 0) = grid(cell, 0);
      d.coords(row, 1) = grid(cell, 1);
      d.targets(row, 0) = u[cell];
      d.owner[row] = f;
    }
  }
  return d;
}

void save_dr_dataset(const std::filesystem::path& path, const DrDataset& data) {
  Tensor owner(Shape{data.owner.size()});
  for (std::size_t i = 0; i < data.owner.size(); ++i) owner[i] = static_cast<double>(data.owner[i]);
  save_tensors(path, kDatasetMagic,
               {{"sensors", data.sensors},
                {"solutions", data.solutions},
                {"coords", data.coords},
                {"targets", data.targets},
                {"owner", owner},
                {"grid", Tensor::vector({static_cast<double>(data.nx), static_cast<double>(data.nt)})}});
}

DrDataset load_dr_dataset(const std::filesystem::path& path) {
  const NamedTensors t = load_tensors(path, kDatasetMagic);
  DrDataset d;
  d.sensors = find_tensor(t, "sensors");
  d.solutions = find_tensor(t, "solutions");
  d.coords = find_tensor(t, "coords");
  d.targets = find_tensor(t, "targets");
  const Tensor& owner = find_tensor(t, "owner");
  d.owner.resize(owner.size());
  for (std::size_t i = 0; i < owner.size(); ++i) d.owner[i] = static_cast<std::size_t>(owner[i]);
  const Tensor& grid = find_tensor(t, "grid");
  d.nx = static_cast<std::size_t>(grid[0]);
  d.nt = static_cast<std::size_t>(grid[1]);
  return d;
}

ad::Var deeponet_loss(ad::Tape& tape, const nn::DeepOnet& net, ad::Var sensors, ad::Var coords, ad::Var targets) {
  ad::Var pred = net.apply(tape, sensors, coords);
  ad::Tape::Scope scope(tape, "deeponet_loss");
  return tape.mean(tape.square(tape.sub(pred, targets)));
}

}  // namespace rwf::tasks
