#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rwf/ad/param_set.hpp"
#include "rwf/ad/tape.hpp"
#include "rwf/core/tensor.hpp"
#include "rwf/nn/network.hpp"

namespace rwf::analysis {

/// Builds a scalar-output network on a tape: [B x d] -> [B x 1].
using NetBuilder = std::function<ad::Var(ad::Tape&, ad::Var)>;

/// K_ij = <df/dtheta(x_i), df/dtheta(x_j)> over every parameter in `params`, one
/// backward pass per input row. Returns [N x N].
Tensor empirical_ntk(const ad::ParamSet& params, const NetBuilder& net, const Tensor& inputs);

/// Parameter Jacobian [N x P], rows in input order, columns in ParamSet::flatten order.
Tensor parameter_jacobian(const ad::ParamSet& params, const NetBuilder& net, const Tensor& inputs);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending. Sweeps run
/// until the off-diagonal Frobenius norm is below 1e-10 ||K||_F. Throws ArgumentError
/// when |K_ij - K_ji| exceeds 1e-10 max|K|.
std::vector<double> ntk_eigenvalues(const Tensor& k);

/// ||w_now - w_init||_2 / ||w_init||_2 over flattened effective weights.
double relative_weight_change(const std::vector<double>& now, const std::vector<double>& init);

/// One layer of a raw-scale factorization: diag(s) V = W.
struct OrbitLayer {
  std::vector<double> scale;
  Tensor direction;
};
using OrbitPoint = std::vector<OrbitLayer>;

/// Factorization with every scale equal to M (so V = W / M).
OrbitPoint factorize_at_scale(const std::vector<Tensor>& weights, double m);
std::vector<Tensor> reconstruct(const OrbitPoint& point);

struct OrbitWitness {
  double distance = 0.0;  // || (s, V) - (s', V') ||_2, s parts shared
  double bound = 0.0;     // 2 sqrt(L + 1) max_l ||V_l||_F over both points
};

/// Orbit-distance witness: two networks with the same layer shapes factorized at
/// a common scale M. Throws DimensionError when the shapes differ.
OrbitWitness orbit_distance_witness(const std::vector<Tensor>& theta, const std::vector<Tensor>& theta_prime,
                                    double m);

/// Raw-scale SGD update versus its plain-gradient prediction.
struct Theorem2Report {
  /// max |w+ - (w - eta (s^2 g + (v.g) v))|: the exact first-order prediction.
  double discrepancy = 0.0;
  /// max |w+ - (w - eta (s^2 + ||v||^2) g)|: the isotropic effective-rate form.
  double isotropic_discrepancy = 0.0;
};

/// Takes one SGD step of size eta on every parameter of a raw-scale factorized network
/// (each hidden/readout layer of kind kFactorizedRaw) for the loss built by `loss`, then
/// compares the reconstructed weights with the plain-gradient predictions, neuron by
/// neuron. Parameters are restored before returning.
Theorem2Report verify_theorem2(ad::ParamSet& params, const std::vector<const nn::DenseLayer*>& layers,
                               const std::function<ad::Var(ad::Tape&)>& loss, double eta);

/// Step-halving ratios over random MLPs (tanh, input 1, output 1, batch 16).
struct Theorem2Study {
  std::vector<double> ratios;            // discrepancy(eta) / discrepancy(eta / 2)
  std::vector<double> isotropic_ratios;  // same for the isotropic form
};
Theorem2Study theorem2_study(std::size_t depth, std::size_t width, std::size_t seeds, double eta,
                             std::uint64_t base_seed = 1);

/// Ratios distance(M) / distance(1) for `pairs` random pairs of MLP weight sets.
struct Theorem1Study {
  std::vector<double> scales;
  std::vector<std::vector<double>> distances;  // [pair][scale]
  std::vector<std::vector<double>> bounds;
};
Theorem1Study theorem1_study(std::size_t pairs, const std::vector<double>& scales, std::uint64_t base_seed = 1);

/// Reverse-mode and forward-mode derivatives against central differences.
struct GradCheckReport {
  std::size_t cases = 0;
  double max_param_rel_err = 0.0;  // loss gradient wrt parameters
  double max_jvp_rel_err = 0.0;    // network input directional derivative
  double max_pde_rel_err = 0.0;    // parameter gradient of a loss containing a tangent
};

/// Random small networks (all architectures, parameterizations and smooth activations).
/// Relative errors use |a - b| / max(|a|, |b|, floor).
GradCheckReport gradient_oracle(std::size_t cases, std::uint64_t seed, double floor = 1e-3);

}  // namespace rwf::analysis
