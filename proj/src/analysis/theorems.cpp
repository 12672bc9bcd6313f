#include <cmath>
#include <limits>
#include <string>

#include "rwf/analysis/analysis.hpp"
#include "rwf/core/errors.hpp"
#include "rwf/core/rng.hpp"
#include "rwf/optim/optim.hpp"

namespace rwf::analysis {

OrbitPoint factorize_at_scale(const std::vector<Tensor>& weights, double m) {
  if (!(m > 0.0)) throw ArgumentError("orbit scale must be positive");
  OrbitPoint point;
  for (const Tensor& w : weights) {
    OrbitLayer layer{std::vector<double>(w.rows(), m), w};
    for (double& v : layer.direction.data()) v /= m;
    point.push_back(std::move(layer));
  }
  return point;
}

std::vector<Tensor> reconstruct(const OrbitPoint& point) {
  std::vector<Tensor> out;
  for (const auto& layer : point) {
    Tensor w = layer.direction;
    for (std::size_t r = 0; r < w.rows(); ++r) {
      for (std::size_t c = 0; c < w.cols(); ++c) w(r, c) *= layer.scale[r];
    }
    out.push_back(std::move(w));
  }
  return out;
}

OrbitWitness orbit_distance_witness(const std::vector<Tensor>& theta, const std::vector<Tensor>& theta_prime,
                                    double m) {
  if (theta.size() != theta_prime.size()) throw DimensionError("networks differ in layer count");
  for (std::size_t l = 0; l < theta.size(); ++l) {
    if (theta[l].shape() != theta_prime[l].shape()) {
      throw DimensionError("layer " + std::to_string(l) + " shapes differ: " + shape_string(theta[l].shape()) +
                           " vs " + shape_string(theta_prime[l].shape()));
    }
  }
  const OrbitPoint a = factorize_at_scale(theta, m), b = factorize_at_scale(theta_prime, m);
  double sq = 0.0, largest = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    for (std::size_t r = 0; r < a[l].scale.size(); ++r) {
      const double ds = a[l].scale[r] - b[l].scale[r];
      sq += ds * ds;
    }
    for (std::size_t i = 0; i < a[l].direction.size(); ++i) {
      const double dv = a[l].direction[i] - b[l].direction[i];
      sq += dv * dv;
    }
    largest = std::max({largest, a[l].direction.norm(), b[l].direction.norm()});
  }
  return {std::sqrt(sq), 2.0 * std::sqrt(static_cast<double>(a.size())) * largest};
}

Theorem2Report verify_theorem2(ad::ParamSet& params, const std::vector<const nn::DenseLayer*>& layers,
                               const std::function<ad::Var(ad::Tape&)>& loss, double eta) {
  for (const auto* layer : layers) {
    if (layer->kind() != nn::Parameterization::kFactorizedRaw) {
      throw ArgumentError("layer '" + layer->name() + "' is not a raw-scale factorized layer");
    }
  }
  const auto saved = params.flatten();
  ad::Tape tape(params);
  ad::Var out = loss(tape);
  tape.forward();
  const ad::ParamGradients grads = tape.backward(out);

  // Plain gradient per neuron from the direction gradient: dL/dv_k = s_k g_k.
  std::vector<Tensor> before, plain_grad;
  for (const auto* layer : layers) {
    before.push_back(layer->effective_weight(params));
    Tensor g = grads[layer->weight_id()];
    const Tensor& s = params[layer->scale_id()];
    for (std::size_t r = 0; r < g.rows(); ++r) {
      if (s[r] == 0.0) throw NumericalError("layer '" + layer->name() + "' has a zero scale");
      for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) /= s[r];
    }
    plain_grad.push_back(std::move(g));
  }
  std::vector<Tensor> scales, directions;
  for (const auto* layer : layers) {
    scales.push_back(params[layer->scale_id()]);
    directions.push_back(params[layer->weight_id()]);
  }

  optim::sgd_step(params, grads, eta);

  Theorem2Report report;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Tensor after = layers[l]->effective_weight(params);
    const Tensor& g = plain_grad[l];
    const Tensor& v = directions[l];
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const double s = scales[l][r];
      double vg = 0.0, vv = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) {
        vg += v(r, c) * g(r, c);
        vv += v(r, c) * v(r, c);
      }
      for (std::size_t c = 0; c < g.cols(); ++c) {
        const double w = before[l](r, c);
        const double exact = w - eta * (s * s * g(r, c) + vg * v(r, c));
        const double isotropic = w - eta * (s * s + vv) * g(r, c);
        report.discrepancy = std::max(report.discrepancy, std::abs(after(r, c) - exact));
        report.isotropic_discrepancy = std::max(report.isotropic_discrepancy, std::abs(after(r, c) - isotropic));
      }
    }
  }
  params.assign_flat(saved);
  return report;
}

namespace {

double ratio(double a, double b) { return b > 0.0 ? a / b : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

Theorem2Study theorem2_study(std::size_t depth, std::size_t width, std::size_t seeds, double eta,
                             std::uint64_t base_seed) {
  Theorem2Study study;
  for (std::size_t k = 0; k < seeds; ++k) {
    Rng rng = make_rng(base_seed + k, 0x7e02);
    ad::ParamSet params;
    auto net = nn::Mlp::create(params, rng, "net",
                               {.input_dim = 1, .width = width, .depth = depth, .output_dim = 1,
                                .activation = nn::Activation::kTanh,
                                .parameterization = nn::Parameterization::kFactorizedRaw});
    Tensor x = Tensor::matrix(16, 1), y = Tensor::matrix(16, 1);
    for (double& v : x.data()) v = uniform(rng, -1.0, 1.0);
    for (double& v : y.data()) v = uniform(rng, -1.0, 1.0);
    auto loss = [&](ad::Tape& tape) {
      ad::Var pred = net.apply(tape, tape.constant(x));
      return tape.mean(tape.square(tape.sub(pred, tape.constant(y))));
    };
    std::vector<const nn::DenseLayer*> layers;
    for (const auto& l : net.layers()) layers.push_back(&l);
    const auto full = verify_theorem2(params, layers, loss, eta);
    const auto half = verify_theorem2(params, layers, loss, 0.5 * eta);
    study.ratios.push_back(ratio(full.discrepancy, half.discrepancy));
    study.isotropic_ratios.push_back(ratio(full.isotropic_discrepancy, half.isotropic_discrepancy));
  }
  return study;
}

Theorem1Study theorem1_study(std::size_t pairs, const std::vector<double>& scales, std::uint64_t base_seed) {
  Theorem1Study study{scales, {}, {}};
  const std::size_t widths[] = {1, 32, 32, 32, 1};
  for (std::size_t k = 0; k < pairs; ++k) {
    Rng rng = make_rng(base_seed + k, 0x7e01);
    std::vector<Tensor> a, b;
    for (std::size_t l = 0; l + 1 < std::size(widths); ++l) {
      a.push_back(nn::glorot_init(rng, widths[l + 1], widths[l]));
      b.push_back(nn::glorot_init(rng, widths[l + 1], widths[l]));
    }
    std::vector<double> d, bound;
    for (double m : scales) {
      const auto w = orbit_distance_witness(a, b, m);
      d.push_back(w.distance);
      bound.push_back(w.bound);
    }
    study.distances.push_back(std::move(d));
    study.bounds.push_back(std::move(bound));
  }
  return study;
}

}  // namespace rwf::analysis
