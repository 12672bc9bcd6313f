#include <algorithm>
#include <cmath>

#include "rwf/analysis/analysis.hpp"
#include "rwf/core/rng.hpp"

namespace rwf::analysis {

namespace {

double rel(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central differences of f over every parameter scalar, compared with `analytic`.
double check_params(ad::ParamSet& params, const std::vector<double>& analytic, const std::function<double()>& f,
                    double h, double floor) {
  double worst = 0.0;
  std::size_t k = 0;
  for (auto& t : params.values()) {
    for (double& v : t.data()) {
      const double saved = v;
      v = saved + h;
      const double up = f();
      v = saved - h;
      const double down = f();
      v = saved;
      worst = std::max(worst, rel(analytic[k++], (up - down) / (2.0 * h), floor));
    }
  }
  return worst;
}

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

}  // namespace

GradCheckReport gradient_oracle(std::size_t cases, std::uint64_t seed, double floor) {
  using nn::Parameterization;
  constexpr double h = 1e-5;
  const Parameterization kinds[] = {Parameterization::kPlain, Parameterization::kAdaptive,
                                    Parameterization::kWeightNorm, Parameterization::kFactorized,
                                    Parameterization::kFactorizedRaw};
  const nn::Activation acts[] = {nn::Activation::kTanh, nn::Activation::kGelu};
  GradCheckReport report;
  for (std::size_t n = 0; n < cases; ++n) {
    Rng rng = make_rng(seed, n);
    const std::size_t batch = 2 + pick(rng, 4);
    nn::Embedding embedding = nn::Embedding::identity(2);
    switch (pick(rng, 4)) {
      case 1: embedding = nn::Embedding::positional(2, 2, 2.0); break;
      case 2: embedding = nn::Embedding::gaussian(rng, 2, 3, 1.0); break;
      case 3: embedding = nn::Embedding::periodic_advection(); break;
      default: break;
    }
    const auto arch = pick(rng, 2) ? nn::Architecture::kModifiedMlp : nn::Architecture::kMlp;
    nn::MlpSpec spec{.width = 3 + pick(rng, 6), .depth = 1 + pick(rng, 3), .activation = acts[pick(rng, 2)],
                     .parameterization = kinds[pick(rng, std::size(kinds))]};
    ad::ParamSet params;
    auto net = nn::CoordinateNet::create(params, rng, "net", embedding, arch, spec);

    Tensor x = Tensor::matrix(batch, 2), y = Tensor::matrix(batch, 1), dir = Tensor::matrix(1, 2);
    for (double& v : x.data()) v = uniform(rng, -1.0, 1.0);
    for (double& v : y.data()) v = uniform(rng, -1.0, 1.0);
    for (double& v : dir.data()) v = uniform(rng, -1.0, 1.0);

    ad::Tape tape(params);
    ad::Var in = tape.placeholder("x");
    ad::Var u = net.apply(tape, in);
    ad::Var du = tape.tangent(u, in, tape.constant(dir));
    ad::Var target = tape.constant(y);
    ad::Var fit = tape.mean(tape.square(tape.sub(u, target)));
    ad::Var pde = tape.mean(tape.square(tape.add(du, tape.scale(u, 0.7))));
    tape.set(in, x);

    auto value = [&](ad::Var v) {
      tape.forward({v});
      return tape.value(v).item();
    };
    tape.forward();
    const Tensor jvp = tape.value(du);
    const auto g_fit = tape.backward(fit).flatten();
    const auto g_pde = tape.backward(pde).flatten();

    report.max_param_rel_err =
        std::max(report.max_param_rel_err, check_params(params, g_fit, [&] { return value(fit); }, h, floor));
    report.max_pde_rel_err =
        std::max(report.max_pde_rel_err, check_params(params, g_pde, [&] { return value(pde); }, h, floor));

    for (std::size_t r = 0; r < batch; ++r) {
      Tensor up = x, down = x;
      for (std::size_t c = 0; c < 2; ++c) {
        up(r, c) += h * dir[c];
        down(r, c) -= h * dir[c];
      }
      tape.set(in, up);
      tape.forward({u});
      const double fu = tape.value(u)[r];
      tape.set(in, down);
      tape.forward({u});
      const double fd = (fu - tape.value(u)[r]) / (2.0 * h);
      report.max_jvp_rel_err = std::max(report.max_jvp_rel_err, rel(jvp[r], fd, floor));
    }
    tape.set(in, x);
    ++report.cases;
  }
  return report;
}

}  // namespace rwf::analysis
