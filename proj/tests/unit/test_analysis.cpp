#include <cmath>

#include "doctest.h"
#include "rwf/analysis/analysis.hpp"
#include "rwf/core/errors.hpp"
#include "test_util.hpp"

using namespace rwf;
using namespace rwf::analysis;
using rwf::test::random_matrix;

namespace {

// Determinant by partial-pivot LU: an oracle independent of the Jacobi solver.
double lu_determinant(Tensor a) {
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::abs(a(r, k)) > std::abs(a(piv, k))) piv = r;
    }
    if (piv != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(k, c), a(piv, c));
      det = -det;
    }
    det *= a(k, k);
    for (std::size_t r = k + 1; r < n; ++r) {
      const double f = a(r, k) / a(k, k);
      for (std::size_t c = k; c < n; ++c) a(r, c) -= f * a(k, c);
    }
  }
  return det;
}

Tensor random_symmetric(Rng& rng, std::size_t n) {
  Tensor a = random_matrix(rng, n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < r; ++c) a(r, c) = a(c, r);
  }
  return a;
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("NTK of a single linear neuron is x_i x_j") {
    ad::ParamSet params;
    ad::ParamId w = params.add("w", Tensor::matrix(1, 1, 0.7));
    NetBuilder net = [&](ad::Tape& t, ad::Var x) { return t.linear(x, t.parameter(w)); };
    const Tensor x = Tensor::matrix(4, 1, {1.0, -2.0, 0.5, 3.0});
    const Tensor k = empirical_ntk(params, net, x);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) CHECK(k(i, j) == doctest::Approx(x[i] * x[j]).epsilon(1e-15));
    }
  }

  TEST_CASE("NTK rows of duplicate inputs coincide") {
    Rng rng = make_rng(1);
    ad::ParamSet params;
    auto mlp = nn::Mlp::create(params, rng, "net", {.input_dim = 2, .width = 8, .depth = 2,
                                                    .activation = nn::Activation::kTanh});
    NetBuilder net = [&](ad::Tape& t, ad::Var x) { return mlp.apply(t, x); };
    Tensor x = random_matrix(rng, 5, 2);
    x(3, 0) = x(1, 0);
    x(3, 1) = x(1, 1);
    const Tensor k = empirical_ntk(params, net, x);
    for (std::size_t j = 0; j < 5; ++j) CHECK(k(1, j) == k(3, j));
  }

  TEST_CASE("NTK matches a dense finite-difference Jacobian product") {
    Rng rng = make_rng(2);
    ad::ParamSet params;
    auto mlp = nn::Mlp::create(params, rng, "net", {.input_dim = 1, .width = 6, .depth = 1,
                                                    .activation = nn::Activation::kTanh});
    NetBuilder net = [&](ad::Tape& t, ad::Var x) { return mlp.apply(t, x); };
    const Tensor x = random_matrix(rng, 8, 1);
    const Tensor k = empirical_ntk(params, net, x);

    // Jacobian columns by central differences of the batched forward pass.
    ad::Tape tape(params);
    ad::Var in = tape.placeholder("x");
    tape.bind(in, net(tape, in));
    std::vector<std::vector<double>> jac(8);
    const double h = 1e-6;
    for (auto& t : params.values()) {
      for (double& v : t.data()) {
        const double saved = v;
        v = saved + h;
        const Tensor up = tape.forward(x);
        v = saved - h;
        const Tensor down = tape.forward(x);
        v = saved;
        for (std::size_t i = 0; i < 8; ++i) jac[i].push_back((up[i] - down[i]) / (2 * h));
      }
    }
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = 0; j < 8; ++j) {
        double dot = 0.0;
        for (std::size_t p = 0; p < jac[i].size(); ++p) dot += jac[i][p] * jac[j][p];
        CHECK(std::abs(k(i, j) - dot) < 1e-8 * std::max(1.0, std::abs(dot)));
      }
    }

    // The reverse-mode Jacobian itself agrees far more tightly.
    const Tensor j = parameter_jacobian(params, net, x);
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t p = 0; p < jac[i].size(); ++p) CHECK(std::abs(j(i, p) - jac[i][p]) < 1e-8);
    }
  }

  TEST_CASE("NTK is symmetric positive semi-definite") {
    for (auto kind : {nn::Parameterization::kPlain, nn::Parameterization::kFactorized}) {
      Rng rng = make_rng(3);
      ad::ParamSet params;
      auto mlp = nn::Mlp::create(params, rng, "net", {.input_dim = 1, .width = 16, .depth = 2,
                                                      .activation = nn::Activation::kRelu,
                                                      .parameterization = kind});
      NetBuilder net = [&](ad::Tape& t, ad::Var x) { return mlp.apply(t, x); };
      const Tensor k = empirical_ntk(params, net, random_matrix(rng, 40, 1));
      for (std::size_t i = 0; i < 40; ++i) {
        for (std::size_t j = 0; j < 40; ++j) CHECK(k(i, j) == k(j, i));
      }
      const auto eig = ntk_eigenvalues(k);
      CHECK(eig.back() >= -1e-8 * eig.front());
    }
  }

  TEST_CASE("NTK rejects vector outputs") {
    ad::ParamSet params;
    ad::ParamId w = params.add("w", Tensor::matrix(2, 1, 1.0));
    NetBuilder net = [&](ad::Tape& t, ad::Var x) { return t.linear(x, t.parameter(w)); };
    CHECK_THROWS_AS(empirical_ntk(params, net, Tensor::matrix(3, 1, 1.0)), DimensionError);
  }

  TEST_CASE("eigenvalue examples") {
    Tensor eye = Tensor::matrix(5, 5);
    for (std::size_t i = 0; i < 5; ++i) eye(i, i) = 1.0;
    for (double v : ntk_eigenvalues(eye)) CHECK(v == 1.0);
    CHECK(ntk_eigenvalues(Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 3.0})) == std::vector<double>{3.0, 1.0});
    const auto two = ntk_eigenvalues(Tensor::matrix(2, 2, {2.0, 1.0, 1.0, 2.0}));
    CHECK(two[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(two[1] == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("eigenvalues of random symmetric matrices match trace and determinant") {
    Rng rng = make_rng(4);
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor a = random_symmetric(rng, 10);
      const auto eig = ntk_eigenvalues(a);
      CHECK(std::is_sorted(eig.begin(), eig.end(), std::greater<>()));
      double trace = 0.0, sum = 0.0, prod = 1.0;
      for (std::size_t i = 0; i < 10; ++i) trace += a(i, i);
      for (double v : eig) {
        sum += v;
        prod *= v;
      }
      CHECK(std::abs(sum - trace) < 1e-9);
      const double det = lu_determinant(a);
      CHECK(std::abs(prod - det) < 1e-6 * std::abs(det));
    }
  }

  TEST_CASE("eigenvalues reject non-symmetric input") {
    CHECK_THROWS_AS(ntk_eigenvalues(Tensor::matrix(2, 2, {1.0, 0.5, 0.4, 1.0})), ArgumentError);
    CHECK_THROWS_AS(ntk_eigenvalues(Tensor::matrix(2, 3)), ArgumentError);
  }

  TEST_CASE("relative weight change examples") {
    const std::vector<double> w{1.0, -2.0, 0.5};
    CHECK(relative_weight_change(w, w) == 0.0);
    std::vector<double> doubled = w;
    for (double& v : doubled) v *= 2.0;
    CHECK(relative_weight_change(doubled, w) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(relative_weight_change(w, {0.0, 0.0, 0.0}), ArgumentError);
    CHECK_THROWS_AS(relative_weight_change(w, {1.0}), DimensionError);
  }

  TEST_CASE("orbit factorizations reconstruct the weights") {
    Rng rng = make_rng(5);
    const std::vector<Tensor> w{random_matrix(rng, 4, 3), random_matrix(rng, 2, 4)};
    for (double m : {1.0, 7.5, 1000.0}) {
      const auto back = reconstruct(factorize_at_scale(w, m));
      for (std::size_t l = 0; l < 2; ++l) CHECK(max_abs_diff(back[l], w[l]) < 1e-10);
    }
    CHECK_THROWS_AS(factorize_at_scale(w, 0.0), ArgumentError);
  }

  TEST_CASE("orbit distance examples") {
    Rng rng = make_rng(6);
    const std::vector<Tensor> a{random_matrix(rng, 4, 3), random_matrix(rng, 1, 4)};
    const std::vector<Tensor> b{random_matrix(rng, 4, 3), random_matrix(rng, 1, 4)};
    CHECK(orbit_distance_witness(a, a, 3.0).distance == 0.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double m : {1.0, 10.0, 100.0, 1000.0}) {
      const auto wit = orbit_distance_witness(a, b, m);
      CHECK(wit.distance <= prev);
      CHECK(wit.distance <= wit.bound);
      CHECK(orbit_distance_witness(a, b, 2 * m).distance <= 0.5 * wit.distance * (1 + 1e-12));
      prev = wit.distance;
    }
    CHECK_THROWS_AS(orbit_distance_witness(a, {a[0]}, 1.0), DimensionError);
  }

  TEST_CASE("orbit study shrinks the distance with the scale") {
    const auto s = theorem1_study(5, {1.0, 10.0, 100.0, 1000.0});
    for (const auto& d : s.distances) {
      CHECK(d[3] < 1e-2 * d[0]);
      CHECK(std::is_sorted(d.rbegin(), d.rend()));
    }
  }

  TEST_CASE("effective-rate check: trivial cases") {
    Rng rng = make_rng(7);
    ad::ParamSet params;
    auto net = nn::Mlp::create(params, rng, "net", {.input_dim = 1, .width = 6, .depth = 2,
                                                    .activation = nn::Activation::kTanh,
                                                    .parameterization = nn::Parameterization::kFactorizedRaw});
    std::vector<const nn::DenseLayer*> layers;
    for (const auto& l : net.layers()) layers.push_back(&l);
    const Tensor x = random_matrix(rng, 8, 1);
    Tensor y = random_matrix(rng, 8, 1);
    auto loss = [&](ad::Tape& t) {
      return t.mean(t.square(t.sub(net.apply(t, t.constant(x)), t.constant(y))));
    };
    const auto before = params.flatten();
    const auto zero = verify_theorem2(params, layers, loss, 0.0);
    CHECK(zero.discrepancy == 0.0);
    CHECK(zero.isotropic_discrepancy == 0.0);
    CHECK(params.flatten() == before);

    // Targets equal to the network output: zero gradient.
    ad::Tape tape(params);
    ad::Var out = net.apply(tape, tape.constant(x));
    tape.forward();
    y = tape.value(out);
    const auto interp = verify_theorem2(params, layers, loss, 0.1);
    CHECK(interp.discrepancy == 0.0);
  }

  TEST_CASE("effective-rate discrepancy is second order in the step") {
    for (auto [depth, width] : {std::pair<std::size_t, std::size_t>{2, 16}, {3, 64}}) {
      const auto s = theorem2_study(depth, width, 20, 1e-2);
      for (double r : s.ratios) CHECK((r >= 3.5 && r <= 4.5));
      // The isotropic (s^2 + |v|^2) g form leaves a first-order residue.
      for (double r : s.isotropic_ratios) CHECK(r < 3.0);
    }
  }

  TEST_CASE("effective-rate check needs raw-scale layers") {
    Rng rng = make_rng(8);
    ad::ParamSet params;
    auto net = nn::Mlp::create(params, rng, "net", {.input_dim = 1, .width = 4, .depth = 1,
                                                    .parameterization = nn::Parameterization::kFactorized});
    std::vector<const nn::DenseLayer*> layers{&net.layers()[0]};
    auto loss = [&](ad::Tape& t) { return t.sum(net.apply(t, t.constant(Tensor::matrix(1, 1, 0.5)))); };
    CHECK_THROWS_AS(verify_theorem2(params, layers, loss, 0.1), ArgumentError);
  }

  TEST_CASE("gradient oracle over random networks") {
    const auto report = gradient_oracle(20, 11);
    CHECK(report.cases == 20);
    MESSAGE("param " << report.max_param_rel_err << " jvp " << report.max_jvp_rel_err << " pde "
                     << report.max_pde_rel_err);
    CHECK(report.max_param_rel_err < 1e-5);
    CHECK(report.max_jvp_rel_err < 1e-5);
    CHECK(report.max_pde_rel_err < 1e-5);
  }
}
