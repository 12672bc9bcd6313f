#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "rwf/core/errors.hpp"
#include "rwf/nn/checkpoint.hpp"
#include "rwf/nn/network.hpp"
#include "test_util.hpp"

using namespace rwf;
using rwf::test::random_matrix;

namespace {

constexpr nn::Parameterization kAllKinds[] = {nn::Parameterization::kPlain, nn::Parameterization::kAdaptive,
                                              nn::Parameterization::kWeightNorm, nn::Parameterization::kFactorized};

double act(nn::Activation a, double x) {
  switch (a) {
    case nn::Activation::kTanh: return std::tanh(x);
    case nn::Activation::kRelu: return x > 0 ? x : 0.0;
    case nn::Activation::kGelu: return 0.5 * x * std::erfc(-x / std::numbers::sqrt2);
    case nn::Activation::kLinear: return x;
  }
  return x;
}

// Straight-line y = act(W x + b) for one row.
std::vector<double> dense_ref(const Tensor& W, const Tensor& b, const std::vector<double>& x, nn::Activation a) {
  std::vector<double> y(W.rows());
  for (std::size_t o = 0; o < W.rows(); ++o) {
    double s = b[o];
    for (std::size_t i = 0; i < W.cols(); ++i) s += W(o, i) * x[i];
    y[o] = act(a, s);
  }
  return y;
}

Tensor run(const ad::ParamSet& params, const std::function<ad::Var(ad::Tape&, ad::Var)>& build, const Tensor& in) {
  ad::Tape tape(params);
  ad::Var x = tape.placeholder("x");
  tape.bind(x, build(tape, x));
  return tape.forward(in);
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("glorot variance") {
    Rng rng = make_rng(1);
    double sq = 0.0;
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) {
      const double w = nn::glorot_init(rng, 1, 1).item();
      sq += w * w;
    }
    CHECK(sq / draws == doctest::Approx(1.0).epsilon(0.02));

    double s = 0.0, s2 = 0.0;
    std::size_t n = 0;
    while (n < 1000000) {
      Tensor w = nn::glorot_init(rng, 128, 128);
      for (double v : w.data()) {
        s += v;
        s2 += v * v;
      }
      n += w.size();
    }
    const double mean = s / static_cast<double>(n);
    const double var = s2 / static_cast<double>(n) - mean * mean;
    CHECK(std::abs(var - 1.0 / 128.0) < 0.05 / 128.0);
    CHECK_THROWS_AS(nn::glorot_init(rng, 0, 3), ArgumentError);
  }

  TEST_CASE("glorot is deterministic under a fixed seed") {
    Rng a = make_rng(42), b = make_rng(42);
    CHECK(nn::glorot_init(a, 16, 8) == nn::glorot_init(b, 16, 8));
  }

  TEST_CASE("rwf_init reconstructs the plain weight") {
    Rng rng = make_rng(2);
    const Tensor w = nn::glorot_init(rng, 32, 20);
    SUBCASE("sigma zero gives a deterministic scale") {
      auto f = nn::rwf_init(rng, w, 0.7, 0.0);
      for (double s : f.log_scale.data()) CHECK(s == 0.7);
      for (std::size_t i = 0; i < w.size(); ++i) CHECK(f.direction[i] == doctest::Approx(w[i] * std::exp(-0.7)));
    }
    SUBCASE("mu = sigma = 0 is the identity factorization") {
      auto f = nn::rwf_init(rng, w, 0.0, 0.0);
      CHECK(f.direction == w);
    }
    SUBCASE("recommended hyper-parameters") {
      auto f = nn::rwf_init(rng, w, 1.0, 0.1);
      double worst = 0.0;
      for (std::size_t r = 0; r < w.rows(); ++r) {
        CHECK(std::exp(f.log_scale[r]) > 0.0);
        for (std::size_t c = 0; c < w.cols(); ++c) {
          worst = std::max(worst, std::abs(std::exp(f.log_scale[r]) * f.direction(r, c) - w(r, c)));
        }
      }
      CHECK(worst < 1e-12);
    }
    CHECK_THROWS_AS(nn::rwf_init(rng, w, NAN, 0.1), ArgumentError);
    CHECK_THROWS_AS(nn::rwf_init(rng, w, 1.0, INFINITY), ArgumentError);
    CHECK_THROWS_AS(nn::rwf_init(rng, w, 1.0, -0.1), ArgumentError);
  }

  TEST_CASE("every parameterization reproduces the plain layer at construction") {
    Rng rng = make_rng(3);
    const Tensor w = random_matrix(rng, 7, 5);
    const Tensor b(Shape{7}, std::vector<double>{0.1, -0.2, 0.3, 0.0, 0.5, -0.6, 0.7});
    const Tensor in = random_matrix(rng, 11, 5);
    for (nn::Activation a : {nn::Activation::kTanh, nn::Activation::kRelu, nn::Activation::kGelu,
                             nn::Activation::kLinear}) {
      Tensor reference;
      for (nn::Parameterization kind : kAllKinds) {
        ad::ParamSet params;
        Rng init = make_rng(4);
        auto layer = nn::DenseLayer::from_weights(params, init, "d", w, b, kind, {1.0, 0.1});
        Tensor out = run(params, [&](ad::Tape& t, ad::Var x) { return layer.apply(t, x, a); }, in);
        if (kind == nn::Parameterization::kPlain) {
          reference = out;
          for (std::size_t r = 0; r < in.rows(); ++r) {
            std::vector<double> row(in.ptr() + r * 5, in.ptr() + r * 5 + 5);
            auto y = dense_ref(w, b, row, a);
            for (std::size_t o = 0; o < 7; ++o) CHECK(out(r, o) == doctest::Approx(y[o]).epsilon(1e-14));
          }
        } else {
          INFO(nn::to_string(kind) << " / " << nn::to_string(a));
          CHECK(max_abs_diff(out, reference) < 1e-12);
          double wd = 0.0;
          const Tensor eff = layer.effective_weight(params);
          for (std::size_t i = 0; i < w.size(); ++i) wd = std::max(wd, std::abs(eff[i] - w[i]));
          CHECK(wd < 1e-12);
        }
      }
    }
  }

  TEST_CASE("factorized layer with s = 0 behaves like the plain layer with W = V") {
    Rng rng = make_rng(5);
    const Tensor w = random_matrix(rng, 4, 3);
    ad::ParamSet params;
    auto layer = nn::DenseLayer::from_weights(params, rng, "d", w, Tensor(Shape{4}),
                                              nn::Parameterization::kFactorized, {0.0, 0.0});
    CHECK(params[layer.weight_id()] == w);
    CHECK(params[layer.scale_id()].max_abs() == 0.0);
  }

  TEST_CASE("adaptive slope scales the pre-activation") {
    Rng rng = make_rng(6);
    const Tensor w = random_matrix(rng, 3, 2);
    ad::ParamSet params;
    auto layer = nn::DenseLayer::from_weights(params, rng, "d", w, Tensor(Shape{3}), nn::Parameterization::kAdaptive,
                                              {});
    params[layer.scale_id()] = Tensor::vector({2.0, 0.5, -1.0});
    const Tensor in = random_matrix(rng, 4, 2);
    Tensor out = run(params, [&](ad::Tape& t, ad::Var x) { return layer.apply(t, x, nn::Activation::kTanh); }, in);
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t o = 0; o < 3; ++o) {
        const double pre = w(o, 0) * in(r, 0) + w(o, 1) * in(r, 1);
        CHECK(out(r, o) == doctest::Approx(std::tanh(params[layer.scale_id()][o] * pre)).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("weight-norm row norms") {
    Rng rng = make_rng(7);
    const Tensor w = random_matrix(rng, 3, 4);
    ad::ParamSet params;
    auto layer = nn::DenseLayer::from_weights(params, rng, "d", w, Tensor(Shape{3}),
                                              nn::Parameterization::kWeightNorm, {});
    params[layer.scale_id()] = Tensor::vector({1.0, 2.0, 3.0});
    const Tensor eff = layer.effective_weight(params);
    for (std::size_t r = 0; r < 3; ++r) {
      double n = 0.0;
      for (std::size_t c = 0; c < 4; ++c) n += eff(r, c) * eff(r, c);
      CHECK(std::sqrt(n) == doctest::Approx(static_cast<double>(r + 1)).epsilon(1e-14));
    }
  }

  TEST_CASE("layer shape mismatch is a dimension error") {
    Rng rng = make_rng(8);
    ad::ParamSet params;
    auto layer = nn::DenseLayer::create(params, rng, "d", 3, 2, nn::Parameterization::kFactorized, {});
    CHECK_THROWS_AS(run(params, [&](ad::Tape& t, ad::Var x) { return layer.apply(t, x, nn::Activation::kTanh); },
                        Tensor::matrix(2, 4)),
                    DimensionError);
  }

  TEST_CASE("identity embedding with a zero net gives zero output") {
    Rng rng = make_rng(9);
    ad::ParamSet params;
    auto net = nn::CoordinateNet::create(params, rng, "net", nn::Embedding::identity(2), nn::Architecture::kMlp,
                                         {.width = 8, .depth = 2, .activation = nn::Activation::kTanh});
    for (auto& t : params.values()) t.fill(0.0);
    Tensor out = run(params, [&](ad::Tape& t, ad::Var x) { return net.apply(t, x); }, random_matrix(rng, 5, 2));
    CHECK(out.max_abs() == 0.0);
  }

  TEST_CASE("periodic embedding is 2 pi periodic in x") {
    Rng rng = make_rng(10);
    for (auto arch : {nn::Architecture::kMlp, nn::Architecture::kModifiedMlp}) {
      ad::ParamSet params;
      auto net = nn::CoordinateNet::create(params, rng, "net", nn::Embedding::periodic_advection(), arch,
                                           {.width = 16, .depth = 3, .activation = nn::Activation::kTanh,
                                            .parameterization = nn::Parameterization::kFactorized});
      Tensor in = random_matrix(rng, 20, 2, 0.0, 2.0 * std::numbers::pi);
      Tensor shifted = in;
      for (std::size_t r = 0; r < 20; ++r) shifted(r, 0) += 2.0 * std::numbers::pi;
      auto build = [&](ad::Tape& t, ad::Var x) { return net.apply(t, x); };
      CHECK(max_abs_diff(run(params, build, in), run(params, build, shifted)) < 1e-12);
    }
  }

  TEST_CASE("embedding widths and frequencies") {
    Rng rng = make_rng(11);
    auto g = nn::Embedding::gaussian(rng, 2, 64, 10.0);
    CHECK(g.output_dim() == 128);
    CHECK(g.frequencies().shape() == Shape{64, 2});
    auto p = nn::Embedding::positional(2, 5, 32.0);
    CHECK(p.output_dim() == 20);
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(p.frequencies()(2 * j, 0) == doctest::Approx(std::pow(32.0, j / 5.0)));
      CHECK(p.frequencies()(2 * j, 1) == 0.0);
      CHECK(p.frequencies()(2 * j + 1, 1) == doctest::Approx(std::pow(32.0, j / 5.0)));
    }
    CHECK(nn::Embedding::periodic_advection().output_dim() == 3);

    ad::ParamSet params;
    Tensor in = random_matrix(rng, 3, 2);
    Tensor out = run(params, [&](ad::Tape& t, ad::Var x) { return g.apply(t, x); }, in);
    REQUIRE(out.shape() == Shape{3, 128});
    const Tensor& B = g.frequencies();
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t k = 0; k < 64; ++k) {
        const double phase = 2.0 * std::numbers::pi * (B(k, 0) * in(r, 0) + B(k, 1) * in(r, 1));
        CHECK(out(r, k) == doctest::Approx(std::cos(phase)).epsilon(1e-12));
        CHECK(out(r, 64 + k) == doctest::Approx(std::sin(phase)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("gaussian frequencies have the requested spread") {
    Rng rng = make_rng(12);
    auto g = nn::Embedding::gaussian(rng, 2, 20000, 3.0);
    double s2 = 0.0;
    for (double v : g.frequencies().data()) s2 += v * v;
    CHECK(std::sqrt(s2 / 40000.0) == doctest::Approx(3.0).epsilon(0.02));
  }

  TEST_CASE("modified MLP against a straight-line evaluation") {
    Rng rng = make_rng(13);
    ad::ParamSet params;
    const nn::MlpSpec spec{.input_dim = 3, .width = 6, .depth = 3, .output_dim = 2,
                           .activation = nn::Activation::kTanh,
                           .parameterization = nn::Parameterization::kFactorized};
    auto net = nn::ModifiedMlp::create(params, rng, "m", spec);
    for (auto& t : params.values()) {
      for (double& v : t.data()) v += uniform(rng, -0.3, 0.3);
    }
    const Tensor in = random_matrix(rng, 5, 3);
    Tensor out = run(params, [&](ad::Tape& t, ad::Var x) { return net.apply(t, x); }, in);
    auto W = [&](const nn::DenseLayer& l) { return l.effective_weight(params); };
    auto b = [&](const nn::DenseLayer& l) { return params[l.bias_id()]; };
    for (std::size_t r = 0; r < 5; ++r) {
      std::vector<double> x(in.ptr() + 3 * r, in.ptr() + 3 * r + 3);
      auto U = dense_ref(W(net.encoder_u()), b(net.encoder_u()), x, spec.activation);
      auto V = dense_ref(W(net.encoder_v()), b(net.encoder_v()), x, spec.activation);
      auto H = dense_ref(W(net.hidden()[0]), b(net.hidden()[0]), x, spec.activation);
      for (std::size_t l = 1; l < net.hidden().size(); ++l) {
        auto Z = dense_ref(W(net.hidden()[l]), b(net.hidden()[l]), H, spec.activation);
        for (std::size_t k = 0; k < H.size(); ++k) H[k] = (1.0 - Z[k]) * U[k] + Z[k] * V[k];
      }
      auto y = dense_ref(W(net.readout()), b(net.readout()), H, nn::Activation::kLinear);
      for (std::size_t o = 0; o < 2; ++o) CHECK(out(r, o) == doctest::Approx(y[o]).epsilon(1e-12));
    }
  }

  TEST_CASE("modified MLP gate collapse") {
    Rng rng = make_rng(14);
    ad::ParamSet params;
    const nn::MlpSpec spec{.input_dim = 2, .width = 5, .depth = 3, .output_dim = 1,
                           .activation = nn::Activation::kTanh};
    auto net = nn::ModifiedMlp::create(params, rng, "m", spec);
    const Tensor in = random_matrix(rng, 6, 2);
    auto build = [&](ad::Tape& t, ad::Var x) { return net.apply(t, x); };

    SUBCASE("identical encoders make the output independent of the hidden weights") {
      params[net.encoder_v().weight_id()] = params[net.encoder_u().weight_id()];
      params[net.encoder_v().bias_id()] = params[net.encoder_u().bias_id()];
      const Tensor before = run(params, build, in);
      for (std::size_t l = 1; l < net.hidden().size(); ++l) {
        for (double& v : params[net.hidden()[l].weight_id()].data()) v = uniform(rng, -3.0, 3.0);
      }
      CHECK(max_abs_diff(before, run(params, build, in)) < 1e-14);
    }
    SUBCASE("zero encoders give a per-neuron constant") {
      for (const nn::DenseLayer* enc : {&net.encoder_u(), &net.encoder_v()}) {
        params[enc->weight_id()].fill(0.0);
        params[enc->bias_id()].fill(0.25);
      }
      const Tensor out = run(params, build, in);
      for (std::size_t r = 1; r < 6; ++r) CHECK(out(r, 0) == doctest::Approx(out(0, 0)).epsilon(1e-14));
    }
  }

  TEST_CASE("modified MLP width mismatch") {
    Rng rng = make_rng(15);
    ad::ParamSet params;
    auto u = nn::DenseLayer::create(params, rng, "u", 2, 4, nn::Parameterization::kPlain, {});
    auto v = nn::DenseLayer::create(params, rng, "v", 2, 5, nn::Parameterization::kPlain, {});
    auto h = nn::DenseLayer::create(params, rng, "h", 2, 4, nn::Parameterization::kPlain, {});
    auto o = nn::DenseLayer::create(params, rng, "o", 4, 1, nn::Parameterization::kPlain, {}, false);
    CHECK_THROWS_AS(nn::ModifiedMlp::from_layers({}, u, v, {h}, o), DimensionError);
  }

  TEST_CASE("DeepONet products") {
    Rng rng = make_rng(16);
    ad::ParamSet params;
    const nn::MlpSpec branch{.input_dim = 4, .width = 8, .depth = 2, .output_dim = 6,
                             .activation = nn::Activation::kTanh};
    const nn::MlpSpec trunk{.input_dim = 2, .width = 8, .depth = 2, .output_dim = 6,
                            .activation = nn::Activation::kTanh};
    auto net = nn::DeepOnet::create(params, rng, "op", branch, trunk);
    const Tensor a = random_matrix(rng, 5, 4), y = random_matrix(rng, 5, 2);

    auto eval = [&](bool grid) {
      ad::Tape tape(params);
      ad::Var pa = tape.placeholder("a"), py = tape.placeholder("y");
      ad::Var g = grid ? net.apply_grid(tape, pa, py) : net.apply(tape, pa, py);
      ad::Var bo = net.branch().apply(tape, pa), to = net.trunk().apply(tape, py);
      tape.set(pa, a);
      tape.set(py, y);
      tape.forward();
      return std::make_tuple(tape.value(g), tape.value(bo), tape.value(to));
    };
    SUBCASE("paired rows equal a naive dot product") {
      auto [g, bo, to] = eval(false);
      REQUIRE(g.shape() == Shape{5, 1});
      for (std::size_t r = 0; r < 5; ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < 6; ++k) s += bo(r, k) * to(r, k);
        CHECK(std::abs(g(r, 0) - s) < 1e-12);
      }
    }
    SUBCASE("grid evaluation pairs every function with every point") {
      auto [g, bo, to] = eval(true);
      REQUIRE(g.shape() == Shape{5, 5});
      for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < 6; ++k) s += bo(i, k) * to(j, k);
          CHECK(std::abs(g(i, j) - s) < 1e-12);
        }
      }
    }
    SUBCASE("zero trunk gives zero") {
      for (const auto& l : net.trunk().layers()) {
        params[l.weight_id()].fill(0.0);
        params[l.bias_id()].fill(0.0);
      }
      CHECK(std::get<0>(eval(false)).max_abs() == 0.0);
    }
  }

  TEST_CASE("DeepONet scalar product and width mismatch") {
    ad::ParamSet params;
    Rng rng = make_rng(17);
    const nn::MlpSpec one{.input_dim = 1, .width = 1, .depth = 1, .output_dim = 1,
                          .activation = nn::Activation::kLinear};
    auto net = nn::DeepOnet::create(params, rng, "op", one, one);
    for (const auto* l : net.layers()) {
      params[l->weight_id()].fill(l->name().find("out") != std::string::npos ? 1.0 : 0.0);
    }
    params[net.branch().layers().back().bias_id()].fill(2.0);
    params[net.trunk().layers().back().bias_id()].fill(3.0);
    ad::Tape tape(params);
    ad::Var a = tape.placeholder("a"), y = tape.placeholder("y");
    ad::Var g = net.apply(tape, a, y);
    tape.set(a, Tensor::matrix(1, 1, {0.3}));
    tape.set(y, Tensor::matrix(1, 1, {0.9}));
    tape.forward();
    CHECK(tape.value(g).item() == 6.0);

    ad::ParamSet other;
    nn::MlpSpec wide = one;
    wide.output_dim = 2;
    CHECK_THROWS_AS(nn::DeepOnet::create(other, rng, "op", one, wide), DimensionError);
  }

  TEST_CASE("factorized loss as a function of the effective weights equals the plain loss") {
    Rng rng = make_rng(18);
    const nn::MlpSpec base{.input_dim = 2, .width = 6, .depth = 2, .output_dim = 1,
                           .activation = nn::Activation::kTanh};
    ad::ParamSet plain_params, rwf_params;
    auto plain = nn::Mlp::create(plain_params, rng, "net", base);
    nn::MlpSpec fspec = base;
    fspec.parameterization = nn::Parameterization::kFactorized;
    auto fact = nn::Mlp::create(rwf_params, rng, "net", fspec);
    const Tensor in = random_matrix(rng, 16, 2), target = random_matrix(rng, 16, 1);

    auto loss_of = [&](const ad::ParamSet& p, const nn::Mlp& net) {
      ad::Tape tape(p);
      ad::Var x = tape.placeholder("x");
      ad::Var l = tape.mean(tape.square(tape.sub(net.apply(tape, x), tape.constant(target))));
      tape.set(x, in);
      tape.forward();
      return tape.value(l).item();
    };
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      for (std::size_t l = 0; l < plain.layers().size(); ++l) {
        const auto& pl = plain.layers()[l];
        const auto& fl = fact.layers()[l];
        const Tensor w = random_matrix(rng, pl.fan_out(), pl.fan_in(), -2.0, 2.0);
        const Tensor b = random_matrix(rng, 1, pl.fan_out());
        plain_params[pl.weight_id()] = w;
        auto f = nn::rwf_init(rng, w, uniform(rng, -1.0, 2.0), 0.5);
        rwf_params[fl.weight_id()] = f.direction;
        rwf_params[fl.scale_id()] = f.log_scale;
        plain_params[pl.bias_id()] = Tensor(Shape{pl.fan_out()}, std::vector<double>(b.data().begin(), b.data().end()));
        rwf_params[fl.bias_id()] = plain_params[pl.bias_id()];
      }
      const double lp = loss_of(plain_params, plain), lf = loss_of(rwf_params, fact);
      worst = std::max(worst, std::abs(lp - lf) / std::max(1.0, std::abs(lp)));
    }
    CHECK(worst < 1e-12);
  }

  TEST_CASE("checkpoint round trip is bit-exact") {
    Rng rng = make_rng(19);
    ad::ParamSet params;
    nn::Mlp::create(params, rng, "net", {.input_dim = 3, .width = 5, .depth = 2,
                                         .parameterization = nn::Parameterization::kFactorized});
    const Tensor buffer = random_matrix(rng, 4, 3);
    const auto path = std::filesystem::temp_directory_path() / "rwf_ckpt_test.bin";
    nn::save_checkpoint(path, params, {{"embedding.frequencies", buffer}});

    ad::ParamSet restored;
    Rng other = make_rng(20);
    nn::Mlp::create(restored, other, "net", {.input_dim = 3, .width = 5, .depth = 2,
                                             .parameterization = nn::Parameterization::kFactorized});
    auto buffers = nn::load_checkpoint(path, restored);
    CHECK(restored.flatten() == params.flatten());
    REQUIRE(buffers.size() == 1);
    CHECK(buffers[0].second == buffer);

    ad::ParamSet wrong;
    nn::Mlp::create(wrong, other, "net", {.input_dim = 3, .width = 6, .depth = 2,
                                          .parameterization = nn::Parameterization::kFactorized});
    CHECK_THROWS_AS(nn::load_checkpoint(path, wrong), DimensionError);
    std::filesystem::remove(path);
  }
}
