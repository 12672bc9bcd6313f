#include <algorithm>
#include <cmath>
#include <filesystem>

#include "rwf/cli/problem.hpp"
#include "rwf/core/errors.hpp"
#include "rwf/nn/network.hpp"
#include "rwf/tasks/advection.hpp"
#include "rwf/tasks/ct.hpp"
#include "rwf/tasks/diffusion_reaction.hpp"
#include "rwf/tasks/grf.hpp"
#include "rwf/tasks/image.hpp"

namespace rwf::cli {

namespace {

// Stream ids off the run seed.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kInitStream = 2;

nn::Embedding make_embedding(const EmbeddingConfig& e, std::size_t input_dim, Rng& rng) {
  using Kind = nn::Embedding::Kind;
  switch (e.kind) {
    case Kind::kIdentity: return nn::Embedding::identity(input_dim);
    case Kind::kPositional: return nn::Embedding::positional(input_dim, e.features, e.scale);
    case Kind::kGaussian: return nn::Embedding::gaussian(rng, input_dim, e.features, e.scale);
    case Kind::kPeriodicAdvection: return nn::Embedding::periodic_advection();
  }
  throw ArgumentError("unknown embedding");
}

nn::MlpSpec mlp_spec(const RunConfig& c, std::size_t input_dim, std::size_t output_dim) {
  return {.input_dim = input_dim,
          .width = c.width,
          .depth = c.depth,
          .output_dim = output_dim,
          .activation = c.activation,
          .parameterization = c.parameterization,
          .rwf = c.rwf};
}

Tensor column(const std::vector<double>& v) { return Tensor(Shape{v.size(), 1}, v); }

// Problems whose model is a single coordinate network.
class CoordinateProblem : public Problem {
 public:
  std::vector<const nn::DenseLayer*> layers() const override { return net_->layers(); }

  NamedTensors buffers() const override {
    const Tensor& f = net_->embedding().frequencies();
    if (f.rank() != 2) return {};
    return {{"embedding.frequencies", f}};
  }

 protected:
  void build_net(const RunConfig& c, std::size_t input_dim, std::size_t output_dim, Rng& init) {
    nn::Embedding emb = make_embedding(c.embedding, input_dim, init);
    net_.emplace(nn::CoordinateNet::create(params_, init, "net", std::move(emb), c.architecture,
                                           mlp_spec(c, 0, output_dim)));
    make_tape();
    eval_ = std::make_unique<ad::Tape>(params_);
    ad::Var in = eval_->placeholder("eval_input");
    eval_->bind(in, net_->apply(*eval_, in));
  }

  Tensor predict(const Tensor& inputs) { return eval_->forward(inputs); }

  std::optional<nn::CoordinateNet> net_;
  std::unique_ptr<ad::Tape> eval_;
};

class Regression1d final : public CoordinateProblem {
 public:
  explicit Regression1d(const RunConfig& c) {
    const auto& o = std::get<Regression1dOptions>(c.options);
    Rng data = make_rng(c.seed, kDataStream), init = make_rng(c.seed, kInitStream);
    // Train on even grid points, test on the interleaved odd ones.
    const auto grid = tasks::linspace(0.0, 1.0, 2 * o.points);
    const auto f = tasks::sample_grf(data, grid, o.length_scale);
    std::vector<double> xs, ys, xt, yt;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      (i % 2 ? xt : xs).push_back(grid[i]);
      (i % 2 ? yt : ys).push_back(f[i]);
    }
    x_train_ = column(xs);
    x_test_ = column(xt);
    y_test_ = yt;
    build_net(c, 1, 1, init);
    ad::Tape& t = tape();
    ad::Var pred = net_->apply(t, t.constant(x_train_));
    loss_ = loss_data_ = t.mean(t.square(t.sub(pred, t.constant(column(ys)))));
  }

  void prepare(std::size_t, Rng&) override {}
  double test_metric() override { return tasks::mse(predict(x_test_).data(), y_test_); }
  std::string metric_name() const override { return "mse"; }

  std::optional<std::pair<analysis::NetBuilder, Tensor>> ntk_inputs(std::size_t points) const override {
    const std::size_t n = std::min(points, x_train_.rows());
    // Evenly spread subset of the training inputs.
    Tensor x = Tensor::matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) x[i] = x_train_[i * x_train_.rows() / n];
    const nn::CoordinateNet* net = &*net_;
    return std::make_pair(analysis::NetBuilder([net](ad::Tape& t, ad::Var v) { return net->apply(t, v); }), x);
  }

 private:
  Tensor x_train_, x_test_;
  std::vector<double> y_test_;
};

class Image2d final : public CoordinateProblem {
 public:
  explicit Image2d(const RunConfig& c) {
    const auto& o = std::get<Image2dOptions>(c.options);
    Rng data = make_rng(c.seed, kDataStream), init = make_rng(c.seed, kInitStream);
    image_ = o.image.empty() ? tasks::procedural_image(data, o.size, o.size, o.channels) : tasks::read_pnm(o.image);
    const tasks::Image train = tasks::downsample_by_2(image_);
    x_test_ = tasks::pixel_coordinates(image_.height, image_.width);
    build_net(c, 2, image_.channels, init);
    ad::Tape& t = tape();
    ad::Var pred = net_->apply(t, t.constant(tasks::pixel_coordinates(train.height, train.width)));
    loss_ = loss_data_ = t.mean(t.square(t.sub(pred, t.constant(train.as_matrix()))));
  }

  void prepare(std::size_t, Rng&) override {}
  double test_metric() override { return tasks::psnr(predict(x_test_).data(), image_.pixels); }
  std::string metric_name() const override { return "psnr"; }
  bool higher_is_better() const override { return true; }

 private:
  tasks::Image image_;
  Tensor x_test_;
};

class Ct2d final : public CoordinateProblem {
 public:
  explicit Ct2d(const RunConfig& c) {
    const auto& o = std::get<Ct2dOptions>(c.options);
    Rng data = make_rng(c.seed, kDataStream), init = make_rng(c.seed, kInitStream);
    const auto phantom = o.perturbation > 0 ? tasks::perturbed_shepp_logan(data, o.perturbation) : tasks::shepp_logan();
    const std::size_t n = o.size, bins = o.bins ? o.bins : o.size;
    const auto angles = tasks::projection_angles(o.projections);
    // Measurements from a finer anti-aliased raster than the model grid.
    const tasks::Sinogram sino = tasks::radon_transform(tasks::rasterize(phantom, 4 * n, 2), angles, bins);
    const Tensor truth = tasks::rasterize(phantom, n, 2);
    truth_.assign(truth.data().begin(), truth.data().end());
    coords_ = tasks::raster_coordinates(n);
    build_net(c, 2, 1, init);
    ad::Tape& t = tape();
    ad::Var density = net_->apply(t, t.constant(coords_));
    Tensor g(Shape{sino.data.size(), 1}, std::vector<double>(sino.data.data().begin(), sino.data.data().end()));
    loss_ = loss_data_ =
        tasks::ct_loss(t, density, t.constant(tasks::projection_matrix(n, angles, bins)), t.constant(std::move(g)));
  }

  void prepare(std::size_t, Rng&) override {}
  double test_metric() override { return tasks::psnr(predict(coords_).data(), truth_); }
  std::string metric_name() const override { return "psnr"; }
  bool higher_is_better() const override { return true; }

 private:
  Tensor coords_;
  std::vector<double> truth_;
};

class Advection final : public CoordinateProblem {
 public:
  explicit Advection(const RunConfig& c) : options_(std::get<AdvectionOptions>(c.options)) {
    Rng init = make_rng(c.seed, kInitStream);
    build_net(c, 2, 1, init);
    if (options_.strategy == AdvectionStrategy::kCurriculum) {
      ladder_ = options_.ladder.empty() ? tasks::default_curriculum(c.iterations, options_.c) : options_.ladder;
    }
    tasks::AdvectionConfig cfg{.c = options_.c,
                               .lambda_ic = options_.lambda_ic,
                               .lambda_r = options_.lambda_r,
                               .n_ic = options_.n_ic,
                               .n_r = options_.n_r,
                               .causal = options_.strategy == AdvectionStrategy::kCausal,
                               .chunks = options_.chunks,
                               .causal_eps = options_.causal_eps};
    const nn::CoordinateNet* net = &*net_;
    loss_obj_.emplace(tape(), [net](ad::Tape& t, ad::Var xt) { return net->apply(t, xt); }, cfg);
    loss_ = loss_obj_->total();
    loss_data_ = loss_obj_->ic_loss();
    loss_residual_ = loss_obj_->residual_loss();
    grid_ = tasks::advection_grid(options_.eval_nx, options_.eval_nt);
    exact_ = tasks::advection_exact_on(grid_, options_.c);
  }

  void prepare(std::size_t step, Rng& rng) override {
    const double c = ladder_.empty() ? options_.c : tasks::curriculum_speed(step, ladder_);
    loss_obj_->sample(rng, c);
  }
  double test_metric() override { return tasks::relative_l2(predict(grid_).data(), exact_); }
  std::string metric_name() const override { return "rel_l2"; }

 private:
  AdvectionOptions options_;
  std::vector<tasks::SpeedRung> ladder_;
  std::optional<tasks::AdvectionLoss> loss_obj_;
  Tensor grid_;
  std::vector<double> exact_;
};

class DiffusionReaction final : public Problem {
 public:
  explicit DiffusionReaction(const RunConfig& c) : options_(std::get<DiffusionReactionOptions>(c.options)) {
    Rng data = make_rng(c.seed, kDataStream), init = make_rng(c.seed, kInitStream);
    data_ = load_or_make(data);
    const std::size_t m = data_.nx;

    const std::size_t latent = options_.latent ? options_.latent : c.width;
    auto branch = mlp_spec(c, m, latent), trunk = mlp_spec(c, 2, latent);
    net_.emplace(nn::DeepOnet::create(params_, init, "op", branch, trunk));
    make_tape();
    ad::Tape& t = tape();
    sensors_ = t.placeholder("sensors");
    coords_ = t.placeholder("coords");
    targets_ = t.placeholder("targets");
    loss_ = loss_data_ = tasks::deeponet_loss(t, *net_, sensors_, coords_, targets_);

    for (std::size_t row = 0; row < data_.owner.size(); ++row) {
      if (data_.owner[row] < options_.train_functions) train_rows_.push_back(row);
    }
    const std::size_t b = options_.batch;
    batch_sensors_ = Tensor::matrix(b, m);
    batch_coords_ = Tensor::matrix(b, 2);
    batch_targets_ = Tensor::matrix(b, 1);

    // Held-out functions against the full solver grid.
    const std::size_t tests = options_.test_functions;
    Tensor test_sensors = Tensor::matrix(tests, m);
    for (std::size_t i = 0; i < tests; ++i) {
      const std::size_t f = options_.train_functions + i;
      std::copy_n(data_.sensors.ptr() + f * m, m, test_sensors.ptr() + i * m);
    }
    eval_ = std::make_unique<ad::Tape>(params_);
    ad::Var es = eval_->constant(std::move(test_sensors));
    ad::Var ey = eval_->constant(tasks::dr_grid_coordinates(data_.nx, data_.nt, 1.0));
    eval_out_ = net_->apply_grid(*eval_, es, ey);
  }

  void prepare(std::size_t, Rng& rng) override {
    const std::size_t m = data_.nx;
    std::uniform_int_distribution<std::size_t> pick(0, train_rows_.size() - 1);
    for (std::size_t i = 0; i < options_.batch; ++i) {
      const std::size_t row = train_rows_[pick(rng)];
      std::copy_n(data_.sensors.ptr() + data_.owner[row] * m, m, batch_sensors_.ptr() + i * m);
      batch_coords_(i, 0) = data_.coords(row, 0);
      batch_coords_(i, 1) = data_.coords(row, 1);
      batch_targets_[i] = data_.targets[row];
    }
    tape().set(sensors_, batch_sensors_);
    tape().set(coords_, batch_coords_);
    tape().set(targets_, batch_targets_);
  }

  double test_metric() override {
    eval_->forward();
    const Tensor& pred = eval_->value(eval_out_);
    const std::size_t cells = data_.nt * data_.nx;
    double total = 0.0;
    for (std::size_t i = 0; i < options_.test_functions; ++i) {
      const std::size_t f = options_.train_functions + i;
      total += tasks::relative_l2(std::span<const double>(pred.ptr() + i * cells, cells),
                                  std::span<const double>(data_.solutions.ptr() + f * cells, cells));
    }
    return total / static_cast<double>(options_.test_functions);
  }
  std::string metric_name() const override { return "rel_l2"; }
  std::vector<const nn::DenseLayer*> layers() const override { return net_->layers(); }

 private:
  tasks::DrDataset load_or_make(Rng& rng) const {
    const std::size_t functions = options_.train_functions + options_.test_functions;
    tasks::DrDatasetSpec spec{.functions = functions,
                              .points_per_function = options_.points_per_function,
                              .length_scale = options_.length_scale,
                              .solver = {.diffusion = options_.diffusion,
                                         .reaction = options_.reaction,
                                         .nx = options_.nx,
                                         .nt = options_.nt}};
    if (!options_.cache.empty() && std::filesystem::exists(options_.cache)) {
      tasks::DrDataset d = tasks::load_dr_dataset(options_.cache);
      if (d.sensors.rows() != functions || d.nx != options_.nx || d.nt != options_.nt ||
          d.owner.size() != functions * options_.points_per_function) {
        throw ArgumentError("dataset cache '" + options_.cache + "' does not match the configured sizes");
      }
      return d;
    }
    tasks::DrDataset d = tasks::make_dr_dataset(rng, spec);
    if (!options_.cache.empty()) tasks::save_dr_dataset(options_.cache, d);
    return d;
  }

  DiffusionReactionOptions options_;
  tasks::DrDataset data_;
  std::optional<nn::DeepOnet> net_;
  std::vector<std::size_t> train_rows_;
  ad::Var sensors_, coords_, targets_;
  Tensor batch_sensors_, batch_coords_, batch_targets_;
  std::unique_ptr<ad::Tape> eval_;
  ad::Var eval_out_;
};

}  // namespace

std::unique_ptr<Problem> make_problem(const RunConfig& config) {
  if (config.task == "regression1d") return std::make_unique<Regression1d>(config);
  if (config.task == "image2d") return std::make_unique<Image2d>(config);
  if (config.task == "ct2d") return std::make_unique<Ct2d>(config);
  if (config.task == "advection") return std::make_unique<Advection>(config);
  if (config.task == "diffusion_reaction") return std::make_unique<DiffusionReaction>(config);
  throw ArgumentError("unknown task '" + config.task + "'");
}

}  // namespace rwf::cli
