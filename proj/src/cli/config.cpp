#include "rwf/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "rwf/core/errors.hpp"

namespace rwf::cli {

using nlohmann::json;

namespace {

// Object reader that tracks consumed keys so leftovers can be rejected.
class Reader {
 public:
  Reader(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ParseError(path_.empty() ? "$" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return doc_.contains(key); }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!doc_.contains(key)) return;
    seen_.insert(key);
    const json& v = doc_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ParseError(at(key), "expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ParseError(at(key), "expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ParseError(at(key), "expected a number");
      out = v.get<double>();
      if (!std::isfinite(out)) throw ParseError(at(key), "must be finite");
    } else {
      static_assert(std::is_unsigned_v<T>);
      if (v.is_number_unsigned()) {
        out = v.get<T>();
      } else if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        out = static_cast<T>(v.get<std::int64_t>());
      } else if (v.is_number_float() && v.get<double>() >= 0 && std::floor(v.get<double>()) == v.get<double>() &&
                 v.get<double>() < 9e18) {
        out = static_cast<T>(v.get<double>());  // accepts 1e4-style integers
      } else {
        throw ParseError(at(key), "expected a non-negative integer");
      }
    }
  }

  template <typename E, typename Parse>
  void read_enum(const std::string& key, E& out, Parse parse) {
    if (!doc_.contains(key)) return;
    std::string name;
    read(key, name);
    try {
      out = parse(name);
    } catch (const std::invalid_argument& e) {
      throw ParseError(at(key), e.what());
    }
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    return Reader(doc_.at(key), at(key));
  }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return doc_.at(key);
  }

  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!seen_.count(it.key())) throw ParseError(at(it.key()), "unknown key");
    }
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ParseError(path, what);
}

AdvectionStrategy parse_strategy(std::string_view s) {
  if (s == "regular") return AdvectionStrategy::kRegular;
  if (s == "curriculum") return AdvectionStrategy::kCurriculum;
  if (s == "causal") return AdvectionStrategy::kCausal;
  throw ArgumentError("unknown strategy '" + std::string(s) + "' (regular, curriculum, causal)");
}

std::string to_string(AdvectionStrategy s) {
  switch (s) {
    case AdvectionStrategy::kRegular: return "regular";
    case AdvectionStrategy::kCurriculum: return "curriculum";
    case AdvectionStrategy::kCausal: return "causal";
  }
  return "?";
}

void read_options(Reader& r, Regression1dOptions& o) {
  r.read("points", o.points);
  r.read("length_scale", o.length_scale);
  require(o.points >= 2, r.at("points"), "need at least 2 points");
  require(o.length_scale > 0, r.at("length_scale"), "must be positive");
}

void read_options(Reader& r, Image2dOptions& o) {
  r.read("size", o.size);
  r.read("channels", o.channels);
  r.read("image", o.image);
  require(o.size >= 4 && o.size % 2 == 0, r.at("size"), "must be even and at least 4");
  require(o.channels == 1 || o.channels == 3, r.at("channels"), "must be 1 or 3");
}

void read_options(Reader& r, Ct2dOptions& o) {
  r.read("size", o.size);
  r.read("projections", o.projections);
  r.read("bins", o.bins);
  r.read("perturbation", o.perturbation);
  require(o.size >= 4, r.at("size"), "must be at least 4");
  require(o.projections >= 1, r.at("projections"), "must be positive");
  require(o.perturbation >= 0, r.at("perturbation"), "must be non-negative");
}

void read_options(Reader& r, AdvectionOptions& o) {
  r.read("c", o.c);
  r.read("lambda_ic", o.lambda_ic);
  r.read("lambda_r", o.lambda_r);
  r.read("n_ic", o.n_ic);
  r.read("n_r", o.n_r);
  r.read_enum("strategy", o.strategy, parse_strategy);
  r.read("chunks", o.chunks);
  r.read("causal_eps", o.causal_eps);
  r.read("eval_nx", o.eval_nx);
  r.read("eval_nt", o.eval_nt);
  if (r.has("ladder")) {
    const json& ladder = r.raw("ladder");
    require(ladder.is_array() && !ladder.empty(), r.at("ladder"), "expected a non-empty array");
    o.ladder.clear();
    for (std::size_t i = 0; i < ladder.size(); ++i) {
      Reader rung(ladder[i], r.at("ladder") + "[" + std::to_string(i) + "]");
      tasks::SpeedRung s;
      rung.read("until", s.until);
      rung.read("c", s.c);
      rung.finish();
      require(o.ladder.empty() || s.until > o.ladder.back().until, r.at("ladder"), "until must increase");
      o.ladder.push_back(s);
    }
  }
  require(o.n_ic >= 1 && o.n_r >= 1, r.at("n_r"), "point counts must be positive");
  require(o.chunks >= 1, r.at("chunks"), "must be positive");
  require(o.eval_nx >= 2 && o.eval_nt >= 2, r.at("eval_nx"), "evaluation grid needs at least 2 x 2 points");
}

void read_options(Reader& r, DiffusionReactionOptions& o) {
  r.read("train_functions", o.train_functions);
  r.read("test_functions", o.test_functions);
  r.read("points_per_function", o.points_per_function);
  r.read("batch", o.batch);
  r.read("length_scale", o.length_scale);
  r.read("nx", o.nx);
  r.read("nt", o.nt);
  r.read("diffusion", o.diffusion);
  r.read("reaction", o.reaction);
  r.read("latent", o.latent);
  r.read("cache", o.cache);
  require(o.train_functions >= 1 && o.test_functions >= 1, r.at("train_functions"), "need at least one function");
  require(o.points_per_function >= 1 && o.batch >= 1, r.at("batch"), "must be positive");
  require(o.nx >= 3 && o.nt >= 2, r.at("nx"), "grid too small");
  require(o.length_scale > 0 && o.diffusion > 0, r.at("length_scale"), "must be positive");
}

json options_json(const Regression1dOptions& o) {
  return {{"points", o.points}, {"length_scale", o.length_scale}};
}
json options_json(const Image2dOptions& o) {
  return {{"size", o.size}, {"channels", o.channels}, {"image", o.image}};
}
json options_json(const Ct2dOptions& o) {
  return {{"size", o.size}, {"projections", o.projections}, {"bins", o.bins}, {"perturbation", o.perturbation}};
}
json options_json(const AdvectionOptions& o) {
  json j{{"c", o.c},         {"lambda_ic", o.lambda_ic},          {"lambda_r", o.lambda_r},
         {"n_ic", o.n_ic},   {"n_r", o.n_r},                      {"strategy", to_string(o.strategy)},
         {"chunks", o.chunks}, {"causal_eps", o.causal_eps},      {"eval_nx", o.eval_nx},
         {"eval_nt", o.eval_nt}};
  if (!o.ladder.empty()) {
    json ladder = json::array();
    for (const auto& r : o.ladder) ladder.push_back({{"until", r.until}, {"c", r.c}});
    j["ladder"] = ladder;
  }
  return j;
}
json options_json(const DiffusionReactionOptions& o) {
  return {{"train_functions", o.train_functions},
          {"test_functions", o.test_functions},
          {"points_per_function", o.points_per_function},
          {"batch", o.batch},
          {"length_scale", o.length_scale},
          {"nx", o.nx},
          {"nt", o.nt},
          {"diffusion", o.diffusion},
          {"reaction", o.reaction},
          {"latent", o.latent},
          {"cache", o.cache}};
}

}  // namespace

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"regression1d", "image2d", "ct2d", "advection", "diffusion_reaction"};
  return names;
}

RunConfig default_config(const std::string& task) {
  RunConfig c;
  c.task = task;
  using nn::Activation;
  if (task == "regression1d") {
    c.depth = 3;
    c.width = 128;
    c.activation = Activation::kRelu;
    c.schedule = {.base_rate = 1e-3, .decay_steps = 5000, .decay_rate = 0.9};
    c.iterations = 100000;
    c.ntk_points = 256;
    c.options = Regression1dOptions{};
  } else if (task == "image2d") {
    c.depth = 4;
    c.width = 256;
    c.activation = Activation::kRelu;
    c.embedding = {nn::Embedding::Kind::kGaussian, 256, 10.0};
    c.rwf = {.mu = 2.0, .sigma = 0.01};
    c.schedule = {.base_rate = 1e-3, .warmup_steps = 200};
    c.iterations = 2000;
    c.options = Image2dOptions{};
  } else if (task == "ct2d") {
    c.depth = 5;
    c.width = 256;
    c.activation = Activation::kRelu;
    c.embedding = {nn::Embedding::Kind::kGaussian, 256, 3.0};
    c.schedule = {.base_rate = 1e-3, .warmup_steps = 200};
    c.iterations = 2000;
    c.options = Ct2dOptions{};
  } else if (task == "advection") {
    c.depth = 5;
    c.width = 256;
    c.activation = Activation::kTanh;
    c.embedding = {nn::Embedding::Kind::kPeriodicAdvection, 0, 1.0};
    c.schedule = {.base_rate = 1e-3, .decay_steps = 5000, .decay_rate = 0.9};
    c.iterations = 200000;
    c.options = AdvectionOptions{};
  } else if (task == "diffusion_reaction") {
    c.architecture = nn::Architecture::kDeepOnet;
    c.depth = 5;
    c.width = 64;
    c.activation = Activation::kTanh;
    c.schedule = {.base_rate = 1e-3, .decay_steps = 1000, .decay_rate = 0.9};
    c.iterations = 50000;
    c.options = DiffusionReactionOptions{};
  } else {
    std::string known;
    for (const auto& n : task_names()) known += (known.empty() ? "" : ", ") + n;
    throw ParseError("task", "unknown task '" + task + "' (" + known + ")");
  }
  return c;
}

RunConfig parse_config(const nlohmann::json& doc) {
  Reader r(doc, "");
  require(r.has("task"), "task", "missing");
  std::string task;
  r.read("task", task);
  RunConfig c = default_config(task);

  r.read_enum("architecture", c.architecture, nn::parse_architecture);
  r.read("depth", c.depth);
  r.read("width", c.width);
  r.read_enum("activation", c.activation, nn::parse_activation);
  r.read_enum("parameterization", c.parameterization, nn::parse_parameterization);
  if (r.has("rwf")) {
    Reader f = r.child("rwf");
    f.read("mu", c.rwf.mu);
    f.read("sigma", c.rwf.sigma);
    f.finish();
    require(c.rwf.sigma >= 0, "rwf.sigma", "must be non-negative");
  }
  if (r.has("embedding")) {
    Reader e = r.child("embedding");
    e.read_enum("kind", c.embedding.kind, nn::parse_embedding_kind);
    e.read("features", c.embedding.features);
    e.read("scale", c.embedding.scale);
    e.finish();
  }
  if (r.has("schedule")) {
    Reader s = r.child("schedule");
    s.read("base_rate", c.schedule.base_rate);
    s.read("warmup_steps", c.schedule.warmup_steps);
    s.read("decay_steps", c.schedule.decay_steps);
    s.read("decay_rate", c.schedule.decay_rate);
    s.read("staircase", c.schedule.staircase);
    s.finish();
  }
  r.read("iterations", c.iterations);
  r.read("log_every", c.log_every);
  r.read("seed", c.seed);
  r.read("output_dir", c.output_dir);
  r.read("ntk_points", c.ntk_points);
  if (r.has("task_options")) {
    Reader o = r.child("task_options");
    std::visit([&](auto& opts) { read_options(o, opts); }, c.options);
    o.finish();
  }
  r.finish();

  require(c.depth >= 1, "depth", "must be at least 1");
  require(c.width >= 1, "width", "must be at least 1");
  require(c.log_every >= 1, "log_every", "must be at least 1");
  try {
    c.schedule.validate();
  } catch (const ArgumentError& e) {
    throw ParseError("schedule", e.what());
  }
  const bool operator_task = task == "diffusion_reaction";
  require(operator_task == (c.architecture == nn::Architecture::kDeepOnet), "architecture",
          operator_task ? "diffusion_reaction needs deeponet" : "deeponet is only available for diffusion_reaction");
  const auto kind = c.embedding.kind;
  if (kind == nn::Embedding::Kind::kPositional || kind == nn::Embedding::Kind::kGaussian) {
    require(c.embedding.features >= 1, "embedding.features", "Fourier embeddings need features >= 1");
    require(c.embedding.scale > 0, "embedding.scale", "must be positive");
  }
  require(kind != nn::Embedding::Kind::kPeriodicAdvection || task == "advection", "embedding.kind",
          "the periodic embedding applies to advection inputs (x, t)");
  return c;
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("$", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json to_json(const RunConfig& c) {
  json j;
  j["task"] = c.task;
  j["architecture"] = std::string(nn::to_string(c.architecture));
  j["depth"] = c.depth;
  j["width"] = c.width;
  j["activation"] = std::string(nn::to_string(c.activation));
  j["parameterization"] = std::string(nn::to_string(c.parameterization));
  j["rwf"] = {{"mu", c.rwf.mu}, {"sigma", c.rwf.sigma}};
  j["embedding"] = {{"kind", std::string(nn::to_string(c.embedding.kind))},
                    {"features", c.embedding.features},
                    {"scale", c.embedding.scale}};
  j["schedule"] = {{"base_rate", c.schedule.base_rate},
                   {"warmup_steps", c.schedule.warmup_steps},
                   {"decay_steps", c.schedule.decay_steps},
                   {"decay_rate", c.schedule.decay_rate},
                   {"staircase", c.schedule.staircase}};
  j["iterations"] = c.iterations;
  j["log_every"] = c.log_every;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["ntk_points"] = c.ntk_points;
  j["task_options"] = std::visit([](const auto& o) { return options_json(o); }, c.options);
  return j;
}

}  // namespace rwf::cli
