#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "rwf/ad/param_set.hpp"
#include "rwf/core/tensor.hpp"

namespace rwf::ad {

/// Handle to a node on a Tape.
struct Var {
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t id = kNone;

  bool valid() const noexcept { return id != kNone; }
  friend bool operator==(Var, Var) = default;
};

enum class Op : std::uint8_t {
  kPlaceholder,
  kParameter,
  kConstant,
  kMatMul,    // A * B
  kLinear,    // X * W^T
  kAddBias,   // X + 1 b^T
  kScaleCols, // X[i,j] * v[j]
  kScaleRows, // M[i,j] * v[i]
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kTanh,
  kRelu,
  kGelu,
  kSin,
  kCos,
  kExp,
  kSquare,
  kStep,       // Heaviside(x > 0); zero derivative
  kGeluPrime,  // dGELU/dx
  kSum,
  kMean,
  kRowSum,
  kRowNorm,    // max(||M_i||, 1e-12)
  kConcat,     // along columns
  kBroadcastRow,
  kZerosLike,
  kStopGradient,
};

const char* op_name(Op op) noexcept;

/// Primal value together with a directional derivative with respect to one input coordinate.
struct DualBatch {
  Tensor primal;
  Tensor tangent;
};

/// Static computation graph with reverse-mode parameter gradients.
///
/// Nodes are appended in topological order and evaluated over and over with fresh
/// placeholder values. Forward-mode input derivatives are built as extra nodes by
/// tangent(), so a loss that contains them is differentiated by backward() like any
/// other node.
///
/// A Tape is single-writer; distinct tapes may be used from distinct threads.
class Tape {
 public:
  explicit Tape(const ParamSet& params) : params_(&params) {}

  /// Nodes created while a Scope is alive carry its label in error messages.
  class Scope {
   public:
    Scope(Tape& tape, const std::string& name) : tape_(tape), saved_(tape.scope_) {
      tape.scope_ = saved_.empty() ? name : saved_ + "/" + name;
    }
    ~Scope() { tape_.scope_ = saved_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape& tape_;
    std::string saved_;
  };

  // Leaves.
  Var placeholder(const std::string& name);
  Var parameter(ParamId id);
  Var constant(Tensor value);
  /// Replaces the value of a placeholder or constant.
  void set(Var leaf, Tensor value);

  // Operations.
  Var matmul(Var a, Var b);
  Var linear(Var x, Var w);
  Var add_bias(Var x, Var bias);
  Var scale_cols(Var x, Var v);
  Var scale_rows(Var m, Var v);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var x, double alpha);
  Var tanh(Var x) { return unary(Op::kTanh, x); }
  Var relu(Var x) { return unary(Op::kRelu, x); }
  Var gelu(Var x) { return unary(Op::kGelu, x); }
  Var sin(Var x) { return unary(Op::kSin, x); }
  Var cos(Var x) { return unary(Op::kCos, x); }
  Var exp(Var x) { return unary(Op::kExp, x); }
  Var square(Var x) { return unary(Op::kSquare, x); }
  Var step(Var x) { return unary(Op::kStep, x); }
  Var gelu_prime(Var x) { return unary(Op::kGeluPrime, x); }
  Var stop_gradient(Var x) { return unary(Op::kStopGradient, x); }
  Var sum(Var x) { return unary(Op::kSum, x); }
  Var mean(Var x) { return unary(Op::kMean, x); }
  Var row_sum(Var x) { return unary(Op::kRowSum, x); }
  Var row_norm(Var m) { return unary(Op::kRowNorm, m); }
  Var concat(const std::vector<Var>& parts);
  /// Matrix shaped like `like` whose every row equals `row`.
  Var broadcast_row(Var like, Var row);
  Var zeros_like(Var like) { return unary(Op::kZerosLike, like); }

  /// Directional derivative of `output` along `direction` (a constant row) in the
  /// placeholder `input`, recorded as new nodes. Cached per (output, input, direction).
  Var tangent(Var output, Var input, Var direction);
  /// Derivative with respect to one input column.
  Var tangent(Var output, Var input, std::size_t coordinate, std::size_t input_width);

  /// Evaluates every node.
  void forward();
  /// Evaluates only the ancestors of the given targets.
  void forward(std::initializer_list<Var> targets);
  const Tensor& value(Var v) const;

  /// Reverse sweep from `output` seeded with `cotangent` (same shape as the output).
  ParamGradients backward(Var output, const Tensor& cotangent);
  /// Reverse sweep from a scalar output seeded with 1.
  ParamGradients backward(Var output);

  // Network-style interface over a bound (input, output) pair.
  void bind(Var input, Var output);
  Tensor forward(const Tensor& inputs);
  ParamGradients backward(const Tensor& output_cotangent);
  DualBatch input_jvp(const Tensor& inputs, std::size_t direction_index);
  Var bound_input() const noexcept { return input_; }
  Var bound_output() const noexcept { return output_; }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  Op op(Var v) const { return nodes_.at(v.id).op; }
  const ParamSet& params() const noexcept { return *params_; }
  /// Parameter name to the node reading it (first one registered).
  const std::map<std::string, Var>& parameter_slots() const noexcept { return slots_; }

 private:
  struct Node {
    Op op;
    std::uint32_t a = Var::kNone;
    std::uint32_t b = Var::kNone;
    std::vector<std::uint32_t> parts;  // concat operands
    double attr = 0.0;
    ParamId param{};
    std::string scope;
    bool requires_grad = false;
    bool has_value = false;  // leaves only
    bool folded = false;     // depends on constants only
    std::uint64_t epoch = 0;
    std::uint64_t folded_at = 0;
    Tensor value;
    Tensor adjoint;
  };

  Var push(Node node);
  Var unary(Op op, Var x);
  Var binary(Op op, Var a, Var b);
  void check_var(Var v, const char* what) const;
  const Tensor& val(std::uint32_t id) const;
  const std::vector<std::uint32_t>& ancestors(std::uint32_t target);
  void evaluate(std::uint32_t id);
  void accumulate_adjoints(std::uint32_t id);
  [[noreturn]] void shape_error(const Node& node, const std::string& detail) const;
  Var tangent_rule(std::uint32_t id, std::vector<std::uint32_t>& tangents);

  const ParamSet* params_;
  std::vector<Node> nodes_;
  std::string scope_;
  std::uint64_t epoch_ = 0;
  std::uint64_t constants_version_ = 1;
  bool inputs_changed_ = false;
  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> ancestor_cache_;
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, Var> tangent_cache_;
  std::map<std::string, Var> slots_;
  Var input_{};
  Var output_{};
  std::map<std::size_t, std::pair<Var, Var>> coordinate_tangents_;  // coordinate -> (direction, tangent)
};

}  // namespace rwf::ad
