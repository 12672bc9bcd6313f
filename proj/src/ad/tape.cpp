#include "rwf/ad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>

#include "eigen_view.hpp"
#include "rwf/core/errors.hpp"

namespace rwf::ad {
namespace {

constexpr double kRowNormFloor = 1e-12;
constexpr std::uint32_t kNone = Var::kNone;

double gauss_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }
double gauss_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double gelu_value(double x) { return x * gauss_cdf(x); }
double gelu_d1(double x) { return gauss_cdf(x) + x * gauss_pdf(x); }
double gelu_d2(double x) { return gauss_pdf(x) * (2.0 - x * x); }

bool is_matrix(const Tensor& t) { return t.rank() == 2; }

// std::tanh does not vectorize and dominated PINN training time. Vectorized exp of
// -2|x|, with a Taylor series below 0.05 where 1 - e would cancel. Within ~1e-15 relative.
// Staged through a fixed block so every element takes the same code path whatever the
// buffer alignment; results stay bit-reproducible.
void tanh_kernel(const double* x, double* y, std::size_t size) {
  constexpr std::size_t kBlock = 64;
  using Block = Eigen::Array<double, kBlock, 1>;
  Block v, e, v2, small, big;
  for (std::size_t start = 0; start < size; start += kBlock) {
    const std::size_t len = std::min(kBlock, size - start);
    for (std::size_t i = 0; i < kBlock; ++i) v[i] = i < len ? x[start + i] : 0.0;
    e = (-2.0 * v.abs()).exp();
    big = (1.0 - e) / (1.0 + e);
    big = (v < 0.0).select(-big, big);
    v2 = v * v;
    small = v * (1.0 + v2 * (-1.0 / 3 + v2 * (2.0 / 15 + v2 * (-17.0 / 315 + v2 * (62.0 / 2835)))));
    big = (v.abs() < 0.05).select(small, big);
    std::copy_n(big.data(), len, y + start);
  }
}

}  // namespace

const char* op_name(Op op) noexcept {
  switch (op) {
    case Op::kPlaceholder: return "placeholder";
    case Op::kParameter: return "parameter";
    case Op::kConstant: return "constant";
    case Op::kMatMul: return "matmul";
    case Op::kLinear: return "linear";
    case Op::kAddBias: return "add_bias";
    case Op::kScaleCols: return "scale_cols";
    case Op::kScaleRows: return "scale_rows";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kScale: return "scale";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kGelu: return "gelu";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kExp: return "exp";
    case Op::kSquare: return "square";
    case Op::kStep: return "step";
    case Op::kGeluPrime: return "gelu_prime";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kRowSum: return "row_sum";
    case Op::kRowNorm: return "row_norm";
    case Op::kConcat: return "concat";
    case Op::kBroadcastRow: return "broadcast_row";
    case Op::kZerosLike: return "zeros_like";
    case Op::kStopGradient: return "stop_gradient";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Graph construction

Var Tape::push(Node node) {
  node.scope = scope_;
  if (!node.requires_grad && node.op != Op::kParameter) {
    const bool blocks = node.op == Op::kStep || node.op == Op::kStopGradient || node.op == Op::kBroadcastRow ||
                        node.op == Op::kZerosLike;
    if (!blocks) {
      auto rg = [&](std::uint32_t id) { return id != kNone && nodes_[id].requires_grad; };
      node.requires_grad = rg(node.a) || rg(node.b) || std::any_of(node.parts.begin(), node.parts.end(), rg);
    }
  }
  if (node.op != Op::kPlaceholder && node.op != Op::kParameter && node.op != Op::kConstant) {
    auto fixed = [&](std::uint32_t id) {
      return id == kNone || nodes_[id].op == Op::kConstant || nodes_[id].folded;
    };
    node.folded = fixed(node.a) && fixed(node.b) && std::all_of(node.parts.begin(), node.parts.end(), fixed);
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::check_var(Var v, const char* what) const {
  if (!v.valid() || v.id >= nodes_.size()) {
    throw ArgumentError(std::string("invalid variable passed to ") + what);
  }
}

Var Tape::placeholder(const std::string& name) {
  Node n{.op = Op::kPlaceholder};
  Scope s(*this, name);
  return push(std::move(n));
}

Var Tape::parameter(ParamId id) {
  if (id.index >= params_->count()) throw ArgumentError("unknown parameter id");
  Node n{.op = Op::kParameter, .param = id, .requires_grad = true};
  Var v = push(std::move(n));
  slots_.try_emplace(params_->name(id), v);
  return v;
}

Var Tape::constant(Tensor value) {
  Node n{.op = Op::kConstant, .has_value = true};
  n.value = std::move(value);
  return push(std::move(n));
}

void Tape::set(Var leaf, Tensor value) {
  check_var(leaf, "set");
  Node& n = nodes_[leaf.id];
  if (n.op != Op::kPlaceholder && n.op != Op::kConstant) {
    throw ArgumentError("set() on non-leaf node of kind " + std::string(op_name(n.op)));
  }
  n.value = std::move(value);
  n.has_value = true;
  inputs_changed_ = true;
  if (n.op == Op::kConstant) ++constants_version_;
}

Var Tape::unary(Op op, Var x) {
  check_var(x, op_name(op));
  return push(Node{.op = op, .a = x.id});
}

Var Tape::binary(Op op, Var a, Var b) {
  check_var(a, op_name(op));
  check_var(b, op_name(op));
  return push(Node{.op = op, .a = a.id, .b = b.id});
}

Var Tape::matmul(Var a, Var b) { return binary(Op::kMatMul, a, b); }
Var Tape::linear(Var x, Var w) { return binary(Op::kLinear, x, w); }
Var Tape::add_bias(Var x, Var bias) { return binary(Op::kAddBias, x, bias); }
Var Tape::scale_cols(Var x, Var v) { return binary(Op::kScaleCols, x, v); }
Var Tape::scale_rows(Var m, Var v) { return binary(Op::kScaleRows, m, v); }
Var Tape::add(Var a, Var b) { return binary(Op::kAdd, a, b); }
Var Tape::sub(Var a, Var b) { return binary(Op::kSub, a, b); }
Var Tape::mul(Var a, Var b) { return binary(Op::kMul, a, b); }
Var Tape::div(Var a, Var b) { return binary(Op::kDiv, a, b); }
Var Tape::broadcast_row(Var like, Var row) { return binary(Op::kBroadcastRow, like, row); }

Var Tape::scale(Var x, double alpha) {
  check_var(x, "scale");
  return push(Node{.op = Op::kScale, .a = x.id, .attr = alpha});
}

Var Tape::concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("concat of zero tensors");
  Node n{.op = Op::kConcat};
  for (Var p : parts) {
    check_var(p, "concat");
    n.parts.push_back(p.id);
  }
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Evaluation

const Tensor& Tape::val(std::uint32_t id) const {
  const Node& n = nodes_[id];
  if (n.op == Op::kParameter) return (*params_)[n.param];
  return n.value;
}

const Tensor& Tape::value(Var v) const {
  check_var(v, "value");
  const Node& n = nodes_[v.id];
  if (n.op == Op::kParameter || n.op == Op::kConstant) return val(v.id);
  if (n.epoch == 0) throw StateError("value() of node that was never evaluated");
  return n.value;
}

void Tape::shape_error(const Node& node, const std::string& detail) const {
  const std::string where = node.scope.empty() ? std::string("<root>") : node.scope;
  throw DimensionError("layer '" + where + "': " + op_name(node.op) + " " + detail);
}

const std::vector<std::uint32_t>& Tape::ancestors(std::uint32_t target) {
  auto it = ancestor_cache_.find(target);
  if (it != ancestor_cache_.end()) return it->second;
  std::vector<char> mark(target + 1, 0);
  mark[target] = 1;
  for (std::uint32_t i = target + 1; i-- > 0;) {
    if (!mark[i]) continue;
    const Node& n = nodes_[i];
    if (n.a != kNone) mark[n.a] = 1;
    if (n.b != kNone) mark[n.b] = 1;
    for (auto p : n.parts) mark[p] = 1;
  }
  std::vector<std::uint32_t> order;
  for (std::uint32_t i = 0; i <= target; ++i) {
    if (mark[i]) order.push_back(i);
  }
  return ancestor_cache_.emplace(target, std::move(order)).first->second;
}

void Tape::forward() {
  ++epoch_;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) evaluate(i);
  inputs_changed_ = false;
}

void Tape::forward(std::initializer_list<Var> targets) {
  ++epoch_;
  std::vector<std::uint32_t> ids;
  for (Var t : targets) {
    check_var(t, "forward");
    const auto& anc = ancestors(t.id);
    ids.insert(ids.end(), anc.begin(), anc.end());
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (auto id : ids) evaluate(id);
  inputs_changed_ = false;
}

void Tape::evaluate(std::uint32_t id) {
  Node& n = nodes_[id];
  n.epoch = epoch_;
  switch (n.op) {
    case Op::kPlaceholder:
      if (!n.has_value) shape_error(n, "has no value; call set() before forward()");
      return;
    case Op::kParameter:
    case Op::kConstant:
      return;
    default:
      break;
  }
  if (n.folded && n.folded_at == constants_version_) return;
  // Marked current only once the value is complete; a throw leaves it stale.
  struct MarkFolded {
    Node& n;
    std::uint64_t version;
    int pending = std::uncaught_exceptions();
    ~MarkFolded() {
      if (n.folded && std::uncaught_exceptions() == pending) n.folded_at = version;
    }
  } mark{n, constants_version_};

  const Tensor* A = n.a != kNone ? &val(n.a) : nullptr;
  const Tensor* B = n.b != kNone ? &val(n.b) : nullptr;
  Tensor& out = n.value;

  auto same_shape = [&] {
    if (A->shape() != B->shape()) {
      shape_error(n, "operands " + shape_string(A->shape()) + " and " + shape_string(B->shape()));
    }
  };
  auto map_unary = [&](auto&& f) {
    out.reshape_for_write(A->shape());
    const double* x = A->ptr();
    double* y = out.ptr();
    const std::size_t size = A->size();
    for (std::size_t i = 0; i < size; ++i) y[i] = f(x[i]);
  };
  auto map_binary = [&](auto&& f) {
    same_shape();
    out.reshape_for_write(A->shape());
    const double* x = A->ptr();
    const double* z = B->ptr();
    double* y = out.ptr();
    const std::size_t size = A->size();
    for (std::size_t i = 0; i < size; ++i) y[i] = f(x[i], z[i]);
  };
  auto row_broadcast_check = [&](const char* what) {
    if (!is_matrix(*A)) shape_error(n, std::string("expects a matrix ") + what + ", got " + shape_string(A->shape()));
    if (B->size() != A->cols() || B->rank() == 0) {
      shape_error(n, "row vector of length " + std::to_string(B->size()) + " does not match width " +
                         std::to_string(A->cols()));
    }
  };

  switch (n.op) {
    case Op::kMatMul: {
      if (!is_matrix(*A) || !is_matrix(*B) || A->cols() != B->rows()) {
        shape_error(n, "cannot multiply " + shape_string(A->shape()) + " by " + shape_string(B->shape()));
      }
      out.reshape_for_write({A->rows(), B->cols()});
      detail::view(out).noalias() = detail::view(*A) * detail::view(*B);
      break;
    }
    case Op::kLinear: {
      if (!is_matrix(*A) || !is_matrix(*B) || A->cols() != B->cols()) {
        shape_error(n, "input " + shape_string(A->shape()) + " does not match weight " + shape_string(B->shape()));
      }
      out.reshape_for_write({A->rows(), B->rows()});
      detail::view(out).noalias() = detail::view(*A) * detail::view(*B).transpose();
      break;
    }
    case Op::kAddBias: {
      row_broadcast_check("input");
      out.reshape_for_write(A->shape());
      const std::size_t rows = A->rows(), cols = A->cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = A->ptr() + r * cols;
        double* y = out.ptr() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) y[c] = x[c] + (*B)[c];
      }
      break;
    }
    case Op::kScaleCols: {
      row_broadcast_check("input");
      out.reshape_for_write(A->shape());
      const std::size_t rows = A->rows(), cols = A->cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = A->ptr() + r * cols;
        double* y = out.ptr() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) y[c] = x[c] * (*B)[c];
      }
      break;
    }
    case Op::kScaleRows: {
      if (!is_matrix(*A) || B->size() != A->rows() || B->rank() == 0) {
        shape_error(n, "scale vector " + shape_string(B->shape()) + " does not match rows of " +
                           shape_string(A->shape()));
      }
      out.reshape_for_write(A->shape());
      const std::size_t rows = A->rows(), cols = A->cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double s = (*B)[r];
        const double* x = A->ptr() + r * cols;
        double* y = out.ptr() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) y[c] = x[c] * s;
      }
      break;
    }
    case Op::kAdd: map_binary([](double x, double z) { return x + z; }); break;
    case Op::kSub: map_binary([](double x, double z) { return x - z; }); break;
    case Op::kMul: map_binary([](double x, double z) { return x * z; }); break;
    case Op::kDiv: map_binary([](double x, double z) { return x / z; }); break;
    case Op::kScale: {
      const double alpha = n.attr;
      map_unary([alpha](double x) { return alpha * x; });
      break;
    }
    case Op::kTanh:
      out.reshape_for_write(A->shape());
      tanh_kernel(A->ptr(), out.ptr(), A->size());
      break;
    case Op::kRelu: map_unary([](double x) { return x > 0.0 ? x : 0.0; }); break;
    case Op::kGelu: map_unary(gelu_value); break;
    case Op::kSin: map_unary([](double x) { return std::sin(x); }); break;
    case Op::kCos: map_unary([](double x) { return std::cos(x); }); break;
    case Op::kExp: map_unary([](double x) { return std::exp(x); }); break;
    case Op::kSquare: map_unary([](double x) { return x * x; }); break;
    case Op::kStep: map_unary([](double x) { return x > 0.0 ? 1.0 : 0.0; }); break;
    case Op::kGeluPrime: map_unary(gelu_d1); break;
    case Op::kStopGradient: map_unary([](double x) { return x; }); break;
    case Op::kZerosLike:
      out.reshape_for_write(A->shape());
      out.fill(0.0);
      break;
    case Op::kSum:
    case Op::kMean: {
      double s = 0.0;
      for (double v : A->data()) s += v;
      if (n.op == Op::kMean) {
        if (A->size() == 0) shape_error(n, "of an empty tensor");
        s /= static_cast<double>(A->size());
      }
      out.reshape_for_write({});
      out[0] = s;
      break;
    }
    case Op::kRowSum: {
      if (!is_matrix(*A)) shape_error(n, "expects a matrix, got " + shape_string(A->shape()));
      const std::size_t rows = A->rows(), cols = A->cols();
      out.reshape_for_write({rows, 1});
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        const double* x = A->ptr() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) s += x[c];
        out[r] = s;
      }
      break;
    }
    case Op::kRowNorm: {
      if (!is_matrix(*A)) shape_error(n, "expects a matrix, got " + shape_string(A->shape()));
      const std::size_t rows = A->rows(), cols = A->cols();
      out.reshape_for_write({rows});
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        const double* x = A->ptr() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) s += x[c] * x[c];
        out[r] = std::max(std::sqrt(s), kRowNormFloor);
      }
      break;
    }
    case Op::kConcat: {
      const Tensor& first = val(n.parts.front());
      std::size_t total = 0;
      for (auto p : n.parts) {
        const Tensor& t = val(p);
        if (!is_matrix(t) || t.rows() != first.rows()) {
          shape_error(n, "operand " + shape_string(t.shape()) + " does not stack with " + shape_string(first.shape()));
        }
        total += t.cols();
      }
      const std::size_t rows = first.rows();
      out.reshape_for_write({rows, total});
      std::size_t offset = 0;
      for (auto p : n.parts) {
        const Tensor& t = val(p);
        const std::size_t cols = t.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy_n(t.ptr() + r * cols, cols, out.ptr() + r * total + offset);
        }
        offset += cols;
      }
      break;
    }
    case Op::kBroadcastRow: {
      row_broadcast_check("shape source");
      out.reshape_for_write(A->shape());
      const std::size_t rows = A->rows(), cols = A->cols();
      for (std::size_t r = 0; r < rows; ++r) std::copy_n(B->ptr(), cols, out.ptr() + r * cols);
      break;
    }
    default:
      break;
  }
}

// ---------------------------------------------------------------------------
// Reverse sweep

ParamGradients Tape::backward(Var output) {
  check_var(output, "backward");
  const Node& n = nodes_[output.id];
  if (n.epoch == 0) throw StateError("backward() called before forward()");
  if (n.value.size() != 1) {
    throw DimensionError("backward() without cotangent needs a scalar output, got " + shape_string(n.value.shape()));
  }
  return backward(output, Tensor(n.value.shape(), 1.0));
}

ParamGradients Tape::backward(Var output, const Tensor& cotangent) {
  check_var(output, "backward");
  if (nodes_[output.id].epoch == 0 && nodes_[output.id].op != Op::kParameter) {
    throw StateError("backward() called before forward()");
  }
  if (inputs_changed_) throw StateError("backward() after set() without a fresh forward()");
  const auto& order = ancestors(output.id);
  for (auto id : order) {
    const Node& n = nodes_[id];
    if (n.op != Op::kParameter && n.op != Op::kConstant && n.epoch != epoch_) {
      throw StateError("backward() over nodes not evaluated by the latest forward()");
    }
  }
  if (val(output.id).shape() != cotangent.shape()) {
    throw DimensionError("cotangent shape " + shape_string(cotangent.shape()) + " does not match output " +
                         shape_string(val(output.id).shape()));
  }

  for (auto id : order) {
    Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    n.adjoint.reshape_for_write(val(id).shape());
    n.adjoint.fill(0.0);
  }
  ParamGradients grads = ParamGradients::zeros_like(*params_);
  if (!nodes_[output.id].requires_grad) return grads;
  nodes_[output.id].adjoint = cotangent;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& n = nodes_[*it];
    if (!n.requires_grad) continue;
    if (n.op == Op::kParameter) {
      Tensor& g = grads[n.param];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.adjoint[i];
      continue;
    }
    accumulate_adjoints(*it);
  }
  return grads;
}

void Tape::accumulate_adjoints(std::uint32_t id) {
  Node& n = nodes_[id];
  const Tensor& dY = n.adjoint;
  const Tensor& Y = n.value;
  auto wants = [&](std::uint32_t in) { return in != kNone && nodes_[in].requires_grad; };
  const bool ga = wants(n.a);
  const bool gb = wants(n.b);
  const Tensor* A = n.a != kNone ? &val(n.a) : nullptr;
  const Tensor* B = n.b != kNone ? &val(n.b) : nullptr;

  auto unary_chain = [&](auto&& dfdx) {
    if (!ga) return;
    double* dx = nodes_[n.a].adjoint.ptr();
    const double* x = A->ptr();
    const double* y = Y.ptr();
    const double* dy = dY.ptr();
    const std::size_t size = dY.size();
    for (std::size_t i = 0; i < size; ++i) dx[i] += dy[i] * dfdx(x[i], y[i]);
  };

  switch (n.op) {
    case Op::kMatMul:
      if (ga) detail::view(nodes_[n.a].adjoint).noalias() += detail::view(dY) * detail::view(*B).transpose();
      if (gb) detail::view(nodes_[n.b].adjoint).noalias() += detail::view(*A).transpose() * detail::view(dY);
      break;
    case Op::kLinear:
      if (ga) detail::view(nodes_[n.a].adjoint).noalias() += detail::view(dY) * detail::view(*B);
      if (gb) detail::view(nodes_[n.b].adjoint).noalias() += detail::view(dY).transpose() * detail::view(*A);
      break;
    case Op::kAddBias: {
      const std::size_t rows = dY.rows(), cols = dY.cols();
      if (ga) {
        double* dx = nodes_[n.a].adjoint.ptr();
        for (std::size_t i = 0; i < dY.size(); ++i) dx[i] += dY[i];
      }
      if (gb) {
        double* db = nodes_[n.b].adjoint.ptr();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* dy = dY.ptr() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) db[c] += dy[c];
        }
      }
      break;
    }
    case Op::kScaleCols: {
      const std::size_t rows = dY.rows(), cols = dY.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* dy = dY.ptr() + r * cols;
        const double* x = A->ptr() + r * cols;
        if (ga) {
          double* dx = nodes_[n.a].adjoint.ptr() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) dx[c] += dy[c] * (*B)[c];
        }
        if (gb) {
          double* dv = nodes_[n.b].adjoint.ptr();
          for (std::size_t c = 0; c < cols; ++c) dv[c] += dy[c] * x[c];
        }
      }
      break;
    }
    case Op::kScaleRows: {
      const std::size_t rows = dY.rows(), cols = dY.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* dy = dY.ptr() + r * cols;
        const double* x = A->ptr() + r * cols;
        if (ga) {
          double* dx = nodes_[n.a].adjoint.ptr() + r * cols;
          const double s = (*B)[r];
          for (std::size_t c = 0; c < cols; ++c) dx[c] += dy[c] * s;
        }
        if (gb) {
          double acc = 0.0;
          for (std::size_t c = 0; c < cols; ++c) acc += dy[c] * x[c];
          nodes_[n.b].adjoint[r] += acc;
        }
      }
      break;
    }
    case Op::kAdd:
    case Op::kSub: {
      const double sign = n.op == Op::kAdd ? 1.0 : -1.0;
      if (ga) {
        double* dx = nodes_[n.a].adjoint.ptr();
        for (std::size_t i = 0; i < dY.size(); ++i) dx[i] += dY[i];
      }
      if (gb) {
        double* dz = nodes_[n.b].adjoint.ptr();
        for (std::size_t i = 0; i < dY.size(); ++i) dz[i] += sign * dY[i];
      }
      break;
    }
    case Op::kMul:
      if (ga) {
        double* dx = nodes_[n.a].adjoint.ptr();
        for (std::size_t i = 0; i < dY.size(); ++i) dx[i] += dY[i] * (*B)[i];
      }
      if (gb) {
        double* dz = nodes_[n.b].adjoint.ptr();
        for (std::size_t i = 0; i < dY.size(); ++i) dz[i] += dY[i] * (*A)[i];
      }
      break;
    case Op::kDiv:
      if (ga) {
        double* dx = nodes_[n.a].adjoint.ptr();
        for (std::size_t i = 0; i < dY.size(); ++i) dx[i] += dY[i] / (*B)[i];
      }
      if (gb) {
        double* dz = nodes_[n.b].adjoint.ptr();
        for (std::size_t i = 0; i < dY.size(); ++i) dz[i] -= dY[i] * Y[i] / (*B)[i];
      }
      break;
    case Op::kScale: {
      const double alpha = n.attr;
      unary_chain([alpha](double, double) { return alpha; });
      break;
    }
    case Op::kTanh: unary_chain([](double, double y) { return 1.0 - y * y; }); break;
    case Op::kRelu: unary_chain([](double x, double) { return x > 0.0 ? 1.0 : 0.0; }); break;
    case Op::kGelu: unary_chain([](double x, double) { return gelu_d1(x); }); break;
    case Op::kSin: unary_chain([](double x, double) { return std::cos(x); }); break;
    case Op::kCos: unary_chain([](double x, double) { return -std::sin(x); }); break;
    case Op::kExp: unary_chain([](double, double y) { return y; }); break;
    case Op::kSquare: unary_chain([](double x, double) { return 2.0 * x; }); break;
    case Op::kGeluPrime: unary_chain([](double x, double) { return gelu_d2(x); }); break;
    case Op::kSum:
    case Op::kMean: {
      if (!ga) break;
      const double scale = n.op == Op::kMean ? 1.0 / static_cast<double>(A->size()) : 1.0;
      const double g = dY[0] * scale;
      double* dx = nodes_[n.a].adjoint.ptr();
      for (std::size_t i = 0; i < A->size(); ++i) dx[i] += g;
      break;
    }
    case Op::kRowSum: {
      if (!ga) break;
      const std::size_t rows = A->rows(), cols = A->cols();
      double* dx = nodes_[n.a].adjoint.ptr();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += dY[r];
      }
      break;
    }
    case Op::kRowNorm: {
      if (!ga) break;
      const std::size_t rows = A->rows(), cols = A->cols();
      double* dx = nodes_[n.a].adjoint.ptr();
      for (std::size_t r = 0; r < rows; ++r) {
        if (Y[r] <= kRowNormFloor) continue;
        const double g = dY[r] / Y[r];
        for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += g * (*A)[r * cols + c];
      }
      break;
    }
    case Op::kConcat: {
      const std::size_t rows = dY.rows(), total = dY.cols();
      std::size_t offset = 0;
      for (auto p : n.parts) {
        const std::size_t cols = val(p).cols();
        if (nodes_[p].requires_grad) {
          double* dx = nodes_[p].adjoint.ptr();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += dY[r * total + offset + c];
          }
        }
        offset += cols;
      }
      break;
    }
    default:
      break;
  }
}

// ---------------------------------------------------------------------------
// Network-style interface

void Tape::bind(Var input, Var output) {
  check_var(input, "bind");
  check_var(output, "bind");
  if (nodes_[input.id].op != Op::kPlaceholder) throw ArgumentError("bound input must be a placeholder");
  input_ = input;
  output_ = output;
}

Tensor Tape::forward(const Tensor& inputs) {
  if (!input_.valid()) throw StateError("forward(inputs) on a tape without bound input/output");
  set(input_, inputs);
  forward({output_});
  return nodes_[output_.id].value;
}

ParamGradients Tape::backward(const Tensor& output_cotangent) {
  if (!output_.valid()) throw StateError("backward(cotangent) on a tape without bound input/output");
  return backward(output_, output_cotangent);
}

DualBatch Tape::input_jvp(const Tensor& inputs, std::size_t direction_index) {
  if (!input_.valid()) throw StateError("input_jvp on a tape without bound input/output");
  if (inputs.rank() != 2) throw DimensionError("input_jvp expects a batch matrix, got " + shape_string(inputs.shape()));
  if (direction_index >= inputs.cols()) {
    throw ArgumentError("direction index " + std::to_string(direction_index) + " out of range for input width " +
                        std::to_string(inputs.cols()));
  }
  Var tan = tangent(output_, input_, direction_index, inputs.cols());
  set(input_, inputs);
  forward({output_, tan});
  return DualBatch{nodes_[output_.id].value, val(tan.id)};
}

}  // namespace rwf::ad
