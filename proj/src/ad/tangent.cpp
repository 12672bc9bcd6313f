// Forward-mode input derivatives built as ordinary tape nodes.

#include <algorithm>

#include "rwf/ad/tape.hpp"
#include "rwf/core/errors.hpp"

namespace rwf::ad {
namespace {
constexpr std::uint32_t kNone = Var::kNone;
}

Var Tape::tangent(Var output, Var input, std::size_t coordinate, std::size_t input_width) {
  if (coordinate >= input_width) {
    throw ArgumentError("direction index " + std::to_string(coordinate) + " out of range for input width " +
                        std::to_string(input_width));
  }
  auto it = coordinate_tangents_.find(coordinate);
  if (it != coordinate_tangents_.end() && output == output_ && input == input_) return it->second.second;
  Tensor basis(Shape{input_width}, 0.0);
  basis[coordinate] = 1.0;
  Var direction = constant(std::move(basis));
  Var t = tangent(output, input, direction);
  if (output == output_ && input == input_) coordinate_tangents_[coordinate] = {direction, t};
  return t;
}

Var Tape::tangent(Var output, Var input, Var direction) {
  check_var(output, "tangent");
  check_var(input, "tangent");
  check_var(direction, "tangent");
  if (nodes_[input.id].op != Op::kPlaceholder) throw ArgumentError("tangent() input must be a placeholder");
  const auto key = std::make_tuple(output.id, input.id, direction.id);
  if (auto hit = tangent_cache_.find(key); hit != tangent_cache_.end()) return hit->second;

  const std::uint32_t limit = output.id;
  std::vector<std::uint32_t> tangents(limit + 1, kNone);
  // Copy: tangent_rule appends nodes, which must not invalidate the iteration.
  const std::vector<std::uint32_t> order = ancestors(output.id);
  const std::string saved_scope = scope_;
  for (auto id : order) {
    scope_ = nodes_[id].scope + "/d";
    if (id == input.id) {
      tangents[id] = broadcast_row(input, direction).id;
      continue;
    }
    Var t = tangent_rule(id, tangents);
    tangents[id] = t.id;
  }
  scope_ = saved_scope;

  Var result{tangents[output.id]};
  if (!result.valid()) {
    Scope s(*this, "d");
    result = zeros_like(output);
  }
  tangent_cache_.emplace(key, result);
  return result;
}

// Returns the tangent of node `id` given the tangents of its operands; an invalid Var
// means the tangent is identically zero.
Var Tape::tangent_rule(std::uint32_t id, std::vector<std::uint32_t>& tangents) {
  // Copies: pushing nodes may reallocate nodes_.
  const Op op = nodes_[id].op;
  const Var a{nodes_[id].a};
  const Var b{nodes_[id].b};
  const double attr = nodes_[id].attr;
  const Var self{id};
  const Var ta{a.valid() ? tangents[a.id] : kNone};
  const Var tb{b.valid() ? tangents[b.id] : kNone};

  auto sum2 = [&](Var x, Var y) -> Var {
    if (!x.valid()) return y;
    if (!y.valid()) return x;
    return add(x, y);
  };
  auto unsupported = [&]() -> Var {
    throw StateError(std::string("forward-mode derivative through ") + op_name(op) +
                     " depending on the input is not supported");
  };

  switch (op) {
    case Op::kPlaceholder:
    case Op::kParameter:
    case Op::kConstant:
    case Op::kStep:
    case Op::kStopGradient:
    case Op::kBroadcastRow:
    case Op::kZerosLike:
      return Var{};
    default:
      break;
  }
  const bool any = ta.valid() || tb.valid() ||
                   std::any_of(nodes_[id].parts.begin(), nodes_[id].parts.end(),
                               [&](std::uint32_t p) { return tangents[p] != kNone; });
  if (!any) return Var{};

  switch (op) {
    case Op::kMatMul:
      return sum2(ta.valid() ? matmul(ta, b) : Var{}, tb.valid() ? matmul(a, tb) : Var{});
    case Op::kLinear:
      return sum2(ta.valid() ? linear(ta, b) : Var{}, tb.valid() ? linear(a, tb) : Var{});
    case Op::kAddBias:
      if (tb.valid()) return unsupported();
      return ta;
    case Op::kScaleCols:
      return sum2(ta.valid() ? scale_cols(ta, b) : Var{}, tb.valid() ? scale_cols(a, tb) : Var{});
    case Op::kScaleRows:
      return sum2(ta.valid() ? scale_rows(ta, b) : Var{}, tb.valid() ? scale_rows(a, tb) : Var{});
    case Op::kAdd:
      return sum2(ta, tb);
    case Op::kSub:
      if (!tb.valid()) return ta;
      if (!ta.valid()) return scale(tb, -1.0);
      return sub(ta, tb);
    case Op::kMul:
      return sum2(ta.valid() ? mul(ta, b) : Var{}, tb.valid() ? mul(a, tb) : Var{});
    case Op::kDiv: {
      Var first = ta.valid() ? div(ta, b) : Var{};
      Var second = tb.valid() ? scale(div(mul(self, tb), b), -1.0) : Var{};
      return sum2(first, second);
    }
    case Op::kScale:
      return scale(ta, attr);
    case Op::kTanh:
      return sub(ta, mul(square(self), ta));
    case Op::kRelu:
      return mul(step(a), ta);
    case Op::kGelu:
      return mul(gelu_prime(a), ta);
    case Op::kSin:
      return mul(cos(a), ta);
    case Op::kCos:
      return scale(mul(sin(a), ta), -1.0);
    case Op::kExp:
      return mul(self, ta);
    case Op::kSquare:
      return scale(mul(a, ta), 2.0);
    case Op::kSum:
      return sum(ta);
    case Op::kMean:
      return mean(ta);
    case Op::kRowSum:
      return row_sum(ta);
    case Op::kConcat: {
      std::vector<Var> parts;
      const std::vector<std::uint32_t> operands = nodes_[id].parts;
      for (auto p : operands) parts.push_back(tangents[p] != kNone ? Var{tangents[p]} : zeros_like(Var{p}));
      return concat(parts);
    }
    case Op::kGeluPrime:
    case Op::kRowNorm:
    default:
      return unsupported();
  }
}

}  // namespace rwf::ad
