#include "motionduet/numkit/tape.hpp"

#include <stdexcept>

namespace motionduet::numkit {

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(Param& p) {
  nodes_.push_back(Node{p.value, {}, recordGradients_, {}, &p});
  return Var{this, nodes_.size() - 1};
}

Var Tape::input(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, recordGradients_, {}, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs = false;
  if (recordGradients_) {
    for (const auto& in : inputs) {
      if (in.tape != this) throw std::logic_error("tape: input recorded on a different tape");
      needs = needs || nodes_[in.id].requiresGrad;
    }
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}, nullptr});
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::gradBuffer(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.shape() != node.value.shape()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Tape::backward(Var scalar) {
  if (scalar.tape != this) throw std::logic_error("tape: backward on foreign variable");
  if (value(scalar).size() != 1) throw ShapeError("tape: backward requires a scalar output");
  if (!nodes_[scalar.id].requiresGrad) return;
  gradBuffer(scalar.id)[0] += 1.0;
  for (std::size_t i = scalar.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.requiresGrad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this, node.grad);
    if (node.param != nullptr) {
      Param& p = *node.param;
      if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
      auto dst = p.grad.data();
      auto src = node.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

}  // namespace motionduet::numkit
