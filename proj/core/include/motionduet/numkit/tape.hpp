#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <vector>

#include "motionduet/numkit/tensor.hpp"

namespace motionduet::numkit {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

using BackwardFn = std::function<void(Tape&, const Tensor& outGrad)>;

/// Reverse-mode accumulation over the op set in ops.hpp. One tape per forward
/// pass; nodes are appended in evaluation order and replayed backwards.
class Tape {
 public:
  explicit Tape(bool recordGradients = true) : recordGradients_(recordGradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Gradients reaching this node are added into p.grad during backward().
  Var param(Param& p);
  /// Leaf that receives a gradient but is not bound to a Param.
  Var input(Tensor value);

  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requiresGrad(Var v) const { return nodes_[v.id].requiresGrad; }
  bool requiresGrad(std::size_t id) const { return nodes_[id].requiresGrad; }
  bool recording() const noexcept { return recordGradients_; }

  /// Gradient buffer for node id, zero-initialized on first access.
  Tensor& gradBuffer(std::size_t id);
  /// Gradient of v after backward(); empty if none reached it.
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }

  void backward(Var scalar);
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requiresGrad = false;
    BackwardFn backward;
    Param* param = nullptr;
  };

  std::deque<Node> nodes_;
  bool recordGradients_;
};

}  // namespace motionduet::numkit
