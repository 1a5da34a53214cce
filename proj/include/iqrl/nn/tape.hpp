#pragma once

// Reverse-mode gradient tape. Every op appends one node holding its output
// value and a closure that pushes the output gradient back to its inputs.
// Nodes are only ever appended, so reverse index order is a valid
// topological order for the backward sweep.

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "iqrl/error.hpp"
#include "iqrl/nn/tensor.hpp"

namespace iqrl::nn {

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  inline const Tensor& value() const;
  inline const Shape& shape() const;
  inline bool needs_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::span<const double> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Owned constant; never receives a gradient.
  Var constant(Tensor value) {
    Node node;
    node.owned = std::move(value);
    return push(std::move(node));
  }

  /// Borrowed read-only tensor; must outlive the tape.
  Var constant_ref(const Tensor& value) {
    Node node;
    node.ref = &value;
    return push(std::move(node));
  }

  /// Leaf bound to a parameter. When the parameter requires a gradient,
  /// backward() accumulates into its grad buffer.
  Var parameter(Tensor& param) {
    Node node;
    node.ref = &param;
    if (param.requires_grad()) {
      node.param = &param;
      node.needs_grad = true;
    }
    return push(std::move(node));
  }

  /// Leaf whose gradient is kept on the tape (read back with grad()).
  Var variable(Tensor value) {
    Node node;
    node.owned = std::move(value);
    node.needs_grad = true;
    return push(std::move(node));
  }

  Var emit(Tensor value, bool needs_grad, Backward backward) {
    Node node;
    node.owned = std::move(value);
    node.needs_grad = needs_grad;
    if (needs_grad) node.backward = std::move(backward);
    return push(std::move(node));
  }

  const Tensor& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.owned;
  }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Gradient accumulator of a node, allocated zeroed on first use.
  std::vector<double>& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
    return n.grad;
  }

  /// Gradient of a node after backward(); empty when none reached it.
  const std::vector<double>& grad(Var v) const { return nodes_[v.id()].grad; }

  std::size_t size() const { return nodes_.size(); }

  void backward(Var loss) {
    if (&loss.tape() != this) throw Error("backward: variable belongs to another tape");
    if (value(loss.id()).size() != 1) {
      throw ShapeError("backward requires a scalar loss, got shape " + shape_string(value(loss.id()).shape()));
    }
    if (!nodes_[loss.id()].needs_grad) return;
    grad_buffer(loss.id())[0] += 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.param) {
        std::vector<double>& target = n.param->grad();
        for (std::size_t k = 0; k < target.size(); ++k) target[k] += n.grad[k];
      }
    }
  }

 private:
  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    Tensor* param = nullptr;
    bool needs_grad = false;
    Backward backward;
    std::vector<double> grad;
  };

  Var push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline const Shape& Var::shape() const { return tape_->value(id_).shape(); }
inline bool Var::needs_grad() const { return tape_->needs_grad(id_); }

}  // namespace iqrl::nn
