// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "glsr/errors.hpp"
#include "glsr/tensor.hpp"

namespace glsr {

template <typename T>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Tensor<T>& value() const { return graph->value(*this); }
  const Shape& shape() const { return graph->value(*this).shape(); }
};

/// Append-only tape for reverse-mode differentiation.
///
/// Every primitive appends one node holding its forward value, the ids of its
/// inputs and a closure that pulls the node's gradient back into the inputs.
/// Inputs always precede their consumers, so a reverse sweep over the node
/// list is a valid topological order.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, requires_grad});
    return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
  }

  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  /// Append the result of a primitive. `fn` is dropped when no input needs a
  /// gradient, which turns pure inference into a forward-only tape.
  Var<T> record(Tensor<T> value, std::vector<int> inputs, BackwardFn fn) {
    bool needs = false;
    for (int i : inputs) needs = needs || nodes_.at(static_cast<std::size_t>(i)).requires_grad;
    Node node{std::move(value), {}, std::move(inputs), needs ? std::move(fn) : nullptr, needs};
    nodes_.push_back(std::move(node));
    return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<T>& value(Var<T> v) const { return node(v.id).value; }
  const Tensor<T>& value(int id) const { return node(id).value; }
  bool requires_grad(int id) const { return node(id).requires_grad; }
  bool requires_grad(Var<T> v) const { return node(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient accumulated on a node. Zeros if nothing flowed into it.
  Tensor<T> grad(Var<T> v) const {
    const Node& n = node(v.id);
    if (n.grad.empty()) return Tensor<T>::zeros(n.value.shape());
    return n.grad;
  }

  /// Mutable gradient buffer of node `id`, allocated as zeros on first use.
  Tensor<T>& grad_buffer(int id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad = Tensor<T>::zeros(n.value.shape());
    return n.grad;
  }

  bool has_grad(int id) const { return !node(id).grad.empty(); }

  /// Reverse sweep from a scalar output (seed 1).
  void backward(Var<T> out) {
    if (value(out).size() != 1) {
      throw UsageError("backward from a non-scalar output " + value(out).shape().str() +
                       " needs an explicit seed gradient");
    }
    backward(out, Tensor<T>::ones(value(out).shape()));
  }

  void backward(Var<T> out, const Tensor<T>& seed) {
    if (seed.shape() != value(out).shape()) {
      throw DimensionError("seed gradient " + seed.shape().str() + " does not match output " +
                           value(out).shape().str());
    }
    for (Node& n : nodes_) n.grad = Tensor<T>();
    node(out.id).grad = seed;
    for (int id = out.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.backward && !n.grad.empty()) n.backward(*this, id);
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<int> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Node& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }

  std::deque<Node> nodes_;  // stable references across appends
};

}  // namespace glsr
