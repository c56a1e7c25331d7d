// Copyright (c) the LVC Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Reverse-mode autodiff over a flat tape of nodes. Ops append nodes in
// execution order; backward() walks the tape once in reverse. Gradient
// accumulation happens in that fixed order, so repeated backward passes on
// the same graph are bitwise identical.

#ifndef LVC_GRAPH_HPP_
#define LVC_GRAPH_HPP_

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lvc/kernels.hpp"
#include "lvc/tensor.hpp"

namespace lvc {

template <typename T>
class Graph;

// Lightweight handle to a node. An invalid handle (id < 0) is used for
// optional inputs such as a missing bias.
template <typename T>
struct Var {
  Graph<T>* g = nullptr;
  i64 id = -1;

  bool valid() const { return g != nullptr && id >= 0; }
  const Tensor<T>& val() const { return g->val(*this); }
  const Shape& shape() const { return g->val(*this).shape(); }
};

using VarF = Var<float>;
using VarD = Var<double>;

template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // When disabled (inference), ops skip backward closures and gradient
  // bookkeeping entirely; values are still recorded for FLOP accounting.
  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool on) { grad_enabled_ = on; }

  Var<T> leaf(Tensor<T> value, bool requires_grad) {
    return make(std::move(value), requires_grad && grad_enabled_, nullptr, 0);
  }
  Var<T> constant(Tensor<T> value) {
    return make(std::move(value), false, nullptr, 0);
  }

  // Core node factory used by the ops layer. `requires_grad` is forced off
  // while grad is disabled.
  Var<T> make(Tensor<T> value, bool requires_grad,
              std::function<void(Graph<T>&)> backward, i64 flops) {
    add_flops(flops);
    Node node;
    node.val = std::move(value);
    node.requires_grad = requires_grad && grad_enabled_;
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var<T>{this, i64(nodes_.size()) - 1};
  }

  const Tensor<T>& val(Var<T> v) const { return nodes_[size_t(v.id)].val; }
  bool requires_grad(Var<T> v) const {
    return v.valid() && nodes_[size_t(v.id)].requires_grad;
  }

  // Gradient of a node after backward(); empty if none flowed to it.
  const Tensor<T>& grad(Var<T> v) const { return nodes_[size_t(v.id)].grad; }

  // Adds `g` into the node's gradient. First contribution moves, later ones
  // accumulate elementwise; the caller sequence fixes the FP order.
  void accum_grad(Var<T> v, Tensor<T>&& g) {
    Node& node = nodes_[size_t(v.id)];
    if (!node.requires_grad) return;
    if (node.grad.empty()) {
      node.grad = std::move(g);
      return;
    }
    LVC_CHECK(node.grad.shape() == g.shape(), "gradient shape mismatch ",
              node.grad.shape().str(), " vs ", g.shape().str());
    accum_inplace(node.grad.data(), g.data(), g.numel());
  }

  // Reverse sweep from `loss` (a scalar). Visits each node at most once, in
  // strictly decreasing tape order. Clears any previous gradients first so
  // repeated calls reproduce the same bits.
  void backward(Var<T> loss) {
    LVC_CHECK(loss.valid() && loss.g == this, "backward on foreign handle");
    LVC_CHECK(val(loss).numel() == 1, "backward expects a scalar, got ",
              val(loss).shape().str());
    LVC_CHECK(grad_enabled_, "backward with gradients disabled");
    for (auto& n : nodes_) n.grad = Tensor<T>();
    Node& root = nodes_[size_t(loss.id)];
    LVC_CHECK(root.requires_grad, "loss does not require grad");
    root.grad = Tensor<T>::full(root.val.shape(), T(1));
    for (i64 i = loss.id; i >= 0; --i) {
      Node& n = nodes_[size_t(i)];
      if (n.requires_grad && !n.grad.empty() && n.backward) n.backward(*this);
    }
  }

  i64 size() const { return i64(nodes_.size()); }

  // --- FLOP accounting -----------------------------------------------
  // Nested named scopes; each op's cost is charged to the total and to
  // every open scope (keyed by the '/'-joined path).
  void push_scope(const std::string& name) {
    const std::string joined =
        scope_stack_.empty() ? name : scope_stack_.back() + "/" + name;
    scope_stack_.push_back(joined);
  }
  void pop_scope() { scope_stack_.pop_back(); }
  i64 total_flops() const { return total_flops_; }
  const std::map<std::string, i64>& scope_flops_map() const {
    return scope_flops_;
  }
  i64 scope_flops(const std::string& joined_name) const {
    auto it = scope_flops_.find(joined_name);
    return it == scope_flops_.end() ? 0 : it->second;
  }

  class Scope {
   public:
    Scope(Graph& g, const std::string& name) : g_(g) { g_.push_scope(name); }
    ~Scope() { g_.pop_scope(); }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Graph& g_;
  };

 private:
  struct Node {
    Tensor<T> val;
    Tensor<T> grad;
    bool requires_grad = false;
    std::function<void(Graph<T>&)> backward;
  };

  void add_flops(i64 f) {
    if (f == 0) return;
    total_flops_ += f;
    for (const auto& s : scope_stack_) scope_flops_[s] += f;
  }

  static void accum_inplace(T* dst, const T* src, i64 n);

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
  i64 total_flops_ = 0;
  std::vector<std::string> scope_stack_;
  std::map<std::string, i64> scope_flops_;
};

template <>
inline void Graph<float>::accum_inplace(float* dst, const float* src, i64 n) {
  kern::active_kernels().add(dst, src, dst, n);
}
template <>
inline void Graph<double>::accum_inplace(double* dst, const double* src,
                                         i64 n) {
  kern::add_ref<double>(dst, src, dst, n);
}

}  // namespace lvc

#endif  // LVC_GRAPH_HPP_
