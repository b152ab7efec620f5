/*
 * Copyright 2026 The DRE Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dre/numerics/tensor.hpp"

namespace dre {

class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct Node;

/// Receives the upstream gradient and accumulates into the input gradients.
/// `input_grads[i]` is null when input i does not require a gradient.
template <typename T>
using BackwardFn =
  std::function<void(const Node<T>& self, const Tensor<T>& grad, std::span<Tensor<T>*> input_grads)>;

template <typename T>
struct Node {
  Tensor<T> value;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn<T> backward;
  const char* op = "leaf";
  bool requires_grad = false;
};

/// Handle to a recorded value. Copies share the underlying node.
template <typename T>
class Var {
public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var leaf(Tensor<T> value, bool requires_grad = true)
  {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }
  static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  /// Only valid for leaves while no recorded graph references them.
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }
  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& ptr() const { return node_; }

private:
  std::shared_ptr<Node<T>> node_;
};

/// Records `value` as the output of `op`. If no input requires a gradient
/// (or recording is disabled) the result is a constant and nothing is kept.
template <typename T>
Var<T> record(const char* op, Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward);

bool grad_enabled();

/// Disables recording on the current thread for its lifetime.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool previous_;
};

/// Forward-value finiteness checks; on by default in debug builds.
void set_finite_checks(bool enabled);
bool finite_checks();

/// Reverse pass from a scalar loss. Returns one gradient per leaf, in order;
/// leaves the loss does not depend on get zero tensors.
template <typename T>
std::vector<Tensor<T>> gradient_of(const Var<T>& loss, std::span<const Var<T>> leaves);

template <typename T>
std::vector<Tensor<T>> gradient_of(const Var<T>& loss, const std::vector<Var<T>>& leaves)
{
  return gradient_of(loss, std::span<const Var<T>>(leaves));
}

}  // namespace dre
