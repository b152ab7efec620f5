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

#include "dre/numerics/autograd.hpp"

#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace dre {

std::string shape_string(const Shape& shape)
{
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

thread_local bool tl_grad_enabled = true;

#ifdef NDEBUG
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif

}  // namespace

bool grad_enabled() { return tl_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(tl_grad_enabled) { tl_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { tl_grad_enabled = previous_; }

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks() { return g_finite_checks; }

template <typename T>
Var<T> record(const char* op, Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward)
{
  if (g_finite_checks && !value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by '") + op + "'");
  }
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = op;
  bool any = false;
  if (tl_grad_enabled) {
    for (const auto& in : inputs) any = any || in.requires_grad();
  }
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.ptr());
    node->backward = std::move(backward);
  }
  return Var<T>(std::move(node));
}

template <typename T>
std::vector<Tensor<T>> gradient_of(const Var<T>& loss, std::span<const Var<T>> leaves)
{
  if (loss.value().size() != 1) {
    throw ShapeError("gradient_of requires a scalar loss, got " + shape_string(loss.shape()));
  }

  // Post-order over the part of the record that carries gradients.
  std::vector<Node<T>*> order;
  if (loss.requires_grad()) {
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    visited.insert(loss.node());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        Node<T>* child = node->inputs[next++].get();
        if (child->requires_grad && visited.insert(child).second) {
          stack.emplace_back(child, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::unordered_set<const Node<T>*> wanted;
  for (const auto& leaf : leaves) wanted.insert(leaf.node());

  std::unordered_map<const Node<T>*, Tensor<T>> grads;
  if (!order.empty()) grads.emplace(loss.node(), Tensor<T>(loss.shape(), T(1)));

  std::vector<Tensor<T>*> input_grads;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (!node->backward) continue;  // leaf
    auto found = grads.find(node);
    if (found == grads.end()) continue;

    input_grads.assign(node->inputs.size(), nullptr);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      const Node<T>* in = node->inputs[i].get();
      if (!in->requires_grad) continue;
      auto& g = grads[in];
      if (g.empty()) g = Tensor<T>(in->value.shape());
      input_grads[i] = &g;
    }
    node->backward(*node, found->second, input_grads);
    for (Tensor<T>* g : input_grads) {
      if (g && !g->all_finite()) {
        throw NumericError(std::string("non-finite gradient in backward of '") + node->op + "'");
      }
    }
    if (!wanted.contains(node)) grads.erase(node);
  }

  std::vector<Tensor<T>> out;
  out.reserve(leaves.size());
  for (const auto& leaf : leaves) {
    auto found = grads.find(leaf.node());
    if (found != grads.end()) {
      out.push_back(found->second);
    } else {
      out.emplace_back(leaf.shape());
    }
  }
  return out;
}

template Var<float> record(const char*, Tensor<float>, std::vector<Var<float>>, BackwardFn<float>);
template Var<double> record(const char*, Tensor<double>, std::vector<Var<double>>, BackwardFn<double>);
template std::vector<Tensor<float>> gradient_of(const Var<float>&, std::span<const Var<float>>);
template std::vector<Tensor<double>> gradient_of(const Var<double>&, std::span<const Var<double>>);

}  // namespace dre
