// Copyright 2026 The Refgame Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "refgame/tensor.h"

#include <malloc.h>

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "refgame/errors.h"

namespace refgame {

namespace {

// Activations and im2col buffers are tens of MB and freed every step. Keep
// them on the heap instead of round-tripping through mmap, which otherwise
// costs a page fault per touched page.
const bool kHeapTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
  return true;
}();
thread_local bool grad_enabled = true;
}  // namespace

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

namespace detail {

std::vector<double>& Node::EnsureGrad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor MakeResult(const char* op, Shape shape, std::vector<double> values,
                  std::initializer_list<Tensor> inputs,
                  std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->shape = std::move(shape);
  node->data = std::move(values);
  bool needs_grad = false;
  if (grad_enabled) {
    for (const Tensor& in : inputs) {
      if (in.defined() && in.requires_grad()) needs_grad = true;
    }
  }
  if (needs_grad) {
    node->requires_grad = true;
    for (const Tensor& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

Tensor::Tensor(Shape shape, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  node_->data.assign(NumElements(shape), 0.0);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (NumElements(shape) != values.size()) {
    throw DimensionError("tensor shape " + ShapeString(shape) + " needs " +
                         std::to_string(NumElements(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::Scalar(double value) {
  return Tensor(Shape{}, std::vector<double>{value});
}

Tensor Tensor::Filled(Shape shape, double value) {
  std::vector<double> values(NumElements(shape), value);
  return Tensor(std::move(shape), std::move(values));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for " + ShapeString(shape()));
  }
  return node_->shape[axis];
}

std::size_t Tensor::size() const { return node_->data.size(); }

std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
  if (size() != 1) {
    throw DimensionError("item() on tensor of shape " + ShapeString(shape()));
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) { node_->requires_grad = value; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() { return node_->EnsureGrad(); }

void Tensor::ZeroGrad() { node_->grad.clear(); }

void Tensor::Backward() const {
  if (size() != 1) {
    throw DimensionError("Backward() needs a scalar, got " +
                         ShapeString(shape()));
  }
  Tape::Record(*this).Backward();
}

Tensor Tensor::Detach() const {
  return Tensor(node_->shape, node_->data, false);
}

Tensor Tensor::Clone() const {
  Tensor copy(node_->shape, node_->data, node_->requires_grad);
  return copy;
}

Tape Tape::Record(const Tensor& root) {
  Tape tape;
  tape.root_ = root.node();
  // Iterative post-order DFS.
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void Tape::Backward() {
  if (!root_) return;
  std::vector<double>& seed = root_->EnsureGrad();
  std::fill(seed.begin(), seed.end(), 1.0);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

bool GradEnabled() { return grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }

NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

}  // namespace refgame
