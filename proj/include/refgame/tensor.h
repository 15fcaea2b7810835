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

#ifndef REFGAME_TENSOR_H_
#define REFGAME_TENSOR_H_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace refgame {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

namespace detail {

// One value in the computation graph. Leaves (parameters, inputs) have no
// inputs and no backward rule.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient flows in
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& EnsureGrad();
};

}  // namespace detail

// Dense row-major float64 array with optional gradient. Copies are cheap
// handles sharing the same node; use Clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor Scalar(double value);
  static Tensor Filled(Shape shape, double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const { return node_->data; }
  // Direct write access. Only for leaves: optimizer updates, test
  // perturbations, loading checkpoints.
  std::span<double> mutable_data();
  double operator[](std::size_t i) const { return data()[i]; }
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  // Gradient values; empty span if no gradient has flowed in.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void ZeroGrad();

  // Reverse-mode sweep from this scalar.
  void Backward() const;

  // Same values, no history, no gradient requirement.
  Tensor Detach() const;
  Tensor Clone() const;
  bool SameStorage(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Nodes reachable from a root, ordered so that every node's inputs precede
// it. Backward() visits each recorded node exactly once, in reverse.
class Tape {
 public:
  static Tape Record(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  const std::vector<detail::Node*>& nodes() const { return order_; }
  void Backward();

 private:
  std::shared_ptr<detail::Node> root_;
  std::vector<detail::Node*> order_;
};

bool GradEnabled();

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

// Builds an op result. History is kept only when grad mode is on and some
// input requires a gradient; `backward` is dropped otherwise.
Tensor MakeResult(const char* op, Shape shape, std::vector<double> values,
                  std::initializer_list<Tensor> inputs,
                  std::function<void(Node&)> backward);

}  // namespace detail

}  // namespace refgame

#endif  // REFGAME_TENSOR_H_
