// Copyright 2026 The emotrans Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emotrans/tensor.h"

namespace emotrans {

template <typename Real>
class Tape;

/// Handle to one value recorded on a tape. Cheap to copy; valid only while
/// the owning tape is alive.
template <typename Real>
class Var {
 public:
  Var() = default;
  Var(Tape<Real>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape<Real>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const Tensor<Real>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape<Real>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Computes the gradients of an op's inputs from the gradient of its output.
/// Entries may be left invalid for inputs that receive no gradient. The
/// function is written in terms of recorded ops, so when the tape is in
/// grad mode the backward pass itself lands on the tape.
template <typename Real>
using BackwardFn = std::function<std::vector<Var<Real>>(
    const std::vector<Var<Real>>& inputs, const Var<Real>& output,
    const Var<Real>& grad_output)>;

template <typename Real>
struct Node {
  const char* op = "leaf";
  Tensor<Real> value;
  std::vector<std::size_t> inputs;
  bool requires_grad = false;
  bool double_differentiable = false;
  BackwardFn<Real> backward;
};

/// Append-only record of a computation. Node ids are assigned in creation
/// order, so inputs always precede their consumers and a reverse sweep over
/// ids is a valid topological order for the backward pass.
template <typename Real>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Real> leaf(Tensor<Real> value, bool requires_grad);
  Var<Real> constant(Tensor<Real> value) { return leaf(std::move(value), false); }

  /// Registers the result of an op. The node requires grad iff grad mode is
  /// on and at least one input requires grad; otherwise `backward` is dropped.
  Var<Real> record(const char* op, Tensor<Real> value,
                   const std::vector<Var<Real>>& inputs, bool double_differentiable,
                   BackwardFn<Real> backward);

  /// Reverse sweep from a scalar `output`. Returns d output / d w for each
  /// entry of `wrt` (zeros where no path exists). With `create_graph` the
  /// sweep is recorded, so the returned vars can be differentiated again;
  /// reaching an op without double-backward support is a ContractError.
  std::vector<Var<Real>> gradient(const Var<Real>& output,
                                  std::span<const Var<Real>> wrt,
                                  bool create_graph = false);

  /// Plain first-order gradients as detached tensors.
  std::vector<Tensor<Real>> backward(const Var<Real>& output,
                                     std::span<const Var<Real>> wrt);

  std::size_t size() const { return nodes_.size(); }
  const Node<Real>& node(std::size_t id) const { return nodes_.at(id); }

  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool on) { grad_enabled_ = on; }

  /// When on (the default), every recorded value is scanned for NaN/Inf and
  /// a NumericError naming the producing op is raised.
  void set_check_finite(bool on) { check_finite_ = on; }

 private:
  std::deque<Node<Real>> nodes_;
  bool grad_enabled_ = true;
  bool check_finite_ = true;
};

/// Scoped switch of a tape's grad mode.
template <typename Real>
class GradModeGuard {
 public:
  GradModeGuard(Tape<Real>& tape, bool enabled)
      : tape_(tape), previous_(tape.grad_enabled()) {
    tape_.set_grad_enabled(enabled);
  }
  ~GradModeGuard() { tape_.set_grad_enabled(previous_); }
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  Tape<Real>& tape_;
  bool previous_;
};

template <typename Real>
const Tensor<Real>& Var<Real>::value() const {
  return tape_->node(id_).value;
}

template <typename Real>
bool Var<Real>::requires_grad() const {
  return tape_->node(id_).requires_grad;
}

/// A named trainable tensor with an optional accumulated gradient.
template <typename Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  std::optional<Tensor<Real>> grad;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace emotrans
