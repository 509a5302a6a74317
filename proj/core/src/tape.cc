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

#include "emotrans/tape.h"

#include <string>

#include "emotrans/ops.h"

namespace emotrans {

template <typename Real>
Var<Real> Tape<Real>::leaf(Tensor<Real> value, bool requires_grad) {
  if (check_finite_ && !value.all_finite()) {
    throw NumericError("non-finite value in tape leaf");
  }
  Node<Real> node;
  node.op = "leaf";
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var<Real>(this, nodes_.size() - 1);
}

template <typename Real>
Var<Real> Tape<Real>::record(const char* op, Tensor<Real> value,
                             const std::vector<Var<Real>>& inputs,
                             bool double_differentiable, BackwardFn<Real> backward) {
  if (check_finite_ && !value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by op '") + op + "'");
  }
  Node<Real> node;
  node.op = op;
  node.value = std::move(value);
  node.double_differentiable = double_differentiable;
  node.inputs.reserve(inputs.size());
  bool any_grad = false;
  for (const auto& in : inputs) {
    if (&in.tape() != this) {
      throw ContractError(std::string("op '") + op + "' mixes vars from different tapes");
    }
    node.inputs.push_back(in.id());
    any_grad = any_grad || in.requires_grad();
  }
  node.requires_grad = grad_enabled_ && any_grad;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<Real>(this, nodes_.size() - 1);
}

template <typename Real>
std::vector<Var<Real>> Tape<Real>::gradient(const Var<Real>& output,
                                            std::span<const Var<Real>> wrt,
                                            bool create_graph) {
  if (&output.tape() != this) {
    throw ContractError("gradient() called with a var from another tape");
  }
  if (output.value().size() != 1) {
    throw ContractError("backward requires a scalar output, got shape " +
                        shape_to_string(output.shape()));
  }

  const std::size_t root = output.id();
  std::vector<Var<Real>> accum(root + 1);
  {
    GradModeGuard<Real> mode(*this, create_graph);
    accum[root] = constant(Tensor<Real>(output.shape(), Real(1)));

    std::vector<Var<Real>> input_vars;
    for (std::size_t id = root + 1; id-- > 0;) {
      if (!accum[id].valid()) continue;
      // Deque references stay valid while the sweep appends new nodes.
      const Node<Real>& node = nodes_[id];
      if (!node.requires_grad || !node.backward) continue;
      if (create_graph && !node.double_differentiable) {
        throw ContractError(std::string("op '") + node.op +
                            "' does not support double backward (create_graph)");
      }
      input_vars.clear();
      for (std::size_t in : node.inputs) input_vars.emplace_back(this, in);
      const std::vector<Var<Real>> grads =
          node.backward(input_vars, Var<Real>(this, id), accum[id]);
      for (std::size_t j = 0; j < node.inputs.size(); ++j) {
        if (j >= grads.size() || !grads[j].valid()) continue;
        const std::size_t in = node.inputs[j];
        if (!nodes_[in].requires_grad) continue;
        if (grads[j].shape() != nodes_[in].value.shape()) {
          throw DimensionError(std::string("backward of op '") + node.op +
                               "' produced gradient of shape " +
                               shape_to_string(grads[j].shape()) + " for input of shape " +
                               shape_to_string(nodes_[in].value.shape()));
        }
        accum[in] = accum[in].valid() ? add(accum[in], grads[j]) : grads[j];
      }
    }
  }

  std::vector<Var<Real>> result;
  result.reserve(wrt.size());
  for (const auto& w : wrt) {
    if (w.id() <= root && accum[w.id()].valid()) {
      result.push_back(accum[w.id()]);
    } else {
      result.push_back(constant(Tensor<Real>(w.shape(), Real(0))));
    }
  }
  return result;
}

template <typename Real>
std::vector<Tensor<Real>> Tape<Real>::backward(const Var<Real>& output,
                                               std::span<const Var<Real>> wrt) {
  std::vector<Tensor<Real>> out;
  for (const auto& g : gradient(output, wrt, false)) out.push_back(g.value());
  return out;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace emotrans
