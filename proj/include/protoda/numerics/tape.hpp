#ifndef PROTODA_NUMERICS_TAPE_HPP
#define PROTODA_NUMERICS_TAPE_HPP

#include "protoda/numerics/parameter_set.hpp"
#include "protoda/numerics/tensor.hpp"

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace protoda {

template <typename Scalar>
class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<Scalar>& value() const { return tape->value(id); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Scalar scalar() const { return value()(0, 0); }
};

/// Reverse-mode computation record. Nodes are appended in execution order;
/// backward() walks them in reverse, so every recorded op only ever
/// propagates into nodes with smaller ids.
template <typename Scalar>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor<Scalar>& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Tensor<Scalar> value) {
    return push(std::move(value), false, nullptr);
  }

  /// Leaf node bound to a named parameter. Repeated lookups of one name
  /// return the same node so gradients accumulate in one place. Frozen
  /// parameters enter as constants.
  Var<Scalar> parameter(const ParameterSet<Scalar>& params, const std::string& name) {
    if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return {this, it->second};
    const auto& p = params.at(name);
    Var<Scalar> v = push(p.value, p.trainable, nullptr);
    param_nodes_.emplace(name, v.id);
    return v;
  }

  /// Records a derived node. It requires a gradient iff any input does; the
  /// backward function is dropped otherwise.
  Var<Scalar> record(Tensor<Scalar> value, std::initializer_list<Var<Scalar>> inputs,
                     Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id].needs_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  Var<Scalar> record(Tensor<Scalar> value, const std::vector<Var<Scalar>>& inputs,
                     Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id].needs_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  const Tensor<Scalar>& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  bool needs_grad(Var<Scalar> v) const { return nodes_[v.id].needs_grad; }

  /// Accumulated gradient; a zero tensor if nothing reached the node.
  Tensor<Scalar> grad(Var<Scalar> v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0) return Tensor<Scalar>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  template <typename Derived>
  void accumulate(Var<Scalar> v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1.
  void backward(Var<Scalar> loss) {
    if (loss.rows() != 1 || loss.cols() != 1) {
      throw ShapeError("backward: loss must be a 1x1 scalar, got " + shape_string(loss.value()));
    }
    accumulate(loss, Tensor<Scalar>::Ones(1, 1));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      // complete: only nodes with larger ids feed into this one
      n.backward(*this, n.grad);
    }
  }

  /// Gradients of every trainable parameter looked up on this tape.
  GradientMap<Scalar> parameter_gradients() const {
    GradientMap<Scalar> out;
    for (const auto& [name, id] : param_nodes_) {
      if (!nodes_[id].needs_grad) continue;
      out.emplace(name, grad(Var<Scalar>{const_cast<Tape*>(this), id}));
    }
    return out;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    bool needs_grad = false;
    Backward backward;
  };

  Var<Scalar> push(Tensor<Scalar> value, bool needs_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Tensor<Scalar>(), needs_grad, std::move(backward)});
    return {this, nodes_.size() - 1};
  }

  std::deque<Node> nodes_;
  std::map<std::string, std::size_t, std::less<>> param_nodes_;
};

}  // namespace protoda

#endif  // PROTODA_NUMERICS_TAPE_HPP
