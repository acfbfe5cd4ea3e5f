#include "greyfeed/tensor.hpp"

#include <unordered_set>

#include "greyfeed/error.hpp"

namespace greyfeed {

Eigen::Index shape_numel(const Shape& shape) {
  Eigen::Index n = 1;
  for (Eigen::Index d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

void TensorNode::ensure_grad() {
  if (grad.size() != data.size()) grad = Eigen::ArrayXd::Zero(data.size());
}

void TensorNode::accumulate(const Eigen::ArrayXd& g) {
  if (g.size() != data.size())
    throw DimensionError("grad accumulation size mismatch: " + std::to_string(g.size()) +
                         " vs " + std::to_string(data.size()));
  ensure_grad();
  grad += g;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = std::make_shared<TensorNode>();
  n->data = Eigen::ArrayXd::Constant(shape_numel(shape), value);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(Shape shape, Eigen::ArrayXd data, bool requires_grad) {
  if (shape_numel(shape) != data.size())
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not fill shape " + shape_str(shape));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  Eigen::ArrayXd d(1);
  d(0) = value;
  return from_data({1}, std::move(d), requires_grad);
}

double Tensor::value() const {
  if (!node_ || node_->data.size() != 1)
    throw ContractError("value() needs a one-element tensor");
  return node_->data(0);
}

Eigen::ArrayXd& Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}

const Eigen::ArrayXd& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad = Eigen::ArrayXd::Zero(node_->data.size());
}

void Tensor::backward() const {
  if (!node_) throw ContractError("backward() on an empty tensor");
  if (node_->data.size() != 1)
    throw ContractError("backward() needs a scalar, got shape " + shape_str(node_->shape));
  if (!node_->requires_grad)
    throw ContractError("backward() on a tensor that does not require grad");

  // Post-order over the requires_grad subgraph; each node visited once.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      TensorNode* in = n->inputs[next++].get();
      if (in->requires_grad && seen.insert(in).second) stack.emplace_back(in, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior grads restart each sweep; leaf grads persist and accumulate.
  for (TensorNode* n : order)
    if (!n->leaf()) n->grad = Eigen::ArrayXd::Zero(n->data.size());

  node_->ensure_grad();
  node_->grad(0) += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

Tensor make_op(Shape shape, Eigen::ArrayXd data, std::vector<Tensor> inputs,
               std::function<void(TensorNode&)> backward_fn) {
  Tensor out = Tensor::from_data(std::move(shape), std::move(data));
  bool needs = false;
  for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  out.raw()->inputs.reserve(inputs.size());
  for (Tensor& t : inputs) out.raw()->inputs.push_back(t.node());
  out.raw()->requires_grad = needs;
  if (needs) out.raw()->backward_fn = std::move(backward_fn);
  return out;
}

}  // namespace greyfeed
