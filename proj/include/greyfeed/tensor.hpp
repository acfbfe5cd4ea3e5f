#pragma once

#include <Eigen/Core>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace greyfeed {

// Extents of a dense row-major tensor, outermost first.
using Shape = std::vector<Eigen::Index>;

Eigen::Index shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

struct TensorNode {
  Shape shape;
  Eigen::ArrayXd data;
  Eigen::ArrayXd grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> inputs;
  // Propagates this node's grad into its inputs' grads. Set only on op outputs.
  std::function<void(TensorNode&)> backward_fn;

  bool leaf() const { return inputs.empty(); }
  // Sizes grad to match data (zero-filled) if not already present.
  void ensure_grad();
  // Adds g into the grad buffer, allocating on first use.
  void accumulate(const Eigen::ArrayXd& g);
};

// Shared handle to a node in the implicit compute graph. Cheap to copy; ops
// are free functions that return fresh handles wired to their inputs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, Eigen::ArrayXd data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Eigen::Index numel() const { return node_->data.size(); }
  Eigen::Index dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }

  Eigen::ArrayXd& data() { return node_->data; }
  const Eigen::ArrayXd& data() const { return node_->data; }
  double value() const;  // scalar convenience; throws unless numel()==1

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  Eigen::ArrayXd& grad();
  const Eigen::ArrayXd& grad() const;
  void zero_grad();

  // Reverse-mode sweep from a scalar. Leaf grads accumulate across calls;
  // interior grads are recomputed per call.
  void backward() const;

  const std::shared_ptr<TensorNode>& node() const { return node_; }
  TensorNode* raw() const { return node_.get(); }

 private:
  std::shared_ptr<TensorNode> node_;
};

// Builds an op output node: requires_grad is inherited from the inputs and
// backward_fn is retained only when some input wants gradients.
Tensor make_op(Shape shape, Eigen::ArrayXd data, std::vector<Tensor> inputs,
               std::function<void(TensorNode&)> backward_fn);

}  // namespace greyfeed
