#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vvnet {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;
struct TensorImpl;

/// One recorded operation. Holds its inputs alive; the output owns the node.
struct Node {
  std::string op;
  std::vector<Tensor> inputs;
  // Reads the output gradient and accumulates into the inputs that require it.
  std::function<void(std::span<const double> grad_out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // non-empty iff requires_grad
  bool requires_grad = false;
  std::uint64_t seq = 0;  // creation order; a valid topological order
  std::shared_ptr<Node> grad_fn;
};

/// Dense row-major float64 tensor handle with reference semantics. Copying a
/// Tensor shares storage, like the framework tensors it stands in for.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::int64_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::int64_t numel() const {
    return static_cast<std::int64_t>(impl_->data.size());
  }

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  // Allocates (zeroed) or drops the gradient buffer.
  void set_requires_grad(bool on);
  bool has_grad() const { return !impl_->grad.empty(); }
  // Gradients accumulate through any handle, including const captures.
  std::span<double> grad() const { return impl_->grad; }
  void zero_grad();

  // Fresh leaf sharing nothing with this tensor.
  Tensor clone() const;
  Tensor detach() const { return clone(); }

  const std::shared_ptr<Node>& grad_fn() const { return impl_->grad_fn; }
  std::uint64_t seq() const { return impl_->seq; }
  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

  // Builds an op output. Records `node` only when some input requires grad.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::shared_ptr<Node> node);

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

/// Topologically ordered record of the ops reachable from a root tensor.
struct Graph {
  std::vector<Tensor> nodes;  // op outputs, inputs before consumers
};

Graph trace(const Tensor& root);

/// Seeds d(loss)/d(loss) = 1 and runs reverse-mode accumulation.
void backward(const Tensor& loss);

/// When true, op outputs never record a graph node (evaluation mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace vvnet
