#include "vvnet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "vvnet/error.hpp"

namespace vvnet {

namespace {

std::atomic<std::uint64_t> g_next_seq{1};
thread_local bool g_grad_enabled = true;

}  // namespace

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeMismatch("negative dimension in " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = static_cast<std::size_t>(shape_numel(shape));
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeMismatch("shape " + shape_str(shape) + " needs " +
                        std::to_string(shape_numel(shape)) + " values, got " +
                        std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  Tensor t(std::move(impl));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeMismatch("item() on tensor of shape " + shape_str(shape()));
  }
  return impl_->data[0];
}

void Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  if (on) {
    impl_->grad.assign(impl_->data.size(), 0.0);
  } else {
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
  }
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  return from(impl_->shape, impl_->data, false);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values,
                           std::shared_ptr<Node> node) {
  bool needs_grad = false;
  if (g_grad_enabled && node) {
    for (const auto& in : node->inputs) {
      if (in.defined() && in.requires_grad()) {
        needs_grad = true;
        break;
      }
    }
  }
  Tensor out = from(std::move(shape), std::move(values), needs_grad);
  if (needs_grad) out.impl_->grad_fn = std::move(node);
  return out;
}

Graph trace(const Tensor& root) {
  Graph g;
  std::unordered_set<std::uint64_t> seen;
  std::vector<Tensor> stack{root};
  while (!stack.empty()) {
    Tensor t = std::move(stack.back());
    stack.pop_back();
    if (!t.defined() || !t.requires_grad() || !t.grad_fn()) continue;
    if (!seen.insert(t.seq()).second) continue;
    g.nodes.push_back(t);
    for (const auto& in : t.grad_fn()->inputs) stack.push_back(in);
  }
  std::sort(g.nodes.begin(), g.nodes.end(),
            [](const Tensor& a, const Tensor& b) { return a.seq() < b.seq(); });
  return g;
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw NonScalarLoss("loss has shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  Graph g = trace(loss);
  loss.grad()[0] += 1.0;
  for (auto it = g.nodes.rbegin(); it != g.nodes.rend(); ++it) {
    const auto& node = it->grad_fn();
    node->backward(it->grad());
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

}  // namespace vvnet
