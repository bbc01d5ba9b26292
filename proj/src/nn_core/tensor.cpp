#include "bwe/nn/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace bwe::nn {
namespace {

thread_local bool g_grad_enabled = true;

detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw std::logic_error("operation on an undefined tensor");
  return *node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<Real>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<Real> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("Tensor::from: shape " + shape_string(shape) + " needs " +
                                std::to_string(shape_numel(shape)) + " values, got " +
                                std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(Real value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::size(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw std::out_of_range("Tensor::size: axis out of range");
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).value.size(); }

std::span<Real> Tensor::data() { return checked(node_).value; }
std::span<const Real> Tensor::data() const { return checked(node_).value; }

Real Tensor::item() const {
  const auto& v = checked(node_).value;
  if (v.size() != 1) throw std::invalid_argument("Tensor::item: tensor has " + std::to_string(v.size()) + " elements");
  return v[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  auto& n = checked(node_);
  if (!n.is_leaf()) throw std::logic_error("set_requires_grad on a non-leaf tensor");
  n.requires_grad = flag;
}

bool Tensor::has_grad() const { return checked(node_).grad.size() == checked(node_).value.size(); }

std::span<const Real> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("Tensor::grad: no gradient has been computed");
  return node_->grad;
}

std::span<Real> Tensor::mutable_grad() { return checked(node_).ensure_grad(); }

void Tensor::zero_grad() {
  auto& n = checked(node_);
  n.grad.assign(n.value.size(), Real{0});
}

Tensor Tensor::detach() const {
  auto& n = checked(node_);
  return from(n.shape, n.value, false);
}

Tensor Tensor::clone() const {
  auto& n = checked(node_);
  return from(n.shape, n.value, n.requires_grad && n.is_leaf());
}

Tensor Tensor::make_result(Shape shape, std::vector<Real> value, std::vector<Tensor> parents,
                           std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (shape_numel(node->shape) != node->value.size()) {
    throw std::logic_error("make_result: shape/value size mismatch");
  }
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) track = track || p.requires_grad();
  }
  if (track) {
    node->requires_grad = true;
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  auto& root = checked(node_);
  if (root.value.size() != 1) {
    throw std::invalid_argument("backward: loss must be a single element, got shape " + shape_string(root.shape));
  }
  if (!root.requires_grad) throw std::logic_error("backward: loss does not depend on any tensor requiring grad");

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), Real{0});
  }
  root.grad.assign(1, Real{1});
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->is_leaf()) continue;
    n->backward_fn(*n);
    // Intermediate gradients are not needed once propagated.
    std::vector<Real>().swap(n->grad);
  }
}

}  // namespace bwe::nn
