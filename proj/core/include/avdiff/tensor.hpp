#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "avdiff/rng.hpp"

namespace avdiff {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode {
  Shape shape;
  std::vector<double> val;
  std::vector<double> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;  // reads this node's grad/val, pushes into parents

  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
  }
};

/// Dense double-precision tensor with reverse-mode autodiff.
/// Value semantics over a shared node: copies alias the same storage.
/// Graphs are built per forward pass; leaves (parameters) persist across passes.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

  static Tensor zeros(const Shape& s);
  static Tensor full(const Shape& s, double v);
  static Tensor from(const Shape& s, std::vector<double> data);
  static Tensor randn(const Shape& s, Rng& rng, double stddev = 1.0);
  static Tensor scalar(double v) { return full({1}, v); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t size() const { return static_cast<int64_t>(node_->val.size()); }
  std::vector<double>& data() & { return node_->val; }
  const std::vector<double>& data() const& { return node_->val; }
  // A temporary handle may hold the last reference to the storage, so a
  // reference obtained from it dangles once the handle dies; bind the Tensor
  // to a local first.
  void data() && = delete;
  void data() const&& = delete;
  double item() const;

  double at(std::initializer_list<int> idx) const;
  void set(std::initializer_list<int> idx, double v);

  Tensor& set_requires_grad(bool rg = true) {
    node_->requires_grad = rg;
    return *this;
  }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->parents.empty() && !node_->backward; }

  const std::vector<double>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.assign(node_->val.size(), 0.0); }

  /// Reverse-mode sweep from a scalar tensor.
  void backward() const;

  /// Value copy detached from the graph.
  Tensor detach() const;

  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

bool grad_enabled();

/// Disables graph construction in scope (inference / oracle code).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);  // same shape or numpy-style b with 1-dims
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor log1p_t(const Tensor& a);
Tensor softmax_lastdim(const Tensor& a);

// ---- structure ----
Tensor reshape(const Tensor& a, const Shape& s);
Tensor permute(const Tensor& a, const std::vector<int>& dims);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);
Tensor expand_leading(const Tensor& a, int n);  // [d...] -> [n, d...]

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);                       // [m,k] x [k,n]
Tensor bmm(const Tensor& a, const Tensor& b);                          // [B,m,k] x [B,k,n]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);  // [...,in] x [in,out] (+ [out])

// ---- nn primitives ----
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride);  // 3x3, pad 1
Tensor upsample_nearest2x(const Tensor& x);
Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// ---- reductions ----
Tensor sum_all(const Tensor& a);   // -> [1]
Tensor mean_all(const Tensor& a);  // -> [1]
Tensor mean_axis0(const Tensor& a);
Tensor mse(const Tensor& a, const Tensor& b);  // mean (a-b)^2 -> [1]

}  // namespace avdiff
