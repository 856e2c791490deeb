#include "avdiff/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "avdiff/errors.hpp"

namespace avdiff {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

std::vector<int64_t> row_strides(const Shape& s) {
  std::vector<int64_t> st(s.size());
  int64_t acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

Tensor make_node(Shape shape, std::vector<double> val,
                 std::vector<std::shared_ptr<TensorNode>> parents,
                 std::function<void(TensorNode&)> backward) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->val = std::move(val);
  if (g_grad_enabled) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    if (rg) {
      n->requires_grad = true;
      n->parents = std::move(parents);
      n->backward = std::move(backward);
    }
  }
  return Tensor(n);
}

void require(bool cond, const std::string& msg) {
  if (!cond) raise(ErrorCode::ShapeMismatch, msg);
}

void accum(TensorNode& p, int64_t i, double g) {
  p.grad[i] += g;
}

}  // namespace

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::zeros(const Shape& s) { return full(s, 0.0); }

Tensor Tensor::full(const Shape& s, double v) {
  auto n = std::make_shared<TensorNode>();
  n->shape = s;
  n->val.assign(shape_numel(s), v);
  return Tensor(n);
}

Tensor Tensor::from(const Shape& s, std::vector<double> data) {
  if (static_cast<int64_t>(data.size()) != shape_numel(s))
    raise(ErrorCode::ShapeMismatch, "from(): data size does not match shape " + shape_str(s));
  auto n = std::make_shared<TensorNode>();
  n->shape = s;
  n->val = std::move(data);
  return Tensor(n);
}

Tensor Tensor::randn(const Shape& s, Rng& rng, double stddev) {
  auto n = std::make_shared<TensorNode>();
  n->shape = s;
  n->val.resize(shape_numel(s));
  for (auto& v : n->val) v = rng.normal() * stddev;
  return Tensor(n);
}

double Tensor::item() const {
  require(size() == 1, "item() on non-scalar tensor " + shape_str(shape()));
  return node_->val[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  auto st = row_strides(shape());
  require(idx.size() == st.size(), "at(): rank mismatch");
  int64_t off = 0;
  size_t k = 0;
  for (int i : idx) off += st[k++] * i;
  return node_->val[off];
}

void Tensor::set(std::initializer_list<int> idx, double v) {
  auto st = row_strides(shape());
  require(idx.size() == st.size(), "set(): rank mismatch");
  int64_t off = 0;
  size_t k = 0;
  for (int i : idx) off += st[k++] * i;
  node_->val[off] = v;
}

Tensor Tensor::detach() const {
  auto n = std::make_shared<TensorNode>();
  n->shape = node_->shape;
  n->val = node_->val;
  return Tensor(n);
}

void Tensor::backward() const {
  require(size() == 1, "backward() requires a scalar root");
  if (!node_->requires_grad) return;

  // Iterative post-order over the requires_grad subgraph.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      TensorNode* p = n->parents[i].get();
      ++i;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (TensorNode* n : order) n->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

namespace {

// Binary op where b's shape has the same rank as a's, each dim equal or 1.
Tensor broadcast_binary(const Tensor& a, const Tensor& b, bool is_add) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  require(sa.size() == sb.size(),
          "binary op rank mismatch " + shape_str(sa) + " vs " + shape_str(sb));
  bool same = true;
  for (size_t i = 0; i < sa.size(); ++i) {
    require(sb[i] == sa[i] || sb[i] == 1,
            "binary op shape mismatch " + shape_str(sa) + " vs " + shape_str(sb));
    same = same && sb[i] == sa[i];
  }

  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(av.size());

  if (same) {
    if (is_add)
      for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    else
      for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
    auto an = a.node();
    auto bn = b.node();
    return make_node(sa, std::move(out), {an, bn}, [an, bn, is_add](TensorNode& self) {
      if (an->requires_grad) {
        an->ensure_grad();
        if (is_add)
          for (size_t i = 0; i < self.grad.size(); ++i) accum(*an, i, self.grad[i]);
        else
          for (size_t i = 0; i < self.grad.size(); ++i) accum(*an, i, self.grad[i] * bn->val[i]);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        if (is_add)
          for (size_t i = 0; i < self.grad.size(); ++i) accum(*bn, i, self.grad[i]);
        else
          for (size_t i = 0; i < self.grad.size(); ++i) accum(*bn, i, self.grad[i] * an->val[i]);
      }
    });
  }

  // Broadcast path: map each linear index of a to b's storage.
  auto stb = row_strides(sb);
  std::vector<int64_t> bst(sa.size());
  for (size_t i = 0; i < sa.size(); ++i) bst[i] = (sb[i] == 1 && sa[i] != 1) ? 0 : stb[i];
  auto sta = row_strides(sa);

  const int rank = static_cast<int>(sa.size());
  auto b_index = [sta, bst, rank](int64_t ia) {
    int64_t ib = 0;
    int64_t rem = ia;
    for (int d = 0; d < rank; ++d) {
      int64_t q = rem / sta[d];
      rem -= q * sta[d];
      ib += q * bst[d];
    }
    return ib;
  };

  for (int64_t i = 0; i < static_cast<int64_t>(av.size()); ++i) {
    double bvv = bv[b_index(i)];
    out[i] = is_add ? av[i] + bvv : av[i] * bvv;
  }
  auto an = a.node();
  auto bn = b.node();
  return make_node(sa, std::move(out), {an, bn}, [an, bn, is_add, b_index](TensorNode& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      if (is_add)
        for (size_t i = 0; i < self.grad.size(); ++i) accum(*an, i, self.grad[i]);
      else
        for (size_t i = 0; i < self.grad.size(); ++i)
          accum(*an, i, self.grad[i] * bn->val[b_index(static_cast<int64_t>(i))]);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      if (is_add)
        for (size_t i = 0; i < self.grad.size(); ++i)
          accum(*bn, b_index(static_cast<int64_t>(i)), self.grad[i]);
      else
        for (size_t i = 0; i < self.grad.size(); ++i)
          accum(*bn, b_index(static_cast<int64_t>(i)), self.grad[i] * an->val[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, true); }
Tensor mul(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, false); }
Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor scale(const Tensor& a, double s) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * s;
  auto an = a.node();
  return make_node(a.shape(), std::move(out), {an}, [an, s](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) accum(*an, i, self.grad[i] * s);
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + s;
  auto an = a.node();
  return make_node(a.shape(), std::move(out), {an}, [an](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) accum(*an, i, self.grad[i]);
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor silu(const Tensor& a) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) {
    double sg = 1.0 / (1.0 + std::exp(-av[i]));
    out[i] = av[i] * sg;
  }
  auto an = a.node();
  return make_node(a.shape(), std::move(out), {an}, [an](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      double x = an->val[i];
      double sg = 1.0 / (1.0 + std::exp(-x));
      accum(*an, i, self.grad[i] * sg * (1.0 + x * (1.0 - sg)));
    }
  });
}

Tensor log1p_t(const Tensor& a) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = std::log1p(av[i]);
  auto an = a.node();
  return make_node(a.shape(), std::move(out), {an}, [an](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      accum(*an, i, self.grad[i] / (1.0 + an->val[i]));
  });
}

Tensor softmax_lastdim(const Tensor& a) {
  const Shape& s = a.shape();
  require(!s.empty(), "softmax on empty shape");
  int64_t d = s.back();
  int64_t rows = shape_numel(s) / d;
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * d;
    double* y = out.data() + r * d;
    double mx = x[0];
    for (int64_t i = 1; i < d; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (int64_t i = 0; i < d; ++i) {
      y[i] = std::exp(x[i] - mx);
      sum += y[i];
    }
    for (int64_t i = 0; i < d; ++i) y[i] /= sum;
  }
  auto an = a.node();
  return make_node(s, std::move(out), {an}, [an, rows, d](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const double* y = self.val.data() + r * d;
      const double* gy = self.grad.data() + r * d;
      double dot = 0.0;
      for (int64_t i = 0; i < d; ++i) dot += y[i] * gy[i];
      for (int64_t i = 0; i < d; ++i) accum(*an, r * d + i, y[i] * (gy[i] - dot));
    }
  });
}

// ---------------------------------------------------------------------------
// structure
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& a, const Shape& s) {
  require(shape_numel(s) == a.size(),
          "reshape " + shape_str(a.shape()) + " -> " + shape_str(s) + " changes element count");
  auto an = a.node();
  std::vector<double> out = a.data();
  return make_node(s, std::move(out), {an}, [an](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) accum(*an, i, self.grad[i]);
  });
}

Tensor permute(const Tensor& a, const std::vector<int>& dims) {
  const Shape& s = a.shape();
  require(dims.size() == s.size(), "permute rank mismatch");
  Shape so(s.size());
  for (size_t i = 0; i < dims.size(); ++i) so[i] = s[dims[i]];
  auto sti = row_strides(s);
  auto sto = row_strides(so);
  int rank = static_cast<int>(s.size());

  // out linear index -> in linear index
  auto map_idx = [sto, sti, dims, rank](int64_t io) {
    int64_t ii = 0;
    int64_t rem = io;
    for (int d = 0; d < rank; ++d) {
      int64_t q = rem / sto[d];
      rem -= q * sto[d];
      ii += q * sti[dims[d]];
    }
    return ii;
  };

  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (int64_t io = 0; io < static_cast<int64_t>(av.size()); ++io) out[io] = av[map_idx(io)];
  auto an = a.node();
  return make_node(so, std::move(out), {an}, [an, map_idx](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t io = 0; io < static_cast<int64_t>(self.grad.size()); ++io)
      accum(*an, map_idx(io), self.grad[io]);
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  require(!parts.empty(), "concat of zero tensors");
  const Shape& s0 = parts[0].shape();
  require(axis >= 0 && axis < static_cast<int>(s0.size()), "concat axis out of range");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s0[i];
  for (size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
  int axis_total = 0;
  for (const auto& p : parts) {
    const Shape& sp = p.shape();
    require(sp.size() == s0.size(), "concat rank mismatch");
    for (size_t i = 0; i < s0.size(); ++i)
      require(static_cast<int>(i) == axis || sp[i] == s0[i],
              "concat shape mismatch " + shape_str(sp) + " vs " + shape_str(s0));
    axis_total += sp[axis];
  }
  Shape so = s0;
  so[axis] = axis_total;

  std::vector<double> out(outer * axis_total * inner);
  std::vector<std::shared_ptr<TensorNode>> pnodes;
  std::vector<int64_t> offsets;  // element offset of each part along axis
  int64_t off = 0;
  for (const auto& p : parts) {
    pnodes.push_back(p.node());
    offsets.push_back(off);
    int64_t pa = p.shape()[axis];
    const auto& pv = p.data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(pv.begin() + o * pa * inner, pv.begin() + (o + 1) * pa * inner,
                out.begin() + (o * axis_total + off) * inner);
    off += pa;
  }

  return make_node(so, std::move(out), pnodes,
                   [pnodes, offsets, outer, inner, axis_total, axis](TensorNode& self) {
                     for (size_t k = 0; k < pnodes.size(); ++k) {
                       auto& p = *pnodes[k];
                       if (!p.requires_grad) continue;
                       p.ensure_grad();
                       int64_t pa = p.shape[axis];
                       for (int64_t o = 0; o < outer; ++o) {
                         const double* g = self.grad.data() + (o * axis_total + offsets[k]) * inner;
                         double* pg = p.grad.data() + o * pa * inner;
                         for (int64_t i = 0; i < pa * inner; ++i) pg[i] += g[i];
                       }
                     }
                   });
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  const Shape& s = a.shape();
  require(axis >= 0 && axis < static_cast<int>(s.size()), "slice axis out of range");
  require(start >= 0 && len >= 0 && start + len <= s[axis], "slice range out of bounds");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape so = s;
  so[axis] = len;
  int64_t sa = s[axis];

  const auto& av = a.data();
  std::vector<double> out(outer * len * inner);
  for (int64_t o = 0; o < outer; ++o)
    std::copy(av.begin() + (o * sa + start) * inner, av.begin() + (o * sa + start + len) * inner,
              out.begin() + o * len * inner);
  auto an = a.node();
  return make_node(so, std::move(out), {an},
                   [an, outer, inner, sa, start, len](TensorNode& self) {
                     if (!an->requires_grad) return;
                     an->ensure_grad();
                     for (int64_t o = 0; o < outer; ++o) {
                       const double* g = self.grad.data() + o * len * inner;
                       double* pg = an->grad.data() + (o * sa + start) * inner;
                       for (int64_t i = 0; i < len * inner; ++i) pg[i] += g[i];
                     }
                   });
}

Tensor expand_leading(const Tensor& a, int n) {
  Shape so;
  so.push_back(n);
  for (int d : a.shape()) so.push_back(d);
  int64_t m = a.size();
  const auto& av = a.data();
  std::vector<double> out(n * m);
  for (int i = 0; i < n; ++i) std::copy(av.begin(), av.end(), out.begin() + i * m);
  auto an = a.node();
  return make_node(so, std::move(out), {an}, [an, n, m](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int64_t j = 0; j < m; ++j) accum(*an, j, self.grad[i * m + j]);
  });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.shape().size() == 2 && b.shape().size() == 2, "matmul expects rank-2 tensors");
  int64_t m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
  require(k == k2, "matmul inner dim mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n);
  MapM(out.data(), m, n).noalias() = CMapM(a.data().data(), m, k) * CMapM(b.data().data(), k, n);
  auto an = a.node();
  auto bn = b.node();
  return make_node({static_cast<int>(m), static_cast<int>(n)}, std::move(out), {an, bn},
                   [an, bn, m, k, n](TensorNode& self) {
                     CMapM gy(self.grad.data(), m, n);
                     if (an->requires_grad) {
                       an->ensure_grad();
                       MapM(an->grad.data(), m, k).noalias() +=
                           gy * CMapM(bn->val.data(), k, n).transpose();
                     }
                     if (bn->requires_grad) {
                       bn->ensure_grad();
                       MapM(bn->grad.data(), k, n).noalias() +=
                           CMapM(an->val.data(), m, k).transpose() * gy;
                     }
                   });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require(a.shape().size() == 3 && b.shape().size() == 3, "bmm expects rank-3 tensors");
  int64_t B = a.shape()[0], m = a.shape()[1], k = a.shape()[2];
  require(b.shape()[0] == B && b.shape()[1] == k,
          "bmm shape mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  int64_t n = b.shape()[2];
  std::vector<double> out(B * m * n);
  for (int64_t i = 0; i < B; ++i)
    MapM(out.data() + i * m * n, m, n).noalias() =
        CMapM(a.data().data() + i * m * k, m, k) * CMapM(b.data().data() + i * k * n, k, n);
  auto an = a.node();
  auto bn = b.node();
  return make_node({static_cast<int>(B), static_cast<int>(m), static_cast<int>(n)}, std::move(out),
                   {an, bn}, [an, bn, B, m, k, n](TensorNode& self) {
                     for (int64_t i = 0; i < B; ++i) {
                       CMapM gy(self.grad.data() + i * m * n, m, n);
                       if (an->requires_grad) {
                         an->ensure_grad();
                         MapM(an->grad.data() + i * m * k, m, k).noalias() +=
                             gy * CMapM(bn->val.data() + i * k * n, k, n).transpose();
                       }
                       if (bn->requires_grad) {
                         bn->ensure_grad();
                         MapM(bn->grad.data() + i * k * n, k, n).noalias() +=
                             CMapM(an->val.data() + i * m * k, m, k).transpose() * gy;
                       }
                     }
                   });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  const Shape& sx = x.shape();
  require(w.shape().size() == 2, "linear weight must be rank-2");
  int64_t in = w.shape()[0], out_dim = w.shape()[1];
  require(!sx.empty() && sx.back() == in,
          "linear input " + shape_str(sx) + " vs weight " + shape_str(w.shape()));
  int64_t rows = x.size() / in;
  if (bias.defined())
    require(bias.shape().size() == 1 && bias.shape()[0] == out_dim, "linear bias shape");

  std::vector<double> out(rows * out_dim);
  MapM y(out.data(), rows, out_dim);
  y.noalias() = CMapM(x.data().data(), rows, in) * CMapM(w.data().data(), in, out_dim);
  if (bias.defined()) y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), out_dim);

  Shape so = sx;
  so.back() = static_cast<int>(out_dim);
  auto xn = x.node();
  auto wn = w.node();
  std::vector<std::shared_ptr<TensorNode>> parents{xn, wn};
  std::shared_ptr<TensorNode> bn = bias.defined() ? bias.node() : nullptr;
  if (bn) parents.push_back(bn);
  return make_node(so, std::move(out), std::move(parents),
                   [xn, wn, bn, rows, in, out_dim](TensorNode& self) {
                     CMapM gy(self.grad.data(), rows, out_dim);
                     if (xn->requires_grad) {
                       xn->ensure_grad();
                       MapM(xn->grad.data(), rows, in).noalias() +=
                           gy * CMapM(wn->val.data(), in, out_dim).transpose();
                     }
                     if (wn->requires_grad) {
                       wn->ensure_grad();
                       MapM(wn->grad.data(), in, out_dim).noalias() +=
                           CMapM(xn->val.data(), rows, in).transpose() * gy;
                     }
                     if (bn && bn->requires_grad) {
                       bn->ensure_grad();
                       Eigen::Map<Eigen::RowVectorXd>(bn->grad.data(), out_dim) +=
                           gy.colwise().sum();
                     }
                   });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  auto an = a.node();
  return make_node({1}, {s}, {an}, [an](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    double g = self.grad[0];
    for (auto& gv : an->grad) gv += g;
  });
}

Tensor mean_all(const Tensor& a) {
  int64_t n = a.size();
  double s = 0.0;
  for (double v : a.data()) s += v;
  s /= static_cast<double>(n);
  auto an = a.node();
  return make_node({1}, {s}, {an}, [an, n](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    double g = self.grad[0] / static_cast<double>(n);
    for (auto& gv : an->grad) gv += g;
  });
}

Tensor mean_axis0(const Tensor& a) {
  const Shape& s = a.shape();
  require(s.size() >= 1 && s[0] >= 1, "mean_axis0 needs a leading axis");
  int64_t n = s[0];
  int64_t m = a.size() / n;
  Shape so(s.begin() + 1, s.end());
  if (so.empty()) so = {1};
  std::vector<double> out(m, 0.0);
  const auto& av = a.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) out[j] += av[i * m + j];
  for (auto& v : out) v /= static_cast<double>(n);
  auto an = a.node();
  return make_node(so, std::move(out), {an}, [an, n, m](TensorNode& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < m; ++j)
        accum(*an, i * m + j, self.grad[j] / static_cast<double>(n));
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "mse shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  int64_t n = a.size();
  const auto& av = a.data();
  const auto& bv = b.data();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double d = av[i] - bv[i];
    s += d * d;
  }
  s /= static_cast<double>(n);
  auto an = a.node();
  auto bn = b.node();
  return make_node({1}, {s}, {an, bn}, [an, bn, n](TensorNode& self) {
    double g = 2.0 * self.grad[0] / static_cast<double>(n);
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t i = 0; i < n; ++i) accum(*an, i, g * (an->val[i] - bn->val[i]));
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < n; ++i) accum(*bn, i, -g * (an->val[i] - bn->val[i]));
    }
  });
}

}  // namespace avdiff
