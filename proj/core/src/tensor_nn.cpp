#include <cmath>
#include <memory>

#include "avdiff/errors.hpp"
#include "avdiff/tensor.hpp"

namespace avdiff {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) raise(ErrorCode::ShapeMismatch, msg);
}

Tensor make_node(Shape shape, std::vector<double> val,
                 std::vector<std::shared_ptr<TensorNode>> parents,
                 std::function<void(TensorNode&)> backward) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->val = std::move(val);
  if (grad_enabled()) {
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

}  // namespace

// 3x3 convolution, padding 1, stride 1 or 2. x: [N,Ci,H,W], w: [Co,Ci,3,3], bias: [Co].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride) {
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  require(sx.size() == 4, "conv2d input must be [N,C,H,W]");
  require(sw.size() == 4 && sw[2] == 3 && sw[3] == 3, "conv2d weight must be [Co,Ci,3,3]");
  require(sx[1] == sw[1], "conv2d channel mismatch");
  require(stride == 1 || stride == 2, "conv2d stride must be 1 or 2");
  int N = sx[0], Ci = sx[1], H = sx[2], W = sx[3], Co = sw[0];
  int Ho = (H + 2 - 3) / stride + 1;
  int Wo = (W + 2 - 3) / stride + 1;
  require(bias.shape() == Shape{Co}, "conv2d bias shape");

  const auto& xv = x.data();
  const auto& wv = w.data();
  const auto& bv = bias.data();
  std::vector<double> out(static_cast<int64_t>(N) * Co * Ho * Wo);

  auto xi = [&](int n, int c, int h, int ww) {
    return ((static_cast<int64_t>(n) * Ci + c) * H + h) * W + ww;
  };
  auto wi = [&](int co, int ci, int kh, int kw) {
    return ((static_cast<int64_t>(co) * Ci + ci) * 3 + kh) * 3 + kw;
  };

  int64_t oi = 0;
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Co; ++co)
      for (int ho = 0; ho < Ho; ++ho)
        for (int wo = 0; wo < Wo; ++wo, ++oi) {
          double acc = bv[co];
          for (int ci = 0; ci < Ci; ++ci)
            for (int kh = 0; kh < 3; ++kh) {
              int hin = ho * stride + kh - 1;
              if (hin < 0 || hin >= H) continue;
              for (int kw = 0; kw < 3; ++kw) {
                int win = wo * stride + kw - 1;
                if (win < 0 || win >= W) continue;
                acc += xv[xi(n, ci, hin, win)] * wv[wi(co, ci, kh, kw)];
              }
            }
          out[oi] = acc;
        }

  auto xn = x.node();
  auto wn = w.node();
  auto bn = bias.node();
  return make_node({N, Co, Ho, Wo}, std::move(out), {xn, wn, bn},
                   [xn, wn, bn, N, Ci, H, W, Co, Ho, Wo, stride](TensorNode& self) {
                     auto xid = [&](int n, int c, int h, int ww) {
                       return ((static_cast<int64_t>(n) * Ci + c) * H + h) * W + ww;
                     };
                     auto wid = [&](int co, int ci, int kh, int kw) {
                       return ((static_cast<int64_t>(co) * Ci + ci) * 3 + kh) * 3 + kw;
                     };
                     if (xn->requires_grad) xn->ensure_grad();
                     if (wn->requires_grad) wn->ensure_grad();
                     if (bn->requires_grad) bn->ensure_grad();
                     int64_t oi = 0;
                     for (int n = 0; n < N; ++n)
                       for (int co = 0; co < Co; ++co)
                         for (int ho = 0; ho < Ho; ++ho)
                           for (int wo = 0; wo < Wo; ++wo, ++oi) {
                             double g = self.grad[oi];
                             if (g == 0.0) continue;
                             if (bn->requires_grad) bn->grad[co] += g;
                             for (int ci = 0; ci < Ci; ++ci)
                               for (int kh = 0; kh < 3; ++kh) {
                                 int hin = ho * stride + kh - 1;
                                 if (hin < 0 || hin >= H) continue;
                                 for (int kw = 0; kw < 3; ++kw) {
                                   int win = wo * stride + kw - 1;
                                   if (win < 0 || win >= W) continue;
                                   if (xn->requires_grad)
                                     xn->grad[xid(n, ci, hin, win)] +=
                                         g * wn->val[wid(co, ci, kh, kw)];
                                   if (wn->requires_grad)
                                     wn->grad[wid(co, ci, kh, kw)] +=
                                         g * xn->val[xid(n, ci, hin, win)];
                                 }
                               }
                           }
                   });
}

Tensor upsample_nearest2x(const Tensor& x) {
  const Shape& s = x.shape();
  require(s.size() == 4, "upsample input must be [N,C,H,W]");
  int N = s[0], C = s[1], H = s[2], W = s[3];
  std::vector<double> out(static_cast<int64_t>(N) * C * 4 * H * W);
  const auto& xv = x.data();
  int64_t plane_in = static_cast<int64_t>(H) * W;
  int64_t plane_out = plane_in * 4;
  for (int nc = 0; nc < N * C; ++nc)
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w) {
        double v = xv[nc * plane_in + h * W + w];
        int64_t base = nc * plane_out + (2 * h) * (2 * W) + 2 * w;
        out[base] = v;
        out[base + 1] = v;
        out[base + 2 * W] = v;
        out[base + 2 * W + 1] = v;
      }
  auto xn = x.node();
  return make_node({N, C, 2 * H, 2 * W}, std::move(out), {xn},
                   [xn, N, C, H, W, plane_in, plane_out](TensorNode& self) {
                     if (!xn->requires_grad) return;
                     xn->ensure_grad();
                     for (int nc = 0; nc < N * C; ++nc)
                       for (int h = 0; h < H; ++h)
                         for (int w = 0; w < W; ++w) {
                           int64_t base = nc * plane_out + (2 * h) * (2 * W) + 2 * w;
                           xn->grad[nc * plane_in + h * W + w] +=
                               self.grad[base] + self.grad[base + 1] +
                               self.grad[base + 2 * W] + self.grad[base + 2 * W + 1];
                         }
                   });
}

Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const Shape& s = x.shape();
  require(s.size() == 4, "group_norm input must be [N,C,H,W]");
  int N = s[0], C = s[1], H = s[2], W = s[3];
  require(groups >= 1 && C % groups == 0, "group_norm: channels not divisible by groups");
  require(gamma.shape() == Shape{C} && beta.shape() == Shape{C}, "group_norm affine shapes");
  int Cg = C / groups;
  int64_t gsize = static_cast<int64_t>(Cg) * H * W;
  int64_t plane = static_cast<int64_t>(H) * W;

  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  std::vector<double> means(static_cast<int64_t>(N) * groups), invstds(means.size());

  for (int n = 0; n < N; ++n)
    for (int g = 0; g < groups; ++g) {
      int64_t base = (static_cast<int64_t>(n) * C + static_cast<int64_t>(g) * Cg) * plane;
      double mean = 0.0;
      for (int64_t i = 0; i < gsize; ++i) mean += xv[base + i];
      mean /= static_cast<double>(gsize);
      double var = 0.0;
      for (int64_t i = 0; i < gsize; ++i) {
        double d = xv[base + i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(gsize);
      double inv = 1.0 / std::sqrt(var + eps);
      means[n * groups + g] = mean;
      invstds[n * groups + g] = inv;
      for (int c = 0; c < Cg; ++c) {
        int ch = g * Cg + c;
        double ga = gamma.data()[ch], be = beta.data()[ch];
        for (int64_t i = 0; i < plane; ++i) {
          int64_t idx = base + c * plane + i;
          out[idx] = (xv[idx] - mean) * inv * ga + be;
        }
      }
    }

  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  return make_node(s, std::move(out), {xn, gn, bn},
                   [xn, gn, bn, N, C, groups, Cg, plane, gsize, means, invstds](TensorNode& self) {
                     bool need_x = xn->requires_grad;
                     if (need_x) xn->ensure_grad();
                     if (gn->requires_grad) gn->ensure_grad();
                     if (bn->requires_grad) bn->ensure_grad();
                     for (int n = 0; n < N; ++n)
                       for (int g = 0; g < groups; ++g) {
                         int64_t base =
                             (static_cast<int64_t>(n) * C + static_cast<int64_t>(g) * Cg) * plane;
                         double mean = means[n * groups + g];
                         double inv = invstds[n * groups + g];
                         // dxhat and the two reduction terms
                         double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                         for (int c = 0; c < Cg; ++c) {
                           int ch = g * Cg + c;
                           double ga = gn->val[ch];
                           for (int64_t i = 0; i < plane; ++i) {
                             int64_t idx = base + c * plane + i;
                             double xhat = (xn->val[idx] - mean) * inv;
                             double gy = self.grad[idx];
                             if (gn->requires_grad) gn->grad[ch] += gy * xhat;
                             if (bn->requires_grad) bn->grad[ch] += gy;
                             double dxhat = gy * ga;
                             sum_dxhat += dxhat;
                             sum_dxhat_xhat += dxhat * xhat;
                           }
                         }
                         if (!need_x) continue;
                         double m = static_cast<double>(gsize);
                         for (int c = 0; c < Cg; ++c) {
                           int ch = g * Cg + c;
                           double ga = gn->val[ch];
                           for (int64_t i = 0; i < plane; ++i) {
                             int64_t idx = base + c * plane + i;
                             double xhat = (xn->val[idx] - mean) * inv;
                             double dxhat = self.grad[idx] * ga;
                             xn->grad[idx] +=
                                 inv * (dxhat - sum_dxhat / m - xhat * sum_dxhat_xhat / m);
                           }
                         }
                       }
                   });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const Shape& s = x.shape();
  require(!s.empty(), "layer_norm on empty shape");
  int D = s.back();
  require(gamma.shape() == Shape{D} && beta.shape() == Shape{D}, "layer_norm affine shapes");
  int64_t rows = x.size() / D;

  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  std::vector<double> means(rows), invstds(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const double* xp = xv.data() + r * D;
    double mean = 0.0;
    for (int i = 0; i < D; ++i) mean += xp[i];
    mean /= D;
    double var = 0.0;
    for (int i = 0; i < D; ++i) {
      double d = xp[i] - mean;
      var += d * d;
    }
    var /= D;
    double inv = 1.0 / std::sqrt(var + eps);
    means[r] = mean;
    invstds[r] = inv;
    for (int i = 0; i < D; ++i)
      out[r * D + i] = (xp[i] - mean) * inv * gamma.data()[i] + beta.data()[i];
  }

  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  return make_node(s, std::move(out), {xn, gn, bn},
                   [xn, gn, bn, rows, D, means, invstds](TensorNode& self) {
                     bool need_x = xn->requires_grad;
                     if (need_x) xn->ensure_grad();
                     if (gn->requires_grad) gn->ensure_grad();
                     if (bn->requires_grad) bn->ensure_grad();
                     for (int64_t r = 0; r < rows; ++r) {
                       double mean = means[r], inv = invstds[r];
                       double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                       for (int i = 0; i < D; ++i) {
                         int64_t idx = r * D + i;
                         double xhat = (xn->val[idx] - mean) * inv;
                         double gy = self.grad[idx];
                         if (gn->requires_grad) gn->grad[i] += gy * xhat;
                         if (bn->requires_grad) bn->grad[i] += gy;
                         double dxhat = gy * gn->val[i];
                         sum_dxhat += dxhat;
                         sum_dxhat_xhat += dxhat * xhat;
                       }
                       if (!need_x) continue;
                       for (int i = 0; i < D; ++i) {
                         int64_t idx = r * D + i;
                         double xhat = (xn->val[idx] - mean) * inv;
                         double dxhat = self.grad[idx] * gn->val[i];
                         xn->grad[idx] +=
                             inv * (dxhat - sum_dxhat / D - xhat * sum_dxhat_xhat / D);
                       }
                     }
                   });
}

}  // namespace avdiff
