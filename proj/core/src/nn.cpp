#include "avdiff/nn.hpp"

#include <cmath>

#include "avdiff/errors.hpp"

namespace avdiff::nn {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  if (map_.count(name)) raise(ErrorCode::InvalidConfig, "duplicate parameter name: " + name);
  t.set_requires_grad(true);
  order_.push_back(name);
  map_.emplace(name, t);
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) raise(ErrorCode::CheckpointMismatch, "unknown parameter: " + name);
  return it->second;
}

int64_t ParamStore::total_params() const {
  int64_t n = 0;
  for (const auto& name : order_) n += map_.at(name).size();
  return n;
}

void ParamStore::zero_grad() {
  for (const auto& name : order_) {
    auto t = map_.at(name);
    t.zero_grad();
  }
}

namespace {

Tensor init_tensor(const Shape& shape, int fan_in, Rng& rng, Init init) {
  if (init == Init::Zero) return Tensor::zeros(shape);
  return Tensor::randn(shape, rng, 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

}  // namespace

Linear::Linear(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng, Init init) {
  w = ps.add(prefix + ".w", init_tensor({in, out}, in, rng, init));
  b = ps.add(prefix + ".b", Tensor::zeros({out}));
}

Conv3x3::Conv3x3(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng, Init init,
                 int stride_)
    : stride(stride_) {
  w = ps.add(prefix + ".w", init_tensor({out, in, 3, 3}, in * 9, rng, init));
  b = ps.add(prefix + ".b", Tensor::zeros({out}));
}

GroupNorm::GroupNorm(ParamStore& ps, const std::string& prefix, int channels)
    : groups(norm_groups_for(channels)) {
  gamma = ps.add(prefix + ".gamma", Tensor::full({channels}, 1.0));
  beta = ps.add(prefix + ".beta", Tensor::zeros({channels}));
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& prefix, int dim) {
  gamma = ps.add(prefix + ".gamma", Tensor::full({dim}, 1.0));
  beta = ps.add(prefix + ".beta", Tensor::zeros({dim}));
}

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& prefix, int dim_,
                                       int dim_kv, int heads_, Rng& rng, Init out_init)
    : heads(heads_), dim(dim_) {
  check(dim % heads == 0, ErrorCode::InvalidConfig,
        "attention dim " + std::to_string(dim) + " not divisible by heads " +
            std::to_string(heads));
  q = Linear(ps, prefix + ".q", dim, dim, rng);
  k = Linear(ps, prefix + ".k", dim_kv, dim, rng);
  v = Linear(ps, prefix + ".v", dim_kv, dim, rng);
  out = Linear(ps, prefix + ".out", dim, dim, rng, out_init);
}

Tensor MultiHeadAttention::operator()(const Tensor& x_q, const Tensor& x_kv) const {
  const Shape& sq = x_q.shape();
  const Shape& skv = x_kv.shape();
  check(sq.size() == 3 && skv.size() == 3 && sq[0] == skv[0], ErrorCode::ShapeMismatch,
        "attention expects [B,T,D] inputs, got " + shape_str(sq) + " and " + shape_str(skv));
  int B = sq[0], Tq = sq[1], Tk = skv[1];
  int dh = dim / heads;

  auto split = [&](const Tensor& t, int T) {
    // [B,T,dim] -> [B*heads, T, dh]
    Tensor r = reshape(t, {B, T, heads, dh});
    r = permute(r, {0, 2, 1, 3});
    return reshape(r, {B * heads, T, dh});
  };

  Tensor qh = split(q(x_q), Tq);
  Tensor kh = split(k(x_kv), Tk);
  Tensor vh = split(v(x_kv), Tk);

  Tensor scores = bmm(qh, permute(kh, {0, 2, 1}));
  scores = scale(scores, 1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor attn = softmax_lastdim(scores);
  Tensor ctx = bmm(attn, vh);  // [B*heads, Tq, dh]

  ctx = reshape(ctx, {B, heads, Tq, dh});
  ctx = permute(ctx, {0, 2, 1, 3});
  ctx = reshape(ctx, {B, Tq, dim});
  return out(ctx);
}

Tensor sinusoidal_embedding(int t, int dim) {
  std::vector<double> v(dim);
  int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                           static_cast<double>(half > 1 ? half - 1 : 1));
    v[i] = std::sin(t * freq);
    v[half + i] = std::cos(t * freq);
  }
  if (dim % 2) v[dim - 1] = 0.0;
  return Tensor::from({dim}, std::move(v));
}

int norm_groups_for(int channels) {
  for (int g = std::min(8, channels); g >= 1; --g)
    if (channels % g == 0) return g;
  return 1;
}

}  // namespace avdiff::nn
