#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "avdiff/rng.hpp"
#include "avdiff/tensor.hpp"

namespace avdiff::nn {

enum class Init {
  Normal,  // fan-in scaled normal
  Zero,    // for output projections of added layers
};

/// Ordered registry of trainable parameters; the unit of checkpointing.
class ParamStore {
 public:
  Tensor add(const std::string& name, Tensor t);
  bool contains(const std::string& name) const { return map_.count(name) > 0; }
  Tensor get(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  int64_t total_params() const;
  void zero_grad();

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> map_;
};

struct Linear {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
  Linear() = default;
  Linear(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng,
         Init init = Init::Normal);
  Tensor operator()(const Tensor& x) const { return linear(x, w, b); }
};

struct Conv3x3 {
  Tensor w;  // [out, in, 3, 3]
  Tensor b;  // [out]
  int stride = 1;
  Conv3x3() = default;
  Conv3x3(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng,
          Init init = Init::Normal, int stride = 1);
  Tensor operator()(const Tensor& x) const { return conv2d(x, w, b, stride); }
};

struct GroupNorm {
  Tensor gamma, beta;
  int groups = 1;
  GroupNorm() = default;
  GroupNorm(ParamStore& ps, const std::string& prefix, int channels);
  Tensor operator()(const Tensor& x) const { return group_norm(x, groups, gamma, beta); }
};

struct LayerNorm {
  Tensor gamma, beta;
  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& prefix, int dim);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
};

/// Batched multi-head scaled dot-product attention.
/// Queries come from x_q [B, Tq, D]; keys and values from x_kv [B, Tk, Dkv].
/// The output projection defaults to zero init so a fresh layer is the
/// identity under a residual connection.
struct MultiHeadAttention {
  Linear q, k, v, out;
  int heads = 1;
  int dim = 0;
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& prefix, int dim, int dim_kv, int heads,
                     Rng& rng, Init out_init = Init::Zero);
  Tensor operator()(const Tensor& x_q, const Tensor& x_kv) const;
};

/// Sinusoidal features for an integer timestep; constant w.r.t. the graph.
Tensor sinusoidal_embedding(int t, int dim);

/// Largest divisor of `channels` that is <= 8.
int norm_groups_for(int channels);

}  // namespace avdiff::nn
