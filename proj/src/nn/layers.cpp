// Copyright 2026 The DiscRec Workbench Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "discrec/nn/layers.hpp"

#include <cmath>

namespace discrec::nn {

AttentionResult masked_attention(const torch::Tensor& q, const torch::Tensor& k,
                                 const torch::Tensor& v, const torch::Tensor& mask,
                                 const torch::Tensor& bias, double dropout, bool training) {
  auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(q.size(-1)));
  if (bias.defined()) scores = scores + bias;
  if (mask.defined()) scores = scores + mask;
  auto probs = torch::softmax(scores, -1);
  auto used = dropout > 0.0 && training ? torch::dropout(probs, dropout, true) : probs;
  return {torch::matmul(used, v), probs};
}

RmsNormImpl::RmsNormImpl(int dim, double eps) : eps_(eps) {
  weight_ = register_parameter("weight", torch::ones({dim}));
}

torch::Tensor RmsNormImpl::forward(const torch::Tensor& x) {
  auto var = x.pow(2).mean(-1, /*keepdim=*/true);
  return x * torch::rsqrt(var + eps_) * weight_;
}

MultiHeadAttentionImpl::MultiHeadAttentionImpl(AttentionOptions options) : options_(options) {
  const int inner = options_.heads * options_.head_dim;
  auto lin = [&](int in, int out) {
    return torch::nn::Linear(torch::nn::LinearOptions(in, out).bias(options_.bias));
  };
  q_ = register_module("q", lin(options_.model_dim, inner));
  k_ = register_module("k", lin(options_.model_dim, inner));
  v_ = register_module("v", lin(options_.model_dim, inner));
  o_ = register_module("o", lin(inner, options_.model_dim));
}

torch::Tensor MultiHeadAttentionImpl::split_heads(const torch::Tensor& x) const {
  return x.view({x.size(0), x.size(1), options_.heads, options_.head_dim}).transpose(1, 2);
}

torch::Tensor MultiHeadAttentionImpl::project_queries(const torch::Tensor& x) {
  return split_heads(q_->forward(x));
}

AttentionResult MultiHeadAttentionImpl::forward(const torch::Tensor& x_q, const torch::Tensor& x_kv,
                                                const torch::Tensor& mask, const torch::Tensor& bias,
                                                const torch::Tensor& queries) {
  auto q = queries.defined() ? queries : project_queries(x_q);
  auto k = split_heads(k_->forward(x_kv));
  auto v = split_heads(v_->forward(x_kv));
  auto res = masked_attention(q, k, v, mask, bias, options_.dropout, is_training());
  auto merged = res.output.transpose(1, 2).contiguous().view(
      {res.output.size(0), res.output.size(2), options_.heads * options_.head_dim});
  return {o_->forward(merged), res.probs};
}

FeedForwardImpl::FeedForwardImpl(int model_dim, int hidden_dim, double dropout, bool bias) {
  in_ = register_module("in", torch::nn::Linear(torch::nn::LinearOptions(model_dim, hidden_dim).bias(bias)));
  out_ = register_module("out", torch::nn::Linear(torch::nn::LinearOptions(hidden_dim, model_dim).bias(bias)));
  dropout_ = register_module("dropout", torch::nn::Dropout(dropout));
}

torch::Tensor FeedForwardImpl::forward(const torch::Tensor& x) {
  return out_->forward(dropout_->forward(torch::relu(in_->forward(x))));
}

RelativePositionBiasImpl::RelativePositionBiasImpl(int heads, bool bidirectional, int buckets,
                                                   int max_distance)
    : bidirectional_(bidirectional), buckets_(buckets), max_distance_(max_distance) {
  table_ = register_module("table", torch::nn::Embedding(buckets, heads));
}

torch::Tensor RelativePositionBiasImpl::bucket(const torch::Tensor& relative, bool bidirectional,
                                               int buckets, int max_distance) {
  auto n = relative;
  auto ret = torch::zeros_like(relative);
  int nb = buckets;
  if (bidirectional) {
    nb /= 2;
    ret = ret + (n > 0).to(torch::kInt64) * nb;
    n = n.abs();
  } else {
    n = torch::clamp_min(-n, 0);
  }
  const int max_exact = nb / 2;
  auto is_small = n < max_exact;
  auto nf = n.to(torch::kFloat64).clamp_min(1.0);
  auto large = max_exact + (torch::log(nf / max_exact) / std::log(static_cast<double>(max_distance) / max_exact) *
                            (nb - max_exact))
                               .to(torch::kInt64);
  large = torch::clamp_max(large, nb - 1);
  return ret + torch::where(is_small, n, large);
}

torch::Tensor RelativePositionBiasImpl::forward(std::int64_t query_len, std::int64_t key_len) {
  auto ctx = torch::arange(query_len, torch::kInt64).unsqueeze(1);
  auto mem = torch::arange(key_len, torch::kInt64).unsqueeze(0);
  auto b = bucket(mem - ctx, bidirectional_, buckets_, max_distance_);
  auto values = table_->forward(b);                 // [Nq, Nk, H]
  return values.permute({2, 0, 1}).unsqueeze(0);    // [1, H, Nq, Nk]
}

}  // namespace discrec::nn
