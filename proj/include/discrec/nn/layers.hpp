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

#pragma once

#include <optional>

#include <torch/torch.h>

namespace discrec::nn {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// softmax(Q K^T / sqrt(d_k) + W) V for q/k/v of shape [B, H, N, d_k]. The
// additive mask W broadcasts against [B, H, Nq, Nk] (typically [B, 1, Nq, Nk]
// with entries 0 or -inf). Every row of W must allow at least one column.
struct AttentionResult {
  torch::Tensor output;  // [B, H, Nq, d_k]
  torch::Tensor probs;   // [B, H, Nq, Nk], post-softmax, pre-dropout
};
AttentionResult masked_attention(const torch::Tensor& q, const torch::Tensor& k,
                                 const torch::Tensor& v, const torch::Tensor& mask,
                                 const torch::Tensor& bias = {}, double dropout = 0.0,
                                 bool training = false);

class RmsNormImpl : public torch::nn::Module {
 public:
  explicit RmsNormImpl(int dim, double eps = 1e-6);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::Tensor weight_;
  double eps_;
};
TORCH_MODULE(RmsNorm);

struct AttentionOptions {
  int model_dim = 128;
  int heads = 6;
  int head_dim = 64;
  double dropout = 0.1;
  bool bias = false;
};

class MultiHeadAttentionImpl : public torch::nn::Module {
 public:
  explicit MultiHeadAttentionImpl(AttentionOptions options);

  // `queries` overrides the projected queries ([B or 1, H, Nq, d_k]); used by
  // single-learned-query attention.
  AttentionResult forward(const torch::Tensor& x_q, const torch::Tensor& x_kv,
                          const torch::Tensor& mask, const torch::Tensor& bias = {},
                          const torch::Tensor& queries = {});

  torch::Tensor project_queries(const torch::Tensor& x);
  torch::nn::Linear& out_proj() { return o_; }
  const AttentionOptions& options() const { return options_; }

 private:
  torch::Tensor split_heads(const torch::Tensor& x) const;

  AttentionOptions options_;
  torch::nn::Linear q_{nullptr}, k_{nullptr}, v_{nullptr}, o_{nullptr};
};
TORCH_MODULE(MultiHeadAttention);

class FeedForwardImpl : public torch::nn::Module {
 public:
  FeedForwardImpl(int model_dim, int hidden_dim, double dropout, bool bias);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Linear& out_proj() { return out_; }

 private:
  torch::nn::Linear in_{nullptr}, out_{nullptr};
  torch::nn::Dropout dropout_{nullptr};
};
TORCH_MODULE(FeedForward);

// Bucketed relative position bias (T5 scheme), [1, H, Nq, Nk].
class RelativePositionBiasImpl : public torch::nn::Module {
 public:
  RelativePositionBiasImpl(int heads, bool bidirectional, int buckets = 32, int max_distance = 128);
  torch::Tensor forward(std::int64_t query_len, std::int64_t key_len);

  static torch::Tensor bucket(const torch::Tensor& relative, bool bidirectional, int buckets,
                              int max_distance);

 private:
  bool bidirectional_;
  int buckets_;
  int max_distance_;
  torch::nn::Embedding table_{nullptr};
};
TORCH_MODULE(RelativePositionBias);

}  // namespace discrec::nn
