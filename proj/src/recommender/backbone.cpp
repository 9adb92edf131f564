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

#include "discrec/recommender/backbone.hpp"

namespace discrec::recommender {

torch::Tensor key_padding_mask(const torch::Tensor& pad, torch::Dtype dtype) {
  auto zero = torch::zeros({}, torch::TensorOptions().dtype(dtype));
  auto neg = torch::full({}, nn::kNegInf, torch::TensorOptions().dtype(dtype));
  return torch::where(pad, neg, zero).unsqueeze(1).unsqueeze(1);
}

torch::Tensor causal_mask(std::int64_t n, torch::Dtype dtype) {
  auto allowed = torch::ones({n, n}, torch::kBool).tril();
  auto zero = torch::zeros({}, torch::TensorOptions().dtype(dtype));
  auto neg = torch::full({}, nn::kNegInf, torch::TensorOptions().dtype(dtype));
  return torch::where(allowed, zero, neg).unsqueeze(0).unsqueeze(0);
}

namespace {

nn::AttentionOptions attention_options(const BackboneConfig& c) {
  return {c.model_dim, c.heads, c.head_dim, c.dropout, /*bias=*/false};
}

}  // namespace

EncoderLayerImpl::EncoderLayerImpl(const BackboneConfig& c) {
  norm1_ = register_module("norm1", nn::RmsNorm(c.model_dim));
  self_attn_ = register_module("self_attn", nn::MultiHeadAttention(attention_options(c)));
  norm2_ = register_module("norm2", nn::RmsNorm(c.model_dim));
  ffn_ = register_module("ffn", nn::FeedForward(c.model_dim, c.ffn_dim, c.dropout, false));
  dropout_ = register_module("dropout", torch::nn::Dropout(c.dropout));
}

torch::Tensor EncoderLayerImpl::forward(const torch::Tensor& x, const torch::Tensor& mask,
                                        const torch::Tensor& bias, torch::Tensor* probs) {
  auto h = norm1_->forward(x);
  auto a = self_attn_->forward(h, h, mask, bias);
  if (probs) *probs = a.probs.detach();
  auto y = x + dropout_->forward(a.output);
  return y + dropout_->forward(ffn_->forward(norm2_->forward(y)));
}

DecoderLayerImpl::DecoderLayerImpl(const BackboneConfig& c) {
  norm1_ = register_module("norm1", nn::RmsNorm(c.model_dim));
  self_attn_ = register_module("self_attn", nn::MultiHeadAttention(attention_options(c)));
  norm2_ = register_module("norm2", nn::RmsNorm(c.model_dim));
  cross_attn_ = register_module("cross_attn", nn::MultiHeadAttention(attention_options(c)));
  norm3_ = register_module("norm3", nn::RmsNorm(c.model_dim));
  ffn_ = register_module("ffn", nn::FeedForward(c.model_dim, c.ffn_dim, c.dropout, false));
  dropout_ = register_module("dropout", torch::nn::Dropout(c.dropout));
}

torch::Tensor DecoderLayerImpl::forward(const torch::Tensor& y, const torch::Tensor& self_mask,
                                        const torch::Tensor& bias, const torch::Tensor& memory,
                                        const torch::Tensor& memory_mask) {
  auto h = norm1_->forward(y);
  auto out = y + dropout_->forward(self_attn_->forward(h, h, self_mask, bias).output);
  h = norm2_->forward(out);
  out = out + dropout_->forward(cross_attn_->forward(h, memory, memory_mask).output);
  return out + dropout_->forward(ffn_->forward(norm3_->forward(out)));
}

BackboneImpl::BackboneImpl(const BackboneConfig& c) : config_(c) {
  encoder_layers_ = register_module("encoder_layers", torch::nn::ModuleList());
  decoder_layers_ = register_module("decoder_layers", torch::nn::ModuleList());
  for (int i = 0; i < c.layers; ++i) {
    encoder_layers_->push_back(EncoderLayer(c));
    decoder_layers_->push_back(DecoderLayer(c));
  }
  encoder_bias_ = register_module(
      "encoder_bias", nn::RelativePositionBias(c.heads, true, c.relative_buckets, c.relative_max_distance));
  decoder_bias_ = register_module(
      "decoder_bias", nn::RelativePositionBias(c.heads, false, c.relative_buckets, c.relative_max_distance));
  encoder_norm_ = register_module("encoder_norm", nn::RmsNorm(c.model_dim));
  decoder_norm_ = register_module("decoder_norm", nn::RmsNorm(c.model_dim));
  dropout_ = register_module("dropout", torch::nn::Dropout(c.dropout));
}

torch::Tensor BackboneImpl::encode(const torch::Tensor& embedded, const torch::Tensor& pad,
                                   const LayerHook& hook, std::vector<torch::Tensor>* attention) {
  const auto n = embedded.size(1);
  auto mask = key_padding_mask(pad, embedded.scalar_type());
  auto bias = encoder_bias_->forward(n, n);
  auto x = dropout_->forward(embedded);
  if (attention) attention->clear();
  for (std::size_t i = 0; i < encoder_layers_->size(); ++i) {
    if (hook) x = hook(static_cast<int>(i), x);
    torch::Tensor probs;
    x = encoder_layers_->at<EncoderLayerImpl>(i).forward(x, mask, bias, attention ? &probs : nullptr);
    if (attention) attention->push_back(probs);
  }
  return dropout_->forward(encoder_norm_->forward(x));
}

torch::Tensor BackboneImpl::decode(const torch::Tensor& embedded, const torch::Tensor& memory,
                                   const torch::Tensor& memory_pad, const LayerHook& hook) {
  const auto n = embedded.size(1);
  auto self_mask = causal_mask(n, embedded.scalar_type());
  auto memory_mask = key_padding_mask(memory_pad, embedded.scalar_type());
  auto bias = decoder_bias_->forward(n, n);
  auto y = dropout_->forward(embedded);
  for (std::size_t i = 0; i < decoder_layers_->size(); ++i) {
    if (hook) y = hook(static_cast<int>(i), y);
    y = decoder_layers_->at<DecoderLayerImpl>(i).forward(y, self_mask, bias, memory, memory_mask);
  }
  return dropout_->forward(decoder_norm_->forward(y));
}

}  // namespace discrec::recommender
