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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace discrec::tokenizer {

struct RqVaeConfig {
  int input_dim = 0;
  int code_dim = 32;
  int levels = 4;
  int codebook_size = 256;
  // Hidden widths of the encoder (decoder mirrors them). When empty,
  // `hidden_layers` widths are interpolated between input_dim and code_dim;
  // hidden_layers = 0 gives a single linear map.
  std::vector<int> hidden_dims;
  int hidden_layers = 3;
  double beta = 0.25;

  int steps = 20000;
  int batch_size = 1024;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  bool kmeans_init = true;
  int dead_code_steps = 1000;
  bool standardize = true;
  int log_every = 100;
  torch::Dtype dtype = torch::kFloat32;

  std::vector<int> resolved_hidden() const;
  void validate() const;
};

struct Quantization {
  torch::Tensor codes;      // [N, L] int64
  torch::Tensor residuals;  // [N, L, d]; v_1 = r, v_{l+1} = v_l - sg[e_l]
  torch::Tensor selected;   // [N, L, d]; e_l^{c_l}, differentiable w.r.t. codebooks
  torch::Tensor r_hat;      // [N, d]; sum of selected codes
};

// Per-item loss averaged over the batch:
//   ||z_hat - z||^2 + sum_l ||sg[v_l] - e_l||^2 + beta * ||v_l - sg[e_l]||^2
struct TokenizationLoss {
  torch::Tensor total;
  torch::Tensor reconstruction;
  torch::Tensor codebook;    // sg[v] term: reaches the codebooks only
  torch::Tensor commitment;  // beta term: reaches the encoder only
};

TokenizationLoss tokenization_loss(const torch::Tensor& z, const torch::Tensor& z_hat,
                                   const torch::Tensor& residuals, const torch::Tensor& selected,
                                   double beta);

// Residual quantization of `r` against codebooks [L, K, d]. Nearest code by
// squared Euclidean distance, ties to the lowest index.
Quantization quantize(const torch::Tensor& r, const torch::Tensor& codebooks);

class RqVaeImpl : public torch::nn::Module {
 public:
  explicit RqVaeImpl(RqVaeConfig config);

  torch::Tensor encode(const torch::Tensor& z);
  torch::Tensor decode(const torch::Tensor& r_hat);
  Quantization quantize(const torch::Tensor& r) const;

  struct Output {
    Quantization q;
    torch::Tensor z_hat;
    TokenizationLoss loss;
  };
  // Full pass on already-normalised inputs; the decoder sees r_hat through a
  // straight-through estimator so reconstruction gradients reach the encoder.
  Output forward(const torch::Tensor& z);

  // Applies the stored per-dimension standardisation (identity when off).
  torch::Tensor normalize(const torch::Tensor& raw) const;
  void fit_normalizer(const torch::Tensor& raw);

  const RqVaeConfig& config() const { return config_; }
  torch::Tensor& codebooks() { return codebooks_; }
  torch::nn::Sequential& encoder() { return encoder_; }
  torch::nn::Sequential& decoder() { return decoder_; }

 private:
  RqVaeConfig config_;
  torch::nn::Sequential encoder_{nullptr};
  torch::nn::Sequential decoder_{nullptr};
  torch::Tensor codebooks_;  // [L, K, d]
  torch::Tensor mean_;
  torch::Tensor scale_;
};
TORCH_MODULE(RqVae);

struct TokenizerTrainLog {
  std::vector<int> steps;
  std::vector<double> loss;
  std::vector<double> reconstruction;
  int dead_code_resets = 0;
  double final_loss = 0.0;
};

// Minimises the tokenization loss with AdamW. `embeddings` is [N, D_sem] raw
// (unnormalised) input; the normaliser is fitted on it first.
TokenizerTrainLog train_tokenizer(RqVae& model, const torch::Tensor& embeddings,
                                  const std::function<void(const std::string&)>& log = {});

std::string rqvae_manifest(const RqVaeConfig& config);
RqVaeConfig rqvae_config_from_manifest(const std::string& manifest);
void save_rqvae(const std::string& path, RqVae& model);
RqVae load_rqvae(const std::string& path);

}  // namespace discrec::tokenizer
