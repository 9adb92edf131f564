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

#include "discrec/tokenizer/rqvae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "discrec/common.hpp"
#include "discrec/serialization.hpp"
#include "discrec/tokenizer/kmeans.hpp"
#include "json.hpp"

namespace discrec::tokenizer {

std::vector<int> RqVaeConfig::resolved_hidden() const {
  if (!hidden_dims.empty()) return hidden_dims;
  std::vector<int> dims;
  for (int i = 1; i <= hidden_layers; ++i) {
    const double t = static_cast<double>(i) / (hidden_layers + 1);
    dims.push_back(static_cast<int>(std::lround(input_dim + (code_dim - input_dim) * t)));
  }
  return dims;
}

void RqVaeConfig::validate() const {
  if (input_dim <= 0 || code_dim <= 0 || levels <= 0 || codebook_size <= 0) {
    throw ConfigError("rqvae: dimensions, levels and codebook size must be positive");
  }
  if (beta < 0) throw ConfigError("rqvae: beta must be >= 0");
  if (steps < 0 || batch_size <= 0 || lr <= 0) throw ConfigError("rqvae: bad optimiser settings");
}

Quantization quantize(const torch::Tensor& r, const torch::Tensor& codebooks) {
  if (codebooks.dim() != 3 || codebooks.size(1) == 0) {
    throw Error("quantize: codebooks must be [L, K>0, d]");
  }
  if (r.dim() != 2 || r.size(1) != codebooks.size(2)) {
    throw Error("quantize: residual width does not match code dimension");
  }
  const auto levels = codebooks.size(0);
  std::vector<torch::Tensor> codes, residuals, selected;
  auto v = r;
  for (std::int64_t l = 0; l < levels; ++l) {
    auto book = codebooks[l];
    torch::Tensor c;
    {
      torch::NoGradGuard no_grad;
      c = nearest(v.detach(), book.detach());
    }
    auto e = book.index_select(0, c);
    codes.push_back(c);
    residuals.push_back(v);
    selected.push_back(e);
    v = v - e.detach();
  }
  Quantization q;
  q.codes = torch::stack(codes, 1);
  q.residuals = torch::stack(residuals, 1);
  q.selected = torch::stack(selected, 1);
  q.r_hat = q.selected.sum(1);
  return q;
}

TokenizationLoss tokenization_loss(const torch::Tensor& z, const torch::Tensor& z_hat,
                                   const torch::Tensor& residuals, const torch::Tensor& selected,
                                   double beta) {
  TokenizationLoss loss;
  loss.reconstruction = (z_hat - z).pow(2).sum(-1).mean();
  loss.codebook = (residuals.detach() - selected).pow(2).sum({1, 2}).mean();
  loss.commitment = beta * (residuals - selected.detach()).pow(2).sum({1, 2}).mean();
  loss.total = loss.reconstruction + loss.codebook + loss.commitment;
  return loss;
}

namespace {

torch::nn::Sequential make_mlp(const std::vector<int>& widths) {
  torch::nn::Sequential seq;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    seq->push_back(torch::nn::Linear(widths[i], widths[i + 1]));
    if (i + 2 < widths.size()) seq->push_back(torch::nn::ReLU());
  }
  return seq;
}

}  // namespace

RqVaeImpl::RqVaeImpl(RqVaeConfig config) : config_(std::move(config)) {
  config_.validate();
  torch::manual_seed(config_.seed);
  auto hidden = config_.resolved_hidden();
  std::vector<int> enc{config_.input_dim};
  enc.insert(enc.end(), hidden.begin(), hidden.end());
  enc.push_back(config_.code_dim);
  std::vector<int> dec(enc.rbegin(), enc.rend());
  encoder_ = register_module("encoder", make_mlp(enc));
  decoder_ = register_module("decoder", make_mlp(dec));
  codebooks_ = register_parameter(
      "codebooks", torch::randn({config_.levels, config_.codebook_size, config_.code_dim}) * 0.1);
  mean_ = register_buffer("mean", torch::zeros({config_.input_dim}));
  scale_ = register_buffer("scale", torch::ones({config_.input_dim}));
  to(config_.dtype);
}

torch::Tensor RqVaeImpl::encode(const torch::Tensor& z) {
  if (z.size(-1) != config_.input_dim) throw Error("encode: input dimension mismatch");
  return encoder_->forward(z);
}

torch::Tensor RqVaeImpl::decode(const torch::Tensor& r_hat) {
  if (r_hat.size(-1) != config_.code_dim) throw Error("decode: code dimension mismatch");
  return decoder_->forward(r_hat);
}

Quantization RqVaeImpl::quantize(const torch::Tensor& r) const {
  return tokenizer::quantize(r, codebooks_);
}

RqVaeImpl::Output RqVaeImpl::forward(const torch::Tensor& z) {
  Output out;
  auto r = encode(z);
  out.q = quantize(r);
  auto r_st = r + (out.q.r_hat - r).detach();
  out.z_hat = decode(r_st);
  out.loss = tokenization_loss(z, out.z_hat, out.q.residuals, out.q.selected, config_.beta);
  return out;
}

torch::Tensor RqVaeImpl::normalize(const torch::Tensor& raw) const {
  return (raw.to(mean_.scalar_type()) - mean_) / scale_;
}

void RqVaeImpl::fit_normalizer(const torch::Tensor& raw) {
  torch::NoGradGuard no_grad;
  if (!config_.standardize) {
    mean_.zero_();
    scale_.fill_(1.0);
    return;
  }
  auto x = raw.to(mean_.scalar_type());
  mean_.copy_(x.mean(0));
  auto sd = x.std(0, /*unbiased=*/false);
  scale_.copy_(torch::where(sd > 1e-12, sd, torch::ones_like(sd)));
}

namespace {

void kmeans_init(RqVaeImpl& model, const torch::Tensor& batch, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto v = model.encode(batch);
  auto& books = model.codebooks();
  for (std::int64_t l = 0; l < books.size(0); ++l) {
    auto km = kmeans(v, static_cast<int>(books.size(1)), 50, seed + static_cast<std::uint64_t>(l));
    books[l].copy_(km.centroids);
    v = v - km.centroids.index_select(0, nearest(v, km.centroids));
  }
}

}  // namespace

TokenizerTrainLog train_tokenizer(RqVae& model, const torch::Tensor& embeddings,
                                  const std::function<void(const std::string&)>& log) {
  const auto& cfg = model->config();
  if (embeddings.dim() != 2 || embeddings.size(0) < 1) {
    throw Error("train_tokenizer: need at least one item embedding");
  }
  if (embeddings.size(1) != cfg.input_dim) throw Error("train_tokenizer: input dimension mismatch");
  torch::manual_seed(cfg.seed);
  model->fit_normalizer(embeddings);
  auto data = model->normalize(embeddings).detach();
  const auto n = data.size(0);
  const auto batch = std::min<std::int64_t>(cfg.batch_size, n);

  torch::optim::AdamW opt(model->parameters(),
                          torch::optim::AdamWOptions(cfg.lr).weight_decay(cfg.weight_decay));
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  auto next_batch = [&]() {
    std::vector<std::int64_t> idx;
    while (static_cast<std::int64_t>(idx.size()) < batch) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
    }
    return data.index_select(0, torch::tensor(idx, torch::kInt64));
  };

  const auto levels = cfg.levels;
  const auto k = cfg.codebook_size;
  std::vector<std::vector<int>> last_used(static_cast<std::size_t>(levels),
                                          std::vector<int>(static_cast<std::size_t>(k), 0));
  TokenizerTrainLog out;
  model->train();
  for (int step = 1; step <= cfg.steps; ++step) {
    auto x = next_batch();
    if (step == 1 && cfg.kmeans_init) kmeans_init(*model, x, cfg.seed);
    auto res = model->forward(x);
    const double loss = res.loss.total.item<double>();
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "tokenizer loss is not finite at step " << step
          << " (reconstruction=" << res.loss.reconstruction.item<double>()
          << ", codebook=" << res.loss.codebook.item<double>()
          << ", commitment=" << res.loss.commitment.item<double>() << ")";
      throw NumericError(msg.str());
    }
    opt.zero_grad();
    res.loss.total.backward();
    opt.step();

    auto codes = res.q.codes.contiguous();
    auto acc = codes.accessor<std::int64_t, 2>();
    for (std::int64_t i = 0; i < codes.size(0); ++i) {
      for (std::int64_t l = 0; l < levels; ++l) {
        last_used[static_cast<std::size_t>(l)][static_cast<std::size_t>(acc[i][l])] = step;
      }
    }
    if (cfg.dead_code_steps > 0) {
      torch::NoGradGuard no_grad;
      auto residuals = res.q.residuals.detach();
      for (std::int64_t l = 0; l < levels; ++l) {
        for (std::int64_t c = 0; c < k; ++c) {
          auto& used = last_used[static_cast<std::size_t>(l)][static_cast<std::size_t>(c)];
          if (step - used < cfg.dead_code_steps) continue;
          auto row = std::uniform_int_distribution<std::int64_t>(0, residuals.size(0) - 1)(rng);
          model->codebooks()[l][c].copy_(residuals[row][l]);
          used = step;
          ++out.dead_code_resets;
        }
      }
    }
    if (step % std::max(cfg.log_every, 1) == 0 || step == cfg.steps || step == 1) {
      out.steps.push_back(step);
      out.loss.push_back(loss);
      out.reconstruction.push_back(res.loss.reconstruction.item<double>());
      if (log) {
        std::ostringstream msg;
        msg << "tokenizer step " << step << " loss " << loss << " recon "
            << out.reconstruction.back() << " dead_code_resets " << out.dead_code_resets;
        log(msg.str());
      }
    }
    out.final_loss = loss;
  }
  model->eval();
  return out;
}

std::string rqvae_manifest(const RqVaeConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = "rqvae";
  j["input_dim"] = c.input_dim;
  j["code_dim"] = c.code_dim;
  j["levels"] = c.levels;
  j["codebook_size"] = c.codebook_size;
  j["hidden_dims"] = c.resolved_hidden();
  j["beta"] = c.beta;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  j["kmeans_init"] = c.kmeans_init;
  j["dead_code_steps"] = c.dead_code_steps;
  j["standardize"] = c.standardize;
  j["dtype"] = c.dtype == torch::kFloat64 ? "float64" : "float32";
  return j.dump();
}

RqVaeConfig rqvae_config_from_manifest(const std::string& manifest) {
  auto j = nlohmann::json::parse(manifest);
  if (j.value("kind", "") != "rqvae") throw Error("checkpoint is not an RQ-VAE tokenizer");
  RqVaeConfig c;
  c.input_dim = j.at("input_dim");
  c.code_dim = j.at("code_dim");
  c.levels = j.at("levels");
  c.codebook_size = j.at("codebook_size");
  c.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
  c.hidden_layers = static_cast<int>(c.hidden_dims.size());
  c.beta = j.at("beta");
  c.steps = j.at("steps");
  c.batch_size = j.at("batch_size");
  c.lr = j.at("lr");
  c.weight_decay = j.at("weight_decay");
  c.seed = j.at("seed");
  c.kmeans_init = j.at("kmeans_init");
  c.dead_code_steps = j.at("dead_code_steps");
  c.standardize = j.at("standardize");
  c.dtype = j.at("dtype") == "float64" ? torch::kFloat64 : torch::kFloat32;
  return c;
}

void save_rqvae(const std::string& path, RqVae& model) {
  save_archive(path, archive_module(*model, rqvae_manifest(model->config())));
}

RqVae load_rqvae(const std::string& path) {
  auto archive = load_archive(path);
  RqVae model(rqvae_config_from_manifest(archive.manifest));
  restore_module(*model, archive);
  model->eval();
  return model;
}

}  // namespace discrec::tokenizer
