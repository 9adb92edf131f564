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

#include "discrec/recommender/model.hpp"

#include <cmath>

#include "discrec/common.hpp"
#include "discrec/tokenizer/semantic_ids.hpp"
#include "json.hpp"

namespace discrec::recommender {

using dual_branch::Side;
using tokenizer::TokenVocabulary;

namespace {

struct VariantInfo {
  Variant variant;
  const char* name;
};

constexpr VariantInfo kVariants[] = {
    {Variant::kDiscRec, "DiscRec"},     {Variant::kWoIPE, "WoIPE"},
    {Variant::kWoTF, "WoTF"},           {Variant::kWoGating, "WoGating"},
    {Variant::kBaseline, "Baseline"},   {Variant::kWithPE, "WithPE"},
    {Variant::kWithIE, "WithIE"},       {Variant::kAllLayer, "AllLayer"},
    {Variant::kOneQuery, "OneQuery"},   {Variant::kTokenAvg, "TokenAvg"},
    {Variant::kSelfGating, "SelfGating"},
};

}  // namespace

std::string variant_name(Variant v) {
  for (const auto& info : kVariants) {
    if (info.variant == v) return info.name;
  }
  throw Error("unknown variant enum value");
}

Variant parse_variant(const std::string& name) {
  std::string valid;
  for (const auto& info : kVariants) {
    if (name == info.name) return info.variant;
    valid += valid.empty() ? "" : ", ";
    valid += info.name;
  }
  throw ConfigError("unknown variant '" + name + "'; valid variants: " + valid);
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = [] {
    std::vector<Variant> out;
    for (const auto& info : kVariants) out.push_back(info.variant);
    return out;
  }();
  return v;
}

const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> v{Variant::kDiscRec, Variant::kWoIPE, Variant::kWoTF,
                                      Variant::kWoGating, Variant::kBaseline};
  return v;
}

bool uses_dual_branch(Variant v) {
  return v != Variant::kBaseline && v != Variant::kWithPE && v != Variant::kWithIE;
}

void RecommenderConfig::validate() const {
  if (levels <= 0 || codebook_size <= 0) throw ConfigError("recommender: L and K must be positive");
  if (max_len <= 0) throw ConfigError("recommender: max_len must be positive");
  if (backbone.layers <= 0 || backbone.model_dim <= 0 || backbone.heads <= 0 ||
      backbone.head_dim <= 0 || backbone.ffn_dim <= 0) {
    throw ConfigError("recommender: backbone dimensions must be positive");
  }
  if (branch.heads <= 0 || branch.head_dim <= 0 || branch.ffn_dim <= 0) {
    throw ConfigError("recommender: branch dimensions must be positive");
  }
  if (variant == Variant::kWithIE && n_items <= 0) {
    throw ConfigError("recommender: WithIE needs n_items");
  }
}

std::string config_to_json(const RecommenderConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = "recommender";
  j["variant"] = variant_name(c.variant);
  j["levels"] = c.levels;
  j["codebook_size"] = c.codebook_size;
  j["max_len"] = c.max_len;
  j["n_items"] = c.n_items;
  j["share_branch"] = c.share_branch;
  j["seed"] = c.seed;
  j["dtype"] = c.dtype == torch::kFloat64 ? "float64" : "float32";
  j["backbone"] = {{"layers", c.backbone.layers},
                   {"model_dim", c.backbone.model_dim},
                   {"heads", c.backbone.heads},
                   {"head_dim", c.backbone.head_dim},
                   {"ffn_dim", c.backbone.ffn_dim},
                   {"dropout", c.backbone.dropout},
                   {"relative_buckets", c.backbone.relative_buckets},
                   {"relative_max_distance", c.backbone.relative_max_distance}};
  j["branch"] = {{"heads", c.branch.heads},
                 {"head_dim", c.branch.head_dim},
                 {"ffn_dim", c.branch.ffn_dim},
                 {"dropout", c.branch.dropout},
                 {"gate_init_std", c.branch.gate_init_std}};
  return j.dump();
}

RecommenderConfig config_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  if (j.value("kind", "") != "recommender") throw Error("not a recommender manifest");
  RecommenderConfig c;
  c.variant = parse_variant(j.at("variant"));
  c.levels = j.at("levels");
  c.codebook_size = j.at("codebook_size");
  c.max_len = j.at("max_len");
  c.n_items = j.at("n_items");
  c.share_branch = j.at("share_branch");
  c.seed = j.at("seed");
  c.dtype = j.at("dtype") == "float64" ? torch::kFloat64 : torch::kFloat32;
  const auto& b = j.at("backbone");
  c.backbone.layers = b.at("layers");
  c.backbone.model_dim = b.at("model_dim");
  c.backbone.heads = b.at("heads");
  c.backbone.head_dim = b.at("head_dim");
  c.backbone.ffn_dim = b.at("ffn_dim");
  c.backbone.dropout = b.at("dropout");
  c.backbone.relative_buckets = b.at("relative_buckets");
  c.backbone.relative_max_distance = b.at("relative_max_distance");
  const auto& br = j.at("branch");
  c.branch.heads = br.at("heads");
  c.branch.head_dim = br.at("head_dim");
  c.branch.ffn_dim = br.at("ffn_dim");
  c.branch.dropout = br.at("dropout");
  c.branch.gate_init_std = br.at("gate_init_std");
  return c;
}

EncoderState EncoderState::repeat(std::int64_t times) const {
  return {hidden.expand({times, hidden.size(1), hidden.size(2)}),
          pad.expand({times, pad.size(1)})};
}

namespace {

dual_branch::BranchOptions branch_options(const RecommenderConfig& c) {
  auto o = c.branch;
  o.model_dim = c.backbone.model_dim;
  o.use_transformer = c.variant != Variant::kWoTF;
  o.single_query = c.variant == Variant::kOneQuery;
  o.token_average = c.variant == Variant::kTokenAvg;
  o.fusion = c.variant == Variant::kWoGating     ? dual_branch::FusionMode::kSum
             : c.variant == Variant::kSelfGating ? dual_branch::FusionMode::kSelfGate
                                                 : dual_branch::FusionMode::kGate;
  return o;
}

}  // namespace

RecommenderImpl::RecommenderImpl(RecommenderConfig config) : config_(std::move(config)) {
  config_.validate();
  torch::manual_seed(config_.seed);
  const int d = config_.backbone.model_dim;
  const double init_std = 1.0 / std::sqrt(static_cast<double>(d));
  tokens_ = register_module("tokens", torch::nn::Embedding(vocab_size(), d));
  {
    torch::NoGradGuard no_grad;
    tokens_->weight.normal_(0.0, init_std);
  }
  if (uses_dual_branch(config_.variant)) {
    if (config_.variant == Variant::kWoIPE) {
      ipe_ = register_parameter("ipe", torch::zeros({config_.levels + 2, d}), /*requires_grad=*/false);
    } else {
      ipe_ = register_parameter("ipe", torch::randn({config_.levels + 2, d}) * init_std);
    }
    const int copies = config_.variant == Variant::kAllLayer ? config_.backbone.layers : 1;
    auto opts = branch_options(config_);
    encoder_branches_ = register_module("encoder_branches", torch::nn::ModuleList());
    for (int i = 0; i < copies; ++i) encoder_branches_->push_back(dual_branch::DualBranch(opts));
    if (!config_.share_branch) {
      decoder_branches_ = register_module("decoder_branches", torch::nn::ModuleList());
      for (int i = 0; i < copies; ++i) decoder_branches_->push_back(dual_branch::DualBranch(opts));
    }
  }
  if (config_.variant == Variant::kWithPE) {
    positions_ = register_module(
        "positions", torch::nn::Embedding(config_.max_len * config_.levels + 1, d));
    torch::NoGradGuard no_grad;
    positions_->weight.normal_(0.0, init_std);
  }
  if (config_.variant == Variant::kWithIE) {
    items_ = register_module("items", torch::nn::Embedding(config_.n_items + 1, d));
    torch::NoGradGuard no_grad;
    items_->weight.normal_(0.0, init_std);
  }
  backbone_ = register_module("backbone", Backbone(config_.backbone));
  to(config_.dtype);
}

std::int64_t RecommenderImpl::vocab_size() const {
  return TokenVocabulary(config_.levels, config_.codebook_size).size();
}

dual_branch::DualBranch RecommenderImpl::branch(Side side, int layer) {
  if (!encoder_branches_) throw Error("variant has no dual-branch module");
  auto list = side == Side::kDecoder && decoder_branches_ ? decoder_branches_ : encoder_branches_;
  return list->ptr<dual_branch::DualBranchImpl>(static_cast<std::size_t>(layer));
}

torch::Tensor RecommenderImpl::embed_input(const torch::Tensor& tokens, const torch::Tensor& item_rows) {
  const auto vocab = vocab_size();
  if (tokens.numel() > 0 && (tokens.max().item<std::int64_t>() >= vocab ||
                             tokens.min().item<std::int64_t>() < kItemSlot)) {
    throw Error("embed_input: token id out of range");
  }
  auto slot = tokens.eq(kItemSlot);
  auto e = tokens_->forward(tokens.clamp_min(0));
  if (slot.any().item<bool>()) {
    if (!items_) throw Error("embed_input: item slots require the WithIE variant");
    e = torch::where(slot.unsqueeze(-1), items_->forward(item_rows), e);
  }
  return e;
}

torch::Tensor RecommenderImpl::embed_target(const torch::Tensor& tokens) {
  if (tokens.numel() > 0 &&
      (tokens.max().item<std::int64_t>() >= vocab_size() || tokens.min().item<std::int64_t>() < 0)) {
    throw Error("embed_target: token id out of range");
  }
  return tokens_->forward(tokens);
}

torch::Tensor RecommenderImpl::add_positions(const torch::Tensor& embedded, const torch::Tensor& tokens) {
  auto real = tokens.ne(TokenVocabulary::kPad).to(torch::kInt64);
  auto pos = (real.cumsum(1) - 1).clamp(0, positions_->weight.size(0) - 1);
  return embedded + positions_->forward(pos);
}

dual_branch::BranchOutputs RecommenderImpl::apply_branch(Side side, const torch::Tensor& embedded,
                                                         const torch::Tensor& tokens, int layer) {
  auto layout = dual_branch::make_layout(tokens, config_.levels, side);
  auto v = dual_branch::gather_ipe(ipe_, layout);
  return branch(side, layer)->forward(embedded, v, layout);
}

EncoderState RecommenderImpl::encode(const Batch& batch, Trace* trace) {
  const auto& tokens = batch.encoder_tokens;
  auto e = embed_input(tokens, batch.encoder_items);
  if (positions_) e = add_positions(e, tokens);
  EncoderState state;
  state.pad = tokens.eq(TokenVocabulary::kPad);
  LayerHook hook;
  if (uses_dual_branch(config_.variant)) {
    auto layout = dual_branch::make_layout(tokens, config_.levels, Side::kEncoder);
    auto v = dual_branch::gather_ipe(ipe_, layout);
    if (config_.variant == Variant::kAllLayer) {
      hook = [this, layout, v, trace](int i, const torch::Tensor& x) {
        auto out = branch(Side::kEncoder, i)->forward(x, v, layout);
        if (trace && i == 0) trace->encoder_branch = out;
        return out.fused;
      };
    } else {
      auto out = branch(Side::kEncoder)->forward(e, v, layout);
      e = out.fused;
      if (trace) trace->encoder_branch = out;
    }
    if (trace) trace->encoder_layout = layout;
  }
  state.hidden = backbone_->encode(e, state.pad, hook, trace ? &trace->encoder_attention : nullptr);
  return state;
}

torch::Tensor RecommenderImpl::decode(const EncoderState& state, const torch::Tensor& decoder_tokens) {
  auto y = embed_target(decoder_tokens);
  if (positions_) y = add_positions(y, decoder_tokens);
  LayerHook hook;
  if (uses_dual_branch(config_.variant)) {
    auto layout = dual_branch::make_layout(decoder_tokens, config_.levels, Side::kDecoder);
    auto v = dual_branch::gather_ipe(ipe_, layout);
    if (config_.variant == Variant::kAllLayer) {
      hook = [this, layout, v](int i, const torch::Tensor& x) {
        return branch(Side::kDecoder, i)->forward(x, v, layout).fused;
      };
    } else {
      y = branch(Side::kDecoder)->forward(y, v, layout).fused;
    }
  }
  return backbone_->decode(y, state.hidden, state.pad, hook);
}

torch::Tensor RecommenderImpl::token_logits(const torch::Tensor& decoder_hidden) {
  auto logits = torch::matmul(decoder_hidden, tokens_->weight.t());
  auto specials = torch::arange(TokenVocabulary::kSpecials, torch::kInt64);
  return logits.index_fill(-1, specials, nn::kNegInf);
}

torch::Tensor RecommenderImpl::per_sample_loss(const Batch& batch) {
  auto state = encode(batch);
  auto hidden = decode(state, batch.decoder_tokens);
  auto logits = token_logits(hidden.narrow(1, 0, config_.levels));
  auto logp = torch::log_softmax(logits, -1);
  return -logp.gather(-1, batch.targets.unsqueeze(-1)).squeeze(-1).sum(-1);
}

torch::Tensor RecommenderImpl::loss(const Batch& batch) { return per_sample_loss(batch).mean(); }

torch::Tensor RecommenderImpl::next_token_log_probs(const EncoderState& state,
                                                    const torch::Tensor& prefixes) {
  auto hidden = decode(state, prefixes);
  auto last = hidden.select(1, hidden.size(1) - 1);
  return torch::log_softmax(token_logits(last), -1);
}

Recommender build_variant(const RecommenderConfig& config) { return Recommender(config); }

}  // namespace discrec::recommender
