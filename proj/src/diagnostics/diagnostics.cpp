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

#include "discrec/diagnostics/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>

#include "discrec/common.hpp"

namespace discrec::diagnostics {

using recommender::Recommender;
using tokenizer::IdMap;
using tokenizer::TokenVocabulary;

std::string source_name(NormSource source) {
  switch (source) {
    case NormSource::kCode: return "code";
    case NormSource::kSemanticToken: return "semantic_token";
    case NormSource::kCollaborativeToken: return "collaborative_token";
  }
  throw Error("unknown norm source");
}

std::vector<double> mean_norm_by_index(const std::vector<torch::Tensor>& embeddings) {
  if (embeddings.empty()) throw Error("norm_by_index: empty catalog");
  const auto levels = embeddings.front().size(0);
  std::vector<double> totals(static_cast<std::size_t>(levels), 0.0);
  for (const auto& e : embeddings) {
    if (e.dim() != 2 || e.size(0) != levels) throw Error("norm_by_index: inconsistent shapes");
    auto norms = e.to(torch::kFloat64).pow(2).sum(-1).sqrt().contiguous();
    auto acc = norms.accessor<double, 1>();
    for (std::int64_t l = 0; l < levels; ++l) totals[l] += acc[l];
  }
  for (auto& t : totals) t /= static_cast<double>(embeddings.size());
  return totals;
}

std::vector<torch::Tensor> code_embeddings(const IdMap& ids, const torch::Tensor& codebooks) {
  std::vector<torch::Tensor> out;
  auto books = codebooks.detach();
  for (const auto& [item, id] : ids) {
    std::vector<torch::Tensor> rows;
    for (std::size_t l = 0; l < id.codes.size(); ++l) {
      rows.push_back(books[static_cast<std::int64_t>(l)][id.codes[l]]);
    }
    out.push_back(torch::stack(rows));
  }
  return out;
}

namespace {

torch::Tensor item_tokens(Recommender& model, const IdMap& ids) {
  const auto& c = model->config();
  TokenVocabulary vocab(c.levels, c.codebook_size);
  std::vector<std::int64_t> flat;
  for (const auto& [item, id] : ids) {
    for (std::size_t l = 0; l < id.codes.size(); ++l) {
      flat.push_back(vocab.token(static_cast<int>(l), id.codes[l]));
    }
  }
  return torch::tensor(flat, torch::kInt64).view({static_cast<std::int64_t>(ids.size()), c.levels});
}

std::vector<torch::Tensor> unbind_items(const torch::Tensor& t) {
  std::vector<torch::Tensor> out;
  for (std::int64_t i = 0; i < t.size(0); ++i) out.push_back(t[i]);
  return out;
}

}  // namespace

std::vector<torch::Tensor> token_table_rows(Recommender& model, const IdMap& ids) {
  if (ids.empty()) throw Error("norm_by_index: empty catalog");
  torch::NoGradGuard no_grad;
  auto tokens = item_tokens(model, ids);
  return unbind_items(model->token_table()->weight.detach().index_select(0, tokens.view(-1))
                          .view({tokens.size(0), tokens.size(1), -1}));
}

std::vector<torch::Tensor> branch_embeddings(Recommender& model, const IdMap& ids, bool collaborative) {
  if (ids.empty()) throw Error("norm_by_index: empty catalog");
  if (!recommender::uses_dual_branch(model->config().variant)) {
    throw ConfigError("branch profiles need a variant with the dual-branch module");
  }
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  auto tokens = item_tokens(model, ids);
  auto out = model->apply_branch(dual_branch::Side::kEncoder, model->embed_input(tokens), tokens);
  model->train(was_training);
  return unbind_items(collaborative ? out.collaborative : out.semantic);
}

NormProfile norm_by_index(const IdMap& ids, NormSource source, Recommender* model,
                          const torch::Tensor& codebooks) {
  if (ids.empty()) throw Error("norm_by_index: empty catalog");
  NormProfile profile{source_name(source), {}};
  switch (source) {
    case NormSource::kCode:
      if (!codebooks.defined()) throw ConfigError("code profile needs tokenizer codebooks");
      profile.values = mean_norm_by_index(code_embeddings(ids, codebooks));
      break;
    case NormSource::kSemanticToken:
    case NormSource::kCollaborativeToken:
      if (!model) throw ConfigError("token profiles need a recommender");
      profile.values = mean_norm_by_index(
          branch_embeddings(*model, ids, source == NormSource::kCollaborativeToken));
      break;
  }
  return profile;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("spearman: need two equal-length series");
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

double level_trend(const NormProfile& profile) {
  std::vector<double> index(profile.values.size());
  std::iota(index.begin(), index.end(), 1.0);
  return spearman(index, profile.values);
}

HeatmapBundle average_heatmaps(const std::vector<torch::Tensor>& per_layer, int crop, CropAnchor anchor) {
  if (crop <= 0) throw ConfigError("heatmap crop must be positive");
  HeatmapBundle bundle;
  bundle.requested_crop = crop;
  for (const auto& probs : per_layer) {
    if (probs.dim() != 4) throw Error("attention probabilities must be [B, H, N, N]");
    auto map = probs.detach().to(torch::kFloat64).mean(1).mean(0);
    const auto n = map.size(0);
    const auto c = std::min<std::int64_t>(crop, n);
    bundle.clamped = bundle.clamped || c < crop;
    bundle.crop = static_cast<int>(c);
    const auto start = anchor == CropAnchor::kStart ? 0 : n - c;
    bundle.cropped.push_back(map.narrow(0, start, c).narrow(1, start, c).contiguous());
    bundle.full.push_back(map);
  }
  return bundle;
}

HeatmapBundle attention_heatmaps(Recommender& model, const recommender::BatchBuilder& builder,
                                 const std::vector<data::Sample>& samples, int crop, CropAnchor anchor) {
  if (samples.empty()) throw ConfigError("attention_heatmaps: no samples");
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  std::vector<std::vector<std::string>> histories;
  for (const auto& s : samples) histories.push_back(s.history);
  recommender::Trace trace;
  model->encode(builder.build_inputs(histories), &trace);
  model->train(was_training);
  return average_heatmaps(trace.encoder_attention, crop, anchor);
}

std::string matrix_to_csv(const torch::Tensor& matrix) {
  auto m = matrix.to(torch::kFloat64).contiguous();
  if (m.dim() != 2) throw Error("matrix_to_csv: expected a matrix");
  auto acc = m.accessor<double, 2>();
  std::ostringstream out;
  out.precision(17);
  for (std::int64_t i = 0; i < m.size(0); ++i) {
    for (std::int64_t j = 0; j < m.size(1); ++j) out << (j ? "," : "") << acc[i][j];
    out << '\n';
  }
  return out.str();
}

torch::Tensor matrix_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) throw Error("matrix_from_csv: ragged rows");
    rows.push_back(std::move(row));
  }
  const auto r = static_cast<std::int64_t>(rows.size());
  const auto c = r ? static_cast<std::int64_t>(rows.front().size()) : 0;
  auto out = torch::empty({r, c}, torch::kFloat64);
  auto acc = out.accessor<double, 2>();
  for (std::int64_t i = 0; i < r; ++i) {
    for (std::int64_t j = 0; j < c; ++j) acc[i][j] = rows[i][j];
  }
  return out;
}

std::string profile_to_csv(const NormProfile& profile) {
  std::ostringstream out;
  out.precision(17);
  out << "level,mean_norm\n";
  for (std::size_t l = 0; l < profile.values.size(); ++l) out << l + 1 << ',' << profile.values[l] << '\n';
  return out.str();
}

namespace {

std::string to_pgm(const torch::Tensor& matrix) {
  auto m = matrix.to(torch::kFloat64).contiguous();
  const double hi = m.numel() ? m.max().item<double>() : 0.0;
  auto acc = m.accessor<double, 2>();
  std::string out = "P5\n" + std::to_string(m.size(1)) + " " + std::to_string(m.size(0)) + "\n255\n";
  for (std::int64_t i = 0; i < m.size(0); ++i) {
    for (std::int64_t j = 0; j < m.size(1); ++j) {
      const double v = hi > 0 ? acc[i][j] / hi : 0.0;
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> export_profiles(const std::vector<NormProfile>& profiles,
                                         const HeatmapBundle& heatmaps, const std::string& out_dir,
                                         bool images) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  std::vector<std::string> written;
  for (const auto& p : profiles) {
    const auto name = "norms_" + p.source + ".csv";
    write_file((dir / name).string(), profile_to_csv(p));
    written.push_back(name);
  }
  for (std::size_t i = 0; i < heatmaps.cropped.size(); ++i) {
    const auto stem = "heatmap_layer" + std::to_string(i + 1);
    write_file((dir / (stem + ".csv")).string(), matrix_to_csv(heatmaps.cropped[i]));
    written.push_back(stem + ".csv");
    if (images) {
      write_file((dir / (stem + ".pgm")).string(), to_pgm(heatmaps.cropped[i]));
      written.push_back(stem + ".pgm");
    }
  }
  return written;
}

}  // namespace discrec::diagnostics
