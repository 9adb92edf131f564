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

#include <string>
#include <vector>

#include <torch/torch.h>

#include "discrec/data/interactions.hpp"
#include "discrec/recommender/batch.hpp"
#include "discrec/recommender/model.hpp"
#include "discrec/tokenizer/semantic_ids.hpp"

namespace discrec::diagnostics {

enum class NormSource { kCode, kSemanticToken, kCollaborativeToken };
std::string source_name(NormSource source);  // code, semantic_token, collaborative_token

struct NormProfile {
  std::string source;
  std::vector<double> values;  // one mean norm per level
};

// value[l] = mean over items of ||embeddings[i][l]||_2. Each entry is [L, D].
std::vector<double> mean_norm_by_index(const std::vector<torch::Tensor>& embeddings);

// Per-item [L, D] embeddings for one source, items in IdMap order.
std::vector<torch::Tensor> code_embeddings(const tokenizer::IdMap& ids, const torch::Tensor& codebooks);
std::vector<torch::Tensor> token_table_rows(recommender::Recommender& model, const tokenizer::IdMap& ids);
// Outputs of the encoder-side semantic / collaborative branch when each item's
// L tokens are run on their own.
std::vector<torch::Tensor> branch_embeddings(recommender::Recommender& model,
                                             const tokenizer::IdMap& ids, bool collaborative);

NormProfile norm_by_index(const tokenizer::IdMap& ids, NormSource source,
                          recommender::Recommender* model, const torch::Tensor& codebooks = {});

// Spearman rank correlation (average ranks on ties); NaN when a side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);
// Correlation of a profile with its level index 1..L.
double level_trend(const NormProfile& profile);

enum class CropAnchor { kStart, kEnd };

struct HeatmapBundle {
  std::vector<torch::Tensor> full;     // per layer [N, N], float64, before cropping
  std::vector<torch::Tensor> cropped;  // per layer [c, c]
  int requested_crop = 0;
  int crop = 0;
  bool clamped = false;
};

// Per layer: mean over heads, then over samples, then a crop x crop window.
// Inputs are per-layer probabilities [B, H, N, N].
HeatmapBundle average_heatmaps(const std::vector<torch::Tensor>& per_layer, int crop,
                               CropAnchor anchor = CropAnchor::kStart);

HeatmapBundle attention_heatmaps(recommender::Recommender& model,
                                 const recommender::BatchBuilder& builder,
                                 const std::vector<data::Sample>& samples, int crop = 28,
                                 CropAnchor anchor = CropAnchor::kStart);

std::string matrix_to_csv(const torch::Tensor& matrix);
torch::Tensor matrix_from_csv(const std::string& text);
std::string profile_to_csv(const NormProfile& profile);  // level,mean_norm

// Writes norms_<source>.csv, heatmap_layer<n>.csv (n from 1) and, when
// requested, heatmap_layer<n>.pgm. Returns the written file names.
std::vector<std::string> export_profiles(const std::vector<NormProfile>& profiles,
                                         const HeatmapBundle& heatmaps, const std::string& out_dir,
                                         bool images = false);

}  // namespace discrec::diagnostics
