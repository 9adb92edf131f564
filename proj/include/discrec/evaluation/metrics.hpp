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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "discrec/data/interactions.hpp"
#include "discrec/decoding/beam_search.hpp"

namespace discrec::evaluation {

// 1-based rank of `target` in `ranked`, if present.
std::optional<std::size_t> rank_of(const std::vector<std::string>& ranked, const std::string& target);
double recall_at_k(const std::vector<std::string>& ranked, const std::string& target, int k);
double ndcg_at_k(const std::vector<std::string>& ranked, const std::string& target, int k);

struct MetricRow {
  std::map<std::string, double> metrics;  // "recall@5", "ndcg@5", ...
  std::size_t count = 0;
};

struct MetricTable {
  std::vector<int> ks;
  MetricRow overall;
  std::map<std::string, MetricRow> buckets;

  double at(const std::string& metric) const { return overall.metrics.at(metric); }
  std::string to_json() const;
  std::string to_csv() const;  // bucket,count,<metric columns>; first row is "all"
};

// Named sample groups evaluated alongside the full split.
using Buckets = std::map<std::string, std::vector<data::Sample>>;

Buckets length_buckets(const std::vector<data::Sample>& samples, const std::vector<int>& edges);
Buckets popularity_buckets(const std::vector<data::Sample>& samples, const data::DatasetSplit& split,
                           const std::vector<double>& percentiles);

// Metrics for precomputed rankings (rankings[i] belongs to samples[i]).
MetricTable score_rankings(const std::vector<std::vector<std::string>>& rankings,
                           const std::vector<data::Sample>& samples, const std::vector<int>& ks,
                           const Buckets& buckets = {});

struct EvalOptions {
  std::vector<int> ks{5, 10};
  int beam_size = 20;
  bool exhaustive = false;
};

struct Evaluation {
  MetricTable table;
  std::vector<decoding::RankedPrediction> predictions;  // aligned with the samples
};

// Decodes every sample and aggregates. Throws ConfigError on an empty split.
Evaluation evaluate(recommender::Recommender& model, const recommender::BatchBuilder& builder,
                    const tokenizer::PrefixTree& trie, const std::vector<data::Sample>& samples,
                    const EvalOptions& options = {}, const Buckets& buckets = {});

// Catalog ordered by training-target count (descending), ties by item id.
std::vector<std::string> popularity_ranking(const data::DatasetSplit& split);

}  // namespace discrec::evaluation
