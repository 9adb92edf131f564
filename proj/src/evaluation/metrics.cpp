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

#include "discrec/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "discrec/common.hpp"
#include "json.hpp"

namespace discrec::evaluation {

std::optional<std::size_t> rank_of(const std::vector<std::string>& ranked, const std::string& target) {
  auto it = std::find(ranked.begin(), ranked.end(), target);
  if (it == ranked.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ranked.begin()) + 1;
}

double recall_at_k(const std::vector<std::string>& ranked, const std::string& target, int k) {
  auto r = rank_of(ranked, target);
  return r && *r <= static_cast<std::size_t>(k) ? 1.0 : 0.0;
}

double ndcg_at_k(const std::vector<std::string>& ranked, const std::string& target, int k) {
  auto r = rank_of(ranked, target);
  if (!r || *r > static_cast<std::size_t>(k)) return 0.0;
  return 1.0 / std::log2(static_cast<double>(*r) + 1.0);
}

namespace {

std::vector<std::string> metric_names(const std::vector<int>& ks) {
  std::vector<std::string> names;
  for (int k : ks) {
    names.push_back("recall@" + std::to_string(k));
    names.push_back("ndcg@" + std::to_string(k));
  }
  return names;
}

std::string sample_key(const data::Sample& s) {
  std::string key = s.user_id + '\x1f' + s.target;
  for (const auto& h : s.history) key += '\x1f' + h;
  return key;
}

using PerSample = std::map<std::string, std::vector<double>>;  // key -> metric values

MetricRow row_from(const std::vector<std::vector<double>>& values, const std::vector<std::string>& names);

// Order-free mean: values are summed in sorted order.
double stable_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

MetricRow row_from(const std::vector<std::vector<double>>& values, const std::vector<std::string>& names) {
  MetricRow row;
  row.count = values.size();
  for (std::size_t m = 0; m < names.size(); ++m) {
    std::vector<double> column;
    column.reserve(values.size());
    for (const auto& v : values) column.push_back(v[m]);
    row.metrics[names[m]] = column.empty() ? 0.0 : stable_mean(std::move(column));
  }
  return row;
}

void check_ks(const std::vector<int>& ks) {
  if (ks.empty()) throw ConfigError("evaluation: no K values");
  for (int k : ks) {
    if (k <= 0) throw ConfigError("evaluation: K must be positive");
  }
}

}  // namespace

std::string MetricTable::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& name : metric_names(ks)) j[name] = overall.metrics.at(name);
  j["count"] = overall.count;
  nlohmann::ordered_json b = nlohmann::ordered_json::object();
  for (const auto& [bucket, row] : buckets) {
    nlohmann::ordered_json r;
    for (const auto& name : metric_names(ks)) r[name] = row.metrics.at(name);
    r["count"] = row.count;
    b[bucket] = r;
  }
  j["buckets"] = b;
  return j.dump(2) + "\n";
}

std::string MetricTable::to_csv() const {
  const auto names = metric_names(ks);
  std::ostringstream out;
  out.precision(17);
  out << "bucket,count";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  auto emit = [&](const std::string& label, const MetricRow& row) {
    out << label << ',' << row.count;
    for (const auto& n : names) out << ',' << row.metrics.at(n);
    out << '\n';
  };
  emit("all", overall);
  for (const auto& [bucket, row] : buckets) emit(bucket, row);
  return out.str();
}

Buckets length_buckets(const std::vector<data::Sample>& samples, const std::vector<int>& edges) {
  Buckets out;
  for (auto& [edge, group] : data::bucket_by_length(samples, edges)) {
    out["len>=" + std::to_string(edge)] = std::move(group);
  }
  return out;
}

Buckets popularity_buckets(const std::vector<data::Sample>& samples, const data::DatasetSplit& split,
                           const std::vector<double>& percentiles) {
  Buckets out;
  for (auto& [p, group] : data::bucket_by_popularity(samples, split, percentiles)) {
    std::ostringstream name;
    name << "pop<=" << p << '%';
    out[name.str()] = std::move(group);
  }
  return out;
}

MetricTable score_rankings(const std::vector<std::vector<std::string>>& rankings,
                           const std::vector<data::Sample>& samples, const std::vector<int>& ks,
                           const Buckets& buckets) {
  check_ks(ks);
  if (samples.empty()) throw ConfigError("evaluation: empty split");
  if (rankings.size() != samples.size()) throw Error("score_rankings: size mismatch");
  std::vector<std::vector<double>> values(samples.size());
  PerSample per_sample;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (int k : ks) {
      values[i].push_back(recall_at_k(rankings[i], samples[i].target, k));
      values[i].push_back(ndcg_at_k(rankings[i], samples[i].target, k));
    }
    per_sample.emplace(sample_key(samples[i]), values[i]);
  }
  const auto names = metric_names(ks);
  MetricTable table;
  table.ks = ks;
  table.overall = row_from(values, names);
  for (const auto& [name, group] : buckets) {
    std::vector<std::vector<double>> bucket_values;
    for (const auto& s : group) {
      auto it = per_sample.find(sample_key(s));
      if (it == per_sample.end()) throw Error("bucket sample missing from the split");
      bucket_values.push_back(it->second);
    }
    table.buckets[name] = row_from(bucket_values, names);
  }
  return table;
}

Evaluation evaluate(recommender::Recommender& model, const recommender::BatchBuilder& builder,
                    const tokenizer::PrefixTree& trie, const std::vector<data::Sample>& samples,
                    const EvalOptions& options, const Buckets& buckets) {
  check_ks(options.ks);
  if (samples.empty()) throw ConfigError("evaluation: empty split");
  const bool was_training = model->is_training();
  model->eval();
  Evaluation out;
  std::vector<std::vector<std::string>> rankings;
  for (const auto& s : samples) {
    auto state = decoding::encode_history(model, builder, s.history);
    auto pred = options.exhaustive ? decoding::exhaustive_rank(model, state, trie)
                                   : decoding::constrained_beam_search(model, state, trie,
                                                                       options.beam_size);
    rankings.push_back(pred.items);
    out.predictions.push_back(std::move(pred));
  }
  model->train(was_training);
  out.table = score_rankings(rankings, samples, options.ks, buckets);
  return out;
}

std::vector<std::string> popularity_ranking(const data::DatasetSplit& split) {
  std::vector<std::pair<std::int64_t, std::string>> ranked;
  for (const auto& [item, c] : data::training_popularity(split)) ranked.emplace_back(-c, item);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> out;
  for (auto& r : ranked) out.push_back(std::move(r.second));
  return out;
}

}  // namespace discrec::evaluation
