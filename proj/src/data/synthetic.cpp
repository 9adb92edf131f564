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

#include "discrec/data/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "discrec/common.hpp"

namespace discrec::data {

void validate(const SyntheticConfig& c) {
  if (c.n_users <= 0 || c.n_items <= 1 || c.embed_dim <= 0 || c.hierarchy_depth <= 0 ||
      c.branching <= 0) {
    throw ConfigError("synthetic config: counts must be positive (n_items >= 2)");
  }
  if (c.seq_len_min < 1 || c.seq_len_max < c.seq_len_min) {
    throw ConfigError("synthetic config: invalid sequence length range");
  }
  if (c.transition_sharpness < 0 || c.level_decay <= 0) {
    throw ConfigError("synthetic config: sharpness must be >= 0 and decay > 0");
  }
}

MarkovChain::MarkovChain(int n_items, double sharpness, double affinity,
                         std::vector<int> top_cluster, std::uint64_t seed)
    : n_items_(n_items),
      sharpness_(sharpness),
      affinity_(affinity),
      top_cluster_(std::move(top_cluster)),
      seed_(seed) {}

const std::vector<double>& MarkovChain::row(int from) {
  auto it = cdf_rows_.find(from);
  if (it != cdf_rows_.end()) return it->second;
  std::mt19937_64 rng(seed_ ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(from + 1)));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> logits(static_cast<std::size_t>(n_items_));
  for (int j = 0; j < n_items_; ++j) {
    double g = normal(rng);
    double bonus = 0.0;
    if (!top_cluster_.empty() && top_cluster_[static_cast<std::size_t>(j)] ==
                                     top_cluster_[static_cast<std::size_t>(from)]) {
      bonus = affinity_;
    }
    logits[static_cast<std::size_t>(j)] = sharpness_ * g + bonus;
  }
  // No self-transitions.
  logits[static_cast<std::size_t>(from)] = -std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> cdf(logits.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    acc += std::exp(logits[j] - mx);
    cdf[j] = acc;
  }
  for (double& v : cdf) v /= acc;
  return cdf_rows_.emplace(from, std::move(cdf)).first->second;
}

int MarkovChain::draw(const std::vector<double>& cdf, double u) {
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  // Skip zero-mass entries (the excluded self-transition).
  while (it != cdf.begin() && *it == *std::prev(it)) --it;
  return static_cast<int>(it - cdf.begin());
}

namespace {

std::string padded(char prefix, int index, int count) {
  const int width = static_cast<int>(std::to_string(std::max(count - 1, 0)).size());
  std::string digits = std::to_string(index);
  return std::string(1, prefix) + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(digits.size()))), '0') + digits;
}

}  // namespace

std::string synthetic_item_id(int index, int n_items) { return padded('i', index, n_items); }
std::string synthetic_user_id(int index, int n_users) { return padded('u', index, n_users); }

SyntheticData generate_synthetic(const SyntheticConfig& c) {
  validate(c);
  SyntheticData out;
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto dim = static_cast<std::size_t>(c.embed_dim);

  // Gaussian tree: node offsets are drawn on first use, keyed by path prefix.
  std::map<std::vector<int>, std::vector<double>> node_offset;
  std::vector<int> top_cluster(static_cast<std::size_t>(c.n_items), 0);
  std::uniform_int_distribution<int> child(0, c.branching - 1);
  for (int i = 0; i < c.n_items; ++i) {
    std::vector<int> path;
    std::vector<double> emb(dim, 0.0);
    for (int level = 0; level + 1 < c.hierarchy_depth; ++level) {
      path.push_back(child(rng));
      auto [it, inserted] = node_offset.try_emplace(path);
      if (inserted) {
        const double sd = std::pow(c.level_decay, level);
        it->second.resize(dim);
        for (auto& v : it->second) v = sd * normal(rng);
      }
      for (std::size_t d = 0; d < dim; ++d) emb[d] += it->second[d];
    }
    const double noise_sd = std::pow(c.level_decay, c.hierarchy_depth - 1);
    for (auto& v : emb) v += noise_sd * normal(rng);
    const auto id = synthetic_item_id(i, c.n_items);
    if (!path.empty()) top_cluster[static_cast<std::size_t>(i)] = path.front();
    out.item_paths[id] = path;
    out.embeddings[id] = std::move(emb);
  }

  MarkovChain chain(c.n_items, c.transition_sharpness, c.semantic_affinity, top_cluster,
                    c.seed * 0x2545f4914f6cdd1dULL + 1);
  std::uniform_int_distribution<int> length(c.seq_len_min, c.seq_len_max);
  std::uniform_int_distribution<int> start(0, c.n_items - 1);
  for (int u = 0; u < c.n_users; ++u) {
    const auto user = synthetic_user_id(u, c.n_users);
    const int len = length(rng);
    int item = start(rng);
    for (int t = 0; t < len; ++t) {
      if (t > 0) item = chain.sample_next(item, rng);
      out.interactions.push_back({user, synthetic_item_id(item, c.n_items), t + 1});
    }
  }
  return out;
}

std::string format_embeddings(const EmbeddingTable& table) {
  std::string out;
  char buf[64];
  for (const auto& [item, vec] : table) {
    out += item;
    for (double v : vec) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      (void)ec;
      out += ' ';
      out.append(buf, ptr);
    }
    out += '\n';
  }
  return out;
}

EmbeddingTable parse_embeddings(const std::string& text, const std::string& source) {
  EmbeddingTable table;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty()) continue;
    auto fields = split(t, ' ');
    if (fields.size() < 2) throw ParseError(source, line_no, "expected item id and values");
    std::vector<double> vec;
    for (std::size_t f = 1; f < fields.size(); ++f) {
      double v = 0.0;
      const auto& s = fields[f];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ParseError(source, line_no, "bad float '" + s + "'");
      }
      vec.push_back(v);
    }
    if (dim == 0) dim = vec.size();
    if (vec.size() != dim) throw ParseError(source, line_no, "inconsistent embedding dimension");
    if (!table.emplace(fields[0], std::move(vec)).second) {
      throw ParseError(source, line_no, "duplicate item '" + fields[0] + "'");
    }
  }
  return table;
}

EmbeddingTable load_embeddings(const std::string& path) {
  return parse_embeddings(read_file(path), path);
}

}  // namespace discrec::data
