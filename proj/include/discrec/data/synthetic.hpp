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
#include <map>
#include <random>
#include <string>
#include <vector>

#include "discrec/data/interactions.hpp"

namespace discrec::data {

using EmbeddingTable = std::map<std::string, std::vector<double>>;

struct SyntheticConfig {
  int n_users = 500;
  int n_items = 200;
  int embed_dim = 64;
  // Number of levels in the Gaussian tree. Levels 0..depth-2 are cluster
  // splits with `branching` children; the last level is per-item noise, so
  // depth 1 gives i.i.d. Gaussian embeddings.
  int hierarchy_depth = 3;
  int branching = 4;
  double level_decay = 0.5;  // std of level l is level_decay^l
  // Peakiness of the item-to-item Markov chain; 0 gives uniform transitions.
  double transition_sharpness = 3.0;
  // Extra log-weight for transitions inside the same top-level cluster.
  double semantic_affinity = 0.0;
  int seq_len_min = 5;
  int seq_len_max = 15;
  std::uint64_t seed = 42;
};

struct SyntheticData {
  std::vector<Interaction> interactions;
  EmbeddingTable embeddings;
  // Tree path of each item (empty for depth 1); element 0 is the top cluster.
  std::map<std::string, std::vector<int>> item_paths;
};

void validate(const SyntheticConfig& config);

// Item-level Markov chain with lazily materialised rows. Row i is a pure
// function of (seed, i), so sampling is reproducible in any visiting order.
class MarkovChain {
 public:
  MarkovChain(int n_items, double sharpness, double affinity, std::vector<int> top_cluster,
              std::uint64_t seed);

  const std::vector<double>& row(int from);
  template <typename Rng>
  int sample_next(int from, Rng& rng) {
    const auto& p = row(from);
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return draw(p, u);
  }
  int n_items() const { return n_items_; }

 private:
  static int draw(const std::vector<double>& cdf, double u);

  int n_items_;
  double sharpness_;
  double affinity_;
  std::vector<int> top_cluster_;
  std::uint64_t seed_;
  std::map<int, std::vector<double>> cdf_rows_;
};

std::string synthetic_item_id(int index, int n_items);
std::string synthetic_user_id(int index, int n_users);

SyntheticData generate_synthetic(const SyntheticConfig& config);

// `item f1 f2 ... fD` per line, shortest round-trip decimal formatting.
std::string format_embeddings(const EmbeddingTable& table);
EmbeddingTable parse_embeddings(const std::string& text, const std::string& source = "<memory>");
EmbeddingTable load_embeddings(const std::string& path);

}  // namespace discrec::data
