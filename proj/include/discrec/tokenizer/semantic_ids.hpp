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

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "discrec/data/synthetic.hpp"
#include "discrec/tokenizer/rqvae.hpp"

namespace discrec::tokenizer {

struct SemanticId {
  std::vector<int> codes;

  auto operator<=>(const SemanticId&) const = default;
  bool operator==(const SemanticId&) const = default;
};

using IdMap = std::map<std::string, SemanticId>;

struct Reassignment {
  std::string item;
  SemanticId original;
  SemanticId assigned;
};

struct CollisionReport {
  std::vector<Reassignment> reassigned;
  std::vector<std::string> unassignable;
  std::size_t total_items = 0;

  double collision_rate() const;
};

struct IdAssignment {
  IdMap ids;
  CollisionReport report;
  int levels = 0;
  int codebook_size = 0;
};

// Collision-free assignment from raw per-item codes and last-level residuals.
// Items are processed in the given order; a later item whose full code tuple
// is taken moves to the nearest unused code at the last level, scanning codes
// by distance of its last residual (ties to the lowest index).
IdAssignment resolve_collisions(const std::vector<std::string>& items, const torch::Tensor& codes,
                                const torch::Tensor& last_residuals,
                                const torch::Tensor& last_codebook);

// Encodes + quantizes every item (catalog order = `items` order) and resolves
// collisions.
IdAssignment assign_ids(const std::vector<std::string>& items, const data::EmbeddingTable& table,
                        RqVae& model);

std::string id_map_to_jsonl(const IdMap& ids);
IdMap id_map_from_jsonl(const std::string& text);
std::string collision_report_json(const IdAssignment& assignment);

class PrefixTree {
 public:
  PrefixTree() = default;
  PrefixTree(const IdMap& ids, int levels);

  void insert(const SemanticId& id, const std::string& item);
  bool contains(const SemanticId& id) const;
  std::optional<std::string> lookup(const std::vector<int>& codes) const;
  // Valid next codes after `prefix`, ascending; empty when the prefix is
  // unknown or complete.
  std::vector<int> children(const std::vector<int>& prefix) const;
  std::size_t size() const { return leaves_; }
  int levels() const { return levels_; }
  bool empty() const { return leaves_ == 0; }

 private:
  struct Node {
    std::map<int, std::size_t> next;
    std::optional<std::string> item;
  };
  std::optional<std::size_t> walk(const std::vector<int>& codes) const;

  std::vector<Node> nodes_{Node{}};
  int levels_ = 0;
  std::size_t leaves_ = 0;
};

// Token layout: PAD=0, BOS=1, EOS=2, then one block of K ids per level.
class TokenVocabulary {
 public:
  static constexpr std::int64_t kPad = 0;
  static constexpr std::int64_t kBos = 1;
  static constexpr std::int64_t kEos = 2;
  static constexpr std::int64_t kSpecials = 3;

  TokenVocabulary(int levels, int codebook_size);

  std::int64_t token(int level, int code) const;
  std::pair<int, int> level_code(std::int64_t token) const;
  bool is_code(std::int64_t token) const { return token >= kSpecials && token < size(); }
  std::int64_t size() const { return kSpecials + static_cast<std::int64_t>(levels_) * codebook_size_; }
  int levels() const { return levels_; }
  int codebook_size() const { return codebook_size_; }

 private:
  int levels_;
  int codebook_size_;
};

// Concatenated code tokens of every history item (no EOS).
std::vector<std::int64_t> tokenize_sequence(const std::vector<std::string>& history,
                                            const IdMap& ids, const TokenVocabulary& vocab);
std::vector<std::int64_t> tokenize_target(const std::string& item, const IdMap& ids,
                                          const TokenVocabulary& vocab);
// Maps L target tokens back to an item through the prefix tree.
std::optional<std::string> detokenize(const std::vector<std::int64_t>& tokens,
                                      const PrefixTree& tree, const TokenVocabulary& vocab);

}  // namespace discrec::tokenizer
