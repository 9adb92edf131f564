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

#include "discrec/tokenizer/semantic_ids.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "discrec/common.hpp"
#include "json.hpp"

namespace discrec::tokenizer {

double CollisionReport::collision_rate() const {
  if (total_items == 0) return 0.0;
  return static_cast<double>(reassigned.size() + unassignable.size()) /
         static_cast<double>(total_items);
}

IdAssignment resolve_collisions(const std::vector<std::string>& items, const torch::Tensor& codes_in,
                                const torch::Tensor& last_residuals,
                                const torch::Tensor& last_codebook) {
  torch::NoGradGuard no_grad;
  auto codes = codes_in.to(torch::kInt64).contiguous();
  if (codes.size(0) != static_cast<std::int64_t>(items.size())) {
    throw Error("resolve_collisions: one code row per item required");
  }
  IdAssignment out;
  out.levels = static_cast<int>(codes.size(1));
  out.codebook_size = static_cast<int>(last_codebook.size(0));
  out.report.total_items = items.size();
  auto acc = codes.accessor<std::int64_t, 2>();
  auto dist = (last_residuals.unsqueeze(1) - last_codebook.unsqueeze(0))
                  .pow(2)
                  .sum(-1)
                  .to(torch::kFloat64)
                  .contiguous();
  auto dacc = dist.accessor<double, 2>();
  std::set<SemanticId> taken;
  for (std::size_t i = 0; i < items.size(); ++i) {
    SemanticId id;
    for (int l = 0; l < out.levels; ++l) id.codes.push_back(static_cast<int>(acc[i][l]));
    if (taken.insert(id).second) {
      out.ids[items[i]] = id;
      continue;
    }
    std::vector<int> order(static_cast<std::size_t>(out.codebook_size));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return dacc[i][a] < dacc[i][b]; });
    bool placed = false;
    for (int c : order) {
      SemanticId cand = id;
      cand.codes.back() = c;
      if (taken.insert(cand).second) {
        out.ids[items[i]] = cand;
        out.report.reassigned.push_back({items[i], id, cand});
        placed = true;
        break;
      }
    }
    if (!placed) out.report.unassignable.push_back(items[i]);
  }
  return out;
}

IdAssignment assign_ids(const std::vector<std::string>& items, const data::EmbeddingTable& table,
                        RqVae& model) {
  torch::NoGradGuard no_grad;
  if (items.empty()) throw Error("assign_ids: empty catalog");
  const auto dim = model->config().input_dim;
  auto raw = torch::empty({static_cast<std::int64_t>(items.size()), dim}, torch::kFloat64);
  auto racc = raw.accessor<double, 2>();
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto it = table.find(items[i]);
    if (it == table.end()) throw Error("assign_ids: no embedding for item '" + items[i] + "'");
    if (static_cast<int>(it->second.size()) != dim) {
      throw Error("assign_ids: embedding dimension mismatch for '" + items[i] + "'");
    }
    for (int d = 0; d < dim; ++d) racc[static_cast<std::int64_t>(i)][d] = it->second[static_cast<std::size_t>(d)];
  }
  model->eval();
  auto q = model->quantize(model->encode(model->normalize(raw)));
  const auto last = model->config().levels - 1;
  auto last_residual = q.residuals.select(1, last);
  return resolve_collisions(items, q.codes, last_residual, model->codebooks()[last]);
}

std::string id_map_to_jsonl(const IdMap& ids) {
  std::string out;
  for (const auto& [item, id] : ids) {
    nlohmann::ordered_json j;
    j["item"] = item;
    j["codes"] = id.codes;
    out += j.dump();
    out += '\n';
  }
  return out;
}

IdMap id_map_from_jsonl(const std::string& text) {
  IdMap ids;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ids[j.at("item").get<std::string>()] = SemanticId{j.at("codes").get<std::vector<int>>()};
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("<id map>", line_no, e.what());
    }
  }
  return ids;
}

std::string collision_report_json(const IdAssignment& a) {
  nlohmann::ordered_json j;
  j["levels"] = a.levels;
  j["codebook_size"] = a.codebook_size;
  j["total_items"] = a.report.total_items;
  j["assigned"] = a.ids.size();
  j["collision_rate"] = a.report.collision_rate();
  auto& re = j["reassigned"] = nlohmann::ordered_json::array();
  for (const auto& r : a.report.reassigned) {
    re.push_back({{"item", r.item}, {"original", r.original.codes}, {"assigned", r.assigned.codes}});
  }
  j["unassignable"] = a.report.unassignable;
  return j.dump(2);
}

PrefixTree::PrefixTree(const IdMap& ids, int levels) : levels_(levels) {
  for (const auto& [item, id] : ids) insert(id, item);
}

void PrefixTree::insert(const SemanticId& id, const std::string& item) {
  if (levels_ == 0) levels_ = static_cast<int>(id.codes.size());
  if (static_cast<int>(id.codes.size()) != levels_) {
    throw Error("prefix tree: semantic id has wrong length for item '" + item + "'");
  }
  std::size_t node = 0;
  for (int c : id.codes) {
    auto it = nodes_[node].next.find(c);
    if (it == nodes_[node].next.end()) {
      nodes_.push_back(Node{});
      it = nodes_[node].next.emplace(c, nodes_.size() - 1).first;
    }
    node = it->second;
  }
  if (nodes_[node].item) {
    throw Error("prefix tree: duplicate semantic id for '" + item + "' and '" +
                *nodes_[node].item + "'");
  }
  nodes_[node].item = item;
  ++leaves_;
}

std::optional<std::size_t> PrefixTree::walk(const std::vector<int>& codes) const {
  std::size_t node = 0;
  for (int c : codes) {
    auto it = nodes_[node].next.find(c);
    if (it == nodes_[node].next.end()) return std::nullopt;
    node = it->second;
  }
  return node;
}

bool PrefixTree::contains(const SemanticId& id) const { return lookup(id.codes).has_value(); }

std::optional<std::string> PrefixTree::lookup(const std::vector<int>& codes) const {
  if (static_cast<int>(codes.size()) != levels_) return std::nullopt;
  auto node = walk(codes);
  if (!node) return std::nullopt;
  return nodes_[*node].item;
}

std::vector<int> PrefixTree::children(const std::vector<int>& prefix) const {
  std::vector<int> out;
  auto node = walk(prefix);
  if (!node) return out;
  for (const auto& [c, _] : nodes_[*node].next) out.push_back(c);
  return out;
}

TokenVocabulary::TokenVocabulary(int levels, int codebook_size)
    : levels_(levels), codebook_size_(codebook_size) {
  if (levels <= 0 || codebook_size <= 0) throw ConfigError("vocabulary: L and K must be positive");
}

std::int64_t TokenVocabulary::token(int level, int code) const {
  if (level < 0 || level >= levels_ || code < 0 || code >= codebook_size_) {
    throw Error("vocabulary: (level, code) out of range");
  }
  return kSpecials + static_cast<std::int64_t>(level) * codebook_size_ + code;
}

std::pair<int, int> TokenVocabulary::level_code(std::int64_t token) const {
  if (!is_code(token)) throw Error("vocabulary: not a code token");
  const auto off = token - kSpecials;
  return {static_cast<int>(off / codebook_size_), static_cast<int>(off % codebook_size_)};
}

std::vector<std::int64_t> tokenize_target(const std::string& item, const IdMap& ids,
                                          const TokenVocabulary& vocab) {
  auto it = ids.find(item);
  if (it == ids.end()) throw Error("tokenize: unknown item '" + item + "'");
  std::vector<std::int64_t> out;
  for (std::size_t l = 0; l < it->second.codes.size(); ++l) {
    out.push_back(vocab.token(static_cast<int>(l), it->second.codes[l]));
  }
  return out;
}

std::vector<std::int64_t> tokenize_sequence(const std::vector<std::string>& history,
                                            const IdMap& ids, const TokenVocabulary& vocab) {
  std::vector<std::int64_t> out;
  for (const auto& item : history) {
    auto t = tokenize_target(item, ids, vocab);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

std::optional<std::string> detokenize(const std::vector<std::int64_t>& tokens,
                                      const PrefixTree& tree, const TokenVocabulary& vocab) {
  std::vector<int> codes;
  for (std::size_t l = 0; l < tokens.size(); ++l) {
    if (!vocab.is_code(tokens[l])) return std::nullopt;
    auto [level, code] = vocab.level_code(tokens[l]);
    if (level != static_cast<int>(l)) return std::nullopt;
    codes.push_back(code);
  }
  return tree.lookup(codes);
}

}  // namespace discrec::tokenizer
