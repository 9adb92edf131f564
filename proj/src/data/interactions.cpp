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

#include "discrec/data/interactions.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "discrec/common.hpp"
#include "json.hpp"

namespace discrec::data {

std::vector<Interaction> parse_interactions(const std::string& text, const std::string& source) {
  std::vector<Interaction> out;
  std::size_t line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw ParseError(source, line_no, "expected 3 tab-separated fields, got " +
                                            std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw ParseError(source, line_no, "empty user or item id");
    }
    std::int64_t ts = 0;
    const auto& t = fields[2];
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), ts);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
      throw ParseError(source, line_no, "timestamp is not an integer: '" + t + "'");
    }
    if (ts < 0) throw ParseError(source, line_no, "negative timestamp");
    out.push_back({fields[0], fields[1], ts});
  }
  return out;
}

std::vector<Interaction> load_interactions(const std::string& path) {
  return parse_interactions(read_file(path), path);
}

std::string format_interactions(const std::vector<Interaction>& interactions) {
  std::string out;
  for (const auto& r : interactions) {
    out += r.user_id;
    out += '\t';
    out += r.item_id;
    out += '\t';
    out += std::to_string(r.timestamp);
    out += '\n';
  }
  return out;
}

std::vector<Interaction> kcore_filter(const std::vector<Interaction>& interactions, int k) {
  if (k < 1) throw ConfigError("kcore_filter: k must be >= 1");
  std::vector<char> alive(interactions.size(), 1);
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, int> user_deg;
    std::unordered_map<std::string, int> item_deg;
    for (std::size_t i = 0; i < interactions.size(); ++i) {
      if (!alive[i]) continue;
      ++user_deg[interactions[i].user_id];
      ++item_deg[interactions[i].item_id];
    }
    for (std::size_t i = 0; i < interactions.size(); ++i) {
      if (!alive[i]) continue;
      if (user_deg[interactions[i].user_id] < k || item_deg[interactions[i].item_id] < k) {
        alive[i] = 0;
        changed = true;
      }
    }
  }
  std::vector<Interaction> out;
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    if (alive[i]) out.push_back(interactions[i]);
  }
  return out;
}

std::vector<UserSequence> build_sequences(const std::vector<Interaction>& interactions) {
  std::vector<UserSequence> seqs;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<std::size_t>> records;
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    const auto& user = interactions[i].user_id;
    auto [it, inserted] = index.try_emplace(user, seqs.size());
    if (inserted) {
      seqs.push_back({user, {}, {}});
      records.emplace_back();
    }
    records[it->second].push_back(i);
  }
  for (std::size_t u = 0; u < seqs.size(); ++u) {
    auto& ids = records[u];
    std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
      return interactions[a].timestamp < interactions[b].timestamp;
    });
    for (auto i : ids) {
      seqs[u].items.push_back(interactions[i].item_id);
      seqs[u].timestamps.push_back(interactions[i].timestamp);
    }
  }
  return seqs;
}

std::vector<std::string> most_recent(const std::vector<std::string>& items, std::size_t end,
                                     std::size_t max_len) {
  std::size_t begin = end > max_len ? end - max_len : 0;
  return {items.begin() + static_cast<std::ptrdiff_t>(begin),
          items.begin() + static_cast<std::ptrdiff_t>(end)};
}

namespace {

std::vector<std::string> catalog_of(const std::vector<UserSequence>& sequences,
                                    const std::vector<std::size_t>& users) {
  std::set<std::string> items;
  for (auto u : users) items.insert(sequences[u].items.begin(), sequences[u].items.end());
  return {items.begin(), items.end()};
}

void add_next_item_pairs(const UserSequence& seq, std::size_t end, std::size_t max_len,
                         std::vector<Sample>& out) {
  for (std::size_t t = 1; t < end; ++t) {
    out.push_back({seq.user_id, most_recent(seq.items, t, max_len), seq.items[t]});
  }
}

}  // namespace

DatasetSplit leave_one_out_split(const std::vector<UserSequence>& sequences, std::size_t max_len) {
  if (max_len == 0) throw ConfigError("max_len must be positive");
  DatasetSplit split;
  std::vector<std::size_t> kept;
  for (std::size_t u = 0; u < sequences.size(); ++u) {
    const auto& seq = sequences[u];
    const std::size_t n = seq.items.size();
    if (n < 3) {
      split.dropped_users.push_back(seq.user_id);
      continue;
    }
    kept.push_back(u);
    split.test.push_back({seq.user_id, most_recent(seq.items, n - 1, max_len), seq.items[n - 1]});
    split.valid.push_back({seq.user_id, most_recent(seq.items, n - 2, max_len), seq.items[n - 2]});
    add_next_item_pairs(seq, n - 2, max_len, split.train);
  }
  split.item_catalog = catalog_of(sequences, kept);
  return split;
}

DatasetSplit user_random_split(const std::vector<UserSequence>& sequences, SplitRatios ratios,
                               std::uint64_t seed, std::size_t max_len) {
  if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  if (max_len == 0) throw ConfigError("max_len must be positive");
  DatasetSplit split;
  std::vector<std::size_t> kept;
  for (std::size_t u = 0; u < sequences.size(); ++u) {
    if (sequences[u].items.size() < 2) {
      split.dropped_users.push_back(sequences[u].user_id);
    } else {
      kept.push_back(u);
    }
  }
  std::vector<std::size_t> order = kept;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const double n = static_cast<double>(order.size());
  const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * n + 1e-9));
  const auto n_train_valid =
      static_cast<std::size_t>(std::floor((ratios.train + ratios.valid) * n + 1e-9));
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& seq = sequences[order[r]];
    const std::size_t len = seq.items.size();
    if (r < n_train) {
      add_next_item_pairs(seq, len, max_len, split.train);
    } else {
      Sample s{seq.user_id, most_recent(seq.items, len - 1, max_len), seq.items[len - 1]};
      (r < n_train_valid ? split.valid : split.test).push_back(std::move(s));
    }
  }
  split.item_catalog = catalog_of(sequences, kept);
  return split;
}

std::map<int, std::vector<Sample>> bucket_by_length(const std::vector<Sample>& samples,
                                                    const std::vector<int>& lengths) {
  if (lengths.empty()) throw ConfigError("bucket_by_length: no bucket edges");
  std::vector<int> edges = lengths;
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::map<int, std::vector<Sample>> buckets;
  for (int e : edges) buckets[e];
  for (const auto& s : samples) {
    const int len = static_cast<int>(s.history.size());
    auto it = std::upper_bound(edges.begin(), edges.end(), len);
    const int key = it == edges.begin() ? edges.front() : *std::prev(it);
    buckets[key].push_back(s);
  }
  return buckets;
}

std::map<std::string, std::int64_t> training_popularity(const DatasetSplit& split) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& item : split.item_catalog) counts[item] = 0;
  for (const auto& s : split.train) ++counts[s.target];
  return counts;
}

std::map<double, std::vector<Sample>> bucket_by_popularity(const std::vector<Sample>& samples,
                                                           const DatasetSplit& split,
                                                           const std::vector<double>& percentiles) {
  auto counts = training_popularity(split);
  std::vector<std::pair<std::int64_t, std::string>> ranked;
  for (const auto& [item, c] : counts) ranked.emplace_back(c, item);
  std::sort(ranked.begin(), ranked.end());  // ascending count, ties by item id
  std::unordered_map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < ranked.size(); ++i) rank[ranked[i].second] = i;

  std::map<double, std::vector<Sample>> buckets;
  for (double p : percentiles) {
    if (!(p > 0.0 && p <= 100.0)) throw ConfigError("popularity percentile must be in (0, 100]");
    const auto cutoff =
        static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(ranked.size()) - 1e-9));
    auto& bucket = buckets[p];
    for (const auto& s : samples) {
      auto it = rank.find(s.target);
      if (it != rank.end() && it->second < cutoff) bucket.push_back(s);
    }
  }
  return buckets;
}

DatasetStats compute_stats(const std::vector<UserSequence>& sequences) {
  DatasetStats stats;
  std::set<std::string> items;
  for (const auto& s : sequences) {
    stats.interactions += s.items.size();
    items.insert(s.items.begin(), s.items.end());
  }
  stats.users = sequences.size();
  stats.items = items.size();
  if (stats.users > 0 && stats.items > 0) {
    stats.sparsity = 1.0 - static_cast<double>(stats.interactions) /
                               (static_cast<double>(stats.users) * static_cast<double>(stats.items));
    stats.avg_length = static_cast<double>(stats.interactions) / static_cast<double>(stats.users);
  }
  return stats;
}

std::string samples_to_jsonl(const std::vector<Sample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    nlohmann::ordered_json j;
    j["user"] = s.user_id;
    j["history"] = s.history;
    j["target"] = s.target;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Sample> samples_from_jsonl(const std::string& text) {
  std::vector<Sample> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("user").get<std::string>(),
                     j.at("history").get<std::vector<std::string>>(),
                     j.at("target").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("<split manifest>", line_no, e.what());
    }
  }
  return out;
}

}  // namespace discrec::data
