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
#include <string>
#include <vector>

namespace discrec::data {

struct Interaction {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;

  bool operator==(const Interaction&) const = default;
};

struct UserSequence {
  std::string user_id;
  std::vector<std::string> items;  // ascending timestamp, stable on ties
  std::vector<std::int64_t> timestamps;
};

// One next-item example. `history` is already truncated to the most recent
// max_len items; padding is applied when batching.
struct Sample {
  std::string user_id;
  std::vector<std::string> history;
  std::string target;

  bool operator==(const Sample&) const = default;
};

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> valid;
  std::vector<Sample> test;
  std::vector<std::string> item_catalog;  // sorted, unique
  std::vector<std::string> dropped_users;  // sequences too short to split
};

// Parses `user<TAB>item<TAB>timestamp` lines. Blank lines are skipped; any
// other malformed line throws ParseError carrying its 1-based line number.
std::vector<Interaction> parse_interactions(const std::string& text,
                                            const std::string& source = "<memory>");
std::vector<Interaction> load_interactions(const std::string& path);
std::string format_interactions(const std::vector<Interaction>& interactions);

// Maximal subset where every user and item keeps >= k records. Records are
// kept in input order.
std::vector<Interaction> kcore_filter(const std::vector<Interaction>& interactions, int k);

// Users appear in order of first occurrence in the input.
std::vector<UserSequence> build_sequences(const std::vector<Interaction>& interactions);

std::vector<std::string> most_recent(const std::vector<std::string>& items, std::size_t end,
                                     std::size_t max_len);

DatasetSplit leave_one_out_split(const std::vector<UserSequence>& sequences, std::size_t max_len);

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

DatasetSplit user_random_split(const std::vector<UserSequence>& sequences, SplitRatios ratios,
                               std::uint64_t seed, std::size_t max_len);

// Length buckets keyed by the lower edge. Every sample lands in exactly one
// bucket: lengths below the first edge join the first bucket, above the last
// edge join the last one.
std::map<int, std::vector<Sample>> bucket_by_length(const std::vector<Sample>& samples,
                                                    const std::vector<int>& lengths);

// Nested popularity buckets keyed by percentile: bucket p holds samples whose
// target lies in the least popular ceil(p/100 * |catalog|) items. Popularity
// is the number of times an item is a training target.
std::map<double, std::vector<Sample>> bucket_by_popularity(const std::vector<Sample>& samples,
                                                           const DatasetSplit& split,
                                                           const std::vector<double>& percentiles);

// Training-target counts for every catalog item (zero when never a target).
std::map<std::string, std::int64_t> training_popularity(const DatasetSplit& split);

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double sparsity = 0.0;
  double avg_length = 0.0;
};

DatasetStats compute_stats(const std::vector<UserSequence>& sequences);

// JSON lines {"user": ..., "history": [...], "target": ...}.
std::string samples_to_jsonl(const std::vector<Sample>& samples);
std::vector<Sample> samples_from_jsonl(const std::string& text);

}  // namespace discrec::data
