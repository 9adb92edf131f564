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

#include "discrec/recommender/batch.hpp"

#include "discrec/common.hpp"

namespace discrec::recommender {

using tokenizer::TokenVocabulary;

BatchBuilder::BatchBuilder(const tokenizer::IdMap& ids, int levels, int codebook_size, int max_len,
                           bool item_slots)
    : ids_(ids), vocab_(levels, codebook_size), max_len_(max_len), item_slots_(item_slots) {
  if (max_len <= 0) throw ConfigError("max_len must be positive");
  std::int64_t row = 1;  // row 0: unknown item
  for (const auto& [item, _] : ids) item_rows_[item] = row++;
}

std::int64_t BatchBuilder::item_row(const std::string& item) const {
  auto it = item_rows_.find(item);
  return it == item_rows_.end() ? 0 : it->second;
}

Batch BatchBuilder::build_inputs(std::span<const std::vector<std::string>> histories) const {
  const auto b = static_cast<std::int64_t>(histories.size());
  const std::int64_t per_item = vocab_.levels() + (item_slots_ ? 1 : 0);
  std::vector<std::vector<std::string>> clipped;
  std::int64_t n = 1;
  for (const auto& h : histories) {
    clipped.push_back(data::most_recent(h, h.size(), static_cast<std::size_t>(max_len_)));
    n = std::max<std::int64_t>(n, static_cast<std::int64_t>(clipped.back().size()) * per_item + 1);
  }
  Batch batch;
  batch.encoder_tokens = torch::zeros({b, n}, torch::kInt64);
  batch.encoder_items = torch::zeros({b, n}, torch::kInt64);
  auto tok = batch.encoder_tokens.accessor<std::int64_t, 2>();
  auto itm = batch.encoder_items.accessor<std::int64_t, 2>();
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& h = clipped[static_cast<std::size_t>(i)];
    std::int64_t pos = n - (static_cast<std::int64_t>(h.size()) * per_item + 1);
    for (const auto& item : h) {
      for (auto t : tokenizer::tokenize_target(item, ids_, vocab_)) tok[i][pos++] = t;
      if (item_slots_) {
        tok[i][pos] = kItemSlot;
        itm[i][pos] = item_row(item);
        ++pos;
      }
    }
    tok[i][pos] = TokenVocabulary::kEos;
    batch.history_lengths.push_back(static_cast<int>(h.size()));
  }
  return batch;
}

Batch BatchBuilder::build(std::span<const data::Sample> samples) const {
  std::vector<std::vector<std::string>> histories;
  for (const auto& s : samples) histories.push_back(s.history);
  Batch batch = build_inputs(histories);
  const auto b = static_cast<std::int64_t>(samples.size());
  const int levels = vocab_.levels();
  batch.decoder_tokens = torch::zeros({b, levels + 1}, torch::kInt64);
  batch.targets = torch::zeros({b, levels}, torch::kInt64);
  auto dec = batch.decoder_tokens.accessor<std::int64_t, 2>();
  auto tgt = batch.targets.accessor<std::int64_t, 2>();
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    auto y = tokenizer::tokenize_target(s.target, ids_, vocab_);
    dec[i][0] = TokenVocabulary::kBos;
    for (int l = 0; l < levels; ++l) {
      dec[i][l + 1] = y[static_cast<std::size_t>(l)];
      tgt[i][l] = y[static_cast<std::size_t>(l)];
    }
    batch.users.push_back(s.user_id);
    batch.target_items.push_back(s.target);
  }
  return batch;
}

}  // namespace discrec::recommender
