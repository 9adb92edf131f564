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
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "discrec/data/interactions.hpp"
#include "discrec/tokenizer/semantic_ids.hpp"

namespace discrec::recommender {

// Encoder sentinel for the extra item-ID position used by WithIE.
inline constexpr std::int64_t kItemSlot = -1;

struct Batch {
  torch::Tensor encoder_tokens;  // [B, N]: PAD* codes EOS (left padded)
  torch::Tensor encoder_items;   // [B, N]: item-table row at kItemSlot positions, else 0
  torch::Tensor decoder_tokens;  // [B, L+1]: BOS, Y_1..Y_L
  torch::Tensor targets;         // [B, L]
  std::vector<std::string> users;
  std::vector<std::string> target_items;
  std::vector<int> history_lengths;

  std::int64_t size() const { return encoder_tokens.size(0); }
};

class BatchBuilder {
 public:
  // `item_slots` inserts one kItemSlot position after each history item.
  BatchBuilder(const tokenizer::IdMap& ids, int levels, int codebook_size, int max_len,
               bool item_slots = false);

  Batch build(std::span<const data::Sample> samples) const;
  // Encoder tokens only (targets/decoder inputs left undefined).
  Batch build_inputs(std::span<const std::vector<std::string>> histories) const;

  const tokenizer::TokenVocabulary& vocab() const { return vocab_; }
  const tokenizer::IdMap& ids() const { return ids_; }
  std::int64_t item_row(const std::string& item) const;
  std::size_t item_count() const { return item_rows_.size(); }

 private:
  const tokenizer::IdMap& ids_;
  tokenizer::TokenVocabulary vocab_;
  int max_len_;
  bool item_slots_;
  std::map<std::string, std::int64_t> item_rows_;
};

}  // namespace discrec::recommender
