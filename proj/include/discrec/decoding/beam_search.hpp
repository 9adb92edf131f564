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

#include <string>
#include <vector>

#include "discrec/recommender/batch.hpp"
#include "discrec/recommender/model.hpp"
#include "discrec/tokenizer/semantic_ids.hpp"

namespace discrec::decoding {

struct RankedPrediction {
  std::vector<std::string> items;
  std::vector<double> scores;              // summed per-step log-probabilities
  std::vector<std::vector<int>> paths;     // code paths, one per item
};

// Batch-1 encoder state for one history.
recommender::EncoderState encode_history(recommender::Recommender& model,
                                         const recommender::BatchBuilder& builder,
                                         const std::vector<std::string>& history);

// Beam search over L steps where each hypothesis can only extend to trie
// children. Scores use the full-vocabulary log-softmax. Results are ordered
// by score (descending) then code path (ascending); at most `beam_size`.
RankedPrediction constrained_beam_search(recommender::Recommender& model,
                                         const recommender::EncoderState& state,
                                         const tokenizer::PrefixTree& trie, int beam_size = 20);

// Scores every catalog item; same ordering rule.
RankedPrediction exhaustive_rank(recommender::Recommender& model,
                                 const recommender::EncoderState& state,
                                 const tokenizer::PrefixTree& trie);

// {"user": ..., "ranked_items": [...], "scores": [...]}
std::string prediction_json(const std::string& user, const RankedPrediction& prediction);

}  // namespace discrec::decoding
