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

#include "discrec/decoding/beam_search.hpp"

#include <algorithm>

#include "discrec/common.hpp"
#include "json.hpp"

namespace discrec::decoding {

using recommender::EncoderState;
using recommender::Recommender;
using tokenizer::PrefixTree;
using tokenizer::TokenVocabulary;

namespace {

struct Hypothesis {
  std::vector<int> path;
  double score = 0.0;
};

bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.path < b.path;
}

// Log-probabilities of the next token for every (lexicographically sorted)
// prefix, computed in one decoder call.
torch::Tensor step_log_probs(Recommender& model, const EncoderState& state,
                             const std::vector<Hypothesis>& hyps, const TokenVocabulary& vocab) {
  const auto p = static_cast<std::int64_t>(hyps.size());
  const auto t = static_cast<std::int64_t>(hyps.front().path.size());
  std::vector<std::int64_t> flat;
  flat.reserve(p * (t + 1));
  for (const auto& h : hyps) {
    flat.push_back(TokenVocabulary::kBos);
    for (std::int64_t l = 0; l < t; ++l) flat.push_back(vocab.token(static_cast<int>(l), h.path[l]));
  }
  auto prefixes = torch::tensor(flat, torch::kInt64).view({p, t + 1});
  return model->next_token_log_probs(state.repeat(p), prefixes).to(torch::kFloat64).contiguous();
}

RankedPrediction finish(std::vector<Hypothesis> done, const PrefixTree& trie) {
  std::sort(done.begin(), done.end(), ranks_before);
  RankedPrediction out;
  for (auto& h : done) {
    auto item = trie.lookup(h.path);
    if (!item) throw Error("decoder produced a path outside the catalog");
    out.items.push_back(*item);
    out.scores.push_back(h.score);
    out.paths.push_back(std::move(h.path));
  }
  return out;
}

void check_state(const EncoderState& state, const PrefixTree& trie) {
  if (trie.empty()) throw Error("decoding: empty prefix tree");
  if (state.hidden.size(0) != 1) throw Error("decoding: expected a batch-1 encoder state");
}

}  // namespace

EncoderState encode_history(Recommender& model, const recommender::BatchBuilder& builder,
                            const std::vector<std::string>& history) {
  torch::NoGradGuard no_grad;
  std::vector<std::vector<std::string>> one{history};
  return model->encode(builder.build_inputs(one));
}

RankedPrediction constrained_beam_search(Recommender& model, const EncoderState& state,
                                         const PrefixTree& trie, int beam_size) {
  check_state(state, trie);
  if (beam_size < 1) throw ConfigError("beam_size must be >= 1");
  torch::NoGradGuard no_grad;
  const TokenVocabulary vocab(trie.levels(), model->config().codebook_size);
  std::vector<Hypothesis> beam{Hypothesis{}};
  for (int level = 0; level < trie.levels(); ++level) {
    std::sort(beam.begin(), beam.end(),
              [](const Hypothesis& a, const Hypothesis& b) { return a.path < b.path; });
    auto logp = step_log_probs(model, state, beam, vocab);
    auto acc = logp.accessor<double, 2>();
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < beam.size(); ++i) {
      for (int code : trie.children(beam[i].path)) {
        Hypothesis h{beam[i].path, beam[i].score + acc[i][vocab.token(level, code)]};
        h.path.push_back(code);
        next.push_back(std::move(h));
      }
    }
    std::sort(next.begin(), next.end(), ranks_before);
    if (next.size() > static_cast<std::size_t>(beam_size)) next.resize(beam_size);
    beam = std::move(next);
  }
  return finish(std::move(beam), trie);
}

RankedPrediction exhaustive_rank(Recommender& model, const EncoderState& state,
                                 const PrefixTree& trie) {
  check_state(state, trie);
  torch::NoGradGuard no_grad;
  const TokenVocabulary vocab(trie.levels(), model->config().codebook_size);
  // Every trie prefix of the current length, ascending.
  std::vector<Hypothesis> frontier{Hypothesis{}};
  for (int level = 0; level < trie.levels(); ++level) {
    auto logp = step_log_probs(model, state, frontier, vocab);
    auto acc = logp.accessor<double, 2>();
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      for (int code : trie.children(frontier[i].path)) {
        Hypothesis h{frontier[i].path, frontier[i].score + acc[i][vocab.token(level, code)]};
        h.path.push_back(code);
        next.push_back(std::move(h));
      }
    }
    frontier = std::move(next);
  }
  return finish(std::move(frontier), trie);
}

std::string prediction_json(const std::string& user, const RankedPrediction& prediction) {
  nlohmann::ordered_json j;
  j["user"] = user;
  j["ranked_items"] = prediction.items;
  j["scores"] = prediction.scores;
  return j.dump();
}

}  // namespace discrec::decoding
