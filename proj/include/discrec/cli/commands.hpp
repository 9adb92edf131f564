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

#include <functional>
#include <string>
#include <vector>

#include "discrec/cli/config.hpp"
#include "discrec/data/interactions.hpp"
#include "discrec/data/synthetic.hpp"
#include "discrec/evaluation/metrics.hpp"
#include "discrec/tokenizer/semantic_ids.hpp"

namespace discrec::cli {

struct Context {
  Config config;
  std::string work_dir = "discrec_out";
  bool force = false;  // retrain stages whose outputs are up to date
  std::function<void(const std::string&)> log = [](const std::string&) {};
};

// Artifact locations under the work directory.
struct Paths {
  explicit Paths(const std::string& work_dir);
  std::string data, tokenizer, ids, rec, eval, ablate, analyze;
  std::string rec_variant(const std::string& variant) const;
  std::string eval_variant(const std::string& variant) const;
  std::string analyze_variant(const std::string& variant) const;
};

struct PreparedData {
  data::DatasetSplit split;
  data::EmbeddingTable embeddings;
  data::DatasetStats stats;
};

PreparedData cmd_prepare_data(const Context& ctx);
// Reads the prepare-data outputs; MissingArtifactError when absent.
PreparedData load_prepared_data(const Context& ctx);

void cmd_train_tokenizer(const Context& ctx);
tokenizer::IdAssignment cmd_assign_ids(const Context& ctx);

struct TrainRecResult {
  double best_lr = 0.0;
  double best_valid_recall10 = 0.0;
  bool skipped = false;
};
TrainRecResult cmd_train_rec(const Context& ctx);

evaluation::MetricTable cmd_evaluate(const Context& ctx);

struct AblationRow {
  std::string variant;
  evaluation::MetricTable table;
};
// Trains (when needed) and evaluates each variant; writes the comparison table.
std::vector<AblationRow> cmd_ablate(const Context& ctx, const std::vector<std::string>& variants);

// which: norms | heatmaps | all
void cmd_analyze(const Context& ctx, const std::string& which);

// Samples restricted to items that received a semantic ID.
std::vector<data::Sample> restrict_to_ids(const std::vector<data::Sample>& samples,
                                          const tokenizer::IdMap& ids);

}  // namespace discrec::cli
