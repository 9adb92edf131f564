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

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "discrec/cli/commands.hpp"
#include "discrec/common.hpp"

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const discrec::ConfigError*>(&e) || dynamic_cast<const discrec::ParseError*>(&e)) return 2;
  if (dynamic_cast<const discrec::NumericError*>(&e)) return 3;
  if (dynamic_cast<const discrec::MissingArtifactError*>(&e)) return 4;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrec: generative recommendation with semantic IDs"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string work_dir = "discrec_out";
  bool force = false;
  bool quiet = false;
  app.add_option("-c,--config", config_path, "key = value config file");
  app.add_option("-s,--set", overrides, "override, key=value (repeatable)");
  app.add_option("-w,--work-dir", work_dir, "artifact directory");
  app.add_flag("-f,--force", force, "retrain stages that are up to date");
  app.add_flag("-q,--quiet", quiet, "no progress output");

  auto* prepare = app.add_subcommand("prepare-data", "filter, sequence and split interactions");
  auto* tok = app.add_subcommand("train-tokenizer", "train the residual-quantized autoencoder");
  auto* assign = app.add_subcommand("assign-ids", "assign collision-free semantic IDs");
  auto* train = app.add_subcommand("train-rec", "train the recommender (learning-rate sweep)");
  auto* evaluate = app.add_subcommand("evaluate", "test-split metrics for rec.variant");
  auto* ablate = app.add_subcommand("ablate", "train and evaluate a list of variants");
  std::string variants;
  ablate->add_option("--variants", variants, "comma-separated variants (default: ablate.variants)");
  auto* analyze = app.add_subcommand("analyze", "embedding-norm profiles and attention heatmaps");
  std::string which = "all";
  analyze->add_option("which", which, "norms | heatmaps | all");

  CLI11_PARSE(app, argc, argv);

  try {
    discrec::configure_determinism();
    discrec::cli::Context ctx;
    ctx.config = config_path.empty() ? discrec::cli::Config() : discrec::cli::Config::load(config_path);
    for (const auto& o : overrides) ctx.config.apply_override(o);
    if (const char* seed = std::getenv("DISCREC_SEED")) ctx.config.override_seeds(seed);
    ctx.work_dir = work_dir;
    ctx.force = force;
    if (!quiet) ctx.log = [](const std::string& line) { std::cerr << line << '\n'; };

    if (*prepare) discrec::cli::cmd_prepare_data(ctx);
    if (*tok) discrec::cli::cmd_train_tokenizer(ctx);
    if (*assign) discrec::cli::cmd_assign_ids(ctx);
    if (*train) discrec::cli::cmd_train_rec(ctx);
    if (*evaluate) std::cout << discrec::cli::cmd_evaluate(ctx).to_json();
    if (*ablate) {
      if (!variants.empty()) ctx.config.set("ablate.variants", variants);
      discrec::cli::cmd_ablate(ctx, ctx.config.get_list("ablate.variants"));
    }
    if (*analyze) discrec::cli::cmd_analyze(ctx, which);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
