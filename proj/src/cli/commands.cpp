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

#include "discrec/cli/commands.hpp"

#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>

#include "discrec/common.hpp"
#include "discrec/decoding/beam_search.hpp"
#include "discrec/diagnostics/diagnostics.hpp"
#include "discrec/recommender/checkpoint.hpp"
#include "discrec/recommender/trainer.hpp"
#include "discrec/serialization.hpp"
#include "json.hpp"

namespace discrec::cli {

namespace fs = std::filesystem;
using recommender::BatchBuilder;
using recommender::Recommender;

namespace {

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void require(const std::string& path, const std::string& hint) {
  if (!fs::exists(path)) throw MissingArtifactError("missing " + path + "; " + hint);
}

std::string file_hash(const std::string& path) { return hex64(fnv1a64(read_file(path))); }

void write_manifest(const Context& ctx, const std::string& dir) {
  fs::create_directories(dir);
  write_file(join(dir, "manifest.cfg"), ctx.config.manifest());
}

bool up_to_date(const Context& ctx, const std::string& dir, const std::string& output,
                const std::string& stamp) {
  if (ctx.force) return false;
  const auto stamp_path = join(dir, "stamp");
  return fs::exists(output) && fs::exists(stamp_path) && read_file(stamp_path) == stamp;
}

std::string items_json(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& i : items) out += i + '\n';
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) out.push_back(trim(line));
  }
  return out;
}

torch::Tensor embedding_matrix(const std::vector<std::string>& items, const data::EmbeddingTable& table) {
  if (items.empty()) throw ConfigError("empty item catalog");
  const auto dim = static_cast<std::int64_t>(table.at(items.front()).size());
  auto out = torch::empty({static_cast<std::int64_t>(items.size()), dim}, torch::kFloat64);
  auto acc = out.accessor<double, 2>();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& row = table.at(items[i]);
    if (static_cast<std::int64_t>(row.size()) != dim) throw ConfigError("embedding width differs for " + items[i]);
    for (std::int64_t d = 0; d < dim; ++d) acc[static_cast<std::int64_t>(i)][d] = row[static_cast<std::size_t>(d)];
  }
  return out.to(torch::kFloat32);
}

struct IdContext {
  tokenizer::IdMap ids;
  std::string hash;
};

IdContext load_ids(const Context& ctx) {
  const Paths paths(ctx.work_dir);
  const auto id_path = join(paths.ids, "id_map.jsonl");
  require(id_path, "run assign-ids before training or evaluating the recommender");
  const auto source = join(paths.ids, "tokenizer_hash");
  const auto ckpt = join(paths.tokenizer, "rqvae.ckpt");
  if (fs::exists(source) && fs::exists(ckpt) && read_file(source) != file_hash(ckpt)) {
    throw MissingArtifactError("ID map at " + id_path +
                               " is stale (tokenizer checkpoint changed); rerun assign-ids");
  }
  IdContext out;
  out.ids = tokenizer::id_map_from_jsonl(read_file(id_path));
  out.hash = file_hash(id_path);
  if (out.ids.empty()) throw ConfigError("ID map is empty");
  const int levels = ctx.config.get_int("tokenizer.levels");
  for (const auto& [item, id] : out.ids) {
    if (static_cast<int>(id.codes.size()) != levels) {
      throw ConfigError("ID map has " + std::to_string(id.codes.size()) +
                        " levels but tokenizer.levels = " + std::to_string(levels));
    }
    break;
  }
  return out;
}

struct LoadedModel {
  Recommender model{nullptr};
  recommender::CheckpointInfo info;
};

LoadedModel load_trained(const Context& ctx, const IdContext& ids) {
  const Paths paths(ctx.work_dir);
  const auto variant = ctx.config.get("rec.variant");
  recommender::parse_variant(variant);
  const auto ckpt = join(paths.rec_variant(variant), "model.ckpt");
  require(ckpt, "run train-rec for variant " + variant + " first");
  auto loaded = recommender::load_recommender(ckpt);
  if (loaded.info.id_map_hash != ids.hash) {
    throw MissingArtifactError("recommender checkpoint " + ckpt +
                               " was trained against a different ID map; rerun train-rec");
  }
  return {loaded.model, loaded.info};
}

std::string metrics_row_csv_header(const std::vector<int>& ks) {
  std::string out = "variant";
  for (int k : ks) out += ",recall@" + std::to_string(k) + ",ndcg@" + std::to_string(k);
  return out + '\n';
}

}  // namespace

Paths::Paths(const std::string& work_dir)
    : data(join(work_dir, "data")),
      tokenizer(join(work_dir, "tokenizer")),
      ids(join(work_dir, "ids")),
      rec(join(work_dir, "rec")),
      eval(join(work_dir, "eval")),
      ablate(join(work_dir, "ablate")),
      analyze(join(work_dir, "analyze")) {}

std::string Paths::rec_variant(const std::string& variant) const { return join(rec, variant); }
std::string Paths::eval_variant(const std::string& variant) const { return join(eval, variant); }
std::string Paths::analyze_variant(const std::string& variant) const { return join(analyze, variant); }

std::vector<data::Sample> restrict_to_ids(const std::vector<data::Sample>& samples,
                                          const tokenizer::IdMap& ids) {
  std::vector<data::Sample> out;
  for (const auto& s : samples) {
    if (!ids.count(s.target)) continue;
    data::Sample kept{s.user_id, {}, s.target};
    for (const auto& h : s.history) {
      if (ids.count(h)) kept.history.push_back(h);
    }
    out.push_back(std::move(kept));
  }
  return out;
}

PreparedData cmd_prepare_data(const Context& ctx) {
  const auto& c = ctx.config;
  std::vector<data::Interaction> interactions;
  data::EmbeddingTable embeddings;
  const auto source = c.get("data.source");
  if (source == "synthetic") {
    auto synthetic = data::generate_synthetic(synthetic_config(c));
    interactions = std::move(synthetic.interactions);
    embeddings = std::move(synthetic.embeddings);
  } else if (source == "file") {
    if (c.get("data.interactions").empty() || c.get("data.embeddings").empty()) {
      throw ConfigError("data.source = file needs data.interactions and data.embeddings");
    }
    interactions = data::load_interactions(c.get("data.interactions"));
    embeddings = data::load_embeddings(c.get("data.embeddings"));
  } else {
    throw ConfigError("data.source must be synthetic or file, got '" + source + "'");
  }

  auto filtered = data::kcore_filter(interactions, c.get_int("data.kcore"));
  auto sequences = data::build_sequences(filtered);
  const auto max_len = static_cast<std::size_t>(c.get_int("data.max_len"));
  PreparedData out;
  const auto split_kind = c.get("data.split");
  if (split_kind == "leave_one_out") {
    out.split = data::leave_one_out_split(sequences, max_len);
  } else if (split_kind == "user_random") {
    auto r = c.get_doubles("data.split_ratios");
    if (r.size() != 3) throw ConfigError("data.split_ratios needs three values");
    out.split = data::user_random_split(sequences, {r[0], r[1], r[2]}, c.get_u64("data.seed"), max_len);
  } else {
    throw ConfigError("data.split must be leave_one_out or user_random");
  }
  if (out.split.train.empty() || out.split.valid.empty() || out.split.test.empty()) {
    throw ConfigError("data preparation produced an empty split; relax data.kcore or add data");
  }
  std::vector<std::string> missing;
  for (const auto& item : out.split.item_catalog) {
    auto it = embeddings.find(item);
    if (it == embeddings.end()) {
      missing.push_back(item);
    } else {
      out.embeddings.emplace(item, it->second);
    }
  }
  if (!missing.empty()) {
    throw ConfigError(std::to_string(missing.size()) + " catalog items have no embedding (first: " +
                      missing.front() + ")");
  }
  out.stats = data::compute_stats(sequences);

  const Paths paths(ctx.work_dir);
  fs::create_directories(paths.data);
  write_file(join(paths.data, "interactions.tsv"), data::format_interactions(filtered));
  write_file(join(paths.data, "embeddings.txt"), data::format_embeddings(out.embeddings));
  write_file(join(paths.data, "train.jsonl"), data::samples_to_jsonl(out.split.train));
  write_file(join(paths.data, "valid.jsonl"), data::samples_to_jsonl(out.split.valid));
  write_file(join(paths.data, "test.jsonl"), data::samples_to_jsonl(out.split.test));
  write_file(join(paths.data, "catalog.txt"), items_json(out.split.item_catalog));
  write_file(join(paths.data, "dropped_users.txt"), items_json(out.split.dropped_users));
  nlohmann::ordered_json stats;
  stats["users"] = out.stats.users;
  stats["items"] = out.stats.items;
  stats["interactions"] = out.stats.interactions;
  stats["sparsity"] = out.stats.sparsity;
  stats["avg_length"] = out.stats.avg_length;
  stats["train_samples"] = out.split.train.size();
  stats["valid_samples"] = out.split.valid.size();
  stats["test_samples"] = out.split.test.size();
  write_file(join(paths.data, "stats.json"), stats.dump(2) + "\n");
  write_manifest(ctx, paths.data);
  ctx.log("prepare-data: " + std::to_string(out.stats.users) + " users, " +
          std::to_string(out.stats.items) + " items, " + std::to_string(out.stats.interactions) +
          " interactions");
  return out;
}

PreparedData load_prepared_data(const Context& ctx) {
  const Paths paths(ctx.work_dir);
  const std::string hint = "run prepare-data first";
  for (const auto* name : {"train.jsonl", "valid.jsonl", "test.jsonl", "catalog.txt", "embeddings.txt"}) {
    require(join(paths.data, name), hint);
  }
  PreparedData out;
  out.split.train = data::samples_from_jsonl(read_file(join(paths.data, "train.jsonl")));
  out.split.valid = data::samples_from_jsonl(read_file(join(paths.data, "valid.jsonl")));
  out.split.test = data::samples_from_jsonl(read_file(join(paths.data, "test.jsonl")));
  out.split.item_catalog = read_lines(join(paths.data, "catalog.txt"));
  out.embeddings = data::load_embeddings(join(paths.data, "embeddings.txt"));
  return out;
}

void cmd_train_tokenizer(const Context& ctx) {
  const Paths paths(ctx.work_dir);
  auto data = load_prepared_data(ctx);
  const auto ckpt = join(paths.tokenizer, "rqvae.ckpt");
  const auto stamp = hex64(fnv1a64(ctx.config.manifest({"tokenizer."}) +
                                   file_hash(join(paths.data, "embeddings.txt"))));
  if (up_to_date(ctx, paths.tokenizer, ckpt, stamp)) {
    ctx.log("train-tokenizer: up to date, skipping (use --force to retrain)");
    return;
  }
  auto matrix = embedding_matrix(data.split.item_catalog, data.embeddings);
  auto config = rqvae_config(ctx.config, static_cast<int>(matrix.size(1)));
  tokenizer::RqVae model(config);
  auto log = tokenizer::train_tokenizer(model, matrix, ctx.log);
  fs::create_directories(paths.tokenizer);
  save_rqvae(ckpt, model);
  std::ostringstream csv;
  csv.precision(10);
  csv << "step,loss,reconstruction\n";
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    csv << log.steps[i] << ',' << log.loss[i] << ',' << log.reconstruction[i] << '\n';
  }
  write_file(join(paths.tokenizer, "train_log.csv"), csv.str());
  write_manifest(ctx, paths.tokenizer);
  write_file(join(paths.tokenizer, "stamp"), stamp);
  ctx.log("train-tokenizer: final loss " + std::to_string(log.final_loss) + ", " +
          std::to_string(log.dead_code_resets) + " dead-code resets");
}

tokenizer::IdAssignment cmd_assign_ids(const Context& ctx) {
  const Paths paths(ctx.work_dir);
  auto data = load_prepared_data(ctx);
  const auto ckpt = join(paths.tokenizer, "rqvae.ckpt");
  require(ckpt, "run train-tokenizer before assign-ids");
  auto model = tokenizer::load_rqvae(ckpt);
  if (model->config().levels != ctx.config.get_int("tokenizer.levels") ||
      model->config().codebook_size != ctx.config.get_int("tokenizer.codebook_size")) {
    throw MissingArtifactError("tokenizer checkpoint does not match tokenizer.levels/codebook_size; "
                               "rerun train-tokenizer");
  }
  auto assignment = tokenizer::assign_ids(data.split.item_catalog, data.embeddings, model);
  fs::create_directories(paths.ids);
  write_file(join(paths.ids, "id_map.jsonl"), tokenizer::id_map_to_jsonl(assignment.ids));
  write_file(join(paths.ids, "collisions.json"), tokenizer::collision_report_json(assignment));
  write_file(join(paths.ids, "tokenizer_hash"), file_hash(ckpt));
  write_manifest(ctx, paths.ids);
  ctx.log("assign-ids: " + std::to_string(assignment.ids.size()) + " items, " +
          std::to_string(assignment.report.reassigned.size()) + " reassigned, " +
          std::to_string(assignment.report.unassignable.size()) + " unassignable");
  return assignment;
}

TrainRecResult cmd_train_rec(const Context& ctx) {
  const Paths paths(ctx.work_dir);
  auto ids = load_ids(ctx);
  auto data = load_prepared_data(ctx);
  const auto& c = ctx.config;
  auto rc = recommender_config(c, static_cast<int>(ids.ids.size()));
  const auto variant = recommender::variant_name(rc.variant);
  const auto dir = paths.rec_variant(variant);
  const auto ckpt = join(dir, "model.ckpt");
  const auto stamp = hex64(fnv1a64(
      c.manifest({"rec.", "data.max_len", "tokenizer.levels", "tokenizer.codebook_size", "eval.ks",
                  "decode."}) +
      ids.hash));
  TrainRecResult result;
  if (up_to_date(ctx, dir, ckpt, stamp)) {
    ctx.log("train-rec[" + variant + "]: up to date, skipping (use --force to retrain)");
    result.skipped = true;
    return result;
  }
  auto train = restrict_to_ids(data.split.train, ids.ids);
  auto valid = restrict_to_ids(data.split.valid, ids.ids);
  if (train.empty() || valid.empty()) throw ConfigError("no train/valid samples with semantic IDs");
  BatchBuilder builder(ids.ids, rc.levels, rc.codebook_size, rc.max_len,
                       rc.variant == recommender::Variant::kWithIE);
  tokenizer::PrefixTree trie(ids.ids, rc.levels);
  auto options = eval_options(c);
  options.ks = {10};

  const auto grid = c.get_doubles("rec.lr_grid");
  if (grid.empty()) throw ConfigError("rec.lr_grid is empty");
  std::optional<TensorArchive> best;
  std::string log_csv;
  nlohmann::ordered_json sweep = nlohmann::ordered_json::array();
  for (double lr : grid) {
    auto model = recommender::build_variant(rc);
    auto tc = trainer_config(c, lr);
    auto log = recommender::train_recommender(model, builder, train, tc, [&](const auto& e) {
      ctx.log("train-rec[" + variant + "] lr=" + std::to_string(lr) + " epoch " +
              std::to_string(e.epoch) + " loss " + std::to_string(e.loss));
      return true;
    });
    auto csv = log.to_csv();
    log_csv += log_csv.empty() ? csv : csv.substr(csv.find('\n') + 1);
    const double recall = evaluation::evaluate(model, builder, trie, valid, options).table.at("recall@10");
    sweep.push_back({{"lr", lr}, {"valid_recall@10", recall}});
    ctx.log("train-rec[" + variant + "] lr=" + std::to_string(lr) + " valid recall@10 " +
            std::to_string(recall));
    if (!best || recall > result.best_valid_recall10) {
      result.best_lr = lr;
      result.best_valid_recall10 = recall;
      recommender::CheckpointInfo info{rc, ids.hash, tc.seed, lr};
      best = archive_module(*model, recommender::checkpoint_manifest(info));
    }
  }
  fs::create_directories(dir);
  save_archive(ckpt, *best);
  write_file(join(dir, "train_log.csv"), log_csv);
  nlohmann::ordered_json summary;
  summary["sweep"] = sweep;
  summary["best_lr"] = result.best_lr;
  summary["best_valid_recall@10"] = result.best_valid_recall10;
  write_file(join(dir, "valid_metrics.json"), summary.dump(2) + "\n");
  write_manifest(ctx, dir);
  write_file(join(dir, "stamp"), stamp);
  return result;
}

evaluation::MetricTable cmd_evaluate(const Context& ctx) {
  const Paths paths(ctx.work_dir);
  auto ids = load_ids(ctx);
  auto data = load_prepared_data(ctx);
  auto loaded = load_trained(ctx, ids);
  const auto& rc = loaded.info.config;
  BatchBuilder builder(ids.ids, rc.levels, rc.codebook_size, rc.max_len,
                       rc.variant == recommender::Variant::kWithIE);
  tokenizer::PrefixTree trie(ids.ids, rc.levels);
  auto test = restrict_to_ids(data.split.test, ids.ids);
  if (test.empty()) throw ConfigError("evaluation: empty test split");
  const auto& c = ctx.config;
  auto buckets = evaluation::length_buckets(test, c.get_ints("eval.length_buckets"));
  for (auto& [name, group] :
       evaluation::popularity_buckets(test, data.split, c.get_doubles("eval.popularity_percentiles"))) {
    buckets[name] = std::move(group);
  }
  const auto options = eval_options(c);
  auto result = evaluation::evaluate(loaded.model, builder, trie, test, options, buckets);

  const auto variant = recommender::variant_name(rc.variant);
  const auto dir = paths.eval_variant(variant);
  fs::create_directories(dir);
  write_file(join(dir, "metrics.json"), result.table.to_json());
  write_file(join(dir, "metrics.csv"), result.table.to_csv());
  std::string predictions;
  for (std::size_t i = 0; i < test.size(); ++i) {
    predictions += decoding::prediction_json(test[i].user_id, result.predictions[i]) + '\n';
  }
  write_file(join(dir, "predictions.jsonl"), predictions);
  const auto popular = evaluation::popularity_ranking(data.split);
  std::vector<std::vector<std::string>> pop_rankings(test.size(), popular);
  write_file(join(dir, "popularity_metrics.json"),
             evaluation::score_rankings(pop_rankings, test, options.ks).to_json());
  write_manifest(ctx, dir);
  ctx.log("evaluate[" + variant + "]: recall@10 " +
          std::to_string(result.table.overall.metrics.count("recall@10")
                             ? result.table.at("recall@10")
                             : 0.0));
  return result.table;
}

std::vector<AblationRow> cmd_ablate(const Context& ctx, const std::vector<std::string>& variants) {
  if (variants.empty()) throw ConfigError("ablate: no variants given");
  for (const auto& v : variants) recommender::parse_variant(v);
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    Context sub = ctx;
    sub.config.set("rec.variant", v);
    cmd_train_rec(sub);
    rows.push_back({v, cmd_evaluate(sub)});
  }
  const Paths paths(ctx.work_dir);
  fs::create_directories(paths.ablate);
  const auto ks = eval_options(ctx.config).ks;
  std::ostringstream csv;
  csv.precision(17);
  csv << metrics_row_csv_header(ks);
  nlohmann::ordered_json json = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    csv << row.variant;
    nlohmann::ordered_json j;
    j["variant"] = row.variant;
    for (int k : ks) {
      for (const auto* m : {"recall@", "ndcg@"}) {
        const auto name = m + std::to_string(k);
        csv << ',' << row.table.at(name);
        j[name] = row.table.at(name);
      }
    }
    csv << '\n';
    json.push_back(j);
  }
  write_file(join(paths.ablate, "table.csv"), csv.str());
  write_file(join(paths.ablate, "table.json"), json.dump(2) + "\n");
  write_manifest(ctx, paths.ablate);
  return rows;
}

void cmd_analyze(const Context& ctx, const std::string& which) {
  if (which != "norms" && which != "heatmaps" && which != "all") {
    throw ConfigError("analyze: expected norms, heatmaps or all, got '" + which + "'");
  }
  const Paths paths(ctx.work_dir);
  auto ids = load_ids(ctx);
  auto loaded = load_trained(ctx, ids);
  auto& model = loaded.model;
  const auto& rc = loaded.info.config;
  const auto variant = recommender::variant_name(rc.variant);
  const auto dir = paths.analyze_variant(variant);
  const auto& c = ctx.config;

  std::vector<diagnostics::NormProfile> profiles;
  nlohmann::ordered_json trends;
  if (which != "heatmaps") {
    const auto ckpt = join(paths.tokenizer, "rqvae.ckpt");
    require(ckpt, "run train-tokenizer first");
    auto rqvae = tokenizer::load_rqvae(ckpt);
    profiles.push_back(diagnostics::norm_by_index(ids.ids, diagnostics::NormSource::kCode, nullptr,
                                                  rqvae->codebooks()));
    if (recommender::uses_dual_branch(rc.variant)) {
      profiles.push_back(
          diagnostics::norm_by_index(ids.ids, diagnostics::NormSource::kSemanticToken, &model));
      profiles.push_back(
          diagnostics::norm_by_index(ids.ids, diagnostics::NormSource::kCollaborativeToken, &model));
    } else {
      diagnostics::NormProfile raw{"semantic_token", diagnostics::mean_norm_by_index(
                                                         diagnostics::token_table_rows(model, ids.ids))};
      profiles.push_back(raw);
      ctx.log("analyze: variant " + variant + " has no collaborative branch; profile skipped");
    }
    for (const auto& p : profiles) {
      const double rho = p.values.size() >= 2 ? diagnostics::level_trend(p) : 0.0;
      trends[p.source] = std::isnan(rho) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(rho);
      ctx.log("analyze: " + p.source + " norm-vs-level spearman " + std::to_string(rho));
    }
  }
  diagnostics::HeatmapBundle heatmaps;
  if (which != "norms") {
    auto data = load_prepared_data(ctx);
    auto test = restrict_to_ids(data.split.test, ids.ids);
    const auto limit = static_cast<std::size_t>(std::max(1, c.get_int("analyze.samples")));
    if (test.size() > limit) test.resize(limit);
    BatchBuilder builder(ids.ids, rc.levels, rc.codebook_size, rc.max_len,
                         rc.variant == recommender::Variant::kWithIE);
    const auto anchor_name = c.get("analyze.anchor");
    if (anchor_name != "start" && anchor_name != "end") throw ConfigError("analyze.anchor must be start or end");
    heatmaps = diagnostics::attention_heatmaps(
        model, builder, test, c.get_int("analyze.crop"),
        anchor_name == "start" ? diagnostics::CropAnchor::kStart : diagnostics::CropAnchor::kEnd);
    if (heatmaps.clamped) {
      ctx.log("analyze: crop " + std::to_string(heatmaps.requested_crop) + " clamped to " +
              std::to_string(heatmaps.crop));
    }
  }
  auto files = diagnostics::export_profiles(profiles, heatmaps, dir, c.get_bool("analyze.images"));
  nlohmann::ordered_json summary;
  summary["norm_level_spearman"] = trends;
  summary["heatmap_crop"] = heatmaps.crop;
  summary["heatmap_crop_clamped"] = heatmaps.clamped;
  summary["files"] = files;
  write_file(join(dir, "summary.json"), summary.dump(2) + "\n");
  write_manifest(ctx, dir);
}

}  // namespace discrec::cli
