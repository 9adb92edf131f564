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

#include "discrec/cli/config.hpp"

#include <charconv>
#include <sstream>

#include "discrec/common.hpp"

namespace discrec::cli {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d{
      // data
      {"data.source", "synthetic"},  // synthetic | file
      {"data.interactions", ""},
      {"data.embeddings", ""},
      {"data.kcore", "5"},
      {"data.split", "leave_one_out"},  // leave_one_out | user_random
      {"data.split_ratios", "0.8,0.1,0.1"},
      {"data.max_len", "20"},
      {"data.seed", "42"},
      {"synthetic.n_users", "500"},
      {"synthetic.n_items", "200"},
      {"synthetic.embed_dim", "64"},
      {"synthetic.hierarchy_depth", "3"},
      {"synthetic.branching", "4"},
      {"synthetic.level_decay", "0.5"},
      {"synthetic.transition_sharpness", "3"},
      {"synthetic.semantic_affinity", "0"},
      {"synthetic.seq_len_min", "5"},
      {"synthetic.seq_len_max", "15"},
      // tokenizer
      {"tokenizer.levels", "4"},
      {"tokenizer.codebook_size", "256"},
      {"tokenizer.code_dim", "32"},
      {"tokenizer.hidden_layers", "3"},
      {"tokenizer.beta", "0.25"},
      {"tokenizer.steps", "20000"},
      {"tokenizer.batch_size", "1024"},
      {"tokenizer.lr", "0.001"},
      {"tokenizer.weight_decay", "0.0001"},
      {"tokenizer.dead_code_steps", "1000"},
      {"tokenizer.kmeans_init", "true"},
      {"tokenizer.standardize", "true"},
      {"tokenizer.seed", "7"},
      // recommender
      {"rec.variant", "DiscRec"},
      {"rec.layers", "4"},
      {"rec.model_dim", "128"},
      {"rec.heads", "6"},
      {"rec.head_dim", "64"},
      {"rec.ffn_dim", "1024"},
      {"rec.dropout", "0.1"},
      {"rec.branch_heads", "2"},
      {"rec.branch_head_dim", "64"},
      {"rec.branch_ffn_dim", "1024"},
      {"rec.branch_dropout", "0.1"},
      {"rec.share_branch", "false"},
      {"rec.lr_grid", "0.0005,0.001"},
      {"rec.batch_size", "256"},
      {"rec.epochs", "20"},
      {"rec.weight_decay", "0.01"},
      {"rec.seed", "11"},
      // decoding / evaluation / analysis
      {"decode.beam_size", "20"},
      {"decode.exhaustive", "false"},
      {"eval.ks", "5,10"},
      {"eval.length_buckets", "4,5,6,7,8,9,10"},
      {"eval.popularity_percentiles", "20,40,60,80,100"},
      {"ablate.variants", "DiscRec,WoIPE,WoTF,WoGating,Baseline"},
      {"analyze.crop", "28"},
      {"analyze.anchor", "start"},
      {"analyze.images", "false"},
      {"analyze.samples", "256"},
  };
  return d;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return value;
}

}  // namespace

Config::Config() : values_(defaults()) {}

Config Config::parse(const std::string& text, const std::string& source) {
  Config c;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, number, "expected key = value");
    try {
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const MissingArtifactError&) {
    throw ConfigError("config file not found: " + path);
  }
  return parse(text, path);
}

void Config::set(const std::string& key, const std::string& value) {
  if (!defaults().count(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::override_seeds(const std::string& seed) {
  parse_number<std::uint64_t>("DISCREC_SEED", seed);
  for (auto& [key, value] : values_) {
    if (key.size() >= 5 && key.compare(key.size() - 5, 5, ".seed") == 0) value = trim(seed);
  }
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

int Config::get_int(const std::string& key) const { return parse_number<int>(key, get(key)); }
std::uint64_t Config::get_u64(const std::string& key) const {
  return parse_number<std::uint64_t>(key, get(key));
}
double Config::get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }

bool Config::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& part : split(get(key), ',')) {
    auto t = trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::vector<int> Config::get_ints(const std::string& key) const {
  std::vector<int> out;
  for (const auto& p : get_list(key)) out.push_back(parse_number<int>(key, p));
  return out;
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& p : get_list(key)) out.push_back(parse_number<double>(key, p));
  return out;
}

std::string Config::manifest() const { return manifest({""}); }

std::string Config::manifest(const std::vector<std::string>& prefixes) const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) {
    for (const auto& p : prefixes) {
      if (key.rfind(p, 0) == 0) {
        out << key << " = " << value << '\n';
        break;
      }
    }
  }
  return out.str();
}

data::SyntheticConfig synthetic_config(const Config& c) {
  data::SyntheticConfig s;
  s.n_users = c.get_int("synthetic.n_users");
  s.n_items = c.get_int("synthetic.n_items");
  s.embed_dim = c.get_int("synthetic.embed_dim");
  s.hierarchy_depth = c.get_int("synthetic.hierarchy_depth");
  s.branching = c.get_int("synthetic.branching");
  s.level_decay = c.get_double("synthetic.level_decay");
  s.transition_sharpness = c.get_double("synthetic.transition_sharpness");
  s.semantic_affinity = c.get_double("synthetic.semantic_affinity");
  s.seq_len_min = c.get_int("synthetic.seq_len_min");
  s.seq_len_max = c.get_int("synthetic.seq_len_max");
  s.seed = c.get_u64("data.seed");
  return s;
}

tokenizer::RqVaeConfig rqvae_config(const Config& c, int input_dim) {
  tokenizer::RqVaeConfig r;
  r.input_dim = input_dim;
  r.levels = c.get_int("tokenizer.levels");
  r.codebook_size = c.get_int("tokenizer.codebook_size");
  r.code_dim = c.get_int("tokenizer.code_dim");
  r.hidden_layers = c.get_int("tokenizer.hidden_layers");
  r.beta = c.get_double("tokenizer.beta");
  r.steps = c.get_int("tokenizer.steps");
  r.batch_size = c.get_int("tokenizer.batch_size");
  r.lr = c.get_double("tokenizer.lr");
  r.weight_decay = c.get_double("tokenizer.weight_decay");
  r.dead_code_steps = c.get_int("tokenizer.dead_code_steps");
  r.kmeans_init = c.get_bool("tokenizer.kmeans_init");
  r.standardize = c.get_bool("tokenizer.standardize");
  r.seed = c.get_u64("tokenizer.seed");
  r.validate();
  return r;
}

recommender::RecommenderConfig recommender_config(const Config& c, int n_items) {
  recommender::RecommenderConfig r;
  r.variant = recommender::parse_variant(c.get("rec.variant"));
  r.levels = c.get_int("tokenizer.levels");
  r.codebook_size = c.get_int("tokenizer.codebook_size");
  r.max_len = c.get_int("data.max_len");
  r.n_items = n_items;
  r.backbone.layers = c.get_int("rec.layers");
  r.backbone.model_dim = c.get_int("rec.model_dim");
  r.backbone.heads = c.get_int("rec.heads");
  r.backbone.head_dim = c.get_int("rec.head_dim");
  r.backbone.ffn_dim = c.get_int("rec.ffn_dim");
  r.backbone.dropout = c.get_double("rec.dropout");
  r.branch.heads = c.get_int("rec.branch_heads");
  r.branch.head_dim = c.get_int("rec.branch_head_dim");
  r.branch.ffn_dim = c.get_int("rec.branch_ffn_dim");
  r.branch.dropout = c.get_double("rec.branch_dropout");
  r.share_branch = c.get_bool("rec.share_branch");
  r.seed = c.get_u64("rec.seed");
  r.validate();
  return r;
}

recommender::TrainerConfig trainer_config(const Config& c, double lr) {
  recommender::TrainerConfig t;
  t.epochs = c.get_int("rec.epochs");
  t.batch_size = c.get_int("rec.batch_size");
  t.lr = lr;
  t.weight_decay = c.get_double("rec.weight_decay");
  t.seed = c.get_u64("rec.seed");
  if (t.epochs < 1 || t.batch_size < 1) throw ConfigError("rec.epochs and rec.batch_size must be >= 1");
  return t;
}

evaluation::EvalOptions eval_options(const Config& c) {
  evaluation::EvalOptions o;
  o.ks = c.get_ints("eval.ks");
  o.beam_size = c.get_int("decode.beam_size");
  o.exhaustive = c.get_bool("decode.exhaustive");
  if (o.beam_size < 1) throw ConfigError("decode.beam_size must be >= 1");
  return o;
}

}  // namespace discrec::cli
