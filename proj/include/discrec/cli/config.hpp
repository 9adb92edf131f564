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

#include <map>
#include <string>
#include <vector>

#include "discrec/data/interactions.hpp"
#include "discrec/data/synthetic.hpp"
#include "discrec/evaluation/metrics.hpp"
#include "discrec/recommender/model.hpp"
#include "discrec/recommender/trainer.hpp"
#include "discrec/tokenizer/rqvae.hpp"

namespace discrec::cli {

// Flat `key = value` configuration. Every known key has a default; unknown
// keys are rejected so typos surface as ConfigError.
class Config {
 public:
  Config();  // all defaults

  // `#` starts a comment; blank lines are ignored.
  static Config parse(const std::string& text, const std::string& source = "<config>");
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& assignment);  // "key=value"
  // Replaces every *.seed value (DISCREC_SEED).
  void override_seeds(const std::string& seed);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  // Resolved configuration in the same text format (sorted keys).
  std::string manifest() const;
  // Manifest restricted to keys with one of the given prefixes.
  std::string manifest(const std::vector<std::string>& prefixes) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

data::SyntheticConfig synthetic_config(const Config& c);
tokenizer::RqVaeConfig rqvae_config(const Config& c, int input_dim);
recommender::RecommenderConfig recommender_config(const Config& c, int n_items);
recommender::TrainerConfig trainer_config(const Config& c, double lr);
evaluation::EvalOptions eval_options(const Config& c);

}  // namespace discrec::cli
