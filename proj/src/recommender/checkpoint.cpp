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

#include "discrec/recommender/checkpoint.hpp"

#include "discrec/common.hpp"
#include "discrec/serialization.hpp"
#include "json.hpp"

namespace discrec::recommender {

std::string checkpoint_manifest(const CheckpointInfo& info) {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::ordered_json::parse(config_to_json(info.config));
  j["id_map_hash"] = info.id_map_hash;
  j["train_seed"] = info.train_seed;
  j["lr"] = info.lr;
  return j.dump();
}

CheckpointInfo checkpoint_info_from_manifest(const std::string& manifest) {
  auto j = nlohmann::json::parse(manifest);
  CheckpointInfo info;
  info.config = config_from_json(j.at("config").dump());
  info.id_map_hash = j.at("id_map_hash");
  info.train_seed = j.at("train_seed");
  info.lr = j.at("lr");
  return info;
}

void save_recommender(const std::string& path, Recommender& model, const CheckpointInfo& info) {
  save_archive(path, archive_module(*model, checkpoint_manifest(info)));
}

LoadedRecommender load_recommender(const std::string& path) {
  auto archive = load_archive(path);
  LoadedRecommender out;
  out.info = checkpoint_info_from_manifest(archive.manifest);
  out.model = build_variant(out.info.config);
  restore_module(*out.model, archive);
  out.model->eval();
  return out;
}

}  // namespace discrec::recommender
