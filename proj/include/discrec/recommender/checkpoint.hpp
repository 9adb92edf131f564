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
#include <string>

#include "discrec/recommender/model.hpp"

namespace discrec::recommender {

struct CheckpointInfo {
  RecommenderConfig config;
  std::string id_map_hash;
  std::uint64_t train_seed = 0;
  double lr = 0.0;
};

std::string checkpoint_manifest(const CheckpointInfo& info);
CheckpointInfo checkpoint_info_from_manifest(const std::string& manifest);

void save_recommender(const std::string& path, Recommender& model, const CheckpointInfo& info);

struct LoadedRecommender {
  Recommender model{nullptr};
  CheckpointInfo info;
};
// Throws MissingArtifactError when the file is absent.
LoadedRecommender load_recommender(const std::string& path);

}  // namespace discrec::recommender
