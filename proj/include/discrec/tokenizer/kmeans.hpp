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

#include <torch/torch.h>

namespace discrec::tokenizer {

struct KMeansResult {
  torch::Tensor centroids;  // [k, d]
  torch::Tensor labels;     // [n] int64
  double inertia = 0.0;
};

// k-means++ seeding followed by Lloyd iterations. Deterministic for a given
// seed; when n < k the surplus centroids duplicate existing points.
KMeansResult kmeans(const torch::Tensor& points, int k, int max_iters, std::uint64_t seed);

// Index of the nearest row of `centroids` for every row of `points`; ties go
// to the lowest index.
torch::Tensor nearest(const torch::Tensor& points, const torch::Tensor& centroids);

}  // namespace discrec::tokenizer
