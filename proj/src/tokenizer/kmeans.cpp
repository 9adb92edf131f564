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

#include "discrec/tokenizer/kmeans.hpp"

#include <random>

#include "discrec/common.hpp"

namespace discrec::tokenizer {

torch::Tensor nearest(const torch::Tensor& points, const torch::Tensor& centroids) {
  auto d = (points.unsqueeze(1) - centroids.unsqueeze(0)).pow(2).sum(-1);
  return d.argmin(1);
}

KMeansResult kmeans(const torch::Tensor& points_in, int k, int max_iters, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  if (k < 1) throw ConfigError("kmeans: k must be >= 1");
  auto points = points_in.detach().to(torch::kFloat64).contiguous();
  const auto n = points.size(0);
  if (n == 0) throw Error("kmeans: no points");
  std::mt19937_64 rng(seed);

  std::vector<std::int64_t> chosen;
  chosen.push_back(std::uniform_int_distribution<std::int64_t>(0, n - 1)(rng));
  auto min_d2 = (points - points[chosen[0]]).pow(2).sum(-1);
  while (static_cast<int>(chosen.size()) < k) {
    auto acc = min_d2.data_ptr<double>();
    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) total += acc[i];
    std::int64_t pick = 0;
    if (total <= 0.0) {
      pick = std::uniform_int_distribution<std::int64_t>(0, n - 1)(rng);
    } else {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      double run = 0.0;
      pick = n - 1;
      for (std::int64_t i = 0; i < n; ++i) {
        run += acc[i];
        if (u < run) {
          pick = i;
          break;
        }
      }
    }
    chosen.push_back(pick);
    min_d2 = torch::minimum(min_d2, (points - points[pick]).pow(2).sum(-1));
  }
  auto centroids = points.index_select(0, torch::tensor(chosen, torch::kInt64)).clone();

  torch::Tensor labels;
  for (int it = 0; it < max_iters; ++it) {
    auto new_labels = nearest(points, centroids);
    if (labels.defined() && torch::equal(labels, new_labels)) break;
    labels = new_labels;
    auto sums = torch::zeros_like(centroids).index_add_(0, labels, points);
    auto counts = torch::zeros({k}, points.options()).index_add_(
        0, labels, torch::ones({n}, points.options()));
    auto nonempty = counts > 0;
    auto updated = sums / counts.clamp_min(1.0).unsqueeze(1);
    centroids = torch::where(nonempty.unsqueeze(1), updated, centroids);
  }
  labels = nearest(points, centroids);
  KMeansResult result;
  result.inertia = (points - centroids.index_select(0, labels)).pow(2).sum().item<double>();
  result.centroids = centroids.to(points_in.scalar_type());
  result.labels = labels;
  return result;
}

}  // namespace discrec::tokenizer
