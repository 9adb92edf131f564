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
#include <functional>
#include <string>
#include <vector>

#include "discrec/data/interactions.hpp"
#include "discrec/recommender/batch.hpp"
#include "discrec/recommender/model.hpp"

namespace discrec::recommender {

struct TrainerConfig {
  int epochs = 20;
  int batch_size = 256;
  double lr = 1e-3;
  double weight_decay = 1e-2;
  std::uint64_t seed = 0;
  double max_grad_norm = 0.0;  // 0 disables clipping
};

struct EpochRecord {
  int epoch = 0;
  std::int64_t step = 0;  // optimizer steps taken so far
  double loss = 0.0;      // sample-weighted mean training loss of the epoch
  double lr = 0.0;
  std::uint64_t seed = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::string to_csv() const;  // epoch,step,loss,lr,seed
};

// Called after each epoch; returning false stops training early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

// Minimizes the summed token NLL over `samples` with AdamW. A non-finite loss
// restores the parameters of the last completed epoch and throws NumericError.
TrainLog train_recommender(Recommender& model, const BatchBuilder& builder,
                           const std::vector<data::Sample>& samples, const TrainerConfig& config,
                           const EpochCallback& on_epoch = {});

// Mean per-sample loss without gradient tracking (eval mode).
double evaluate_loss(Recommender& model, const BatchBuilder& builder,
                     const std::vector<data::Sample>& samples, int batch_size = 256);

}  // namespace discrec::recommender
