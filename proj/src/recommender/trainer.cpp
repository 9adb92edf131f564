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

#include "discrec/recommender/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <sstream>

#include "discrec/common.hpp"
#include "discrec/serialization.hpp"

namespace discrec::recommender {

std::string TrainLog::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,step,loss,lr,seed\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.step << ',' << e.loss << ',' << e.lr << ',' << e.seed << '\n';
  }
  return out.str();
}

TrainLog train_recommender(Recommender& model, const BatchBuilder& builder,
                           const std::vector<data::Sample>& samples, const TrainerConfig& config,
                           const EpochCallback& on_epoch) {
  if (samples.empty()) throw ConfigError("train_recommender: no training samples");
  if (config.batch_size <= 0 || config.epochs < 0) throw ConfigError("train_recommender: bad schedule");
  torch::manual_seed(config.seed);
  torch::optim::AdamW optimizer(model->parameters(),
                                torch::optim::AdamWOptions(config.lr).weight_decay(config.weight_decay));
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainLog log;
  auto last_good = archive_module(*model, "");
  std::int64_t step = 0;
  model->train();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<data::Sample> chunk;
      chunk.reserve(end - start);
      for (auto i = start; i < end; ++i) chunk.push_back(samples[order[i]]);
      auto batch = builder.build(chunk);
      auto loss = model->loss(batch);
      const double value = loss.item<double>();
      if (!std::isfinite(value)) {
        restore_module(*model, last_good);
        std::ostringstream msg;
        msg << "non-finite recommender loss at epoch " << epoch << " step " << step + 1
            << "; restored parameters from epoch " << epoch - 1;
        throw NumericError(msg.str());
      }
      optimizer.zero_grad();
      loss.backward();
      if (config.max_grad_norm > 0) {
        torch::nn::utils::clip_grad_norm_(model->parameters(), config.max_grad_norm);
      }
      optimizer.step();
      ++step;
      total += value * static_cast<double>(chunk.size());
    }
    EpochRecord record{epoch, step, total / static_cast<double>(samples.size()), config.lr, config.seed};
    log.epochs.push_back(record);
    last_good = archive_module(*model, "");
    if (on_epoch) {
      model->eval();
      const bool keep_going = on_epoch(record);
      model->train();
      if (!keep_going) break;
    }
  }
  model->eval();
  return log;
}

double evaluate_loss(Recommender& model, const BatchBuilder& builder,
                     const std::vector<data::Sample>& samples, int batch_size) {
  if (samples.empty()) throw ConfigError("evaluate_loss: empty split");
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  double total = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const auto end = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
    auto batch = builder.build(std::span(samples).subspan(start, end - start));
    total += model->per_sample_loss(batch).sum().item<double>();
  }
  model->train(was_training);
  return total / static_cast<double>(samples.size());
}

}  // namespace discrec::recommender
