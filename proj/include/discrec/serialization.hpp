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

#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace discrec {

// Flat archive of named tensors plus a free-form manifest (JSON text).
// Layout (little-endian host order):
//   "DSCRCKPT" | u32 version | u64 manifest_len | manifest bytes | u64 count |
//   per tensor: u32 name_len | name | u8 dtype | u32 ndim | i64 dims[ndim] | raw data
// Writing is a pure function of the contents, so save -> load -> save is
// byte-identical.
struct TensorArchive {
  std::string manifest;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  const torch::Tensor& at(const std::string& name) const;
};

std::string serialize(const TensorArchive& archive);
TensorArchive deserialize(const std::string& bytes);
void save_archive(const std::string& path, const TensorArchive& archive);
TensorArchive load_archive(const std::string& path);

// Snapshot of a module's parameters and buffers in registration order.
TensorArchive archive_module(const torch::nn::Module& module, std::string manifest);
// Copies archived values into `module`; names and shapes must match exactly.
void restore_module(torch::nn::Module& module, const TensorArchive& archive);

}  // namespace discrec
