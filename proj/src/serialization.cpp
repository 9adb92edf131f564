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

#include "discrec/serialization.hpp"

#include <cstring>

#include "discrec/common.hpp"

namespace discrec {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'C', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("checkpoint truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::uint8_t dtype_code(torch::Dtype t) {
  switch (t) {
    case torch::kFloat32: return 1;
    case torch::kFloat64: return 2;
    case torch::kInt64: return 3;
    default: throw Error("checkpoint: unsupported tensor dtype");
  }
}

torch::Dtype dtype_from(std::uint8_t code) {
  switch (code) {
    case 1: return torch::kFloat32;
    case 2: return torch::kFloat64;
    case 3: return torch::kInt64;
    default: throw Error("checkpoint: unknown dtype code");
  }
}

}  // namespace

const torch::Tensor& TensorArchive::at(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw Error("checkpoint has no tensor '" + name + "'");
}

std::string serialize(const TensorArchive& archive) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, archive.manifest.size());
  out += archive.manifest;
  put<std::uint64_t>(out, archive.tensors.size());
  for (const auto& [name, tensor] : archive.tensors) {
    auto t = tensor.detach().contiguous().cpu();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, dtype_code(t.scalar_type()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) put<std::int64_t>(out, d);
    out.append(static_cast<const char*>(t.data_ptr()), t.numel() * t.element_size());
  }
  return out;
}

TensorArchive deserialize(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw Error("not a checkpoint file (bad magic)");
  }
  if (in.get<std::uint32_t>() != kVersion) throw Error("unsupported checkpoint version");
  TensorArchive archive;
  archive.manifest = in.take(in.get<std::uint64_t>());
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = in.take(in.get<std::uint32_t>());
    auto dtype = dtype_from(in.get<std::uint8_t>());
    const auto ndim = in.get<std::uint32_t>();
    std::vector<std::int64_t> dims(ndim);
    for (auto& d : dims) d = in.get<std::int64_t>();
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    auto raw = in.take(static_cast<std::size_t>(t.numel() * t.element_size()));
    if (!raw.empty()) std::memcpy(t.data_ptr(), raw.data(), raw.size());
    archive.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!in.done()) throw Error("checkpoint has trailing bytes");
  return archive;
}

void save_archive(const std::string& path, const TensorArchive& archive) {
  write_file(path, serialize(archive));
}

TensorArchive load_archive(const std::string& path) { return deserialize(read_file(path)); }

TensorArchive archive_module(const torch::nn::Module& module, std::string manifest) {
  TensorArchive archive{std::move(manifest), {}};
  for (const auto& p : module.named_parameters(true)) {
    archive.tensors.emplace_back("param:" + p.key(), p.value().detach().clone());
  }
  for (const auto& b : module.named_buffers(true)) {
    archive.tensors.emplace_back("buffer:" + b.key(), b.value().detach().clone());
  }
  return archive;
}

void restore_module(torch::nn::Module& module, const TensorArchive& archive) {
  torch::NoGradGuard no_grad;
  std::size_t expected = 0;
  auto copy = [&](const std::string& name, torch::Tensor& dst) {
    const auto& src = archive.at(name);
    if (src.sizes() != dst.sizes()) throw Error("checkpoint shape mismatch for " + name);
    dst.copy_(src.to(dst.scalar_type()));
    ++expected;
  };
  for (auto& p : module.named_parameters(true)) copy("param:" + p.key(), p.value());
  for (auto& b : module.named_buffers(true)) copy("buffer:" + b.key(), b.value());
  if (expected != archive.tensors.size()) {
    throw Error("checkpoint holds tensors the model does not have");
  }
}

}  // namespace discrec
