// Copyright 2026 The hrdet Authors.
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

#include "hrdet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace hrdet {

namespace {

constexpr char kMagic[8] = {'H', 'R', 'D', 'E', 'T', 'C', 'K', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

}  // namespace

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  header["meta"] = ckpt.meta;
  header["tensors"] = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const NamedTensor& t : ckpt.tensors) {
    header["tensors"].push_back({{"name", t.name}, {"shape", t.value.shape()}, {"offset", offset}});
    offset += t.value.size();
  }
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw CheckpointError("checkpoint: cannot write " + tmp);
    os.write(kMagic, sizeof(kMagic));
    os.write(reinterpret_cast<const char*>(&len), sizeof(len));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const NamedTensor& t : ckpt.tensors) {
      os.write(reinterpret_cast<const char*>(t.value.data()), static_cast<std::streamsize>(t.value.size() * sizeof(float)));
    }
    if (!os) throw CheckpointError("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot open " + path);
  char magic[8];
  std::uint64_t len = 0;
  is.read(magic, sizeof(magic));
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CheckpointError("checkpoint: bad magic in " + path);
  if (len > (1u << 30)) throw CheckpointError("checkpoint: implausible header length in " + path);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw CheckpointError("checkpoint: truncated header in " + path);
  Checkpoint out;
  try {
    const nlohmann::json header = nlohmann::json::parse(text);
    out.meta = header.at("meta");
    for (const auto& t : header.at("tensors")) {
      NamedTensor nt{t.at("name").get<std::string>(), Tensor<float>(t.at("shape").get<std::vector<int>>())};
      is.read(reinterpret_cast<char*>(nt.value.data()), static_cast<std::streamsize>(nt.value.size() * sizeof(float)));
      if (!is) throw CheckpointError("checkpoint: truncated payload at '" + nt.name + "' in " + path);
      out.tensors.push_back(std::move(nt));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: bad header: ") + e.what());
  }
  return out;
}

}  // namespace hrdet
