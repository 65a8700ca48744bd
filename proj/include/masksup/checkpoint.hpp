/* Copyright 2026 The MaskSup Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Single-file checkpoint archive.
//
// Layout (all integers little-endian):
//   8 bytes   magic "MSUPCKPT"
//   u32       format version
//   u64       manifest length, then the manifest as JSON text
//   for each array listed in the manifest, its float32 values in order
//   u32       CRC-32 of every preceding byte

#ifndef MASKSUP_CHECKPOINT_HPP_
#define MASKSUP_CHECKPOINT_HPP_

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "masksup/common.hpp"
#include "masksup/config.hpp"
#include "masksup/models.hpp"

namespace masksup {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'M', 'S', 'U', 'P',
                                             'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  UNet<float> net;
  ExperimentConfig config;
  std::int64_t step = 0;
  nlohmann::json manifest;
};

namespace checkpoint_internal {

template <typename V>
void Put(std::string& buf, V v) {
  char bytes[sizeof(V)];
  std::memcpy(bytes, &v, sizeof(V));
  buf.append(bytes, sizeof(V));
}

template <typename V>
V Get(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(V) > buf.size()) {
    throw ChecksumMismatch("checkpoint truncated");
  }
  V v;
  std::memcpy(&v, buf.data() + pos, sizeof(V));
  pos += sizeof(V);
  return v;
}

inline std::uint32_t Crc32(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace checkpoint_internal

inline std::string SerializeCheckpoint(const UNet<float>& net,
                                       const ExperimentConfig& cfg,
                                       std::int64_t step) {
  using namespace checkpoint_internal;
  const UNetSpec& spec = net.spec();
  nlohmann::json m;
  m["backbone_id"] = net.backbone_id();
  m["num_classes"] = spec.num_classes;
  m["in_channels"] = spec.in_channels;
  m["base_width"] = spec.base_width;
  m["depth"] = spec.depth;
  m["max_groups"] = spec.max_groups;
  m["seed"] = spec.seed;
  m["step"] = step;
  m["dtype"] = "float32";
  m["parameter_count"] = net.parameter_count();
  m["config"] = ToKeyValues(cfg);
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& a : net.parameters()) {
    arrays.push_back({{"name", a.name}, {"shape", a.shape}});
  }
  m["arrays"] = arrays;
  const std::string manifest = m.dump();

  std::string buf(kCheckpointMagic, sizeof(kCheckpointMagic));
  Put<std::uint32_t>(buf, kCheckpointVersion);
  Put<std::uint64_t>(buf, manifest.size());
  buf += manifest;
  for (const auto& a : net.parameters()) {
    buf.append(reinterpret_cast<const char*>(a.values.data()),
               a.values.size() * sizeof(float));
  }
  Put<std::uint32_t>(buf, Crc32(buf.data(), buf.size()));
  return buf;
}

inline Checkpoint DeserializeCheckpoint(const std::string& buf) {
  using namespace checkpoint_internal;
  constexpr std::size_t kHeader = sizeof(kCheckpointMagic) + 4 + 8;
  if (buf.size() < kHeader + 4) throw ChecksumMismatch("checkpoint truncated");
  const std::size_t body = buf.size() - 4;
  std::size_t tail = body;
  const auto stored = Get<std::uint32_t>(buf, tail);
  if (stored != Crc32(buf.data(), body)) {
    throw ChecksumMismatch("checkpoint checksum mismatch");
  }
  if (std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw ChecksumMismatch("not a checkpoint file");
  }
  std::size_t pos = sizeof(kCheckpointMagic);
  const auto version = Get<std::uint32_t>(buf, pos);
  if (version != kCheckpointVersion) {
    throw InvalidArgument("unsupported checkpoint version " +
                          std::to_string(version));
  }
  const auto mlen = Get<std::uint64_t>(buf, pos);
  if (pos + mlen > body) throw ChecksumMismatch("checkpoint truncated");
  Checkpoint ck{UNet<float>(UNetSpec{}), {}, 0,
                nlohmann::json::parse(buf.substr(pos, mlen))};
  pos += mlen;
  const auto& m = ck.manifest;
  UNetSpec spec;
  spec.num_classes = m.at("num_classes").get<int>();
  spec.in_channels = m.at("in_channels").get<int>();
  spec.base_width = m.at("base_width").get<int>();
  spec.depth = m.at("depth").get<int>();
  spec.max_groups = m.at("max_groups").get<int>();
  spec.seed = m.at("seed").get<std::uint64_t>();
  ck.net = UNet<float>(spec);
  ck.step = m.at("step").get<std::int64_t>();
  ck.config = ConfigFromKeyValues(m.at("config").get<KeyValues>());
  const auto& arrays = m.at("arrays");
  auto& params = ck.net.parameters();
  if (arrays.size() != params.size()) {
    throw InvalidArgument("checkpoint array list does not match the network");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (arrays[i].at("name").get<std::string>() != params[i].name ||
        arrays[i].at("shape").get<std::vector<int>>() != params[i].shape) {
      throw InvalidArgument("checkpoint array '" +
                            arrays[i].at("name").get<std::string>() +
                            "' does not match the network");
    }
    const std::size_t bytes = params[i].values.size() * sizeof(float);
    if (pos + bytes > body) throw ChecksumMismatch("checkpoint truncated");
    std::memcpy(params[i].values.data(), buf.data() + pos, bytes);
    pos += bytes;
  }
  if (pos != body) throw ChecksumMismatch("trailing bytes in checkpoint");
  return ck;
}

inline void SaveCheckpoint(const UNet<float>& net, const ExperimentConfig& cfg,
                           std::int64_t step, const std::string& path) {
  const std::string buf = SerializeCheckpoint(net, cfg, step);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write checkpoint '" + path + "'");
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw Error("short write to checkpoint '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw Error("cannot move checkpoint into place at '" + path + "'");
  }
}

inline Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return DeserializeCheckpoint(ss.str());
}

}  // namespace masksup

#endif  // MASKSUP_CHECKPOINT_HPP_
