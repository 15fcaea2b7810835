// Copyright 2026 The Refgame Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef REFGAME_CHECKPOINT_H_
#define REFGAME_CHECKPOINT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "refgame/tensor.h"

namespace refgame {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Binary container, all integers little-endian:
//
//   bytes 0..7   magic "RGCKPT\0\1"
//   u32          format version (1)
//   u32          record count
//   per record:
//     u32        name length, then the UTF-8 name bytes
//     u32        rank, then rank x u64 dims
//     f64 x N    values, N = product of dims (IEEE-754 little-endian)
inline constexpr char kCheckpointMagic[8] = {'R', 'G', 'C', 'K',
                                             'P', 'T', '\0', '\1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void WriteCheckpoint(const std::string& path,
                     const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> ReadCheckpoint(const std::string& path);

std::string EncodeCheckpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> DecodeCheckpoint(std::string_view bytes);

// 64-bit FNV-1a.
std::uint64_t Fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t Fnv1a64(const double* values, std::size_t count,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string HexDigest(std::uint64_t digest);

}  // namespace refgame

#endif  // REFGAME_CHECKPOINT_H_
