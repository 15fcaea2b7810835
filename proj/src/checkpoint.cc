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

#include "refgame/checkpoint.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "refgame/errors.h"

namespace refgame {

namespace {

template <typename T>
void PutLittleEndian(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T Get() {
    Need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string_view Take(std::size_t n) {
    Need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string EncodeCheckpoint(const std::vector<NamedTensor>& tensors) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  PutLittleEndian<std::uint32_t>(out, kCheckpointVersion);
  PutLittleEndian<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, value] : tensors) {
    PutLittleEndian<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    PutLittleEndian<std::uint32_t>(out, static_cast<std::uint32_t>(value.rank()));
    for (std::size_t d : value.shape()) PutLittleEndian<std::uint64_t>(out, d);
    for (double x : value.data()) {
      PutLittleEndian<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
    }
  }
  return out;
}

std::vector<NamedTensor> DecodeCheckpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.Take(sizeof(kCheckpointMagic)) !=
      std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  const auto version = in.Get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = in.Get<std::uint32_t>();
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto name_len = in.Get<std::uint32_t>();
    std::string name(in.Take(name_len));
    const auto rank = in.Get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(in.Get<std::uint64_t>());
    std::vector<double> values(NumElements(shape));
    for (double& x : values) x = std::bit_cast<double>(in.Get<std::uint64_t>());
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint records");
  return out;
}

void WriteCheckpoint(const std::string& path,
                     const std::vector<NamedTensor>& tensors) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw InputError("cannot open " + path + " for writing");
  const std::string bytes = EncodeCheckpoint(tensors);
  file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!file) throw InputError("failed writing " + path);
}

std::vector<NamedTensor> ReadCheckpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw InputError("cannot open checkpoint " + path);
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return DecodeCheckpoint(buffer.str());
}

std::uint64_t Fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t Fnv1a64(const double* values, std::size_t count,
                      std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < count; ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string HexDigest(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace refgame
