#pragma once
// Named-tensor checkpoint container: magic + version header, then per tensor
// a name, a shape, and a raw little-endian float payload.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "lexpred/common.hpp"

namespace lexpred {

struct NamedTensorData {
  std::vector<int> shape;
  std::vector<double> values;  // widened on load; written at source precision
};

using CheckpointMap = std::map<std::string, NamedTensorData>;

namespace ckpt_detail {

constexpr char kMagic[4] = {'L', 'X', 'T', 'C'};
constexpr uint32_t kVersion = 1;

inline void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<char*>(b), 4);
}

inline uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw RuntimeFailure("checkpoint: truncated header");
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
         (uint32_t(b[3]) << 24);
}

template <typename T>
void put_scalar(std::ostream& os, T v) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  if constexpr (sizeof(T) == 4) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
  } else {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u32(os, uint32_t(bits & 0xffffffffull));
    put_u32(os, uint32_t(bits >> 32));
  }
}

}  // namespace ckpt_detail

// Entries: (name, shape, flat values). Precision recorded in the header.
template <typename T>
void save_checkpoint(
    const std::string& path,
    const std::vector<std::tuple<std::string, std::vector<int>,
                                 const std::vector<T>*>>& entries) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw RuntimeFailure("checkpoint: cannot open " + path);
  os.write(ckpt_detail::kMagic, 4);
  ckpt_detail::put_u32(os, ckpt_detail::kVersion);
  ckpt_detail::put_u32(os, uint32_t(sizeof(T)));
  ckpt_detail::put_u32(os, uint32_t(entries.size()));
  for (auto& [name, shape, vals] : entries) {
    ckpt_detail::put_u32(os, uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    ckpt_detail::put_u32(os, uint32_t(shape.size()));
    for (int d : shape) ckpt_detail::put_u32(os, uint32_t(d));
    for (T v : *vals) ckpt_detail::put_scalar(os, v);
  }
  if (!os) throw RuntimeFailure("checkpoint: write failed for " + path);
}

inline CheckpointMap load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeFailure("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, ckpt_detail::kMagic, 4) != 0)
    throw ValidationError("checkpoint: bad magic in " + path);
  uint32_t version = ckpt_detail::get_u32(is);
  if (version != ckpt_detail::kVersion)
    throw ValidationError("checkpoint: unsupported version " +
                          std::to_string(version));
  uint32_t width = ckpt_detail::get_u32(is);
  if (width != 4 && width != 8)
    throw ValidationError("checkpoint: bad scalar width");
  uint32_t count = ckpt_detail::get_u32(is);
  CheckpointMap out;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = ckpt_detail::get_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    uint32_t rank = ckpt_detail::get_u32(is);
    NamedTensorData t;
    int64_t n = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      t.shape.push_back(int(ckpt_detail::get_u32(is)));
      n *= t.shape.back();
    }
    t.values.resize(size_t(n));
    for (int64_t j = 0; j < n; ++j) {
      if (width == 4) {
        uint32_t bits = ckpt_detail::get_u32(is);
        float f;
        std::memcpy(&f, &bits, 4);
        t.values[size_t(j)] = double(f);
      } else {
        uint32_t lo = ckpt_detail::get_u32(is);
        uint32_t hi = ckpt_detail::get_u32(is);
        uint64_t bits = uint64_t(lo) | (uint64_t(hi) << 32);
        double d;
        std::memcpy(&d, &bits, 8);
        t.values[size_t(j)] = d;
      }
    }
    if (!is) throw RuntimeFailure("checkpoint: truncated payload in " + path);
    out[name] = std::move(t);
  }
  return out;
}

}  // namespace lexpred
