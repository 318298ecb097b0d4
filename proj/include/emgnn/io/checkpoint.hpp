#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "emgnn/error.hpp"

namespace emgnn::io {

inline constexpr std::string_view kCheckpointMagic = "EMGNN1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;

  bool operator==(const NamedTensor&) const = default;
};

struct CheckpointData {
  std::vector<std::string> vocab;
  std::vector<NamedTensor> tensors;

  bool operator==(const CheckpointData&) const = default;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

inline void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

inline void put_str(std::string& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}

  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) throw CheckpointError(std::string("checkpoint truncated in ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + k])) << (8 * k);
    pos_ += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + k])) << (8 * k);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(b_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::uint32_t crc32_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

/// Magic, version, vocabulary block, tensor blocks, then CRC32 of every byte
/// before it. All integers are u32 and all payloads f64, little-endian.
inline std::string encode_checkpoint(const CheckpointData& c) {
  std::string out(kCheckpointMagic);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(c.vocab.size()));
  for (const auto& t : c.vocab) detail::put_str(out, t);
  detail::put_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    std::size_t n = 1;
    for (auto d : t.dims) n *= d;
    if (n != t.values.size()) throw CheckpointError("checkpoint: tensor '" + t.name + "' dims do not match payload");
    detail::put_str(out, t.name);
    detail::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) detail::put_u32(out, d);
    for (double v : t.values) detail::put_f64(out, v);
  }
  detail::put_u32(out, crc32_of(out));
  return out;
}

inline CheckpointData decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() + 8 || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw CheckpointError("checkpoint: bad magic");
  }
  const auto body = bytes.substr(0, bytes.size() - 4);
  detail::Reader tail(bytes.substr(bytes.size() - 4));
  if (tail.u32("crc") != crc32_of(body)) throw CheckpointError("checkpoint: CRC mismatch");

  detail::Reader r(body.substr(kCheckpointMagic.size()));
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  CheckpointData c;
  const std::uint32_t nv = r.u32("vocabulary");
  for (std::uint32_t k = 0; k < nv; ++k) c.vocab.push_back(r.str("vocabulary"));
  const std::uint32_t nt = r.u32("tensor count");
  for (std::uint32_t k = 0; k < nt; ++k) {
    NamedTensor t;
    t.name = r.str("tensor name");
    const std::uint32_t rank = r.u32("rank");
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.dims.push_back(r.u32("dims"));
      n *= t.dims.back();
      if (n > bytes.size()) throw CheckpointError("checkpoint: tensor '" + t.name + "' larger than file");
    }
    r.need(n * 8, "payload");
    t.values.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) t.values.push_back(r.f64("payload"));
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes before CRC");
  return c;
}

}  // namespace emgnn::io
