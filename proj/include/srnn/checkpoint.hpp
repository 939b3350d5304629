// Copyright 2026 The srnn-traffic Authors.
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

// Topology-free checkpoint container.
//
// Layout (every integer and float little-endian, floats as IEEE-754 binary64):
//
//   magic           8 bytes   "SRNNCKPT"
//   version         u32       kCheckpointVersion
//   node_hidden     u32
//   spatial_hidden  u32
//   temporal_hidden u32
//   embed           u32
//   dropout         f64
//   scaler_min      f64       km/h
//   scaler_max      f64       km/h
//   meta_len        u32, followed by meta_len bytes of UTF-8 (free-form JSON)
//   tensor_count    u32       always 16
//   tensor_count times:
//     name_len u32, name bytes ("<group>.<weight|bias>")
//     rows u32, cols u32, rows*cols f64 in row-major order
//   checksum        u64       FNV-1a 64 over every preceding byte
//
// No graph information is stored; any RoadGraph can be bound after loading.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>

#include "srnn/dataset.hpp"
#include "srnn/errors.hpp"
#include "srnn/model.hpp"

namespace srnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointMagic = "SRNNCKPT";

struct Checkpoint {
  Hyperparams hp;
  Scaler scaler;
  SrnnParams params;
  std::string meta;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class ByteWriter {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string& bytes() { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str(std::size_t max_len = 1 << 20) {
    const std::uint32_t n = u32();
    if (n > max_len) throw LoadError("checkpoint: string length " + std::to_string(n) + " too large");
    return std::string(take(n));
  }
  std::string_view take(std::size_t n) {
    if (in_.size() - pos_ < n) throw LoadError("checkpoint: unexpected end of file");
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::uint64_t get(int n) {
    auto s = take(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  ck.params.for_each_tensor([](std::string_view g, std::string_view t, const Matrix& m) {
    if (!m.allFinite()) {
      throw ContractError("checkpoint: non-finite values in " + std::string(g) + "." + std::string(t));
    }
  });
  detail::ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ck.hp.node_hidden));
  w.u32(static_cast<std::uint32_t>(ck.hp.spatial_hidden));
  w.u32(static_cast<std::uint32_t>(ck.hp.temporal_hidden));
  w.u32(static_cast<std::uint32_t>(ck.hp.embed));
  w.f64(ck.hp.dropout);
  w.f64(ck.scaler.min());
  w.f64(ck.scaler.max());
  w.str(ck.meta);
  w.u32(16);
  ck.params.for_each_tensor([&](std::string_view group, std::string_view tensor, const Matrix& m) {
    w.str(std::string(group) + "." + std::string(tensor));
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Index k = 0; k < m.size(); ++k) w.f64(m.data()[k]);
  });
  w.u64(detail::fnv1a(w.bytes()));
  return std::move(w.bytes());
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() + 8) throw LoadError("checkpoint: file too short");
  const auto body = bytes.substr(0, bytes.size() - 8);
  detail::ByteReader tail(bytes.substr(bytes.size() - 8));
  if (tail.u64() != detail::fnv1a(body)) throw LoadError("checkpoint: checksum mismatch (corrupt file)");

  detail::ByteReader r(body);
  if (r.take(kCheckpointMagic.size()) != kCheckpointMagic) throw LoadError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw LoadError("checkpoint: version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  ck.hp.node_hidden = r.u32();
  ck.hp.spatial_hidden = r.u32();
  ck.hp.temporal_hidden = r.u32();
  ck.hp.embed = r.u32();
  ck.hp.dropout = r.f64();
  try {
    ck.hp.validate();
    const double lo = r.f64();
    const double hi = r.f64();
    ck.scaler = Scaler(lo, hi);
  } catch (const LoadError&) {
    throw;
  } catch (const Error& e) {
    throw LoadError(std::string("checkpoint: ") + e.what());
  }
  ck.meta = r.str();
  if (r.u32() != 16) throw LoadError("checkpoint: expected 16 tensors");
  ck.params = SrnnParams::zeros(ck.hp);
  ck.params.for_each_tensor([&](std::string_view group, std::string_view tensor, Matrix& m) {
    const std::string expected = std::string(group) + "." + std::string(tensor);
    const std::string name = r.str(256);
    if (name != expected) throw LoadError("checkpoint: tensor '" + name + "' where '" + expected + "' expected");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows != m.rows() || cols != m.cols()) {
      throw LoadError("checkpoint: tensor '" + name + "' has shape " + shape_str(rows, cols) +
                      ", hyperparameters imply " + shape_str(m));
    }
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = r.f64();
  });
  if (r.remaining() != 0) throw LoadError("checkpoint: trailing bytes after tensors");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string bytes = encode_checkpoint(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace srnn
