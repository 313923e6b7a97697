#pragma once

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "fqmps/core/errors.hpp"
#include "fqmps/model/params.hpp"
#include "fqmps/mps/mps.hpp"

namespace fqmps::app {

/// Layout: [u32 version][u64 payload length][payload][u32 crc32 of payload],
/// all little-endian. The payload holds the model, a JSON metadata string
/// and the MPS.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams model;
  std::string metadata;  // JSON
  std::variant<Mps<double>, Mps<cplx>> state;

  bool is_complex() const { return std::holds_alternative<Mps<cplx>>(state); }
  Mps<cplx> complex_state() const {
    if (is_complex()) return std::get<Mps<cplx>>(state);
    const auto& r = std::get<Mps<double>>(state);
    Mps<cplx> c;
    c.center = r.center;
    c.norm_log = r.norm_log;
    for (const auto& s : r.sites) c.sites.push_back(s.template cast<cplx>());
    return c;
  }
};

namespace detail {

class ByteWriter {
 public:
  template <class U>
  void put(U v) {
    static_assert(std::is_trivially_copyable_v<U>);
    unsigned char b[sizeof(U)];
    std::memcpy(b, &v, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
    buf_.insert(buf_.end(), b, b + sizeof(U));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  std::vector<unsigned char>& bytes() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  ByteReader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}
  template <class U>
  U get() {
    need(sizeof(U));
    unsigned char b[sizeof(U)];
    std::memcpy(b, p_ + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
    pos_ += sizeof(U);
    U v;
    std::memcpy(&v, b, sizeof(U));
    return v;
  }
  std::string get_string() {
    const auto len = get<std::uint64_t>();
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  bool done() const { return pos_ == n_; }

 private:
  void need(std::uint64_t k) const {
    if (k > n_ - pos_) throw FormatError("checkpoint: payload ends early");
  }
  const unsigned char* p_;
  std::size_t n_, pos_ = 0;
};

inline std::uint32_t crc_of(const std::vector<unsigned char>& b, std::size_t off, std::size_t len) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (len > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(len, 1u << 30));
    c = crc32(c, b.data() + off, chunk);
    off += chunk;
    len -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

template <Scalar T>
void put_mps(ByteWriter& w, const Mps<T>& psi) {
  w.put<std::uint64_t>(psi.length());
  w.put<std::int64_t>(psi.center ? std::int64_t(*psi.center) : -1);
  w.put<double>(psi.norm_log);
  for (const auto& s : psi.sites) {
    for (std::size_t a = 0; a < 3; ++a) w.put<std::uint64_t>(s.extent(a));
    for (const T& v : s.values()) {
      if constexpr (std::is_same_v<T, cplx>) {
        w.put<double>(v.real());
        w.put<double>(v.imag());
      } else {
        w.put<double>(v);
      }
    }
  }
}

template <Scalar T>
Mps<T> get_mps(ByteReader& r) {
  Mps<T> psi;
  const auto len = r.get<std::uint64_t>();
  const auto center = r.get<std::int64_t>();
  psi.norm_log = r.get<double>();
  for (std::uint64_t n = 0; n < len; ++n) {
    Shape sh(3);
    for (auto& e : sh) e = r.get<std::uint64_t>();
    if (sh[0] == 0 || sh[1] == 0 || sh[2] == 0 || sh[0] * sh[1] * sh[2] > (std::size_t(1) << 32)) {
      throw FormatError("checkpoint: implausible tensor shape");
    }
    Tensor<T> t(sh);
    for (T& v : t.values()) {
      if constexpr (std::is_same_v<T, cplx>) {
        const double re = r.get<double>();
        v = cplx(re, r.get<double>());
      } else {
        v = r.get<double>();
      }
    }
    psi.sites.push_back(std::move(t));
  }
  if (center >= 0) psi.center = std::size_t(center);
  try {
    psi.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("checkpoint: stored state is inconsistent: ") + e.what());
  }
  return psi;
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter p;
  const auto& m = ck.model;
  p.put<double>(m.t);
  p.put<double>(m.V);
  p.put<std::int32_t>(m.L);
  p.put<std::int32_t>(m.N);
  p.put<std::int32_t>(m.q_max);
  p.put<std::uint8_t>(m.lambda.has_value());
  p.put<double>(m.lambda.value_or(0.0));
  p.put<std::uint8_t>(m.mode == Mode::hole);
  p.put<std::uint8_t>(m.projector_rep == ProjectorRep::truncated);
  p.put<std::uint8_t>(m.penalty_only);
  p.put<std::uint8_t>(m.literal_hopping);
  p.put_string(ck.metadata);
  p.put<std::uint8_t>(ck.is_complex());
  std::visit([&](const auto& psi) { detail::put_mps(p, psi); }, ck.state);

  detail::ByteWriter out;
  out.put<std::uint32_t>(kCheckpointVersion);
  out.put<std::uint64_t>(p.bytes().size());
  auto& o = out.bytes();
  o.insert(o.end(), p.bytes().begin(), p.bytes().end());
  out.put<std::uint32_t>(detail::crc_of(p.bytes(), 0, p.bytes().size()));
  return std::move(o);
}

inline Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4) throw FormatError("checkpoint: file too short for a header");
  detail::ByteReader head(bytes.data(), bytes.size());
  const auto version = head.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: format version " + std::to_string(version) + " cannot be read by this build (expects " +
                      std::to_string(kCheckpointVersion) + "); convert it with the build that wrote it");
  }
  if (bytes.size() < 16) throw FormatError("checkpoint: file too short for a header");
  const auto len = head.get<std::uint64_t>();
  if (len != bytes.size() - 16) {
    throw FormatError("checkpoint: length field says " + std::to_string(len) + " payload bytes, file has " +
                      std::to_string(bytes.size() - 16));
  }
  detail::ByteReader tail(bytes.data() + 12 + len, 4);
  if (tail.get<std::uint32_t>() != detail::crc_of(bytes, 12, len)) {
    throw FormatError("checkpoint: checksum mismatch");
  }
  detail::ByteReader r(bytes.data() + 12, len);
  Checkpoint ck;
  auto& m = ck.model;
  m.t = r.get<double>();
  m.V = r.get<double>();
  m.L = r.get<std::int32_t>();
  m.N = r.get<std::int32_t>();
  m.q_max = r.get<std::int32_t>();
  const bool has_lambda = r.get<std::uint8_t>();
  const double lambda = r.get<double>();
  if (has_lambda) m.lambda = lambda;
  m.mode = r.get<std::uint8_t>() ? Mode::hole : Mode::particle;
  m.projector_rep = r.get<std::uint8_t>() ? ProjectorRep::truncated : ProjectorRep::exact;
  m.penalty_only = r.get<std::uint8_t>();
  m.literal_hopping = r.get<std::uint8_t>();
  ck.metadata = r.get_string();
  if (r.get<std::uint8_t>()) {
    ck.state = detail::get_mps<cplx>(r);
  } else {
    ck.state = detail::get_mps<double>(r);
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes in payload");
  return ck;
}

/// Writes to a temporary sibling and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t size) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(static_cast<const char*>(data), std::streamsize(size));
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  write_file_atomic(path, bytes.data(), bytes.size());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("checkpoint: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace fqmps::app
