#pragma once

// BTSF v1: binary template store.
//
//   header (52 bytes)
//     magic     4 bytes  "BTSF"
//     version   u32 LE   1
//     dim       u32 LE   >= 2
//     count     u64 LE   number of records
//     frs_name  32 bytes UTF-8, zero-padded
//   record (12 + 4*dim bytes), repeated count times
//     subject_id u32 LE | sample_id u32 LE | role u8 | 3 zero bytes | dim x f32 LE
//
// The layout is fixed little-endian regardless of host byte order.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "morphmap/error.hpp"
#include "morphmap/template_core.hpp"

namespace morphmap {

enum class Role : std::uint8_t { Reference = 0, Probe = 1, MorphVariant = 2 };

inline constexpr std::string_view to_string(Role role) {
  switch (role) {
    case Role::Reference: return "reference";
    case Role::Probe: return "probe";
    case Role::MorphVariant: return "morph";
  }
  return "unknown";
}

struct TemplateRecord {
  std::uint32_t subject_id = 0;
  std::uint32_t sample_id = 0;
  Role role = Role::Reference;
  std::vector<float> vector;

  bool operator==(const TemplateRecord&) const = default;
  auto key() const { return std::tuple(subject_id, sample_id, role); }
};

struct TemplateStore {
  std::string frs_name;
  std::uint32_t dim = 0;
  std::vector<TemplateRecord> records;

  bool operator==(const TemplateStore&) const = default;
};

inline constexpr std::array<char, 4> kStoreMagic = {'B', 'T', 'S', 'F'};
inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr std::size_t kFrsNameBytes = 32;
inline constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 8 + kFrsNameBytes;
inline constexpr double kStoredNormTolerance = 1e-4;

inline constexpr std::size_t record_bytes(std::uint32_t dim) { return 12 + 4 * std::size_t{dim}; }

inline TemplateRecord make_record(std::uint32_t subject, std::uint32_t sample, Role role,
                                  const Template& t) {
  TemplateRecord r{subject, sample, role, {}};
  r.vector.reserve(t.dim());
  for (double v : t.values()) r.vector.push_back(static_cast<float>(v));
  return r;
}

inline Template to_template(const TemplateRecord& r) {
  return Template::from_span(std::span<const float>(r.vector));
}

namespace detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::byte>& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(static_cast<std::byte>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::span<const char> bytes) {
    for (char c : bytes) u8(static_cast<std::uint8_t>(c));
  }

 private:
  std::vector<std::byte>& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> in) : in_(in) {}

  std::size_t remaining() const { return in_.size() - pos_; }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(in_[pos_++])} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(in_[pos_++])} << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw Error(ErrorCode::TruncatedFile, "unexpected end of data");
  }

  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Serializes a store. Validates shared dim, key uniqueness, finiteness and
/// unit norm (f32 tolerance) before emitting anything.
inline std::vector<std::byte> encode_store(const TemplateStore& store) {
  if (store.dim < 2) throw Error(ErrorCode::InvalidArgument, "store dim must be >= 2");
  if (store.frs_name.size() > kFrsNameBytes) {
    throw Error(ErrorCode::InvalidArgument, "frs_name exceeds 32 bytes: " + store.frs_name);
  }
  std::set<std::tuple<std::uint32_t, std::uint32_t, Role>> seen;
  for (const auto& r : store.records) {
    if (r.vector.size() != store.dim) {
      throw Error(ErrorCode::DimMismatch, "record dim " + std::to_string(r.vector.size()) +
                                              " vs store dim " + std::to_string(store.dim));
    }
    if (!seen.insert(r.key()).second) {
      throw Error(ErrorCode::DuplicateKey, "subject " + std::to_string(r.subject_id) + " sample " +
                                               std::to_string(r.sample_id) + " role " +
                                               std::string(to_string(r.role)));
    }
    double sq = 0.0;
    for (float v : r.vector) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "record has non-finite value");
      sq += double{v} * double{v};
    }
    if (std::abs(std::sqrt(sq) - 1.0) > kStoredNormTolerance) {
      throw Error(ErrorCode::InvalidArgument, "stored templates must be unit-norm");
    }
  }

  std::vector<std::byte> out;
  out.reserve(kHeaderBytes + store.records.size() * record_bytes(store.dim));
  detail::ByteWriter w(out);
  w.raw(kStoreMagic);
  w.u32(kStoreVersion);
  w.u32(store.dim);
  w.u64(store.records.size());
  std::array<char, kFrsNameBytes> name{};
  std::copy(store.frs_name.begin(), store.frs_name.end(), name.begin());
  w.raw(name);
  for (const auto& r : store.records) {
    w.u32(r.subject_id);
    w.u32(r.sample_id);
    w.u8(static_cast<std::uint8_t>(r.role));
    w.u8(0);
    w.u8(0);
    w.u8(0);
    for (float v : r.vector) w.f32(v);
  }
  return out;
}

inline TemplateStore decode_store(std::span<const std::byte> bytes) {
  if (bytes.size() < kHeaderBytes) throw Error(ErrorCode::TruncatedFile, "header is incomplete");
  detail::ByteReader in(bytes);
  for (char expected : kStoreMagic) {
    if (in.u8() != static_cast<std::uint8_t>(expected)) throw Error(ErrorCode::BadMagic, "not a BTSF file");
  }
  const std::uint32_t version = in.u32();
  if (version != kStoreVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "version " + std::to_string(version));
  }
  TemplateStore store;
  store.dim = in.u32();
  if (store.dim < 2) throw Error(ErrorCode::InvalidArgument, "header dim must be >= 2");
  const std::uint64_t count = in.u64();
  std::string name;
  for (std::size_t i = 0; i < kFrsNameBytes; ++i) name.push_back(static_cast<char>(in.u8()));
  name.erase(name.find_last_not_of('\0') + 1);
  store.frs_name = std::move(name);

  const std::size_t per_record = record_bytes(store.dim);
  if (in.remaining() % per_record != 0 || in.remaining() / per_record != count) {
    throw Error(ErrorCode::TruncatedFile, "header count " + std::to_string(count) + " but payload holds " +
                                              std::to_string(in.remaining() / per_record) +
                                              " records (" + std::to_string(in.remaining()) + " bytes)");
  }
  store.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    TemplateRecord r;
    r.subject_id = in.u32();
    r.sample_id = in.u32();
    const std::uint8_t role = in.u8();
    if (role > static_cast<std::uint8_t>(Role::MorphVariant)) {
      throw Error(ErrorCode::InvalidArgument, "unknown role byte " + std::to_string(role));
    }
    r.role = static_cast<Role>(role);
    in.skip(3);
    r.vector.resize(store.dim);
    for (float& v : r.vector) {
      v = in.f32();
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "record " + std::to_string(i));
    }
    store.records.push_back(std::move(r));
  }
  return store;
}

inline void write_store(const std::filesystem::path& path, const TemplateStore& store) {
  const auto bytes = encode_store(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

inline TemplateStore read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_store(std::as_bytes(std::span<const char>(raw)));
}

// Optional sidecar: <store>.subjects.json = {"<subject_id>": "<label>", ...}

inline std::filesystem::path subjects_sidecar_path(const std::filesystem::path& store_path) {
  return std::filesystem::path(store_path.string() + ".subjects.json");
}

inline void write_subject_labels(const std::filesystem::path& store_path,
                                 const std::map<std::uint32_t, std::string>& labels) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [id, label] : labels) j[std::to_string(id)] = label;
  std::ofstream out(subjects_sidecar_path(store_path));
  if (!out) throw Error(ErrorCode::Io, "cannot write subject sidecar for " + store_path.string());
  out << j.dump(2) << '\n';
}

inline std::map<std::uint32_t, std::string> read_subject_labels(const std::filesystem::path& store_path) {
  std::ifstream in(subjects_sidecar_path(store_path));
  if (!in) throw Error(ErrorCode::Io, "no subject sidecar for " + store_path.string());
  std::map<std::uint32_t, std::string> labels;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& [key, value] : j.items()) {
      labels[static_cast<std::uint32_t>(std::stoul(key))] = value.get<std::string>();
    }
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed subject sidecar: ") + e.what());
  }
  return labels;
}

}  // namespace morphmap
