#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <unistd.h>

#include <gtest/gtest.h>

#include "morphmap/datastore.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace morphmap;
namespace fs = std::filesystem;

namespace {

std::vector<std::byte> as_bytes(const std::vector<unsigned char>& v) {
  std::vector<std::byte> out(v.size());
  std::memcpy(out.data(), v.data(), v.size());
  return out;
}

std::vector<float> unit_f32(std::mt19937_64& rng, std::size_t dim) {
  const auto d = oracle::random_unit(rng, dim);
  return {d.begin(), d.end()};
}

TemplateStore random_store(std::size_t n, std::uint32_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TemplateStore s{"random_frs", dim, {}};
  for (std::size_t i = 0; i < n; ++i) {
    s.records.push_back({static_cast<std::uint32_t>(i / 3), static_cast<std::uint32_t>(i % 3),
                         static_cast<Role>(i % 3), unit_f32(rng, dim)});
  }
  return s;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("morphmap_test_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(Btsf, SizesFromExamples) {
  static_assert(std::endian::native == std::endian::little);
  EXPECT_EQ(encode_store({"empty", 512, {}}).size(), 52u);
  TemplateStore one{"x", 4, {{0, 0, Role::Reference, {1.0f, 0.0f, 0.0f, 0.0f}}}};
  EXPECT_EQ(encode_store(one).size(), 80u);
}

TEST(Btsf, EncodingMatchesHandLaidBytes) {
  std::mt19937_64 rng(1);
  std::vector<oracle::RawRecord> raw;
  TemplateStore store{"arcface_sim", 8, {}};
  for (std::uint32_t i = 0; i < 5; ++i) {
    auto v = unit_f32(rng, 8);
    raw.push_back({i * 11, i, static_cast<std::uint8_t>(i % 3), v});
    store.records.push_back({i * 11, i, static_cast<Role>(i % 3), v});
  }
  EXPECT_EQ(encode_store(store), as_bytes(oracle::btsf_bytes("arcface_sim", 8, raw)));
}

TEST(Btsf, CheckedInFixtureDecodes) {
  const auto store = read_store(fs::path(MORPHMAP_FIXTURE_DIR) / "small_store.btsf");
  EXPECT_EQ(store.frs_name, "fixture_frs");
  EXPECT_EQ(store.dim, 4u);
  ASSERT_EQ(store.records.size(), 3u);
  EXPECT_EQ(store.records[1].subject_id, 0u);
  EXPECT_EQ(store.records[1].sample_id, 1u);
  EXPECT_EQ(store.records[1].role, Role::Probe);
  EXPECT_EQ(store.records[1].vector, (std::vector<float>{0.6f, 0.8f, 0.0f, 0.0f}));
  EXPECT_EQ(store.records[2].subject_id, 7u);
  EXPECT_EQ(store.records[2].role, Role::MorphVariant);
  EXPECT_EQ(store.records[2].vector, (std::vector<float>{0.5f, 0.5f, 0.5f, 0.5f}));
}

TEST(Btsf, RoundTripThousandRecordsBitExact) {
  const auto store = random_store(1000, 512, 9);
  const auto path = temp_path("rt.btsf");
  write_store(path, store);
  const auto back = read_store(path);
  fs::remove(path);
  ASSERT_EQ(back.records.size(), 1000u);
  EXPECT_EQ(back.frs_name, store.frs_name);
  for (std::size_t i = 0; i < 1000; ++i) {
    ASSERT_EQ(back.records[i].key(), store.records[i].key());
    ASSERT_EQ(std::memcmp(back.records[i].vector.data(), store.records[i].vector.data(), 512 * sizeof(float)), 0);
  }
}

TEST(Btsf, HeaderCorruption) {
  auto bytes = encode_store(random_store(10, 4, 2));
  auto bad_magic = bytes;
  bad_magic[0] = std::byte{'X'};
  expect_code(ErrorCode::BadMagic, [&] { decode_store(bad_magic); });

  auto bad_version = bytes;
  bad_version[4] = std::byte{2};
  expect_code(ErrorCode::UnsupportedVersion, [&] { decode_store(bad_version); });

  auto truncated = bytes;
  truncated.resize(bytes.size() - record_bytes(4));
  expect_code(ErrorCode::TruncatedFile, [&] { decode_store(truncated); });

  auto ragged = bytes;
  ragged.pop_back();
  expect_code(ErrorCode::TruncatedFile, [&] { decode_store(ragged); });

  expect_code(ErrorCode::TruncatedFile, [&] { decode_store(std::span(bytes).first(20)); });

  auto bad_role = bytes;
  bad_role[kHeaderBytes + 8] = std::byte{9};
  expect_code(ErrorCode::InvalidArgument, [&] { decode_store(bad_role); });

  auto nan_value = bytes;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan_value.data() + kHeaderBytes + 12, &nan, 4);
  expect_code(ErrorCode::NonFiniteValue, [&] { decode_store(nan_value); });
}

TEST(Btsf, EncodeValidation) {
  TemplateStore dup{"x", 2, {{1, 1, Role::Probe, {1.0f, 0.0f}}, {1, 1, Role::Probe, {0.0f, 1.0f}}}};
  expect_code(ErrorCode::DuplicateKey, [&] { encode_store(dup); });
  dup.records[1].role = Role::Reference;
  EXPECT_NO_THROW(encode_store(dup));

  TemplateStore mixed{"x", 2, {{0, 0, Role::Probe, {1.0f, 0.0f}}, {0, 1, Role::Probe, {1.0f, 0.0f, 0.0f}}}};
  expect_code(ErrorCode::DimMismatch, [&] { encode_store(mixed); });

  TemplateStore not_unit{"x", 2, {{0, 0, Role::Probe, {1.0f, 1.0f}}}};
  expect_code(ErrorCode::InvalidArgument, [&] { encode_store(not_unit); });

  TemplateStore long_name{std::string(33, 'n'), 2, {}};
  expect_code(ErrorCode::InvalidArgument, [&] { encode_store(long_name); });

  expect_code(ErrorCode::Io, [] { read_store("/nonexistent/dir/store.btsf"); });
}

TEST(Btsf, SubjectSidecar) {
  const auto path = temp_path("labels.btsf");
  write_subject_labels(path, {{3, "alice"}, {12, "bob"}});
  const auto labels = read_subject_labels(path);
  fs::remove(subjects_sidecar_path(path));
  EXPECT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels.at(3), "alice");
  EXPECT_EQ(labels.at(12), "bob");
  expect_code(ErrorCode::Io, [&] { read_subject_labels(path); });
}
