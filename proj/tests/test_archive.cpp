// Copyright 2026 The memalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>

#include "memalign/archive.hpp"
#include "memalign/corpus.hpp"
#include "memalign/util.hpp"

using namespace memalign;

namespace {

std::vector<EmbeddingRecord> sample_records() {
  CorpusSpec spec;
  spec.n_train_speakers = 4;
  spec.n_holdout_speakers = 2;
  spec.images_per_speaker = 2;
  spec.utterances_per_speaker = 2;
  spec.seed = 5;
  const SyntheticCorpus c = generate_corpus(spec);
  std::vector<EmbeddingRecord> all = c.faces;
  all.insert(all.end(), c.voices.begin(), c.voices.end());
  return all;
}

std::uint32_t read_u32(const std::string& bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | std::uint8_t(bytes[at + i]);
  return v;
}

void expect_format_error(const std::string& bytes, std::size_t offset,
                         const char* needle) {
  try {
    decode_archive(bytes);
    FAIL("decode_archive accepted a malformed archive");
  } catch (const FormatError& e) {
    CHECK(e.offset() == offset);
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("header layout is little-endian") {
  const auto records = sample_records();
  const std::string bytes = encode_archive(records);
  CHECK(bytes.substr(0, 4) == "XMEB");
  CHECK(read_u32(bytes, 4) == 1);
  CHECK(read_u32(bytes, 8) == records.size());
  CHECK(read_u32(bytes, 12) == 16);
  CHECK(bytes.size() == 16 + records.size() * (12 + 16 * 4));
  const std::size_t rec = 16;
  CHECK(read_u32(bytes, rec) == records[0].speaker_id);
  CHECK(read_u32(bytes, rec + 4) == records[0].entity_id);
  CHECK(std::uint8_t(bytes[rec + 8]) == 1);
  CHECK(std::uint8_t(bytes[rec + 9]) == records[0].attribute);
  CHECK(bytes[rec + 10] == 0);
  CHECK(bytes[rec + 11] == 0);
  CHECK(std::bit_cast<float>(read_u32(bytes, rec + 12)) ==
        float(records[0].vector[0]));
}

TEST_CASE("round trip is bit exact") {
  const auto records = sample_records();
  const std::string bytes = encode_archive(records);
  const auto decoded = decode_archive(bytes);
  CHECK(decoded == records);
  CHECK(encode_archive(decoded) == bytes);
}

TEST_CASE("round trip through a file") {
  const auto records = sample_records();
  const auto path =
      std::filesystem::temp_directory_path() / "memalign_test_roundtrip.xmeb";
  write_archive(records, path);
  CHECK(read_archive(path) == records);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_archive(path), IoError);
}

TEST_CASE("empty archive is a bare header") {
  const std::string bytes = encode_archive({});
  CHECK(bytes.size() == 16);
  CHECK(decode_archive(bytes).empty());
}

TEST_CASE("corrupted archives raise positioned format errors") {
  const std::string good = encode_archive(sample_records());
  const std::size_t record_bytes = 12 + 16 * 4;

  std::string bad = good;
  bad[0] = 'Y';
  expect_format_error(bad, 0, "magic");

  bad = good;
  bad[4] = 2;
  expect_format_error(bad, 4, "version");

  expect_format_error(good.substr(0, 10), 0, "truncated");
  expect_format_error(good.substr(0, good.size() - 3),
                      16 + (sample_records().size() - 1) * record_bytes,
                      "truncated");

  bad = good;
  bad[16 + 8] = 7;
  expect_format_error(bad, 16 + 8, "modality");

  bad = good;
  bad[16 + 10] = 1;
  expect_format_error(bad, 16 + 10, "reserved");

  bad = good;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(&bad[16 + 12], &nan, 4);
  expect_format_error(bad, 16 + 12, "finite");

  expect_format_error(good + "xx", good.size(), "trailing");
}

TEST_CASE("format error messages carry the offset") {
  std::string bad = encode_archive(sample_records());
  bad[1] = '?';
  CHECK_THROWS_WITH_AS(decode_archive(bad), doctest::Contains("offset 0"),
                       FormatError);
}

TEST_CASE("encoding rejects mixed dimensions and non-finite values") {
  auto records = sample_records();
  records[1].vector = Vector::Zero(3);
  CHECK_THROWS_AS(encode_archive(records), DimensionError);
  records = sample_records();
  records[0].vector[0] = std::nan("");
  CHECK_THROWS_AS(encode_archive(records), NumericError);
}
