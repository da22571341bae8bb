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

#include "memalign/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "memalign/util.hpp"

namespace memalign {

namespace {

static_assert(sizeof(float) == 4, "binary32 float required");

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xFF));
  out.push_back(char(v >> 8));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("xmeb: truncated ") + what + " (need " +
                            std::to_string(n) + " bytes, " +
                            std::to_string(bytes_.size() - pos_) + " left)",
                        pos_);
    }
  }
  std::uint8_t u8() { return std::uint8_t(bytes_[pos_++]); }
  std::uint16_t u16() {
    std::uint16_t v = u8();
    v |= std::uint16_t(u8()) << 8;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(u8()) << (8 * i);
    return v;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_archive(std::span<const EmbeddingRecord> records) {
  const std::uint32_t dim =
      records.empty() ? 0 : std::uint32_t(records.front().vector.size());
  std::string out;
  out.reserve(kArchiveHeaderBytes + records.size() * (12 + 4 * dim));
  out.append(kArchiveMagic, 4);
  put_u32(out, kArchiveVersion);
  put_u32(out, std::uint32_t(records.size()));
  put_u32(out, dim);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.vector.size() != Eigen::Index(dim)) {
      throw DimensionError("xmeb: record " + std::to_string(i) +
                           " has dimension " +
                           std::to_string(rec.vector.size()) +
                           ", archive dimension is " + std::to_string(dim));
    }
    if (!rec.vector.allFinite()) {
      throw NumericError("xmeb: record " + std::to_string(i) +
                         " has non-finite entries");
    }
    put_u32(out, rec.speaker_id);
    put_u32(out, rec.entity_id);
    out.push_back(char(rec.modality));
    out.push_back(char(rec.attribute));
    put_u16(out, 0);
    for (Eigen::Index j = 0; j < rec.vector.size(); ++j) {
      put_u32(out, std::bit_cast<std::uint32_t>(float(rec.vector[j])));
    }
  }
  return out;
}

std::vector<EmbeddingRecord> decode_archive(const std::string& bytes) {
  Reader in(bytes);
  in.need(kArchiveHeaderBytes, "header");
  if (std::memcmp(bytes.data(), kArchiveMagic, 4) != 0) {
    throw FormatError("xmeb: bad magic, expected \"XMEB\"", 0);
  }
  for (int i = 0; i < 4; ++i) in.u8();
  const std::size_t version_offset = in.offset();
  const std::uint32_t version = in.u32();
  if (version != kArchiveVersion) {
    throw FormatError("xmeb: unsupported version " + std::to_string(version),
                      version_offset);
  }
  const std::uint32_t count = in.u32();
  const std::uint32_t dim = in.u32();
  if (count > 0 && dim == 0) {
    throw FormatError("xmeb: zero dimension with nonzero record count", 12);
  }
  std::vector<EmbeddingRecord> records;
  records.reserve(std::min<std::size_t>(
      count, bytes.size() / (12 + std::size_t(4) * dim)));
  for (std::uint32_t r = 0; r < count; ++r) {
    in.need(12 + std::size_t(4) * dim,
            ("record " + std::to_string(r)).c_str());
    EmbeddingRecord rec;
    rec.speaker_id = in.u32();
    rec.entity_id = in.u32();
    const std::size_t modality_offset = in.offset();
    const std::uint8_t modality = in.u8();
    if (modality > 1) {
      throw FormatError("xmeb: record " + std::to_string(r) +
                            " has invalid modality " +
                            std::to_string(modality),
                        modality_offset);
    }
    rec.modality = Modality(modality);
    rec.attribute = in.u8();
    const std::size_t reserved_offset = in.offset();
    if (in.u16() != 0) {
      throw FormatError("xmeb: record " + std::to_string(r) +
                            " has nonzero reserved field",
                        reserved_offset);
    }
    rec.vector.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j) {
      const std::size_t value_offset = in.offset();
      const float value = std::bit_cast<float>(in.u32());
      if (!std::isfinite(value)) {
        throw FormatError("xmeb: record " + std::to_string(r) +
                              " has a non-finite value",
                          value_offset);
      }
      rec.vector[j] = double(value);
    }
    records.push_back(std::move(rec));
  }
  if (in.offset() != bytes.size()) {
    throw FormatError("xmeb: " + std::to_string(bytes.size() - in.offset()) +
                          " trailing bytes after last record",
                      in.offset());
  }
  return records;
}

void write_archive(std::span<const EmbeddingRecord> records,
                   const std::filesystem::path& path) {
  write_file_atomic(path, encode_archive(records));
}

std::vector<EmbeddingRecord> read_archive(const std::filesystem::path& path) {
  return decode_archive(read_file(path));
}

}  // namespace memalign
