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

// XMEB embedding archive. All integers little-endian.
//
//   offset 0   magic "XMEB"
//   offset 4   u32 version (1)
//   offset 8   u32 record count
//   offset 12  u32 dim
//   then per record:
//     u32 speaker_id, u32 entity_id, u8 modality (0 voice, 1 face),
//     u8 attribute, u16 reserved (0), dim x binary32 values
//
// Vectors are narrowed to binary32 on write and widened back on read.

#ifndef MEMALIGN_ARCHIVE_HPP_
#define MEMALIGN_ARCHIVE_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "memalign/corpus.hpp"

namespace memalign {

inline constexpr char kArchiveMagic[4] = {'X', 'M', 'E', 'B'};
inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr std::size_t kArchiveHeaderBytes = 16;

std::string encode_archive(std::span<const EmbeddingRecord> records);
std::vector<EmbeddingRecord> decode_archive(const std::string& bytes);

void write_archive(std::span<const EmbeddingRecord> records,
                   const std::filesystem::path& path);
std::vector<EmbeddingRecord> read_archive(const std::filesystem::path& path);

}  // namespace memalign

#endif  // MEMALIGN_ARCHIVE_HPP_
