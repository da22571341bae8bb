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

// Deterministic synthetic paired-embedding corpus. Every speaker owns a
// latent identity z whose first coordinate carries gender (+1 / -1); faces
// and voices are two fixed linear views of z plus isotropic noise. This
// shared-latent linear model is an assumption of the generator, not a
// claim about real face or speaker encoders.

#ifndef MEMALIGN_CORPUS_HPP_
#define MEMALIGN_CORPUS_HPP_

#include <cstdint>
#include <vector>

#include "memalign/numerics.hpp"

namespace memalign {

struct CorpusSpec {
  std::uint32_t n_train_speakers = 200;
  std::uint32_t n_holdout_speakers = 12;
  std::uint32_t images_per_speaker = 20;
  std::uint32_t utterances_per_speaker = 20;
  std::uint32_t latent_dim = 8;
  std::uint32_t embedding_dim = 16;
  double face_noise = 0.05;
  double voice_noise = 0.05;
  std::uint32_t frames = 32;
  std::uint32_t content_dim = 8;
  std::uint64_t seed = 1;
};

// Throws ConfigError naming the offending field.
void validate(const CorpusSpec& spec);

enum class Modality : std::uint8_t { kVoice = 0, kFace = 1 };

struct SpeakerLatent {
  std::uint32_t speaker_id = 0;
  Vector z;
  std::uint8_t gender = 0;
};

struct EmbeddingRecord {
  std::uint32_t speaker_id = 0;
  std::uint32_t entity_id = 0;
  Modality modality = Modality::kVoice;
  std::uint8_t attribute = 0;  // gender bit
  Vector vector;

  friend bool operator==(const EmbeddingRecord&,
                         const EmbeddingRecord&) = default;
};

struct UtteranceFeatures {
  std::uint32_t speaker_id = 0;
  std::uint32_t utterance_id = 0;
  Matrix content;  // T x d_c, one frame per row
  Vector pitch;    // length T, zero mean and unit variance
};

// Speakers [0, n_train) form the training split and
// [n_train, n_train + n_holdout) the held-out split. Faces, voices and
// utterances are stored speaker-major; the entity id of a face is
// speaker_id * images_per_speaker + image index (likewise for voices and
// utterances), so entity ids are globally unique per modality.
struct SyntheticCorpus {
  CorpusSpec spec;
  Matrix face_mixing;   // D x k
  Matrix voice_mixing;  // D x k
  std::vector<SpeakerLatent> speakers;
  std::vector<EmbeddingRecord> faces;
  std::vector<EmbeddingRecord> voices;
  std::vector<UtteranceFeatures> utterances;  // parallel to `voices`

  std::uint32_t n_speakers() const {
    return spec.n_train_speakers + spec.n_holdout_speakers;
  }
  bool is_holdout(std::uint32_t speaker_id) const {
    return speaker_id >= spec.n_train_speakers;
  }
  const EmbeddingRecord& face(std::uint32_t speaker_id,
                              std::uint32_t image) const {
    return faces[std::size_t(speaker_id) * spec.images_per_speaker + image];
  }
  const EmbeddingRecord& voice(std::uint32_t speaker_id,
                               std::uint32_t utterance) const {
    return voices[std::size_t(speaker_id) * spec.utterances_per_speaker +
                  utterance];
  }
  const UtteranceFeatures& utterance(std::uint32_t speaker_id,
                                     std::uint32_t utterance) const {
    return utterances[std::size_t(speaker_id) * spec.utterances_per_speaker +
                      utterance];
  }
  std::vector<std::uint32_t> speakers_in_split(bool holdout) const;
  // Mean voice embedding of one speaker.
  Vector voice_centroid(std::uint32_t speaker_id) const;
};

SyntheticCorpus generate_corpus(const CorpusSpec& spec);

// Replaces the corpus embeddings with externally supplied records. Records
// are matched by (speaker_id, entity_id); every corpus entry must be
// covered and dimensions must agree.
void apply_archives(SyntheticCorpus& corpus,
                    const std::vector<EmbeddingRecord>& faces,
                    const std::vector<EmbeddingRecord>& voices);

// In-place z-normalization (population variance).
void z_normalize(Vector& values);

}  // namespace memalign

#endif  // MEMALIGN_CORPUS_HPP_
