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

#include "memalign/corpus.hpp"

#include <string>

#include "memalign/random.hpp"

namespace memalign {

namespace {

void require_positive(std::uint32_t value, const char* field) {
  if (value < 1) {
    throw ConfigError(std::string("corpus spec: ") + field + " must be >= 1");
  }
}

void require_noise(double value, const char* field) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw ConfigError(std::string("corpus spec: ") + field +
                      " must be finite and >= 0, got " +
                      std::to_string(value));
  }
}

// Gaussian D x k matrix drawn column by column, then orthonormalized with
// modified Gram-Schmidt and scaled by 1/sqrt(k), so ‖W z‖ = ‖z‖ / sqrt(k).
Matrix draw_mixing(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix w(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = rng.normal();
  }
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index p = 0; p < j; ++p) {
      w.col(j) -= w.col(p).dot(w.col(j)) * w.col(p);
    }
    const double norm = w.col(j).norm();
    if (norm < 1e-12) throw NumericError("corpus: degenerate mixing matrix");
    w.col(j) /= norm;
  }
  return w / std::sqrt(double(cols));
}

}  // namespace

void validate(const CorpusSpec& spec) {
  require_positive(spec.n_train_speakers, "n_train_speakers");
  require_positive(spec.n_holdout_speakers, "n_holdout_speakers");
  require_positive(spec.images_per_speaker, "images_per_speaker");
  require_positive(spec.utterances_per_speaker, "utterances_per_speaker");
  require_positive(spec.latent_dim, "latent_dim");
  require_positive(spec.embedding_dim, "embedding_dim");
  require_positive(spec.content_dim, "content_dim");
  require_noise(spec.face_noise, "face_noise");
  require_noise(spec.voice_noise, "voice_noise");
  if (spec.frames < 2) {
    throw ConfigError("corpus spec: frames must be >= 2");
  }
  if (spec.embedding_dim < spec.latent_dim) {
    throw ConfigError("corpus spec: embedding_dim (" +
                      std::to_string(spec.embedding_dim) +
                      ") must be >= latent_dim (" +
                      std::to_string(spec.latent_dim) + ")");
  }
}

void z_normalize(Vector& values) {
  const double mean = values.mean();
  values.array() -= mean;
  const double var = values.squaredNorm() / double(values.size());
  if (var > 0) values /= std::sqrt(var);
}

std::vector<std::uint32_t> SyntheticCorpus::speakers_in_split(
    bool holdout) const {
  std::vector<std::uint32_t> ids;
  const std::uint32_t begin = holdout ? spec.n_train_speakers : 0;
  const std::uint32_t end = holdout ? n_speakers() : spec.n_train_speakers;
  for (std::uint32_t id = begin; id < end; ++id) ids.push_back(id);
  return ids;
}

Vector SyntheticCorpus::voice_centroid(std::uint32_t speaker_id) const {
  Vector sum = Vector::Zero(spec.embedding_dim);
  for (std::uint32_t u = 0; u < spec.utterances_per_speaker; ++u) {
    sum += voice(speaker_id, u).vector;
  }
  return sum / double(spec.utterances_per_speaker);
}

SyntheticCorpus generate_corpus(const CorpusSpec& spec) {
  validate(spec);
  SyntheticCorpus corpus;
  corpus.spec = spec;
  SplitMix64 rng(spec.seed);
  const Eigen::Index k = spec.latent_dim;
  const Eigen::Index dim = spec.embedding_dim;
  corpus.voice_mixing = draw_mixing(rng, dim, k);
  corpus.face_mixing = draw_mixing(rng, dim, k);

  // Within each split even positions are gender 1, odd positions gender 0,
  // so gender 0 receives floor(n / 2) speakers.
  const std::uint32_t total = corpus.n_speakers();
  corpus.speakers.reserve(total);
  for (std::uint32_t id = 0; id < total; ++id) {
    const std::uint32_t position =
        id < spec.n_train_speakers ? id : id - spec.n_train_speakers;
    SpeakerLatent latent;
    latent.speaker_id = id;
    latent.gender = position % 2 == 0 ? 1 : 0;
    latent.z.resize(k);
    latent.z[0] = latent.gender == 1 ? 1.0 : -1.0;
    for (Eigen::Index j = 1; j < k; ++j) latent.z[j] = rng.normal();
    corpus.speakers.push_back(std::move(latent));
  }

  corpus.faces.reserve(std::size_t(total) * spec.images_per_speaker);
  corpus.voices.reserve(std::size_t(total) * spec.utterances_per_speaker);
  corpus.utterances.reserve(corpus.voices.capacity());
  // Embeddings are held at binary32 precision so that an archive round trip
  // reproduces the in-memory corpus exactly.
  auto noisy = [&](const Vector& clean, double sigma) {
    Vector v = clean;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v[i] = double(float(v[i] + sigma * rng.normal()));
    }
    return v;
  };
  for (const auto& latent : corpus.speakers) {
    const Vector face_clean = corpus.face_mixing * latent.z;
    const Vector voice_clean = corpus.voice_mixing * latent.z;
    for (std::uint32_t j = 0; j < spec.images_per_speaker; ++j) {
      corpus.faces.push_back(
          {latent.speaker_id, latent.speaker_id * spec.images_per_speaker + j,
           Modality::kFace, latent.gender, noisy(face_clean, spec.face_noise)});
    }
    for (std::uint32_t j = 0; j < spec.utterances_per_speaker; ++j) {
      const std::uint32_t entity =
          latent.speaker_id * spec.utterances_per_speaker + j;
      corpus.voices.push_back({latent.speaker_id, entity, Modality::kVoice,
                               latent.gender,
                               noisy(voice_clean, spec.voice_noise)});
      UtteranceFeatures utt;
      utt.speaker_id = latent.speaker_id;
      utt.utterance_id = entity;
      utt.content.resize(spec.frames, spec.content_dim);
      for (Eigen::Index t = 0; t < utt.content.rows(); ++t) {
        for (Eigen::Index c = 0; c < utt.content.cols(); ++c) {
          utt.content(t, c) = rng.normal();
        }
      }
      utt.pitch.resize(spec.frames);
      for (Eigen::Index t = 0; t < utt.pitch.size(); ++t) {
        utt.pitch[t] = rng.normal();
      }
      z_normalize(utt.pitch);
      corpus.utterances.push_back(std::move(utt));
    }
  }
  return corpus;
}

void apply_archives(SyntheticCorpus& corpus,
                    const std::vector<EmbeddingRecord>& faces,
                    const std::vector<EmbeddingRecord>& voices) {
  auto apply = [&](std::vector<EmbeddingRecord>& target,
                   const std::vector<EmbeddingRecord>& source,
                   Modality modality, const char* name) {
    if (source.size() != target.size()) {
      throw DimensionError(std::string(name) + " archive holds " +
                           std::to_string(source.size()) +
                           " records, corpus expects " +
                           std::to_string(target.size()));
    }
    for (std::size_t i = 0; i < source.size(); ++i) {
      const auto& rec = source[i];
      auto& slot = target[i];
      if (rec.modality != modality) {
        throw ConfigError(std::string(name) + " archive record " +
                          std::to_string(i) + " has the wrong modality");
      }
      if (rec.speaker_id != slot.speaker_id ||
          rec.entity_id != slot.entity_id) {
        throw ConfigError(std::string(name) + " archive record " +
                          std::to_string(i) + " is (speaker " +
                          std::to_string(rec.speaker_id) + ", entity " +
                          std::to_string(rec.entity_id) +
                          "), corpus expects (speaker " +
                          std::to_string(slot.speaker_id) + ", entity " +
                          std::to_string(slot.entity_id) + ")");
      }
      if (rec.vector.size() != slot.vector.size()) {
        throw DimensionError(std::string(name) + " archive dimension " +
                             std::to_string(rec.vector.size()) +
                             " != corpus embedding_dim " +
                             std::to_string(slot.vector.size()));
      }
      slot.vector = rec.vector;
      slot.attribute = rec.attribute;
    }
  };
  apply(corpus.faces, faces, Modality::kFace, "face");
  apply(corpus.voices, voices, Modality::kVoice, "voice");
}

}  // namespace memalign
