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

// Objective metric suite over converted speaker embeddings: homogeneity by
// random (SHR) and one-to-one (SHO) matching, diversity by random (SDR) and
// one-to-one (SDO) matching, and gender accuracy (GA) from a
// nearest-gender-centroid classifier.

#ifndef MEMALIGN_EVAL_HPP_
#define MEMALIGN_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "memalign/corpus.hpp"
#include "memalign/trainer.hpp"

namespace memalign {

enum class EvalMode { kEmbedding, kOutput };

std::string to_string(EvalMode mode);
EvalMode parse_eval_mode(const std::string& text);

struct EvalOptions {
  EvalMode mode = EvalMode::kEmbedding;
  std::uint32_t shr_shuffles = 500;
  std::uint32_t sdr_shuffles = 100;
  std::uint32_t n_target_speakers = 8;
  std::uint32_t n_source_speakers = 4;
  std::uint32_t source_utterances = 6;
  std::uint32_t target_images = 3;
  std::uint64_t seed = 1;
};

struct ConversionRecord {
  std::uint32_t source_speaker = 0;
  std::uint32_t source_utterance = 0;
  std::uint32_t target_speaker = 0;
  std::uint32_t target_face = 0;
  Vector embedding;
};

// Linear least-squares map from mean-pooled decoder output frames (plus a
// bias column) to speaker-embedding space.
struct SpeakerProbe {
  Matrix map;  // D x (d_x + 1)
  double residual = 0;  // mean squared residual over the fit set

  Vector apply(const Vector& pooled) const;
};

// Fits the probe on every training-split utterance, decoded with its true
// speaker embedding. Throws ConfigError when the fit is underdetermined.
SpeakerProbe fit_probe(const TrainedModel& model, const SyntheticCorpus& corpus);

struct HoldoutSelection {
  std::vector<std::uint32_t> targets;  // gender-balanced, gender 1 first
  std::vector<std::uint32_t> sources;
};

HoldoutSelection select_holdout(const SyntheticCorpus& corpus,
                                const EvalOptions& options);

// Every selected source utterance converted with every selected target face
// image. `probe` is required in output mode.
std::vector<ConversionRecord> convert_all(const TrainedModel& model,
                                          const SyntheticCorpus& corpus,
                                          const EvalOptions& options,
                                          const SpeakerProbe* probe = nullptr);

struct MetricValue {
  double value = 0;
  std::map<std::uint32_t, double> per_speaker;
  std::vector<std::string> warnings;
};

MetricValue speaker_homogeneity_random(
    const std::vector<ConversionRecord>& records, std::uint32_t n_shuffles,
    std::uint64_t seed);
MetricValue speaker_homogeneity_one_to_one(
    const std::vector<ConversionRecord>& records);
MetricValue speaker_diversity_random(
    const std::vector<ConversionRecord>& records, std::uint32_t n_shuffles,
    std::uint64_t seed);
MetricValue speaker_diversity_one_to_one(
    const std::vector<ConversionRecord>& records);

inline MetricValue shr(const std::vector<ConversionRecord>& r,
                       std::uint32_t n_shuffles, std::uint64_t seed) {
  return speaker_homogeneity_random(r, n_shuffles, seed);
}
inline MetricValue sho(const std::vector<ConversionRecord>& r) {
  return speaker_homogeneity_one_to_one(r);
}
inline MetricValue sdr(const std::vector<ConversionRecord>& r,
                       std::uint32_t n_shuffles, std::uint64_t seed) {
  return speaker_diversity_random(r, n_shuffles, seed);
}
inline MetricValue sdo(const std::vector<ConversionRecord>& r) {
  return speaker_diversity_one_to_one(r);
}

struct GenderCentroids {
  Vector female;  // gender 0
  Vector male;    // gender 1
  std::uint8_t classify(const Vector& embedding) const;
};

GenderCentroids gender_centroids(const SyntheticCorpus& corpus);

double gender_accuracy(const std::vector<ConversionRecord>& records,
                       const SyntheticCorpus& corpus);

struct TargetHomogeneity {
  std::optional<double> shr;
  std::optional<double> sho;
};

struct EvalReport {
  EvalMode mode = EvalMode::kEmbedding;
  std::size_t n_conversions = 0;
  std::optional<double> shr;
  std::optional<double> sho;
  std::optional<double> sdr;
  std::optional<double> sdo;
  std::optional<double> ga;
  std::uint32_t shr_shuffles = 500;
  std::uint32_t sdr_shuffles = 100;
  std::uint64_t seed = 1;
  std::optional<double> temperature;
  std::string conditioning;
  std::optional<double> probe_residual;
  std::map<std::uint32_t, TargetHomogeneity> per_target;
  std::vector<std::string> warnings;
  nlohmann::ordered_json config;  // flat effective configuration
};

// Runs convert_all and every metric.
EvalReport evaluate(const TrainedModel& model, const SyntheticCorpus& corpus,
                    const EvalOptions& options,
                    std::vector<ConversionRecord>* records_out = nullptr);

// Flat JSON object with a fixed key order; absent metrics are omitted.
std::string report_to_json(const EvalReport& report);
void emit_report(const EvalReport& report, const std::filesystem::path& path);

// Audit CSV of every one-to-one pair used by SHO and SDO.
std::string pairs_csv(const std::vector<ConversionRecord>& records);

}  // namespace memalign

#endif  // MEMALIGN_EVAL_HPP_
