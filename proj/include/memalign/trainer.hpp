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

// Training: the toy-decoder pretraining phase, the mixed intra/inter
// supervision objective, and the alignment phase that trains the memory
// (or, under the no_mfva ablation, a plain affine face projection) on top
// of a pretrained decoder.

#ifndef MEMALIGN_TRAINER_HPP_
#define MEMALIGN_TRAINER_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "memalign/corpus.hpp"
#include "memalign/decoder.hpp"
#include "memalign/mfva.hpp"
#include "memalign/optim.hpp"

namespace memalign {

struct TrainConfig {
  // Objective weights: L = λ1·L_store + λ2·L_align + λ3·L_inter + L_intra.
  double lambda1 = 1.0;
  double lambda2 = 10.0;
  double lambda3 = 0.2;

  std::int64_t steps = 2000;
  std::uint32_t batch_pairs = 8;
  double peak_lr = 1e-3;
  std::int64_t warmup_steps = 300;
  std::vector<std::int64_t> decay_points{800, 1200, 1600};
  double decay_factor = 0.5;
  AdamOptions adam;
  std::uint64_t seed = 1;

  bool no_inter = false;
  bool no_mfva = false;
  bool no_pretrain = false;
  bool detach_voice_weights = true;
  bool inter_updates_decoder = false;

  double temperature = 0.1;
  std::uint32_t n_slots = 96;
  std::uint32_t hidden_width = 32;
  std::uint32_t output_dim = 16;

  std::int64_t pretrain_steps = 2000;
  std::uint32_t pretrain_batch = 8;
  double pretrain_peak_lr = 1e-3;
  std::int64_t pretrain_warmup_steps = 200;
  std::vector<std::int64_t> pretrain_decay_points{600, 800, 1000};

  LrSchedule schedule() const;
  LrSchedule pretrain_schedule() const;
};

void validate(const TrainConfig& config);

// Face-to-conditioning map used when the memory is ablated away.
struct AffineProjection {
  Matrix weight;  // D x D
  Vector bias;    // D
};

enum class Conditioning { kNone, kMemory, kProjection };

std::string to_string(Conditioning c);

struct LossTerms {
  double total = 0;
  double store = 0;
  double align = 0;
  double intra = 0;
  double inter = 0;
};

struct LossCurveRow {
  std::int64_t step = 0;
  LossTerms terms;
};
using LossCurve = std::vector<LossCurveRow>;

struct TrainingMetadata {
  std::string phase = "init";
  std::int64_t steps_completed = 0;
  LossTerms final_losses;
};

struct TrainedModel {
  std::optional<MfvaModule> memory;
  std::optional<AffineProjection> projection;
  ToyDecoder decoder;
  TrainConfig config;
  TrainingMetadata metadata;

  Conditioning conditioning() const;
  // The decoder conditioning derived from a face embedding: recall_face
  // through the memory, or the affine projection.
  Vector condition(const Vector& face) const;
};

struct ModelGradients {
  MfvaGradients memory;
  AffineProjection projection;
  ToyDecoder decoder;

  static ModelGradients zeros_like(const TrainedModel& model);
  void add(const ModelGradients& other);
  void scale(double factor);
};

// One speaker's contribution to a batch: an utterance (features, speaker
// embedding, reconstruction target) and one face image.
struct SpeakerSample {
  std::uint32_t speaker_id = 0;
  const Vector* voice = nullptr;
  const Vector* face = nullptr;
  const UtteranceFeatures* utterance = nullptr;
  const Matrix* target = nullptr;
};

DecoderShape decoder_shape(const CorpusSpec& spec, const TrainConfig& config);

// Frozen random decoder that synthesizes the reconstruction targets from
// (content, true speaker embedding, pitch). Seeded from the corpus seed.
ToyDecoder make_renderer(const CorpusSpec& spec, const DecoderShape& shape);

// One target matrix per utterance, parallel to corpus.utterances.
std::vector<Matrix> render_targets(const SyntheticCorpus& corpus,
                                   const ToyDecoder& renderer);

// mse + l1 between decode(c_A, condition(h_A), f_A) and X_A.
double intra_loss(const SpeakerSample& speaker, const TrainedModel& model,
                  ModelGradients* grads = nullptr, double scale = 1.0);

// mse + l1 between decode(c_A, condition(h_B), f_A) and the constant
// pseudo-parallel target decode(c_A, s_B, f_A). Decoder gradients are only
// accumulated when `updates_decoder` is set.
double inter_loss(const SpeakerSample& source, const SpeakerSample& target,
                  const TrainedModel& model, bool updates_decoder,
                  ModelGradients* grads = nullptr, double scale = 1.0);

// Weighted objective for one (A, B) pair. Store and align terms are
// averaged over both speakers.
LossTerms total_loss(const SpeakerSample& a, const SpeakerSample& b,
                     const TrainedModel& model, const TrainConfig& config,
                     ModelGradients* grads = nullptr, double scale = 1.0);

struct PretrainResult {
  ToyDecoder decoder;
  std::int64_t steps_completed = 0;
  double final_loss = 0;
};

// Fits a fresh decoder to the renderer targets conditioned on the true
// speaker embeddings of the training split.
PretrainResult pretrain(const SyntheticCorpus& corpus,
                        const TrainConfig& config, LossCurve* curve = nullptr);

// Reconstruction loss (mse + l1) of `decoder` on the given speakers,
// conditioned on true speaker embeddings.
double reconstruction_loss(const SyntheticCorpus& corpus,
                           const std::vector<Matrix>& targets,
                           const ToyDecoder& decoder,
                           const std::vector<std::uint32_t>& speakers);

// Trains the conditioning path and decoder with the weighted objective.
// `pretrained` is required unless config.no_pretrain is set. Per-pair
// gradients are computed on up to `threads` workers and reduced in pair
// order.
TrainedModel fit(const SyntheticCorpus& corpus, const TrainConfig& config,
                 const ToyDecoder* pretrained, LossCurve* curve = nullptr,
                 std::size_t threads = 1);

}  // namespace memalign

#endif  // MEMALIGN_TRAINER_HPP_
