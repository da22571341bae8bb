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

#include "memalign/trainer.hpp"

#include <algorithm>
#include <set>
#include <thread>
#include <utility>

#include "memalign/random.hpp"

namespace memalign {

LrSchedule TrainConfig::schedule() const {
  return {1e-6, peak_lr, warmup_steps, decay_points, decay_factor};
}

LrSchedule TrainConfig::pretrain_schedule() const {
  return {1e-6, pretrain_peak_lr, pretrain_warmup_steps,
          pretrain_decay_points, decay_factor};
}

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& field, const std::string& rule) {
    throw ConfigError("train config: " + field + " " + rule);
  };
  if (!(c.lambda1 >= 0)) fail("lambda1", "must be >= 0");
  if (!(c.lambda2 >= 0)) fail("lambda2", "must be >= 0");
  if (!(c.lambda3 >= 0)) fail("lambda3", "must be >= 0");
  if (c.steps < 1) fail("steps", "must be >= 1");
  if (c.batch_pairs < 1) fail("batch_pairs", "must be >= 1");
  if (!(c.peak_lr > 0)) fail("peak_lr", "must be > 0");
  if (c.warmup_steps < 0) fail("warmup_steps", "must be >= 0");
  if (!(c.decay_factor > 0 && c.decay_factor <= 1)) {
    fail("decay_factor", "must lie in (0, 1]");
  }
  if (!(c.adam.beta1 >= 0 && c.adam.beta1 < 1)) {
    fail("adam_beta1", "must lie in [0, 1)");
  }
  if (!(c.adam.beta2 >= 0 && c.adam.beta2 < 1)) {
    fail("adam_beta2", "must lie in [0, 1)");
  }
  if (!(c.adam.epsilon > 0)) fail("adam_epsilon", "must be > 0");
  if (!(c.temperature > 0)) fail("temperature", "must be > 0");
  if (c.n_slots < 1) fail("n_slots", "must be >= 1");
  if (c.hidden_width < 1) fail("hidden_width", "must be >= 1");
  if (c.output_dim < 1) fail("output_dim", "must be >= 1");
  if (c.pretrain_steps < 0) fail("pretrain_steps", "must be >= 0");
  if (c.pretrain_batch < 1) fail("pretrain_batch", "must be >= 1");
  if (!(c.pretrain_peak_lr > 0)) fail("pretrain_peak_lr", "must be > 0");
  if (c.pretrain_warmup_steps < 0) fail("pretrain_warmup_steps", "must be >= 0");
}

DecoderShape decoder_shape(const CorpusSpec& spec, const TrainConfig& config) {
  return {Eigen::Index(spec.content_dim), Eigen::Index(spec.embedding_dim),
          Eigen::Index(config.hidden_width), Eigen::Index(config.output_dim)};
}

ToyDecoder make_renderer(const CorpusSpec& spec, const DecoderShape& shape) {
  return init_decoder(shape, derive_seed(spec.seed, kStreamRenderer), 0.1);
}

std::vector<Matrix> render_targets(const SyntheticCorpus& corpus,
                                   const ToyDecoder& renderer) {
  std::vector<Matrix> targets;
  targets.reserve(corpus.utterances.size());
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const auto& utt = corpus.utterances[i];
    targets.push_back(
        decode(renderer, utt.content, corpus.voices[i].vector, utt.pitch));
  }
  return targets;
}

namespace {

void check_finite(double loss, std::int64_t step, const char* phase) {
  if (!std::isfinite(loss)) {
    throw NumericError(std::string(phase) + ": loss became non-finite at step " +
                       std::to_string(step));
  }
}

void apply_decoder(Adam& adam, std::size_t first_slot, ToyDecoder& decoder,
                   const ToyDecoder& grad, double lr) {
  adam.apply(first_slot + 0, flat(decoder.hidden_weight),
             flat(grad.hidden_weight), lr);
  adam.apply(first_slot + 1, flat(decoder.hidden_bias), flat(grad.hidden_bias),
             lr);
  adam.apply(first_slot + 2, flat(decoder.output_weight),
             flat(grad.output_weight), lr);
  adam.apply(first_slot + 3, flat(decoder.output_bias), flat(grad.output_bias),
             lr);
}

void require_training_split(const SyntheticCorpus& corpus,
                            std::uint32_t minimum) {
  if (corpus.spec.n_train_speakers < minimum || corpus.voices.empty() ||
      corpus.faces.empty()) {
    throw ConfigError("training corpus needs at least " +
                      std::to_string(minimum) + " speakers with data");
  }
}

}  // namespace

double reconstruction_loss(const SyntheticCorpus& corpus,
                           const std::vector<Matrix>& targets,
                           const ToyDecoder& decoder,
                           const std::vector<std::uint32_t>& speakers) {
  double sum = 0;
  std::size_t count = 0;
  for (const auto id : speakers) {
    for (std::uint32_t u = 0; u < corpus.spec.utterances_per_speaker; ++u) {
      const std::size_t idx =
          std::size_t(id) * corpus.spec.utterances_per_speaker + u;
      const auto& utt = corpus.utterances[idx];
      const Matrix out =
          decode(decoder, utt.content, corpus.voices[idx].vector, utt.pitch);
      sum += mse_loss(out, targets[idx]) + l1_loss(out, targets[idx]);
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / double(count);
}

PretrainResult pretrain(const SyntheticCorpus& corpus,
                        const TrainConfig& config, LossCurve* curve) {
  validate(config);
  require_training_split(corpus, 1);
  const DecoderShape shape = decoder_shape(corpus.spec, config);
  const std::vector<Matrix> targets =
      render_targets(corpus, make_renderer(corpus.spec, shape));

  PretrainResult result;
  result.decoder = init_decoder(shape, derive_seed(config.seed,
                                                   kStreamDecoderInit));
  SplitMix64 rng(derive_seed(config.seed, kStreamPretrainSampling));
  Adam adam(config.adam);
  const LrSchedule schedule = config.pretrain_schedule();
  const std::uint64_t n_utts = std::uint64_t(corpus.spec.n_train_speakers) *
                               corpus.spec.utterances_per_speaker;
  ToyDecoder grad = ToyDecoder::zeros_like(result.decoder);
  DecoderTrace trace;
  for (std::int64_t step = 0; step < config.pretrain_steps; ++step) {
    grad.set_zero();
    double loss = 0;
    const double scale = 1.0 / double(config.pretrain_batch);
    for (std::uint32_t b = 0; b < config.pretrain_batch; ++b) {
      const std::size_t idx = std::size_t(rng.below(n_utts));
      const auto& utt = corpus.utterances[idx];
      const Matrix out = decode(result.decoder, utt.content,
                                corpus.voices[idx].vector, utt.pitch, &trace);
      const Matrix& target = targets[idx];
      loss += scale * (mse_loss(out, target) + l1_loss(out, target));
      const Matrix g = mse_gradient(out, target) + l1_gradient(out, target);
      decode_backward(result.decoder, trace, g, &grad, scale);
    }
    check_finite(loss, step, "pretrain");
    if (curve != nullptr) {
      LossCurveRow row;
      row.step = step;
      row.terms.total = loss;
      row.terms.intra = loss;
      curve->push_back(row);
    }
    adam.begin_step();
    apply_decoder(adam, 0, result.decoder, grad, schedule.at(step));
    result.final_loss = loss;
    result.steps_completed = step + 1;
  }
  return result;
}

namespace {

struct PairDraw {
  std::uint32_t a = 0, b = 0;
  std::uint32_t utt_a = 0, face_a = 0, utt_b = 0, face_b = 0;
};

std::vector<PairDraw> draw_pairs(SplitMix64& rng, const CorpusSpec& spec,
                                 std::uint32_t count) {
  const std::uint64_t n = spec.n_train_speakers;
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  std::vector<PairDraw> pairs;
  pairs.reserve(count);
  while (pairs.size() < count) {
    PairDraw p;
    p.a = std::uint32_t(rng.below(n));
    p.b = std::uint32_t(rng.below(n - 1));
    if (p.b >= p.a) ++p.b;
    if (!seen.insert({p.a, p.b}).second) continue;
    p.utt_a = std::uint32_t(rng.below(spec.utterances_per_speaker));
    p.face_a = std::uint32_t(rng.below(spec.images_per_speaker));
    p.utt_b = std::uint32_t(rng.below(spec.utterances_per_speaker));
    p.face_b = std::uint32_t(rng.below(spec.images_per_speaker));
    pairs.push_back(p);
  }
  return pairs;
}

SpeakerSample make_sample(const SyntheticCorpus& corpus,
                          const std::vector<Matrix>& targets,
                          std::uint32_t speaker, std::uint32_t utterance,
                          std::uint32_t image) {
  const std::size_t idx =
      std::size_t(speaker) * corpus.spec.utterances_per_speaker + utterance;
  return {speaker, &corpus.voices[idx].vector,
          &corpus.face(speaker, image).vector, &corpus.utterances[idx],
          &targets[idx]};
}

}  // namespace

TrainedModel fit(const SyntheticCorpus& corpus, const TrainConfig& config,
                 const ToyDecoder* pretrained, LossCurve* curve,
                 std::size_t threads) {
  validate(config);
  require_training_split(corpus, 2);
  const std::uint64_t n = corpus.spec.n_train_speakers;
  if (std::uint64_t(config.batch_pairs) > n * (n - 1)) {
    throw ConfigError("train config: batch_pairs (" +
                      std::to_string(config.batch_pairs) +
                      ") exceeds the number of distinct speaker pairs");
  }
  const DecoderShape shape = decoder_shape(corpus.spec, config);
  const Eigen::Index dim = corpus.spec.embedding_dim;

  TrainedModel model;
  model.config = config;
  if (config.no_pretrain) {
    model.decoder =
        init_decoder(shape, derive_seed(config.seed, kStreamDecoderInit));
  } else {
    if (pretrained == nullptr) {
      throw ConfigError("fit: a pretrained decoder is required unless "
                        "no_pretrain is set");
    }
    if (pretrained->content_dim != shape.content_dim ||
        pretrained->cond_dim != shape.cond_dim ||
        pretrained->hidden_width() != shape.hidden_width ||
        pretrained->output_dim() != shape.output_dim) {
      throw DimensionError(
          "fit: pretrained decoder shape (content " +
          std::to_string(pretrained->content_dim) + ", cond " +
          std::to_string(pretrained->cond_dim) + ", hidden " +
          std::to_string(pretrained->hidden_width()) + ", output " +
          std::to_string(pretrained->output_dim()) +
          ") does not match corpus/config (content " +
          std::to_string(shape.content_dim) + ", cond " +
          std::to_string(shape.cond_dim) + ", hidden " +
          std::to_string(shape.hidden_width) + ", output " +
          std::to_string(shape.output_dim) + ")");
    }
    model.decoder = *pretrained;
  }
  if (config.no_mfva) {
    SplitMix64 rng(derive_seed(config.seed, kStreamProjectionInit));
    AffineProjection proj;
    proj.weight.resize(dim, dim);
    const double sd = 1.0 / std::sqrt(double(dim));
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) proj.weight(i, j) = sd * rng.normal();
    }
    proj.bias = Vector::Zero(dim);
    model.projection = std::move(proj);
  } else {
    model.memory = init_module(config.n_slots, dim,
                               derive_seed(config.seed, kStreamMemoryInit),
                               config.temperature);
    model.memory->detach_voice_weights = config.detach_voice_weights;
  }

  const std::vector<Matrix> targets =
      render_targets(corpus, make_renderer(corpus.spec, shape));
  SplitMix64 rng(derive_seed(config.seed, kStreamTrainSampling));
  Adam adam(config.adam);
  const LrSchedule schedule = config.schedule();
  threads = std::max<std::size_t>(1, std::min<std::size_t>(
                                         threads, config.batch_pairs));

  std::vector<ModelGradients> pair_grads(config.batch_pairs,
                                         ModelGradients::zeros_like(model));
  std::vector<LossTerms> pair_terms(config.batch_pairs);
  for (std::int64_t step = 0; step < config.steps; ++step) {
    const auto pairs = draw_pairs(rng, corpus.spec, config.batch_pairs);
    auto work = [&](std::size_t begin, std::size_t stride) {
      for (std::size_t p = begin; p < pairs.size(); p += stride) {
        const auto& d = pairs[p];
        pair_grads[p].scale(0.0);
        const SpeakerSample a =
            make_sample(corpus, targets, d.a, d.utt_a, d.face_a);
        const SpeakerSample b =
            make_sample(corpus, targets, d.b, d.utt_b, d.face_b);
        pair_terms[p] = total_loss(a, b, model, config, &pair_grads[p]);
      }
    };
    if (threads == 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
      for (auto& th : pool) th.join();
    }
    // Fixed-order reduction keeps results independent of the thread count.
    ModelGradients grad = pair_grads[0];
    LossTerms terms = pair_terms[0];
    for (std::size_t p = 1; p < pairs.size(); ++p) {
      grad.add(pair_grads[p]);
      terms.total += pair_terms[p].total;
      terms.store += pair_terms[p].store;
      terms.align += pair_terms[p].align;
      terms.intra += pair_terms[p].intra;
      terms.inter += pair_terms[p].inter;
    }
    const double inv = 1.0 / double(pairs.size());
    grad.scale(inv);
    terms.total *= inv;
    terms.store *= inv;
    terms.align *= inv;
    terms.intra *= inv;
    terms.inter *= inv;
    check_finite(terms.total, step, "train");
    if (curve != nullptr) curve->push_back({step, terms});

    const double lr = schedule.at(step);
    adam.begin_step();
    if (model.memory) {
      adam.apply(0, flat(model.memory->voice_value.slots),
                 flat(grad.memory.voice_value), lr);
      adam.apply(1, flat(model.memory->face_key.slots),
                 flat(grad.memory.face_key), lr);
    } else {
      adam.apply(0, flat(model.projection->weight),
                 flat(grad.projection.weight), lr);
      adam.apply(1, flat(model.projection->bias), flat(grad.projection.bias),
                 lr);
    }
    apply_decoder(adam, 2, model.decoder, grad.decoder, lr);
    model.metadata.final_losses = terms;
    model.metadata.steps_completed = step + 1;
  }
  model.metadata.phase = "train";
  return model;
}

}  // namespace memalign
