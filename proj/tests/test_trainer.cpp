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

#include <cmath>

#include "memalign/gradcheck.hpp"
#include "memalign/random.hpp"
#include "memalign/trainer.hpp"

using namespace memalign;

namespace {

CorpusSpec tiny_spec(double noise = 0.05) {
  CorpusSpec spec;
  spec.n_train_speakers = 8;
  spec.n_holdout_speakers = 4;
  spec.images_per_speaker = 3;
  spec.utterances_per_speaker = 3;
  spec.frames = 6;
  spec.content_dim = 3;
  spec.face_noise = noise;
  spec.voice_noise = noise;
  spec.seed = 23;
  return spec;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.steps = 60;
  c.batch_pairs = 4;
  c.warmup_steps = 10;
  c.decay_points = {40};
  c.n_slots = 12;
  c.hidden_width = 8;
  c.output_dim = 4;
  c.pretrain_steps = 80;
  c.pretrain_batch = 4;
  c.pretrain_warmup_steps = 10;
  c.pretrain_decay_points = {60};
  return c;
}

// A projection model whose conditioning for `face` is exactly `voice`.
TrainedModel identity_model(const ToyDecoder& decoder, Eigen::Index dim) {
  TrainedModel m;
  m.decoder = decoder;
  m.projection = AffineProjection{Matrix::Identity(dim, dim), Vector::Zero(dim)};
  return m;
}

struct Fixture {
  SyntheticCorpus corpus = generate_corpus(tiny_spec());
  TrainConfig config = tiny_config();
  DecoderShape shape = decoder_shape(corpus.spec, config);
  ToyDecoder renderer = make_renderer(corpus.spec, shape);
  std::vector<Matrix> targets = render_targets(corpus, renderer);

  SpeakerSample sample(std::uint32_t speaker, std::uint32_t u,
                       std::uint32_t img) const {
    const std::size_t idx = std::size_t(speaker) * 3 + u;
    return {speaker, &corpus.voices[idx].vector, &corpus.face(speaker, img).vector,
            &corpus.utterances[idx], &targets[idx]};
  }
};

bool decoders_equal(const ToyDecoder& a, const ToyDecoder& b) {
  return a.hidden_weight == b.hidden_weight && a.hidden_bias == b.hidden_bias &&
         a.output_weight == b.output_weight && a.output_bias == b.output_bias;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(validate(c));
  CHECK(c.lambda1 == 1.0);
  CHECK(c.lambda2 == 10.0);
  CHECK(c.lambda3 == 0.2);
  CHECK(c.n_slots == 96);
  c.lambda2 = -1;
  CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("lambda2"), ConfigError);
  c = TrainConfig{};
  c.steps = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = TrainConfig{};
  c.temperature = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("training schedule follows the config") {
  TrainConfig c;
  const LrSchedule s = c.schedule();
  CHECK(s.at(0) == 1e-6);
  CHECK(s.at(c.warmup_steps) == doctest::Approx(c.peak_lr));
  CHECK(s.at(c.decay_points[0]) == doctest::Approx(c.peak_lr / 2));
}

TEST_CASE("renderer targets are reproduced by the renderer") {
  Fixture f;
  const TrainedModel m = identity_model(f.renderer, 16);
  SpeakerSample s = f.sample(2, 1, 0);
  Vector face = *s.voice;
  s.face = &face;
  CHECK(intra_loss(s, m) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("reconstruction offsets behave as hand computed") {
  Fixture f;
  const TrainedModel m = identity_model(f.renderer, 16);
  SpeakerSample s = f.sample(4, 0, 0);
  Vector face = *s.voice;
  s.face = &face;
  const double delta = 0.3;
  const Matrix shifted = (f.targets[12].array() + delta).matrix();
  s.target = &shifted;
  CHECK(intra_loss(s, m) == doctest::Approx(delta * delta + delta).epsilon(1e-12));
}

TEST_CASE("inter loss vanishes when the face path reproduces the voice") {
  Fixture f;
  const TrainedModel m = identity_model(f.renderer, 16);
  const SpeakerSample a = f.sample(0, 0, 0);
  SpeakerSample b = f.sample(1, 2, 1);
  Vector face = *b.voice;
  b.face = &face;
  CHECK(inter_loss(a, b, m, false) == 0.0);
  CHECK_THROWS_AS(inter_loss(a, a, m, false), ConfigError);
}

TEST_CASE("inter loss never reaches the decoder by default") {
  Fixture f;
  TrainedModel m;
  m.decoder = init_decoder(f.shape, 5, 0.1);
  m.memory = init_module(12, 16, 6);
  const SpeakerSample a = f.sample(0, 0, 0);
  const SpeakerSample b = f.sample(3, 1, 2);
  ModelGradients g = ModelGradients::zeros_like(m);
  const double before = inter_loss(a, b, m, false, &g);
  CHECK(g.decoder.hidden_weight.isZero(0.0));
  CHECK(g.decoder.output_bias.isZero(0.0));
  CHECK_FALSE(g.memory.face_key.isZero(0.0));

  TrainedModel perturbed = m;
  perturbed.decoder.output_weight(0, 0) += 0.5;
  CHECK(inter_loss(a, b, perturbed, false) != before);

  ModelGradients open = ModelGradients::zeros_like(m);
  inter_loss(a, b, m, true, &open);
  CHECK_FALSE(open.decoder.hidden_weight.isZero(0.0));
}

TEST_CASE("total loss weights its terms") {
  Fixture f;
  TrainedModel m;
  m.decoder = init_decoder(f.shape, 5, 0.1);
  m.memory = init_module(12, 16, 6);
  const SpeakerSample a = f.sample(0, 0, 0);
  const SpeakerSample b = f.sample(5, 1, 2);
  TrainConfig c = f.config;
  const LossTerms t = total_loss(a, b, m, c);
  CHECK(t.store >= 0);
  CHECK(t.align >= 0);
  CHECK(t.intra >= 0);
  CHECK(t.inter >= 0);
  CHECK(t.total == doctest::Approx(t.store + 10 * t.align + 0.2 * t.inter + t.intra));
  CHECK(t.store == doctest::Approx(0.5 * (store_loss(*a.voice, *m.memory) +
                                          store_loss(*b.voice, *m.memory))));
  CHECK(t.intra == doctest::Approx(intra_loss(a, m)));
  CHECK(t.inter == doctest::Approx(inter_loss(a, b, m, false)));

  c.lambda2 = 0;
  c.lambda3 = 0;
  const LossTerms only_store = total_loss(a, b, m, c);
  CHECK(only_store.total == doctest::Approx(only_store.store + only_store.intra));

  c = f.config;
  c.no_inter = true;
  ModelGradients with = ModelGradients::zeros_like(m);
  ModelGradients without = ModelGradients::zeros_like(m);
  const LossTerms dropped = total_loss(a, b, m, c, &without);
  CHECK(dropped.inter == 0.0);
  c.no_inter = false;
  c.lambda3 = 0;
  total_loss(a, b, m, c, &with);
  CHECK(with.memory.face_key == without.memory.face_key);
}

TEST_CASE("gradient suite passes on a reduced run") {
  GradcheckOptions opts;
  opts.configurations = 15;
  opts.seed = 4;
  for (const auto& r : run_gradcheck(opts)) {
    INFO(r.loss);
    CHECK(r.passed);
    CHECK(r.configurations == 15);
    CHECK(r.leaking_blocks.empty());
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("packing round trips the parameters") {
  Fixture f;
  TrainedModel m;
  m.decoder = init_decoder(f.shape, 5, 0.1);
  m.memory = init_module(12, 16, 6);
  const Vector packed = pack_parameters(m);
  CHECK(packed.size() == 2 * 12 * 16 + m.decoder.parameter_count());
  TrainedModel copy = m;
  copy.memory->face_key.slots.setZero();
  unpack_parameters(packed, copy);
  CHECK(copy.memory->face_key.slots == m.memory->face_key.slots);
  CHECK_THROWS_AS(unpack_parameters(Vector::Zero(3), copy), DimensionError);
}

TEST_CASE("pretraining reduces held-out reconstruction loss") {
  Fixture f;
  TrainConfig c = f.config;
  c.pretrain_steps = 0;
  const PretrainResult none = pretrain(f.corpus, c);
  CHECK(none.steps_completed == 0);
  CHECK(decoders_equal(none.decoder,
                       init_decoder(f.shape, derive_seed(c.seed, kStreamDecoderInit))));

  c.pretrain_steps = 300;
  LossCurve curve;
  const PretrainResult trained = pretrain(f.corpus, c, &curve);
  CHECK(curve.size() == 300);
  const auto holdout = f.corpus.speakers_in_split(true);
  CHECK(reconstruction_loss(f.corpus, f.targets, trained.decoder, holdout) <
        reconstruction_loss(f.corpus, f.targets, none.decoder, holdout));
  CHECK(decoders_equal(pretrain(f.corpus, c).decoder, trained.decoder));
}

TEST_CASE("fit is deterministic across thread counts") {
  Fixture f;
  const PretrainResult pre = pretrain(f.corpus, f.config);
  const TrainedModel one = fit(f.corpus, f.config, &pre.decoder, nullptr, 1);
  const TrainedModel three = fit(f.corpus, f.config, &pre.decoder, nullptr, 3);
  CHECK(one.memory->voice_value.slots == three.memory->voice_value.slots);
  CHECK(one.memory->face_key.slots == three.memory->face_key.slots);
  CHECK(decoders_equal(one.decoder, three.decoder));
  CHECK(one.metadata.phase == "train");
  CHECK(one.metadata.steps_completed == 60);
}

TEST_CASE("fit requires a pretrained decoder unless told otherwise") {
  Fixture f;
  CHECK_THROWS_AS(fit(f.corpus, f.config, nullptr), ConfigError);
  TrainConfig c = f.config;
  c.no_pretrain = true;
  c.steps = 2;
  CHECK(fit(f.corpus, c, nullptr).conditioning() == Conditioning::kMemory);
  ToyDecoder wrong = init_decoder({3, 16, 5, 4}, 1);
  CHECK_THROWS_AS(fit(f.corpus, f.config, &wrong), DimensionError);
}

TEST_CASE("the no-mfva ablation trains a projection") {
  Fixture f;
  TrainConfig c = f.config;
  c.no_mfva = true;
  c.no_pretrain = true;
  LossCurve curve;
  const TrainedModel m = fit(f.corpus, c, nullptr, &curve);
  CHECK(m.conditioning() == Conditioning::kProjection);
  CHECK_FALSE(m.memory.has_value());
  for (const auto& row : curve) {
    CHECK(row.terms.store == 0.0);
    CHECK(row.terms.align == 0.0);
  }
}

TEST_CASE("training lowers the trailing loss") {
  Fixture f;
  TrainConfig c = f.config;
  c.steps = 600;
  c.warmup_steps = 50;
  c.decay_points = {400};
  c.pretrain_steps = 400;
  const PretrainResult pre = pretrain(f.corpus, c);
  LossCurve curve;
  fit(f.corpus, c, &pre.decoder, &curve);
  auto window_mean = [&](std::size_t begin) {
    double s = 0;
    for (std::size_t i = begin; i < begin + 100; ++i) s += curve[i].terms.total;
    return s / 100;
  };
  CHECK(window_mean(curve.size() - 100) < window_mean(0));
}

TEST_CASE("noiseless speakers are memorized with enough slots") {
  const SyntheticCorpus corpus = generate_corpus(tiny_spec(0.0));
  TrainConfig c = tiny_config();
  c.n_slots = 16;
  c.pretrain_steps = 2000;
  const PretrainResult pre = pretrain(corpus, c);
  c.steps = 6000;
  c.warmup_steps = 300;
  c.decay_points = {4500};
  c.peak_lr = 5e-3;
  const TrainedModel m = fit(corpus, c, &pre.decoder);
  for (std::uint32_t id : corpus.speakers_in_split(false)) {
    CHECK(store_loss(corpus.voice(id, 0).vector, *m.memory) < 1e-4);
  }
}
