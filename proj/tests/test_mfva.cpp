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

#include "memalign/mfva.hpp"
#include "memalign/optim.hpp"
#include "memalign/random.hpp"

using namespace memalign;

namespace {

MfvaModule module_from(const Matrix& voice, const Matrix& face, double tau) {
  MfvaModule m;
  m.voice_value.slots = voice;
  m.face_key.slots = face;
  m.temperature = tau;
  return m;
}

Vector random_vector(SplitMix64& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("identical slots give uniform weights") {
  Matrix bank = Matrix::Ones(5, 3);
  const Vector w = attention_weights(Vector::LinSpaced(3, 1, 3),
                                     MemoryBank{bank, BankRole::kVoiceValue}, 0.1);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(w[i] == doctest::Approx(0.2));
}

TEST_CASE("orthogonal slots at low temperature") {
  const MemoryBank bank{Matrix::Identity(2, 2), BankRole::kFaceKey};
  const Vector w = attention_weights(vec2(1, 0), bank, 0.05);
  const double expected = 1.0 / (1.0 + std::exp(-1.0 / 0.05));
  CHECK(w[0] > 0.999);
  CHECK(w[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("a query equal to a slot gets the largest weight") {
  SplitMix64 rng(2);
  const MfvaModule m = init_module(12, 6, 9, 1.0);
  const Vector q = m.voice_value.slots.row(4).transpose();
  const Vector w = attention_weights(q, m.voice_value, 1.0);
  Eigen::Index arg = 0;
  w.maxCoeff(&arg);
  CHECK(arg == 4);
}

TEST_CASE("attention rejects a wrong query length") {
  const MfvaModule m = init_module(4, 3, 1);
  CHECK_THROWS_AS(recall_speaker(Vector::Zero(2), m), DimensionError);
  CHECK_THROWS_AS(recall_face(Vector::Zero(5), m), DimensionError);
}

TEST_CASE("recall uses voice values") {
  Matrix voice(2, 2), face(2, 2);
  voice << 5, 5, -5, 5;
  face = Matrix::Identity(2, 2);
  const MfvaModule m = module_from(voice, face, 0.01);
  const RecallResult r = recall_face(vec2(3, 0), m);
  CHECK(r.embedding[0] == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(r.embedding[1] == doctest::Approx(5.0).epsilon(1e-9));

  const RecallResult mixed =
      interpolate_recall(vec2(0.25, 0.75), vec2(0.25, 0.75), 0.3,
                         module_from(Matrix::Identity(2, 2), face, 1.0));
  CHECK(mixed.embedding[0] == doctest::Approx(0.25));
  CHECK(mixed.embedding[1] == doctest::Approx(0.75));
}

TEST_CASE("single slot recall returns the slot") {
  Matrix slot(1, 3);
  slot << 0.2, -1.0, 4.0;
  const MfvaModule m = module_from(slot, slot, 0.1);
  SplitMix64 rng(6);
  const Vector q = random_vector(rng, 3);
  CHECK((recall_speaker(q, m).embedding - slot.row(0).transpose()).norm() == 0.0);
  CHECK(store_loss(q, m) == doctest::Approx((q - slot.row(0).transpose()).squaredNorm() / 3));
}

TEST_CASE("tied banks make face and speaker recall agree") {
  MfvaModule m = init_module(10, 4, 3);
  m.face_key.slots = m.voice_value.slots;
  SplitMix64 rng(12);
  const Vector s = random_vector(rng, 4);
  const RecallResult a = recall_speaker(s, m);
  const RecallResult b = recall_face(s, m);
  CHECK(a.weights == b.weights);
  CHECK(a.embedding == b.embedding);
  CHECK(align_loss(s, s, m) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("recall is consistent and convex") {
  const MfvaModule m = init_module(16, 5, 4);
  SplitMix64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector h = random_vector(rng, 5);
    const RecallResult r = recall_face(h, m);
    CHECK(is_weight_vector(r.weights));
    const Vector direct = m.voice_value.slots.transpose() * r.weights;
    CHECK((r.embedding - direct).cwiseAbs().maxCoeff() <= 1e-10);
    const Vector lo = m.voice_value.slots.colwise().minCoeff();
    const Vector hi = m.voice_value.slots.colwise().maxCoeff();
    CHECK((r.embedding.array() >= lo.array() - 1e-12).all());
    CHECK((r.embedding.array() <= hi.array() + 1e-12).all());
  }
}

TEST_CASE("face recall is invariant to query scale") {
  const MfvaModule m = init_module(32, 16, 10);
  SplitMix64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector h = random_vector(rng, 16);
    const RecallResult base = recall_face(h, m);
    for (double lambda : {0.5, 2.0, 10.0}) {
      const RecallResult scaled = recall_face(Vector(lambda * h), m);
      CHECK((scaled.embedding - base.embedding).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK((scaled.weights - base.weights).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("interpolation endpoints and midpoint") {
  const MfvaModule m = module_from(Matrix::Identity(2, 2),
                                   Matrix::Identity(2, 2), 0.1);
  const Vector wa = vec2(1, 0), wb = vec2(0, 1);
  CHECK(interpolate_recall(wa, wb, 0.0, m).weights == wa);
  CHECK(interpolate_recall(wa, wb, 1.0, m).weights == wb);
  const RecallResult mid = interpolate_recall(wa, wb, 0.5, m);
  CHECK(mid.weights[0] == 0.5);
  CHECK(mid.weights[1] == 0.5);
  CHECK_THROWS_AS(interpolate_recall(wa, wb, -0.01, m), RangeError);
  CHECK_THROWS_AS(interpolate_recall(wa, wb, 1.01, m), RangeError);
  CHECK_THROWS_AS(interpolate_recall(wa, Vector::Ones(3) / 3, 0.5, m),
                  DimensionError);
}

TEST_CASE("interpolated weights stay on the simplex") {
  const MfvaModule m = init_module(20, 6, 5);
  SplitMix64 rng(1);
  const Vector wa = recall_face(random_vector(rng, 6), m).weights;
  const Vector wb = recall_face(random_vector(rng, 6), m).weights;
  for (int i = 0; i <= 10; ++i) {
    CHECK(is_weight_vector(interpolate_recall(wa, wb, i / 10.0, m).weights));
  }
}

TEST_CASE("align loss matches a hand KL") {
  const double c = 1.0 - std::log(7.0 / 3.0);
  Matrix voice(2, 2);
  voice << 1, 0, c, std::sqrt(1 - c * c);
  const MfvaModule m = module_from(voice, Matrix::Ones(2, 2), 1.0);
  const Vector wv = recall_speaker(vec2(1, 0), m).weights;
  CHECK(wv[0] == doctest::Approx(0.7).epsilon(1e-12));
  const double expected = 0.7 * std::log(1.4) + 0.3 * std::log(0.6);
  CHECK(align_loss(vec2(1, 0), vec2(0.3, 0.9), m) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.082282).epsilon(1e-5));
}

TEST_CASE("store and align gradients agree with central differences") {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index n = 2 + Eigen::Index(rng.below(6));
    const Eigen::Index d = 2 + Eigen::Index(rng.below(5));
    const double tau = 0.1 + 0.9 * rng.uniform();
    MfvaModule m = init_module(n, d, rng.next(), tau);
    const Vector s = random_vector(rng, d);
    const Vector h = random_vector(rng, d);

    MfvaGradients g = MfvaGradients::zeros_like(m);
    store_loss(s, m, &g);
    const Vector numeric_store = finite_difference_gradient(
        [&](const Vector& x) {
          MfvaModule p = m;
          p.voice_value.slots = Eigen::Map<const Matrix>(x.data(), n, d);
          return store_loss(s, p);
        },
        Eigen::Map<const Vector>(m.voice_value.slots.data(), n * d));
    CHECK(relative_error(flat(g.voice_value), numeric_store) < 1e-4);
    CHECK(g.face_key.isZero(0.0));

    g.set_zero();
    align_loss(s, h, m, &g);
    const Vector numeric_align = finite_difference_gradient(
        [&](const Vector& x) {
          MfvaModule p = m;
          p.face_key.slots = Eigen::Map<const Matrix>(x.data(), n, d);
          return align_loss(s, h, p);
        },
        Eigen::Map<const Vector>(m.face_key.slots.data(), n * d));
    CHECK(relative_error(flat(g.face_key), numeric_align) < 1e-4);
    CHECK(g.voice_value.isZero(0.0));
  }
}

TEST_CASE("align reaches the voice bank when not detached") {
  MfvaModule m = init_module(6, 4, 21, 0.5);
  m.detach_voice_weights = false;
  SplitMix64 rng(4);
  const Vector s = random_vector(rng, 4);
  const Vector h = random_vector(rng, 4);
  MfvaGradients g = MfvaGradients::zeros_like(m);
  align_loss(s, h, m, &g);
  const Vector numeric = finite_difference_gradient(
      [&](const Vector& x) {
        MfvaModule p = m;
        p.voice_value.slots = Eigen::Map<const Matrix>(x.data(), 6, 4);
        return align_loss(s, h, p);
      },
      Eigen::Map<const Vector>(m.voice_value.slots.data(), 24));
  CHECK(relative_error(flat(g.voice_value), numeric) < 1e-4);
}

TEST_CASE("init is deterministic with unit expected slot norm") {
  const MfvaModule a = init_module(96, 256, 5);
  const MfvaModule b = init_module(96, 256, 5);
  CHECK(a.voice_value.slots.rows() == 96);
  CHECK(a.voice_value.slots.cols() == 256);
  CHECK(a.face_key.slots.rows() == 96);
  CHECK(a.voice_value.slots == b.voice_value.slots);
  CHECK(a.face_key.slots == b.face_key.slots);
  CHECK(a.voice_value.slots != a.face_key.slots);
  const double mean_sq = a.voice_value.slots.rowwise().squaredNorm().mean();
  CHECK(mean_sq == doctest::Approx(1.0).epsilon(0.2));
  CHECK(init_module(96, 256, 6).voice_value.slots != a.voice_value.slots);
  CHECK_THROWS_AS(init_module(0, 4, 1), ConfigError);
  CHECK_THROWS_AS(init_module(4, 0, 1), ConfigError);
}

TEST_CASE("validate rejects malformed modules") {
  MfvaModule m = init_module(4, 3, 1);
  m.face_key.slots = Matrix::Zero(4, 2);
  CHECK_THROWS_AS(validate(m), DimensionError);
  m = init_module(4, 3, 1);
  m.temperature = 0;
  CHECK_THROWS_AS(validate(m), ConfigError);
  m = init_module(4, 3, 1);
  m.voice_value.slots(0, 0) = std::nan("");
  CHECK_THROWS_AS(validate(m), NumericError);
}

TEST_CASE("store loss alone memorizes a small set of speakers") {
  MfvaModule m = init_module(32, 16, derive_seed(3, kStreamMemoryInit), 0.1);
  SplitMix64 rng(303);
  std::vector<Vector> targets;
  for (int k = 0; k < 8; ++k) {
    Vector t = random_vector(rng, 16);
    targets.push_back(t / t.norm());
  }
  Adam adam;
  MfvaGradients g = MfvaGradients::zeros_like(m);
  for (int step = 0; step < 2000; ++step) {
    g.set_zero();
    for (const auto& t : targets) store_loss(t, m, &g, 1.0 / 8);
    adam.begin_step();
    adam.apply(0, flat(m.voice_value.slots), flat(g.voice_value), 1e-2);
  }
  for (const auto& t : targets) CHECK(store_loss(t, m) < 1e-3);
}
