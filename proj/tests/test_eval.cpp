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
#include <set>

#include "memalign/eval.hpp"
#include "memalign/random.hpp"

using namespace memalign;

namespace {

Vector random_vector(SplitMix64& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

double cosine(const Vector& a, const Vector& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

// One source speaker with `utts` utterances converted to `targets` speakers
// through `images` face images each; embeddings are random.
std::vector<ConversionRecord> toy_records(std::uint32_t sources,
                                          std::uint32_t utts,
                                          std::uint32_t targets,
                                          std::uint32_t images,
                                          std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<ConversionRecord> out;
  for (std::uint32_t s = 0; s < sources; ++s) {
    for (std::uint32_t u = 0; u < utts; ++u) {
      for (std::uint32_t t = 0; t < targets; ++t) {
        for (std::uint32_t i = 0; i < images; ++i) {
          out.push_back({100 + s, 1000 + s * utts + u, 200 + t,
                         5000 + t * images + i, random_vector(rng, 5)});
        }
      }
    }
  }
  return out;
}

// Exhaustive oracles: per group, the mean over all ordered admissible pairs;
// then the mean over groups.
double enumerate_shr(const std::vector<ConversionRecord>& r) {
  std::map<std::uint32_t, std::pair<double, int>> acc;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (i == j || r[i].target_speaker != r[j].target_speaker) continue;
      if (r[i].target_face == r[j].target_face) continue;
      acc[r[i].target_speaker].first += cosine(r[i].embedding, r[j].embedding);
      acc[r[i].target_speaker].second += 1;
    }
  }
  double total = 0;
  for (const auto& [k, v] : acc) total += v.first / v.second;
  return total / double(acc.size());
}

double enumerate_sdr(const std::vector<ConversionRecord>& r) {
  std::map<std::uint32_t, std::pair<double, int>> acc;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (i == j || r[i].source_speaker != r[j].source_speaker) continue;
      if (r[i].target_speaker == r[j].target_speaker) continue;
      acc[r[i].source_speaker].first += cosine(r[i].embedding, r[j].embedding);
      acc[r[i].source_speaker].second += 1;
    }
  }
  double total = 0;
  for (const auto& [k, v] : acc) total += v.first / v.second;
  return total / double(acc.size());
}

double enumerate_sho(const std::vector<ConversionRecord>& r) {
  double sum = 0;
  int count = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = i + 1; j < r.size(); ++j) {
      if (r[i].source_utterance != r[j].source_utterance) continue;
      if (r[i].target_speaker != r[j].target_speaker) continue;
      if (r[i].target_face == r[j].target_face) continue;
      sum += cosine(r[i].embedding, r[j].embedding);
      ++count;
    }
  }
  return sum / count;
}

double enumerate_sdo(const std::vector<ConversionRecord>& r) {
  double sum = 0;
  int count = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = i + 1; j < r.size(); ++j) {
      if (r[i].source_utterance != r[j].source_utterance) continue;
      if (r[i].target_speaker == r[j].target_speaker) continue;
      sum += cosine(r[i].embedding, r[j].embedding);
      ++count;
    }
  }
  return sum / count;
}

CorpusSpec eval_spec() {
  CorpusSpec spec;
  spec.n_train_speakers = 20;
  spec.n_holdout_speakers = 12;
  spec.images_per_speaker = 4;
  spec.utterances_per_speaker = 8;
  spec.frames = 5;
  spec.content_dim = 3;
  spec.seed = 8;
  return spec;
}

// Face-conditioned model that returns the speaker's clean voice direction.
TrainedModel oracle_model(const SyntheticCorpus& c) {
  TrainedModel m;
  m.decoder = init_decoder({3, 16, 6, 4}, 2, 0.1);
  const Matrix pinv = c.face_mixing.completeOrthogonalDecomposition().pseudoInverse();
  m.projection = AffineProjection{c.voice_mixing * pinv, Vector::Zero(16)};
  return m;
}

}  // namespace

TEST_CASE("random matching agrees with exhaustive enumeration") {
  const auto records = toy_records(1, 3, 4, 3, 91);
  CHECK(records.size() == 36);
  CHECK(std::abs(shr(records, 500, 1).value - enumerate_shr(records)) < 0.01);
  CHECK(std::abs(sdr(records, 100, 2).value - enumerate_sdr(records)) < 0.01);
  CHECK(sho(records).value == doctest::Approx(enumerate_sho(records)).epsilon(1e-12));
  CHECK(sdo(records).value == doctest::Approx(enumerate_sdo(records)).epsilon(1e-12));
}

TEST_CASE("random matching agrees with enumeration across sources") {
  const auto records = toy_records(2, 2, 3, 2, 17);
  CHECK(std::abs(shr(records, 2000, 9).value - enumerate_shr(records)) < 0.01);
  CHECK(std::abs(sdr(records, 2000, 9).value - enumerate_sdr(records)) < 0.01);
  CHECK(sdo(records).value == doctest::Approx(enumerate_sdo(records)).epsilon(1e-12));
}

TEST_CASE("three targets at known cosines") {
  Vector e[3];
  e[0] = Vector::Unit(5, 0);
  e[1] = Vector::Unit(5, 1);
  e[2] = (Vector::Unit(5, 0) + Vector::Unit(5, 1)).normalized();
  std::vector<ConversionRecord> r;
  for (int t = 0; t < 3; ++t) r.push_back({1, 10, std::uint32_t(20 + t), std::uint32_t(t), e[t]});
  const double hand = (0.0 + std::sqrt(0.5) + std::sqrt(0.5)) / 3.0;
  CHECK(sdo(r).value == doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("homogeneity trivial cases") {
  auto identical = toy_records(1, 2, 3, 3, 5);
  for (auto& r : identical) r.embedding = Vector::Unit(5, r.target_speaker % 5);
  CHECK(shr(identical, 50, 1).value == doctest::Approx(1.0));
  CHECK(sho(identical).value == doctest::Approx(1.0));

  std::vector<ConversionRecord> orth = {
      {1, 10, 20, 0, Vector::Unit(4, 0)}, {1, 10, 20, 1, Vector::Unit(4, 1)},
      {1, 10, 21, 2, Vector::Unit(4, 2)}, {1, 10, 21, 3, Vector::Unit(4, 3)}};
  CHECK(shr(orth, 50, 1).value == 0.0);
  CHECK(sho(orth).value == 0.0);
}

TEST_CASE("one-to-one homogeneity pools pairs") {
  std::vector<ConversionRecord> r = {
      {1, 10, 20, 0, Vector::Unit(3, 0)}, {1, 10, 20, 1, Vector::Unit(3, 0)},
      {1, 11, 20, 0, Vector::Unit(3, 0)}, {1, 11, 20, 1, Vector::Unit(3, 1)}};
  CHECK(sho(r).value == doctest::Approx(0.5));
}

TEST_CASE("diversity trivial cases") {
  auto same = toy_records(1, 2, 3, 2, 4);
  for (auto& r : same) r.embedding = Vector::Ones(5);
  CHECK(sdr(same, 20, 1).value == doctest::Approx(1.0));
  CHECK(sdo(same).value == doctest::Approx(1.0));
  std::vector<ConversionRecord> opposite = {
      {1, 10, 20, 0, Vector::Ones(3)}, {1, 10, 21, 1, -Vector::Ones(3)}};
  CHECK(sdo(opposite).value == doctest::Approx(-1.0));
  CHECK(sdr(opposite, 20, 1).value == doctest::Approx(-1.0));
}

TEST_CASE("metric errors and warnings") {
  const auto one_target = toy_records(1, 2, 1, 2, 3);
  CHECK_THROWS_AS(sdr(one_target, 10, 1), ConfigError);
  CHECK_THROWS_AS(sdo(one_target), ConfigError);
  auto singles = toy_records(1, 1, 3, 1, 3);
  CHECK_THROWS_AS(shr(singles, 10, 1), ConfigError);
  CHECK_THROWS_AS(sho(singles), ConfigError);
  auto mixed = toy_records(1, 1, 3, 2, 3);
  mixed.pop_back();
  const MetricValue v = shr(mixed, 10, 1);
  CHECK(v.warnings.size() == 1);
  CHECK(v.per_speaker.size() == 2);
}

TEST_CASE("random matching is seeded") {
  const auto records = toy_records(1, 3, 4, 3, 12);
  CHECK(shr(records, 20, 5).value == shr(records, 20, 5).value);
  CHECK(shr(records, 20, 5).value != shr(records, 20, 6).value);
}

TEST_CASE("holdout selection balances gender") {
  const SyntheticCorpus c = generate_corpus(CorpusSpec{});
  const HoldoutSelection sel = select_holdout(c, EvalOptions{});
  CHECK(sel.targets.size() == 8);
  CHECK(sel.sources.size() == 4);
  int male = 0;
  std::set<std::uint32_t> all;
  for (auto t : sel.targets) {
    male += c.speakers[t].gender;
    all.insert(t);
    CHECK(c.is_holdout(t));
  }
  CHECK(male == 4);
  for (auto s : sel.sources) {
    CHECK(c.is_holdout(s));
    CHECK(all.insert(s).second);
  }
  EvalOptions too_many;
  too_many.n_target_speakers = 12;
  CHECK_THROWS_AS(select_holdout(c, too_many), ConfigError);
}

TEST_CASE("conversion harness cardinalities") {
  const SyntheticCorpus c = generate_corpus(CorpusSpec{});
  TrainedModel m;
  m.decoder = init_decoder({8, 16, 32, 16}, 1);
  m.memory = init_module(96, 16, 3);
  const auto records = convert_all(m, c, EvalOptions{});
  CHECK(records.size() == 576);
  EvalOptions unit;
  unit.n_target_speakers = 1;
  unit.n_source_speakers = 1;
  unit.source_utterances = 1;
  unit.target_images = 1;
  CHECK(convert_all(m, c, unit).size() == 1);
}

TEST_CASE("noiseless faces convert to one embedding per target") {
  CorpusSpec spec = eval_spec();
  spec.face_noise = 0;
  const SyntheticCorpus c = generate_corpus(spec);
  TrainedModel m;
  m.decoder = init_decoder({3, 16, 6, 4}, 1);
  m.memory = init_module(10, 16, 3);
  EvalOptions opts;
  opts.n_target_speakers = 4;
  opts.n_source_speakers = 2;
  opts.source_utterances = 2;
  opts.target_images = 3;
  const auto records = convert_all(m, c, opts);
  for (const auto& a : records) {
    for (const auto& b : records) {
      if (a.target_speaker == b.target_speaker) CHECK(a.embedding == b.embedding);
    }
  }
}

TEST_CASE("gender accuracy against centroids") {
  const SyntheticCorpus c = generate_corpus(eval_spec());
  const GenderCentroids g = gender_centroids(c);
  std::vector<ConversionRecord> r;
  for (auto id : c.speakers_in_split(true)) {
    r.push_back({0, 0, id, 0, c.speakers[id].gender ? g.male : g.female});
  }
  CHECK(gender_accuracy(r, c) == 1.0);
  for (auto& rec : r) rec.embedding = g.male;
  CHECK(gender_accuracy(r, c) == doctest::Approx(0.5));
  CHECK_THROWS_AS(gender_accuracy({}, c), ConfigError);

  CorpusSpec one_gender = eval_spec();
  one_gender.n_train_speakers = 1;
  CHECK_THROWS_AS(gender_centroids(generate_corpus(one_gender)), ConfigError);
}

TEST_CASE("a face-to-voice oracle scores perfectly") {
  CorpusSpec spec = eval_spec();
  spec.face_noise = 0;
  const SyntheticCorpus c = generate_corpus(spec);
  EvalOptions opts;
  opts.n_target_speakers = 4;
  opts.n_source_speakers = 2;
  opts.source_utterances = 2;
  opts.target_images = 3;
  const EvalReport report = evaluate(oracle_model(c), c, opts);
  CHECK(*report.sho == doctest::Approx(1.0));
  CHECK(*report.shr == doctest::Approx(1.0));
  CHECK(*report.ga == 1.0);
  CHECK(*report.sdo < *report.sho);
  CHECK(report.conditioning == "projection");
}

TEST_CASE("output mode goes through the probe") {
  const SyntheticCorpus c = generate_corpus(eval_spec());
  TrainedModel m = oracle_model(c);
  const SpeakerProbe probe = fit_probe(m, c);
  CHECK(probe.map.rows() == 16);
  CHECK(probe.map.cols() == 5);
  CHECK(std::isfinite(probe.residual));
  EvalOptions opts;
  opts.mode = EvalMode::kOutput;
  opts.n_target_speakers = 4;
  opts.n_source_speakers = 2;
  opts.source_utterances = 2;
  opts.target_images = 2;
  const EvalReport report = evaluate(m, c, opts);
  CHECK(report.probe_residual.has_value());
  CHECK(report.n_conversions == 32);
  CHECK_THROWS_AS(convert_all(m, c, opts), ConfigError);
}

TEST_CASE("report is deterministic and ordered") {
  const SyntheticCorpus c = generate_corpus(eval_spec());
  TrainedModel m;
  m.decoder = init_decoder({3, 16, 6, 4}, 1);
  m.memory = init_module(10, 16, 3);
  EvalOptions opts;
  opts.n_target_speakers = 4;
  opts.n_source_speakers = 2;
  opts.source_utterances = 2;
  opts.target_images = 2;
  const std::string a = report_to_json(evaluate(m, c, opts));
  CHECK(a == report_to_json(evaluate(m, c, opts)));
  const auto doc = nlohmann::ordered_json::parse(a);
  std::vector<std::string> keys;
  for (auto it = doc.begin(); it != doc.end(); ++it) keys.push_back(it.key());
  REQUIRE(keys.size() > 8);
  CHECK(keys[0] == "mode");
  CHECK(keys[3] == "shr");
  CHECK(keys[7] == "ga");
  CHECK(doc["shr_shuffles"] == 500);
  CHECK(doc["sdr_shuffles"] == 100);
  CHECK(doc["temperature"] == 0.1);
}

TEST_CASE("undefined metrics become warnings") {
  const SyntheticCorpus c = generate_corpus(eval_spec());
  TrainedModel m;
  m.decoder = init_decoder({3, 16, 6, 4}, 1);
  m.memory = init_module(10, 16, 3);
  EvalOptions unit;
  unit.n_target_speakers = 1;
  unit.n_source_speakers = 1;
  unit.source_utterances = 1;
  unit.target_images = 1;
  const EvalReport r = evaluate(m, c, unit);
  CHECK(r.n_conversions == 1);
  CHECK_FALSE(r.shr.has_value());
  CHECK_FALSE(r.sdo.has_value());
  CHECK(r.ga.has_value());
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("eval mode names") {
  CHECK(parse_eval_mode("embedding") == EvalMode::kEmbedding);
  CHECK(parse_eval_mode("output") == EvalMode::kOutput);
  CHECK(to_string(EvalMode::kOutput) == "output");
  CHECK_THROWS_AS(parse_eval_mode("audio"), ConfigError);
}
