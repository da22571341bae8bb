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

#include "memalign/gradcheck.hpp"

#include <algorithm>
#include <functional>

#include "memalign/optim.hpp"
#include "memalign/random.hpp"

namespace memalign {

namespace {

struct Block {
  std::string name;
  Eigen::Index offset;
  Eigen::Index size;
};

std::vector<Block> blocks_of(const TrainedModel& model) {
  std::vector<Block> out;
  Eigen::Index offset = 0;
  auto add = [&](const char* name, Eigen::Index size) {
    out.push_back({name, offset, size});
    offset += size;
  };
  add("voice_value", model.memory->voice_value.slots.size());
  add("face_key", model.memory->face_key.slots.size());
  add("decoder.hidden_weight", model.decoder.hidden_weight.size());
  add("decoder.hidden_bias", model.decoder.hidden_bias.size());
  add("decoder.output_weight", model.decoder.output_weight.size());
  add("decoder.output_bias", model.decoder.output_bias.size());
  return out;
}

Matrix random_matrix(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols,
                     double sd) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sd * rng.normal();
  return m;
}

Eigen::Index between(SplitMix64& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + Eigen::Index(rng.below(std::uint64_t(hi - lo + 1)));
}

struct Scenario {
  TrainedModel model;
  Vector voice_a, face_a, voice_b, face_b;
  UtteranceFeatures utt_a, utt_b;
  Matrix target_a, target_b;

  SpeakerSample a() const { return {0, &voice_a, &face_a, &utt_a, &target_a}; }
  SpeakerSample b() const { return {1, &voice_b, &face_b, &utt_b, &target_b}; }
};

Scenario random_scenario(SplitMix64& rng) {
  const Eigen::Index n = between(rng, 2, 8);
  const Eigen::Index dim = between(rng, 2, 6);
  const Eigen::Index frames = between(rng, 2, 5);
  const Eigen::Index content = between(rng, 1, 3);
  const Eigen::Index hidden = between(rng, 2, 6);
  const Eigen::Index out = between(rng, 1, 4);
  const double temperature = 0.1 + 0.9 * rng.uniform();

  Scenario sc;
  sc.model.memory = init_module(n, dim, rng.next(), temperature);
  sc.model.decoder = init_decoder({content, dim, hidden, out}, rng.next(), 0.1);
  auto vec = [&](Eigen::Index len) {
    return Vector(random_matrix(rng, len, 1, 1.0 / std::sqrt(double(len))));
  };
  sc.voice_a = vec(dim);
  sc.face_a = vec(dim);
  sc.voice_b = vec(dim);
  sc.face_b = vec(dim);
  for (auto* utt : {&sc.utt_a, &sc.utt_b}) {
    utt->content = random_matrix(rng, frames, content, 1.0);
    utt->pitch = vec(frames);
    z_normalize(utt->pitch);
  }
  sc.target_a = random_matrix(rng, frames, out, 1.0);
  sc.target_b = random_matrix(rng, frames, out, 1.0);
  return sc;
}

// L1 is not differentiable where a residual vanishes; keep evaluation
// points at least this far from any kink so ±h probes stay on one side.
constexpr double kKinkMargin = 1e-3;

bool near_kink(const Scenario& sc, bool inter) {
  const auto& model = sc.model;
  Matrix residual;
  if (inter) {
    const Matrix speech =
        decode(model.decoder, sc.utt_a.content, sc.voice_b, sc.utt_a.pitch);
    const Matrix face = decode(model.decoder, sc.utt_a.content,
                               model.condition(sc.face_b), sc.utt_a.pitch);
    residual = face - speech;
  } else {
    residual = decode(model.decoder, sc.utt_a.content,
                      model.condition(sc.face_a), sc.utt_a.pitch) -
               sc.target_a;
  }
  return residual.cwiseAbs().minCoeff() < kKinkMargin;
}

struct LossSpec {
  const char* name;
  bool inter;  // needs the kink check on the inter residual
  std::vector<std::string> compared;
  std::vector<std::string> must_be_zero;
  std::function<double(const Scenario&, ModelGradients*)> eval;
};

}  // namespace

Vector pack_parameters(const TrainedModel& model) {
  const auto blocks = blocks_of(model);
  Vector flat(blocks.back().offset + blocks.back().size);
  Eigen::Index o = 0;
  auto put = [&](const double* data, Eigen::Index size) {
    flat.segment(o, size) = Eigen::Map<const Vector>(data, size);
    o += size;
  };
  put(model.memory->voice_value.slots.data(),
      model.memory->voice_value.slots.size());
  put(model.memory->face_key.slots.data(), model.memory->face_key.slots.size());
  put(model.decoder.hidden_weight.data(), model.decoder.hidden_weight.size());
  put(model.decoder.hidden_bias.data(), model.decoder.hidden_bias.size());
  put(model.decoder.output_weight.data(), model.decoder.output_weight.size());
  put(model.decoder.output_bias.data(), model.decoder.output_bias.size());
  return flat;
}

void unpack_parameters(const Vector& flat, TrainedModel& model) {
  Eigen::Index o = 0;
  auto take = [&](double* data, Eigen::Index size) {
    Eigen::Map<Vector>(data, size) = flat.segment(o, size);
    o += size;
  };
  take(model.memory->voice_value.slots.data(),
       model.memory->voice_value.slots.size());
  take(model.memory->face_key.slots.data(),
       model.memory->face_key.slots.size());
  take(model.decoder.hidden_weight.data(), model.decoder.hidden_weight.size());
  take(model.decoder.hidden_bias.data(), model.decoder.hidden_bias.size());
  take(model.decoder.output_weight.data(), model.decoder.output_weight.size());
  take(model.decoder.output_bias.data(), model.decoder.output_bias.size());
  if (o != flat.size()) {
    throw DimensionError("unpack_parameters: flat vector has " +
                         std::to_string(flat.size()) + " entries, model has " +
                         std::to_string(o));
  }
}

Vector pack_gradients(const ModelGradients& g) {
  const Eigen::Index total =
      g.memory.voice_value.size() + g.memory.face_key.size() +
      g.decoder.hidden_weight.size() + g.decoder.hidden_bias.size() +
      g.decoder.output_weight.size() + g.decoder.output_bias.size();
  Vector packed(total);
  packed << flat(g.memory.voice_value), flat(g.memory.face_key),
      flat(g.decoder.hidden_weight), flat(g.decoder.hidden_bias),
      flat(g.decoder.output_weight), flat(g.decoder.output_bias);
  return packed;
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& options) {
  if (options.configurations < 1) {
    throw ConfigError("gradcheck: configurations must be >= 1");
  }
  const std::vector<LossSpec> specs = {
      {"store",
       false,
       {"voice_value", "face_key", "decoder.hidden_weight",
        "decoder.hidden_bias", "decoder.output_weight", "decoder.output_bias"},
       {},
       [](const Scenario& sc, ModelGradients* g) {
         return store_loss(sc.voice_a, *sc.model.memory,
                           g ? &g->memory : nullptr);
       }},
      {"align",
       false,
       {"face_key", "decoder.hidden_weight", "decoder.hidden_bias",
        "decoder.output_weight", "decoder.output_bias"},
       {"voice_value"},
       [](const Scenario& sc, ModelGradients* g) {
         return align_loss(sc.voice_a, sc.face_a, *sc.model.memory,
                           g ? &g->memory : nullptr);
       }},
      {"intra",
       false,
       {"voice_value", "face_key", "decoder.hidden_weight",
        "decoder.hidden_bias", "decoder.output_weight", "decoder.output_bias"},
       {},
       [](const Scenario& sc, ModelGradients* g) {
         return intra_loss(sc.a(), sc.model, g);
       }},
      {"inter",
       true,
       {"voice_value", "face_key"},
       {"decoder.hidden_weight", "decoder.hidden_bias",
        "decoder.output_weight", "decoder.output_bias"},
       [](const Scenario& sc, ModelGradients* g) {
         return inter_loss(sc.a(), sc.b(), sc.model, false, g);
       }},
  };

  std::vector<GradcheckResult> results;
  SplitMix64 rng(derive_seed(options.seed, kStreamGradcheck));
  for (const auto& spec : specs) {
    GradcheckResult result;
    result.loss = spec.name;
    for (std::uint32_t c = 0; c < options.configurations; ++c) {
      Scenario sc = random_scenario(rng);
      while (near_kink(sc, spec.inter)) sc = random_scenario(rng);
      ModelGradients grads = ModelGradients::zeros_like(sc.model);
      spec.eval(sc, &grads);
      const Vector analytic = pack_gradients(grads);
      const Vector x0 = pack_parameters(sc.model);
      Scenario probe = sc;
      const Vector numeric = finite_difference_gradient(
          [&](const Vector& x) {
            unpack_parameters(x, probe.model);
            return spec.eval(probe, nullptr);
          },
          x0, options.step);
      const auto blocks = blocks_of(sc.model);
      std::vector<double> a_parts, n_parts;
      for (const auto& b : blocks) {
        if (std::find(spec.compared.begin(), spec.compared.end(), b.name) !=
            spec.compared.end()) {
          for (Eigen::Index i = 0; i < b.size; ++i) {
            a_parts.push_back(analytic[b.offset + i]);
            n_parts.push_back(numeric[b.offset + i]);
          }
        }
        if (std::find(spec.must_be_zero.begin(), spec.must_be_zero.end(),
                      b.name) != spec.must_be_zero.end() &&
            !analytic.segment(b.offset, b.size).isZero(0.0) &&
            std::find(result.leaking_blocks.begin(),
                      result.leaking_blocks.end(),
                      b.name) == result.leaking_blocks.end()) {
          result.leaking_blocks.push_back(b.name);
        }
      }
      const double err = relative_error(
          Eigen::Map<const Vector>(a_parts.data(), Eigen::Index(a_parts.size())),
          Eigen::Map<const Vector>(n_parts.data(), Eigen::Index(n_parts.size())));
      result.max_relative_error = std::max(result.max_relative_error, err);
      ++result.configurations;
    }
    result.passed = result.max_relative_error < options.tolerance &&
                    result.leaking_blocks.empty();
    results.push_back(std::move(result));
  }
  return results;
}

}  // namespace memalign
