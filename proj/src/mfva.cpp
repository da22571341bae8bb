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

#include "memalign/mfva.hpp"

#include "memalign/random.hpp"

namespace memalign {

std::string to_string(BankRole role) {
  return role == BankRole::kVoiceValue ? "voice-value" : "face-key";
}

MfvaGradients MfvaGradients::zeros_like(const MfvaModule& module) {
  return {Matrix::Zero(module.voice_value.size(), module.voice_value.dim()),
          Matrix::Zero(module.face_key.size(), module.face_key.dim())};
}

void MfvaGradients::set_zero() {
  voice_value.setZero();
  face_key.setZero();
}

void validate(const MfvaModule& module) {
  const auto& v = module.voice_value.slots;
  const auto& f = module.face_key.slots;
  if (v.rows() < 1 || v.cols() < 1) {
    throw ConfigError("mfva: voice-value bank must have at least one slot of "
                      "dimension >= 1");
  }
  if (v.rows() != f.rows() || v.cols() != f.cols()) {
    throw DimensionError("mfva: bank shapes differ (voice-value " +
                         std::to_string(v.rows()) + "x" +
                         std::to_string(v.cols()) + ", face-key " +
                         std::to_string(f.rows()) + "x" +
                         std::to_string(f.cols()) + ")");
  }
  if (!v.allFinite() || !f.allFinite()) {
    throw NumericError("mfva: non-finite slot entries");
  }
  if (!(module.temperature > 0)) {
    throw ConfigError("mfva: temperature must be > 0");
  }
}

Vector attention_weights(const Vector& query, const MemoryBank& bank,
                         double temperature) {
  if (query.size() != bank.dim()) {
    throw DimensionError("attention_weights: query length " +
                         std::to_string(query.size()) + " != " +
                         to_string(bank.role) + " slot dimension " +
                         std::to_string(bank.dim()));
  }
  Vector scores(bank.size());
  for (Eigen::Index i = 0; i < bank.size(); ++i) {
    scores[i] = cosine_similarity(query, bank.slots.row(i).transpose());
  }
  return softmax(scores, temperature);
}

RecallResult recall_speaker(const Vector& speaker, const MfvaModule& module) {
  RecallResult out;
  out.weights =
      attention_weights(speaker, module.voice_value, module.temperature);
  out.embedding = module.voice_value.slots.transpose() * out.weights;
  return out;
}

RecallResult recall_face(const Vector& face, const MfvaModule& module) {
  RecallResult out;
  out.weights = attention_weights(face, module.face_key, module.temperature);
  out.embedding = module.voice_value.slots.transpose() * out.weights;
  return out;
}

RecallResult interpolate_recall(const Vector& weights_a,
                                const Vector& weights_b, double alpha,
                                const MfvaModule& module) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw RangeError("interpolate_recall: alpha must lie in [0, 1], got " +
                     std::to_string(alpha));
  }
  const auto n = module.n_slots();
  if (weights_a.size() != n || weights_b.size() != n) {
    throw DimensionError("interpolate_recall: weight lengths " +
                         std::to_string(weights_a.size()) + " and " +
                         std::to_string(weights_b.size()) + " vs " +
                         std::to_string(n) + " slots");
  }
  RecallResult out;
  if (alpha == 0.0) {
    out.weights = weights_a;
  } else if (alpha == 1.0) {
    out.weights = weights_b;
  } else {
    out.weights = (1.0 - alpha) * weights_a + alpha * weights_b;
  }
  out.embedding = module.voice_value.slots.transpose() * out.weights;
  return out;
}

MfvaModule init_module(Eigen::Index n_slots, Eigen::Index dim,
                       std::uint64_t seed, double temperature) {
  if (n_slots < 1 || dim < 1) {
    throw ConfigError("init_module: n_slots and dim must be >= 1 (got " +
                      std::to_string(n_slots) + ", " + std::to_string(dim) +
                      ")");
  }
  if (!(temperature > 0)) {
    throw ConfigError("init_module: temperature must be > 0");
  }
  SplitMix64 rng(seed);
  const double scale = 1.0 / std::sqrt(double(dim));
  auto draw = [&](BankRole role) {
    MemoryBank bank{Matrix(n_slots, dim), role};
    for (Eigen::Index i = 0; i < n_slots; ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        bank.slots(i, j) = scale * rng.normal();
      }
    }
    return bank;
  };
  MfvaModule module;
  module.voice_value = draw(BankRole::kVoiceValue);
  module.face_key = draw(BankRole::kFaceKey);
  module.temperature = temperature;
  return module;
}

void attention_backward(const Vector& query, const MemoryBank& bank,
                        const Vector& weights, const Vector& grad_weights,
                        double temperature, Matrix& grad_bank, double scale) {
  const Vector grad_scores =
      softmax_backward(weights, grad_weights, temperature);
  for (Eigen::Index i = 0; i < bank.size(); ++i) {
    if (grad_scores[i] == 0.0) continue;
    grad_bank.row(i) +=
        (scale * grad_scores[i]) *
        cosine_gradient(query, bank.slots.row(i).transpose()).transpose();
  }
}

double store_loss(const Vector& speaker, const MfvaModule& module,
                  MfvaGradients* grads, double scale) {
  const RecallResult recall = recall_speaker(speaker, module);
  const double loss = mse_loss(speaker, recall.embedding);
  if (grads != nullptr) {
    const Vector grad_embedding = mse_gradient(recall.embedding, speaker);
    // Value path: ŝ = Vᵀ w.
    grads->voice_value.noalias() +=
        scale * recall.weights * grad_embedding.transpose();
    // Address path through w(s, V).
    const Vector grad_weights = module.voice_value.slots * grad_embedding;
    attention_backward(speaker, module.voice_value, recall.weights,
                       grad_weights, module.temperature, grads->voice_value,
                       scale);
  }
  return loss;
}

double align_loss(const Vector& speaker, const Vector& face,
                  const MfvaModule& module, MfvaGradients* grads,
                  double scale) {
  const Vector voice_w =
      attention_weights(speaker, module.voice_value, module.temperature);
  const Vector face_w =
      attention_weights(face, module.face_key, module.temperature);
  const double loss = kl_divergence(voice_w, face_w);
  if (grads != nullptr) {
    // For q = softmax(x / τ): dKL(p‖q)/dx = (q − p) / τ.
    const Vector grad_face_scores = (face_w - voice_w) / module.temperature;
    for (Eigen::Index i = 0; i < module.face_key.size(); ++i) {
      grads->face_key.row(i) +=
          (scale * grad_face_scores[i]) *
          cosine_gradient(face, module.face_key.slots.row(i).transpose())
              .transpose();
    }
    if (!module.detach_voice_weights) {
      attention_backward(speaker, module.voice_value, voice_w,
                         kl_gradient_p(voice_w, face_w), module.temperature,
                         grads->voice_value, scale);
    }
  }
  return loss;
}

void recall_face_backward(const Vector& face, const MfvaModule& module,
                          const RecallResult& recall,
                          const Vector& grad_embedding, MfvaGradients& grads,
                          double scale) {
  grads.voice_value.noalias() +=
      scale * recall.weights * grad_embedding.transpose();
  const Vector grad_weights = module.voice_value.slots * grad_embedding;
  attention_backward(face, module.face_key, recall.weights, grad_weights,
                     module.temperature, grads.face_key, scale);
}

}  // namespace memalign
