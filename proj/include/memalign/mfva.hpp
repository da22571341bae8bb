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

// Memory-based face/voice alignment. Two slot banks of identical shape: a
// voice-value bank that both modalities read their values from, and a
// face-key bank that face queries address. Attention weights are a
// tempered softmax over cosine scores between the query and every slot.

#ifndef MEMALIGN_MFVA_HPP_
#define MEMALIGN_MFVA_HPP_

#include <cstdint>
#include <string>

#include "memalign/numerics.hpp"

namespace memalign {

enum class BankRole { kVoiceValue, kFaceKey };

std::string to_string(BankRole role);

struct MemoryBank {
  Matrix slots;  // N x D, one slot per row
  BankRole role = BankRole::kVoiceValue;

  Eigen::Index size() const { return slots.rows(); }
  Eigen::Index dim() const { return slots.cols(); }
};

struct MfvaModule {
  MemoryBank voice_value{Matrix(), BankRole::kVoiceValue};
  MemoryBank face_key{Matrix(), BankRole::kFaceKey};
  double temperature = 0.1;
  // When set, the align loss treats the voice-side weights as a constant
  // target and sends no gradient into the voice bank.
  bool detach_voice_weights = true;

  Eigen::Index n_slots() const { return voice_value.size(); }
  Eigen::Index dim() const { return voice_value.dim(); }
};

struct RecallResult {
  Vector weights;    // length N, on the simplex
  Vector embedding;  // length D, voice_valueᵀ · weights
};

// Gradient accumulator with the same shapes as the two banks.
struct MfvaGradients {
  Matrix voice_value;
  Matrix face_key;

  static MfvaGradients zeros_like(const MfvaModule& module);
  void set_zero();
};

// Throws unless both banks share N and D, entries are finite and the
// temperature is positive.
void validate(const MfvaModule& module);

Vector attention_weights(const Vector& query, const MemoryBank& bank,
                         double temperature);

RecallResult recall_speaker(const Vector& speaker, const MfvaModule& module);

// Keys from the face bank, values from the voice bank.
RecallResult recall_face(const Vector& face, const MfvaModule& module);

// Convex blend of two weight vectors, read out through the voice bank.
RecallResult interpolate_recall(const Vector& weights_a,
                                const Vector& weights_b, double alpha,
                                const MfvaModule& module);

// Gaussian slots with per-entry variance 1/dim in both banks.
MfvaModule init_module(Eigen::Index n_slots, Eigen::Index dim,
                       std::uint64_t seed, double temperature = 0.1);

// mse(s, recall_speaker(s).embedding). Gradients w.r.t. the voice bank are
// added to `grads` scaled by `scale` when `grads` is non-null.
double store_loss(const Vector& speaker, const MfvaModule& module,
                  MfvaGradients* grads = nullptr, double scale = 1.0);

// KL(w_voice || w_face). Always sends gradient into the face bank; into the
// voice bank only when detach_voice_weights is false.
double align_loss(const Vector& speaker, const Vector& face,
                  const MfvaModule& module, MfvaGradients* grads = nullptr,
                  double scale = 1.0);

// Pushes dL/dĥ back through recall_face(face) into both banks.
void recall_face_backward(const Vector& face, const MfvaModule& module,
                          const RecallResult& recall,
                          const Vector& grad_embedding, MfvaGradients& grads,
                          double scale = 1.0);

// Pushes dL/dw for attention over `bank` with the given query back into
// the bank slots: grad_bank.row(i) += scale · dL/dm_i.
void attention_backward(const Vector& query, const MemoryBank& bank,
                        const Vector& weights, const Vector& grad_weights,
                        double temperature, Matrix& grad_bank, double scale);

}  // namespace memalign

#endif  // MEMALIGN_MFVA_HPP_
