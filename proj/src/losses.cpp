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

#include <string>

#include "memalign/trainer.hpp"

namespace memalign {

std::string to_string(Conditioning c) {
  switch (c) {
    case Conditioning::kMemory:
      return "memory";
    case Conditioning::kProjection:
      return "projection";
    case Conditioning::kNone:
      break;
  }
  return "none";
}

Conditioning TrainedModel::conditioning() const {
  if (memory) return Conditioning::kMemory;
  if (projection) return Conditioning::kProjection;
  return Conditioning::kNone;
}

Vector TrainedModel::condition(const Vector& face) const {
  if (memory) return recall_face(face, *memory).embedding;
  if (projection) {
    if (face.size() != projection->weight.cols()) {
      throw DimensionError("projection: face length " +
                           std::to_string(face.size()) + " != " +
                           std::to_string(projection->weight.cols()));
    }
    return projection->weight * face + projection->bias;
  }
  throw ConfigError("model has no face conditioning (pretrain-only model)");
}

ModelGradients ModelGradients::zeros_like(const TrainedModel& model) {
  ModelGradients g;
  if (model.memory) g.memory = MfvaGradients::zeros_like(*model.memory);
  if (model.projection) {
    g.projection.weight = Matrix::Zero(model.projection->weight.rows(),
                                       model.projection->weight.cols());
    g.projection.bias = Vector::Zero(model.projection->bias.size());
  }
  g.decoder = ToyDecoder::zeros_like(model.decoder);
  return g;
}

void ModelGradients::add(const ModelGradients& o) {
  if (memory.voice_value.size() > 0) {
    memory.voice_value += o.memory.voice_value;
    memory.face_key += o.memory.face_key;
  }
  if (projection.weight.size() > 0) {
    projection.weight += o.projection.weight;
    projection.bias += o.projection.bias;
  }
  decoder.hidden_weight += o.decoder.hidden_weight;
  decoder.hidden_bias += o.decoder.hidden_bias;
  decoder.output_weight += o.decoder.output_weight;
  decoder.output_bias += o.decoder.output_bias;
}

void ModelGradients::scale(double factor) {
  memory.voice_value *= factor;
  memory.face_key *= factor;
  projection.weight *= factor;
  projection.bias *= factor;
  decoder.hidden_weight *= factor;
  decoder.hidden_bias *= factor;
  decoder.output_weight *= factor;
  decoder.output_bias *= factor;
}

namespace {

struct ConditionTrace {
  RecallResult recall;  // memory path only
  Vector cond;
};

ConditionTrace condition_forward(const TrainedModel& model,
                                 const Vector& face) {
  ConditionTrace trace;
  if (model.memory) {
    trace.recall = recall_face(face, *model.memory);
    trace.cond = trace.recall.embedding;
  } else {
    trace.cond = model.condition(face);
  }
  return trace;
}

void condition_backward(const TrainedModel& model, const Vector& face,
                        const ConditionTrace& trace, const Vector& grad_cond,
                        ModelGradients& grads, double scale) {
  if (model.memory) {
    recall_face_backward(face, *model.memory, trace.recall, grad_cond,
                         grads.memory, scale);
  } else if (model.projection) {
    grads.projection.weight.noalias() +=
        scale * grad_cond * face.transpose();
    grads.projection.bias += scale * grad_cond;
  }
}

void require_sample(const SpeakerSample& s, const char* op) {
  if (s.voice == nullptr || s.face == nullptr || s.utterance == nullptr) {
    throw ConfigError(std::string(op) + ": incomplete speaker sample");
  }
}

double reconstruction(const Matrix& output, const Matrix& target,
                      Matrix* grad) {
  const double loss = mse_loss(output, target) + l1_loss(output, target);
  if (grad != nullptr) {
    *grad = mse_gradient(output, target) + l1_gradient(output, target);
  }
  return loss;
}

}  // namespace

double intra_loss(const SpeakerSample& speaker, const TrainedModel& model,
                  ModelGradients* grads, double scale) {
  require_sample(speaker, "intra_loss");
  if (speaker.target == nullptr) {
    throw ConfigError("intra_loss: speaker sample has no target frames");
  }
  const auto& utt = *speaker.utterance;
  const ConditionTrace cond = condition_forward(model, *speaker.face);
  DecoderTrace trace;
  const Matrix output =
      decode(model.decoder, utt.content, cond.cond, utt.pitch, &trace);
  Matrix grad_output;
  const double loss = reconstruction(output, *speaker.target,
                                     grads ? &grad_output : nullptr);
  if (grads != nullptr) {
    const Vector grad_cond = decode_backward(model.decoder, trace, grad_output,
                                             &grads->decoder, scale);
    condition_backward(model, *speaker.face, cond, grad_cond, *grads, scale);
  }
  return loss;
}

double inter_loss(const SpeakerSample& source, const SpeakerSample& target,
                  const TrainedModel& model, bool updates_decoder,
                  ModelGradients* grads, double scale) {
  require_sample(source, "inter_loss");
  require_sample(target, "inter_loss");
  if (source.speaker_id == target.speaker_id) {
    throw ConfigError("inter_loss: source and target must be distinct "
                      "speakers (both are " +
                      std::to_string(source.speaker_id) + ")");
  }
  const auto& utt = *source.utterance;
  // Pseudo-parallel target; no gradient flows through it.
  const Matrix speech = decode(model.decoder, utt.content, *target.voice,
                               utt.pitch);
  const ConditionTrace cond = condition_forward(model, *target.face);
  DecoderTrace trace;
  const Matrix face_output =
      decode(model.decoder, utt.content, cond.cond, utt.pitch, &trace);
  Matrix grad_output;
  const double loss =
      reconstruction(face_output, speech, grads ? &grad_output : nullptr);
  if (grads != nullptr) {
    const Vector grad_cond =
        decode_backward(model.decoder, trace, grad_output,
                        updates_decoder ? &grads->decoder : nullptr, scale);
    condition_backward(model, *target.face, cond, grad_cond, *grads, scale);
  }
  return loss;
}

LossTerms total_loss(const SpeakerSample& a, const SpeakerSample& b,
                     const TrainedModel& model, const TrainConfig& config,
                     ModelGradients* grads, double scale) {
  LossTerms terms;
  if (model.memory) {
    const auto& mem = *model.memory;
    MfvaGradients* mg = grads ? &grads->memory : nullptr;
    const double store_scale = scale * config.lambda1 * 0.5;
    terms.store = 0.5 * (store_loss(*a.voice, mem, mg, store_scale) +
                         store_loss(*b.voice, mem, mg, store_scale));
    const double align_scale = scale * config.lambda2 * 0.5;
    terms.align =
        0.5 * (align_loss(*a.voice, *a.face, mem, mg, align_scale) +
               align_loss(*b.voice, *b.face, mem, mg, align_scale));
  }
  if (!config.no_inter) {
    terms.inter = inter_loss(a, b, model, config.inter_updates_decoder, grads,
                             scale * config.lambda3);
  }
  terms.intra = intra_loss(a, model, grads, scale);
  terms.total = config.lambda1 * terms.store + config.lambda2 * terms.align +
                config.lambda3 * terms.inter + terms.intra;
  return terms;
}

}  // namespace memalign
