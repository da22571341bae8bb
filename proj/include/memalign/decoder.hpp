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

// Per-frame toy decoder: frame_t = W2 · tanh(W1 · [c_t; cond; f_t] + b1) + b2.
// The same struct doubles as the gradient accumulator for its parameters.

#ifndef MEMALIGN_DECODER_HPP_
#define MEMALIGN_DECODER_HPP_

#include <cstdint>

#include "memalign/numerics.hpp"

namespace memalign {

struct ToyDecoder {
  Eigen::Index content_dim = 0;
  Eigen::Index cond_dim = 0;
  Matrix hidden_weight;  // H x (d_c + D + 1)
  Vector hidden_bias;    // H
  Matrix output_weight;  // d_x x H
  Vector output_bias;    // d_x

  Eigen::Index input_dim() const { return content_dim + cond_dim + 1; }
  Eigen::Index hidden_width() const { return hidden_weight.rows(); }
  Eigen::Index output_dim() const { return output_weight.rows(); }
  Eigen::Index parameter_count() const;

  static ToyDecoder zeros_like(const ToyDecoder& other);
  void set_zero();
};

struct DecoderShape {
  Eigen::Index content_dim = 8;
  Eigen::Index cond_dim = 16;
  Eigen::Index hidden_width = 32;
  Eigen::Index output_dim = 16;
};

// Weights ~ N(0, 1/fan_in); biases ~ N(0, bias_std²).
ToyDecoder init_decoder(const DecoderShape& shape, std::uint64_t seed,
                        double bias_std = 0.0);

// Activations cached by the forward pass for backprop.
struct DecoderTrace {
  Matrix input;   // T x (d_c + D + 1)
  Matrix hidden;  // T x H, post-tanh
};

// content: T x d_c, pitch: length T. Returns T x d_x.
Matrix decode(const ToyDecoder& decoder, const Matrix& content,
              const Vector& cond, const Vector& pitch,
              DecoderTrace* trace = nullptr);

// Given dL/doutput (T x d_x), accumulates scale · dL/dparams into
// `param_grads` when non-null and returns dL/dcond.
Vector decode_backward(const ToyDecoder& decoder, const DecoderTrace& trace,
                       const Matrix& grad_output, ToyDecoder* param_grads,
                       double scale = 1.0);

void validate(const ToyDecoder& decoder);

}  // namespace memalign

#endif  // MEMALIGN_DECODER_HPP_
