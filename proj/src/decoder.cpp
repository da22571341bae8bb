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

#include "memalign/decoder.hpp"

#include <string>

#include "memalign/random.hpp"

namespace memalign {

Eigen::Index ToyDecoder::parameter_count() const {
  return hidden_weight.size() + hidden_bias.size() + output_weight.size() +
         output_bias.size();
}

ToyDecoder ToyDecoder::zeros_like(const ToyDecoder& other) {
  ToyDecoder z;
  z.content_dim = other.content_dim;
  z.cond_dim = other.cond_dim;
  z.hidden_weight = Matrix::Zero(other.hidden_weight.rows(),
                                 other.hidden_weight.cols());
  z.hidden_bias = Vector::Zero(other.hidden_bias.size());
  z.output_weight = Matrix::Zero(other.output_weight.rows(),
                                 other.output_weight.cols());
  z.output_bias = Vector::Zero(other.output_bias.size());
  return z;
}

void ToyDecoder::set_zero() {
  hidden_weight.setZero();
  hidden_bias.setZero();
  output_weight.setZero();
  output_bias.setZero();
}

ToyDecoder init_decoder(const DecoderShape& shape, std::uint64_t seed,
                        double bias_std) {
  if (shape.content_dim < 1 || shape.cond_dim < 1 || shape.hidden_width < 1 ||
      shape.output_dim < 1) {
    throw ConfigError("init_decoder: all decoder dimensions must be >= 1");
  }
  SplitMix64 rng(seed);
  ToyDecoder d;
  d.content_dim = shape.content_dim;
  d.cond_dim = shape.cond_dim;
  const Eigen::Index in = d.input_dim();
  auto fill = [&](Matrix& m, Eigen::Index rows, Eigen::Index cols, double sd) {
    m.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = sd * rng.normal();
    }
  };
  auto fill_vec = [&](Vector& v, Eigen::Index n, double sd) {
    v.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = sd * rng.normal();
  };
  fill(d.hidden_weight, shape.hidden_width, in, 1.0 / std::sqrt(double(in)));
  fill_vec(d.hidden_bias, shape.hidden_width, bias_std);
  fill(d.output_weight, shape.output_dim, shape.hidden_width,
       1.0 / std::sqrt(double(shape.hidden_width)));
  fill_vec(d.output_bias, shape.output_dim, bias_std);
  return d;
}

void validate(const ToyDecoder& d) {
  if (d.hidden_weight.cols() != d.input_dim() ||
      d.hidden_bias.size() != d.hidden_weight.rows() ||
      d.output_weight.cols() != d.hidden_weight.rows() ||
      d.output_bias.size() != d.output_weight.rows()) {
    throw DimensionError("decoder: inconsistent parameter shapes");
  }
  if (!d.hidden_weight.allFinite() || !d.hidden_bias.allFinite() ||
      !d.output_weight.allFinite() || !d.output_bias.allFinite()) {
    throw NumericError("decoder: non-finite parameters");
  }
}

Matrix decode(const ToyDecoder& decoder, const Matrix& content,
              const Vector& cond, const Vector& pitch, DecoderTrace* trace) {
  const Eigen::Index frames = content.rows();
  if (pitch.size() != frames) {
    throw DimensionError("decode: content has " + std::to_string(frames) +
                         " frames but pitch has " +
                         std::to_string(pitch.size()));
  }
  if (content.cols() != decoder.content_dim) {
    throw DimensionError("decode: content dimension " +
                         std::to_string(content.cols()) + " != decoder " +
                         std::to_string(decoder.content_dim));
  }
  if (cond.size() != decoder.cond_dim) {
    throw DimensionError("decode: conditioning dimension " +
                         std::to_string(cond.size()) + " != decoder " +
                         std::to_string(decoder.cond_dim));
  }
  Matrix input(frames, decoder.input_dim());
  input.leftCols(decoder.content_dim) = content;
  input.middleCols(decoder.content_dim, decoder.cond_dim) =
      cond.transpose().replicate(frames, 1);
  input.rightCols(1) = pitch;
  Matrix hidden = input * decoder.hidden_weight.transpose();
  hidden.rowwise() += decoder.hidden_bias.transpose();
  hidden = hidden.array().tanh().matrix();
  Matrix output = hidden * decoder.output_weight.transpose();
  output.rowwise() += decoder.output_bias.transpose();
  if (trace != nullptr) {
    trace->input = std::move(input);
    trace->hidden = std::move(hidden);
  }
  return output;
}

Vector decode_backward(const ToyDecoder& decoder, const DecoderTrace& trace,
                       const Matrix& grad_output, ToyDecoder* param_grads,
                       double scale) {
  const Matrix grad_hidden = grad_output * decoder.output_weight;
  const Matrix grad_pre =
      (grad_hidden.array() * (1.0 - trace.hidden.array().square())).matrix();
  if (param_grads != nullptr) {
    param_grads->output_weight.noalias() +=
        scale * grad_output.transpose() * trace.hidden;
    param_grads->output_bias += scale * grad_output.colwise().sum().transpose();
    param_grads->hidden_weight.noalias() +=
        scale * grad_pre.transpose() * trace.input;
    param_grads->hidden_bias += scale * grad_pre.colwise().sum().transpose();
  }
  // Only the conditioning columns of the input are needed upstream.
  const Matrix cond_weight =
      decoder.hidden_weight.middleCols(decoder.content_dim, decoder.cond_dim);
  return (grad_pre.colwise().sum() * cond_weight).transpose();
}

}  // namespace memalign
