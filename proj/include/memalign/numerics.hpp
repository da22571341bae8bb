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

// Dense primitives shared by every loss: cosine similarity, tempered
// softmax, KL divergence, mean-reduced MSE / L1, their analytic gradients
// and a central-difference gradient checker. All functions are templated
// on the Eigen expression type and work for any floating scalar, though
// the rest of the library instantiates them with double only.

#ifndef MEMALIGN_NUMERICS_HPP_
#define MEMALIGN_NUMERICS_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "memalign/error.hpp"

namespace memalign {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Floor applied to vector norms inside cosine similarity.
inline constexpr double kNormFloor = 1e-8;

namespace internal {

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a,
                        const Eigen::MatrixBase<B>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch (" +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
  }
}

template <typename A, typename B>
void require_same_length(const Eigen::MatrixBase<A>& a,
                         const Eigen::MatrixBase<B>& b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": length mismatch (" +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
}

}  // namespace internal

template <typename A, typename B>
typename A::Scalar cosine_similarity(const Eigen::MatrixBase<A>& a,
                                     const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  internal::require_same_length(a, b, "cosine_similarity");
  const Scalar floor = Scalar(kNormFloor);
  const Scalar na = std::max(a.norm(), floor);
  const Scalar nb = std::max(b.norm(), floor);
  return a.dot(b) / (na * nb);
}

// d cos(a, b) / d b. The query `a` is held fixed; when ‖b‖ sits at or
// below the floor the denominator is constant and only the numerator
// contributes.
template <typename A, typename B>
Eigen::Matrix<typename A::Scalar, Eigen::Dynamic, 1> cosine_gradient(
    const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  internal::require_same_length(a, b, "cosine_gradient");
  const Scalar floor = Scalar(kNormFloor);
  const Scalar na = std::max(a.norm(), floor);
  const Scalar raw_nb = b.norm();
  if (raw_nb <= floor) return a / (na * floor);
  const Scalar dot = a.dot(b);
  return a / (na * raw_nb) - b * (dot / (na * raw_nb * raw_nb * raw_nb));
}

// Tempered softmax with max subtraction.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::MatrixBase<Derived>& scores,
    typename Derived::Scalar temperature = 1) {
  using Scalar = typename Derived::Scalar;
  if (!(temperature > Scalar(0))) {
    throw ConfigError("softmax: temperature must be > 0, got " +
                      std::to_string(double(temperature)));
  }
  if (scores.size() == 0) throw DimensionError("softmax: empty score vector");
  const Scalar top = scores.maxCoeff();
  // Floor at the smallest normal so extreme gaps never yield an exact zero.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w =
      ((scores.array() - top) / temperature)
          .exp()
          .max(std::numeric_limits<Scalar>::min())
          .matrix();
  return w / w.sum();
}

// Vector-Jacobian product of softmax: maps dL/dw onto dL/dscores.
template <typename W, typename G>
Eigen::Matrix<typename W::Scalar, Eigen::Dynamic, 1> softmax_backward(
    const Eigen::MatrixBase<W>& weights, const Eigen::MatrixBase<G>& grad,
    typename W::Scalar temperature) {
  internal::require_same_length(weights, grad, "softmax_backward");
  const auto centered = grad.dot(weights);
  return (weights.array() * (grad.array() - centered) / temperature).matrix();
}

// Σ p_i ln(p_i / q_i). Both arguments must be strictly positive.
template <typename P, typename Q>
typename P::Scalar kl_divergence(const Eigen::MatrixBase<P>& p,
                                 const Eigen::MatrixBase<Q>& q) {
  internal::require_same_length(p, q, "kl_divergence");
  return (p.array() * (p.array() / q.array()).log()).sum();
}

// dKL/dp and dKL/dq for unconstrained p, q.
template <typename P, typename Q>
Eigen::Matrix<typename P::Scalar, Eigen::Dynamic, 1> kl_gradient_p(
    const Eigen::MatrixBase<P>& p, const Eigen::MatrixBase<Q>& q) {
  internal::require_same_length(p, q, "kl_gradient_p");
  return ((p.array() / q.array()).log() + 1).matrix();
}

template <typename P, typename Q>
Eigen::Matrix<typename P::Scalar, Eigen::Dynamic, 1> kl_gradient_q(
    const Eigen::MatrixBase<P>& p, const Eigen::MatrixBase<Q>& q) {
  internal::require_same_length(p, q, "kl_gradient_q");
  return (-p.array() / q.array()).matrix();
}

template <typename A, typename B>
typename A::Scalar mse_loss(const Eigen::MatrixBase<A>& a,
                            const Eigen::MatrixBase<B>& b) {
  internal::require_same_shape(a, b, "mse_loss");
  if (a.size() == 0) return 0;
  return (a - b).squaredNorm() / typename A::Scalar(a.size());
}

template <typename A, typename B>
typename A::Scalar l1_loss(const Eigen::MatrixBase<A>& a,
                           const Eigen::MatrixBase<B>& b) {
  internal::require_same_shape(a, b, "l1_loss");
  if (a.size() == 0) return 0;
  return (a - b).cwiseAbs().sum() / typename A::Scalar(a.size());
}

// d mse / d a.
template <typename A, typename B>
Eigen::Matrix<typename A::Scalar, Eigen::Dynamic, Eigen::Dynamic>
mse_gradient(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  internal::require_same_shape(a, b, "mse_gradient");
  return (a - b) * (typename A::Scalar(2) / typename A::Scalar(a.size()));
}

// d l1 / d a, with the zero subgradient at ties.
template <typename A, typename B>
Eigen::Matrix<typename A::Scalar, Eigen::Dynamic, Eigen::Dynamic>
l1_gradient(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  internal::require_same_shape(a, b, "l1_gradient");
  return (a - b).array().sign().matrix() /
         typename A::Scalar(a.size());
}

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
template <typename Fn>
Vector finite_difference_gradient(Fn&& f, const Vector& x, double h = 1e-5) {
  if (!(h > 0)) {
    throw ConfigError("finite_difference_gradient: step must be > 0");
  }
  Vector grad(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(probe);
    probe[i] = saved - h;
    const double down = f(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError(
          "finite_difference_gradient: non-finite evaluation at coordinate " +
          std::to_string(i));
    }
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

// ‖a - b‖ / max(‖a‖, ‖b‖), zero when both vanish.
inline double relative_error(const Vector& analytic, const Vector& numeric) {
  const double scale = std::max(analytic.norm(), numeric.norm());
  if (scale == 0) return 0;
  return (analytic - numeric).norm() / scale;
}

// True when `w` is a valid slot-weight distribution: every entry strictly
// positive and the total within `tol` of one.
template <typename Derived>
bool is_weight_vector(const Eigen::MatrixBase<Derived>& w, double tol = 1e-9) {
  if (w.size() == 0) return false;
  if (!w.allFinite()) return false;
  if ((w.array() <= 0).any()) return false;
  return std::abs(double(w.sum()) - 1.0) <= tol;
}

}  // namespace memalign

#endif  // MEMALIGN_NUMERICS_HPP_
