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

#include "memalign/pca.hpp"

#include <string>

namespace memalign {

namespace {

void canonical_sign(Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12) {
      if (v[i] < 0) v = -v;
      return;
    }
  }
}

Vector leading_direction(const Matrix& cov, const PcaOptions& options) {
  Eigen::Index start = 0;
  cov.colwise().norm().maxCoeff(&start);
  Vector v = cov.col(start);
  const double norm = v.norm();
  if (norm < 1e-300) return Vector::Zero(cov.rows());
  v /= norm;
  for (int it = 0; it < options.max_iterations; ++it) {
    Vector next = cov * v;
    const double n = next.norm();
    if (n < 1e-300) return Vector::Zero(cov.rows());
    next /= n;
    if (next.dot(v) < 0) next = -next;
    const double change = (next - v).norm();
    v = next;
    if (change < options.tolerance) break;
  }
  canonical_sign(v);
  return v;
}

}  // namespace

Matrix stack_rows(const std::vector<Vector>& vectors) {
  if (vectors.empty()) return Matrix();
  Matrix out(Eigen::Index(vectors.size()), vectors.front().size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != out.cols()) {
      throw DimensionError("stack_rows: vector " + std::to_string(i) +
                           " has length " + std::to_string(vectors[i].size()) +
                           ", expected " + std::to_string(out.cols()));
    }
    out.row(Eigen::Index(i)) = vectors[i].transpose();
  }
  return out;
}

Matrix pca_project_2d(const Matrix& samples, const PcaOptions& options) {
  if (samples.rows() < 2) {
    throw ConfigError("pca_project_2d: need at least 2 samples, got " +
                      std::to_string(samples.rows()));
  }
  const Matrix centered = samples.rowwise() - samples.colwise().mean();
  Matrix cov = centered.transpose() * centered / double(samples.rows());
  Matrix directions = Matrix::Zero(samples.cols(), 2);
  for (int c = 0; c < 2 && c < samples.cols(); ++c) {
    const Vector v = leading_direction(cov, options);
    directions.col(c) = v;
    const double eigenvalue = v.dot(cov * v);
    cov -= eigenvalue * v * v.transpose();
  }
  return centered * directions;
}

}  // namespace memalign
