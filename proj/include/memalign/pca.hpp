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

#ifndef MEMALIGN_PCA_HPP_
#define MEMALIGN_PCA_HPP_

#include <vector>

#include "memalign/numerics.hpp"

namespace memalign {

struct PcaOptions {
  double tolerance = 1e-9;
  int max_iterations = 1000;
};

// Mean-centres `samples` (one per row) and projects them onto the two
// leading principal directions found by power iteration with deflation.
// Each direction is signed so its first nonzero coordinate is positive.
// Returns an n x 2 matrix.
Matrix pca_project_2d(const Matrix& samples, const PcaOptions& options = {});

Matrix stack_rows(const std::vector<Vector>& vectors);

}  // namespace memalign

#endif  // MEMALIGN_PCA_HPP_
