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

// Finite-difference verification of the analytic gradients of the store,
// align, intra and inter losses at random small configurations.

#ifndef MEMALIGN_GRADCHECK_HPP_
#define MEMALIGN_GRADCHECK_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "memalign/trainer.hpp"

namespace memalign {

struct GradcheckOptions {
  std::uint64_t seed = 1;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint32_t configurations = 100;
};

struct GradcheckResult {
  std::string loss;
  double max_relative_error = 0;
  std::uint32_t configurations = 0;
  // Parameter blocks that must receive exactly zero gradient but did not.
  std::vector<std::string> leaking_blocks;
  bool passed = false;
};

// Flattened view over the trainable blocks of a memory-conditioned model
// in the order voice_value, face_key, decoder (W1, b1, W2, b2).
Vector pack_parameters(const TrainedModel& model);
void unpack_parameters(const Vector& flat, TrainedModel& model);
Vector pack_gradients(const ModelGradients& grads);

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& options);

}  // namespace memalign

#endif  // MEMALIGN_GRADCHECK_HPP_
