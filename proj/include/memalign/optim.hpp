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

#ifndef MEMALIGN_OPTIM_HPP_
#define MEMALIGN_OPTIM_HPP_

#include <cstdint>
#include <vector>

#include "memalign/numerics.hpp"

namespace memalign {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias-corrected moments. Parameter blocks are addressed by a
// caller-chosen slot index; moment buffers are created on first use.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  // Advances the shared step counter. Call once before updating the blocks
  // of a step.
  void begin_step() { ++step_; }

  void apply(std::size_t slot, Eigen::Ref<Vector> param,
             const Eigen::Ref<const Vector>& grad, double lr);

  std::int64_t step() const { return step_; }

 private:
  AdamOptions options_;
  std::int64_t step_ = 0;
  std::vector<Vector> first_;
  std::vector<Vector> second_;
};

// Flat column view over any dense Eigen object.
template <typename Derived>
Eigen::Map<Vector> flat(Eigen::PlainObjectBase<Derived>& m) {
  return Eigen::Map<Vector>(m.data(), m.size());
}

template <typename Derived>
Eigen::Map<const Vector> flat(const Eigen::PlainObjectBase<Derived>& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

// Linear warmup from `floor` to `peak` over `warmup_steps`, then the peak
// rate multiplied by `decay_factor` once for every decay point at or below
// the current step.
struct LrSchedule {
  double floor = 1e-6;
  double peak = 2.5e-4;
  std::int64_t warmup_steps = 300;
  std::vector<std::int64_t> decay_points{800, 1200, 1600};
  double decay_factor = 0.5;

  double at(std::int64_t step) const;
};

}  // namespace memalign

#endif  // MEMALIGN_OPTIM_HPP_
