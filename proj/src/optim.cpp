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

#include "memalign/optim.hpp"

#include <string>

namespace memalign {

void Adam::apply(std::size_t slot, Eigen::Ref<Vector> param,
                 const Eigen::Ref<const Vector>& grad, double lr) {
  if (param.size() != grad.size()) {
    throw DimensionError("adam: parameter block " + std::to_string(slot) +
                         " has " + std::to_string(param.size()) +
                         " entries but gradient has " +
                         std::to_string(grad.size()));
  }
  if (step_ < 1) throw ConfigError("adam: apply() before begin_step()");
  if (slot >= first_.size()) {
    first_.resize(slot + 1);
    second_.resize(slot + 1);
  }
  if (first_[slot].size() == 0) {
    first_[slot] = Vector::Zero(param.size());
    second_[slot] = Vector::Zero(param.size());
  } else if (first_[slot].size() != param.size()) {
    throw DimensionError("adam: parameter block " + std::to_string(slot) +
                         " changed size from " +
                         std::to_string(first_[slot].size()) + " to " +
                         std::to_string(param.size()));
  }
  Vector& m = first_[slot];
  Vector& v = second_[slot];
  m = options_.beta1 * m + (1.0 - options_.beta1) * grad;
  v = options_.beta2 * v + (1.0 - options_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(options_.beta1, double(step_));
  const double c2 = 1.0 - std::pow(options_.beta2, double(step_));
  param.array() -=
      lr * (m.array() / c1) / ((v.array() / c2).sqrt() + options_.epsilon);
}

double LrSchedule::at(std::int64_t step) const {
  if (step < warmup_steps) {
    return floor + (peak - floor) * double(step) / double(warmup_steps);
  }
  double lr = peak;
  for (const auto point : decay_points) {
    if (step >= point) lr *= decay_factor;
  }
  return lr;
}

}  // namespace memalign
