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

// Model documents: JSON with a fixed key order. Banks and weight matrices
// are stored row-major as arrays of rows; doubles use the shortest
// round-trip decimal form, so a document reloads to bit-identical
// parameters.

#ifndef MEMALIGN_MODEL_IO_HPP_
#define MEMALIGN_MODEL_IO_HPP_

#include <filesystem>
#include <string>

#include <json.hpp>

#include "memalign/mfva.hpp"
#include "memalign/trainer.hpp"

namespace memalign {

inline constexpr const char* kModelFormat = "memalign-model";
inline constexpr int kModelVersion = 1;

nlohmann::ordered_json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::ordered_json& j, const char* what);

nlohmann::ordered_json mfva_to_json(const MfvaModule& module);
MfvaModule mfva_from_json(const nlohmann::ordered_json& j);

// `config` is the flat effective run configuration echoed into the file.
std::string model_to_string(const TrainedModel& model,
                            const nlohmann::ordered_json& config = {});
TrainedModel model_from_string(const std::string& text);

void save_model(const TrainedModel& model, const std::filesystem::path& path,
                const nlohmann::ordered_json& config = {});
TrainedModel load_model(const std::filesystem::path& path);

// step,total,store,align,intra,inter
std::string loss_curve_csv(const LossCurve& curve);

}  // namespace memalign

#endif  // MEMALIGN_MODEL_IO_HPP_
