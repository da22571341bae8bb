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

#include "memalign/model_io.hpp"

#include <sstream>

#include "memalign/run_config.hpp"
#include "memalign/util.hpp"

namespace memalign {

using OJson = nlohmann::ordered_json;

OJson matrix_to_json(const Matrix& m) {
  if (!m.allFinite()) throw NumericError("model: non-finite parameter");
  OJson rows = OJson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    OJson row = OJson::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const OJson& j, const char* what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw ConfigError(std::string("model: '") + what +
                      "' must be a non-empty array of rows");
  }
  const Eigen::Index rows = Eigen::Index(j.size());
  const Eigen::Index cols = Eigen::Index(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[std::size_t(i)];
    if (!row.is_array() || Eigen::Index(row.size()) != cols) {
      throw ConfigError(std::string("model: '") + what + "' row " +
                        std::to_string(i) + " has the wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[std::size_t(c)];
      if (!v.is_number()) {
        throw ConfigError(std::string("model: '") + what +
                          "' holds a non-numeric entry");
      }
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

namespace {

OJson vector_to_json(const Vector& v) {
  if (!v.allFinite()) throw NumericError("model: non-finite parameter");
  OJson out = OJson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const OJson& j, const char* what) {
  if (!j.is_array()) {
    throw ConfigError(std::string("model: '") + what + "' must be an array");
  }
  Vector v(Eigen::Index(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ConfigError(std::string("model: '") + what +
                        "' holds a non-numeric entry");
    }
    v[Eigen::Index(i)] = j[i].get<double>();
  }
  return v;
}

const OJson& require(const OJson& j, const char* key) {
  if (!j.contains(key)) {
    throw ConfigError(std::string("model: missing key '") + key + "'");
  }
  return j.at(key);
}

OJson decoder_to_json(const ToyDecoder& d) {
  OJson out;
  out["content_dim"] = d.content_dim;
  out["cond_dim"] = d.cond_dim;
  out["hidden_width"] = d.hidden_width();
  out["output_dim"] = d.output_dim();
  out["hidden_weight"] = matrix_to_json(d.hidden_weight);
  out["hidden_bias"] = vector_to_json(d.hidden_bias);
  out["output_weight"] = matrix_to_json(d.output_weight);
  out["output_bias"] = vector_to_json(d.output_bias);
  return out;
}

ToyDecoder decoder_from_json(const OJson& j) {
  ToyDecoder d;
  d.content_dim = require(j, "content_dim").get<Eigen::Index>();
  d.cond_dim = require(j, "cond_dim").get<Eigen::Index>();
  d.hidden_weight = matrix_from_json(require(j, "hidden_weight"),
                                     "hidden_weight");
  d.hidden_bias = vector_from_json(require(j, "hidden_bias"), "hidden_bias");
  d.output_weight = matrix_from_json(require(j, "output_weight"),
                                     "output_weight");
  d.output_bias = vector_from_json(require(j, "output_bias"), "output_bias");
  validate(d);
  return d;
}

OJson losses_to_json(const LossTerms& t) {
  OJson out;
  out["total"] = t.total;
  out["store"] = t.store;
  out["align"] = t.align;
  out["intra"] = t.intra;
  out["inter"] = t.inter;
  return out;
}

LossTerms losses_from_json(const OJson& j) {
  LossTerms t;
  t.total = require(j, "total").get<double>();
  t.store = require(j, "store").get<double>();
  t.align = require(j, "align").get<double>();
  t.intra = require(j, "intra").get<double>();
  t.inter = require(j, "inter").get<double>();
  return t;
}

}  // namespace

OJson mfva_to_json(const MfvaModule& module) {
  validate(module);
  OJson out;
  out["n_slots"] = module.n_slots();
  out["dim"] = module.dim();
  out["temperature"] = module.temperature;
  out["detach_voice_weights"] = module.detach_voice_weights;
  out["voice_value"] = matrix_to_json(module.voice_value.slots);
  out["face_key"] = matrix_to_json(module.face_key.slots);
  return out;
}

MfvaModule mfva_from_json(const OJson& j) {
  MfvaModule module;
  module.temperature = require(j, "temperature").get<double>();
  module.detach_voice_weights = require(j, "detach_voice_weights").get<bool>();
  module.voice_value = {matrix_from_json(require(j, "voice_value"),
                                         "voice_value"),
                        BankRole::kVoiceValue};
  module.face_key = {matrix_from_json(require(j, "face_key"), "face_key"),
                     BankRole::kFaceKey};
  const auto n = require(j, "n_slots").get<Eigen::Index>();
  const auto dim = require(j, "dim").get<Eigen::Index>();
  if (module.voice_value.size() != n || module.voice_value.dim() != dim) {
    throw DimensionError("model: declared bank shape " + std::to_string(n) +
                         "x" + std::to_string(dim) +
                         " disagrees with stored slots");
  }
  validate(module);
  return module;
}

std::string model_to_string(const TrainedModel& model, const OJson& config) {
  OJson doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelVersion;
  doc["phase"] = model.metadata.phase;
  doc["conditioning"] = to_string(model.conditioning());
  doc["inter_updates_decoder"] = model.config.inter_updates_decoder;
  if (model.memory) doc["memory"] = mfva_to_json(*model.memory);
  if (model.projection) {
    OJson proj;
    proj["weight"] = matrix_to_json(model.projection->weight);
    proj["bias"] = vector_to_json(model.projection->bias);
    doc["projection"] = std::move(proj);
  }
  doc["decoder"] = decoder_to_json(model.decoder);
  OJson training;
  training["steps_completed"] = model.metadata.steps_completed;
  training["final_losses"] = losses_to_json(model.metadata.final_losses);
  doc["training"] = std::move(training);
  if (config.is_object()) {
    doc["config"] = config;
  } else {
    RunConfig echo;
    echo.train = model.config;
    doc["config"] = to_json(echo);
  }
  return doc.dump(1) + "\n";
}

TrainedModel model_from_string(const std::string& text) {
  const OJson doc = OJson::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ConfigError("model: document is not a JSON object");
  }
  if (!doc.contains("format") || doc["format"] != kModelFormat) {
    throw ConfigError("model: not a memalign model document");
  }
  if (require(doc, "version") != kModelVersion) {
    throw ConfigError("model: unsupported version " + doc["version"].dump());
  }
  TrainedModel model;
  try {
    if (doc.contains("config")) {
      RunConfig rc;
      apply_json(rc, nlohmann::json::parse(doc["config"].dump()));
      model.config = rc.train;
    }
    model.config.inter_updates_decoder =
        require(doc, "inter_updates_decoder").get<bool>();
    model.metadata.phase = require(doc, "phase").get<std::string>();
    if (doc.contains("memory")) model.memory = mfva_from_json(doc["memory"]);
    if (doc.contains("projection")) {
      AffineProjection proj;
      proj.weight = matrix_from_json(require(doc["projection"], "weight"),
                                     "projection.weight");
      proj.bias =
          vector_from_json(require(doc["projection"], "bias"), "projection.bias");
      if (proj.weight.rows() != proj.bias.size()) {
        throw DimensionError("model: projection bias length mismatch");
      }
      model.projection = std::move(proj);
    }
    model.decoder = decoder_from_json(require(doc, "decoder"));
    const auto& training = require(doc, "training");
    model.metadata.steps_completed =
        require(training, "steps_completed").get<std::int64_t>();
    model.metadata.final_losses =
        losses_from_json(require(training, "final_losses"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: malformed document: ") + e.what());
  }
  if (model.memory && model.memory->dim() != model.decoder.cond_dim) {
    throw DimensionError("model: memory dimension " +
                         std::to_string(model.memory->dim()) +
                         " != decoder conditioning dimension " +
                         std::to_string(model.decoder.cond_dim));
  }
  return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path,
                const OJson& config) {
  write_file_atomic(path, model_to_string(model, config));
}

TrainedModel load_model(const std::filesystem::path& path) {
  return model_from_string(read_file(path));
}

std::string loss_curve_csv(const LossCurve& curve) {
  std::ostringstream out;
  out << "step,total,store,align,intra,inter\n";
  for (const auto& row : curve) {
    out << row.step << ',' << format_double(row.terms.total) << ','
        << format_double(row.terms.store) << ','
        << format_double(row.terms.align) << ','
        << format_double(row.terms.intra) << ','
        << format_double(row.terms.inter) << '\n';
  }
  return out.str();
}

}  // namespace memalign
