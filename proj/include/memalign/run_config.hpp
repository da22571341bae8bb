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

// Flat run configuration shared by every command: corpus spec, training
// config and evaluation options in one JSON object. A single `seed` key
// drives every random stream.

#ifndef MEMALIGN_RUN_CONFIG_HPP_
#define MEMALIGN_RUN_CONFIG_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "memalign/corpus.hpp"
#include "memalign/eval.hpp"
#include "memalign/trainer.hpp"

namespace memalign {

struct RunConfig {
  CorpusSpec corpus;
  TrainConfig train;
  EvalOptions eval;

  std::uint64_t seed() const { return train.seed; }
};

// Sets one key. Throws ConfigError for unknown keys or ill-typed values.
void set_value(RunConfig& config, const std::string& key,
               const nlohmann::json& value);

// Applies every key of a flat JSON object.
void apply_json(RunConfig& config, const nlohmann::json& object);

// Parses "key=value" where value is JSON (bare strings are accepted).
void apply_assignment(RunConfig& config, const std::string& assignment);

nlohmann::ordered_json to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

const std::vector<std::string>& run_config_keys();

// corpus.json: exactly the CorpusSpec fields.
nlohmann::ordered_json corpus_spec_to_json(const CorpusSpec& spec);
CorpusSpec corpus_spec_from_json(const nlohmann::json& object);

void validate(const RunConfig& config);

}  // namespace memalign

#endif  // MEMALIGN_RUN_CONFIG_HPP_
