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

#include "memalign/run_config.hpp"

#include <functional>
#include <limits>
#include <map>

#include "memalign/util.hpp"

namespace memalign {

namespace {

using Json = nlohmann::json;

[[noreturn]] void bad_type(const std::string& key, const char* expected) {
  throw ConfigError("config key '" + key + "': expected " + expected);
}

template <typename T>
T get_unsigned(const std::string& key, const Json& v) {
  if (v.is_number_unsigned()) {
    const auto raw = v.get<std::uint64_t>();
    if (raw > std::numeric_limits<T>::max()) bad_type(key, "a smaller integer");
    return T(raw);
  }
  if (v.is_number_integer()) {
    const auto raw = v.get<std::int64_t>();
    if (raw < 0) {
      throw ConfigError("config key '" + key + "': must be >= 0, got " +
                        v.dump());
    }
    if (std::uint64_t(raw) > std::numeric_limits<T>::max()) {
      bad_type(key, "a smaller integer");
    }
    return T(raw);
  }
  bad_type(key, "a non-negative integer");
}

std::int64_t get_int(const std::string& key, const Json& v) {
  if (!v.is_number_integer()) bad_type(key, "an integer");
  return v.get<std::int64_t>();
}

double get_double(const std::string& key, const Json& v) {
  if (!v.is_number()) bad_type(key, "a number");
  return v.get<double>();
}

bool get_bool(const std::string& key, const Json& v) {
  if (!v.is_boolean()) bad_type(key, "true or false");
  return v.get<bool>();
}

std::vector<std::int64_t> get_int_list(const std::string& key, const Json& v) {
  if (!v.is_array()) bad_type(key, "an array of integers");
  std::vector<std::int64_t> out;
  for (const auto& e : v) out.push_back(get_int(key, e));
  return out;
}

struct Field {
  std::function<Json(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const Json&)> set;
};

#define MEMALIGN_U32(name, member)                                        \
  {name,                                                                  \
   {[](const RunConfig& c) { return Json(c.member); },                    \
    [](RunConfig& c, const std::string& k, const Json& v) {               \
      c.member = get_unsigned<std::uint32_t>(k, v);                       \
    }}}
#define MEMALIGN_I64(name, member)                                        \
  {name,                                                                  \
   {[](const RunConfig& c) { return Json(c.member); },                    \
    [](RunConfig& c, const std::string& k, const Json& v) {               \
      c.member = get_int(k, v);                                           \
    }}}
#define MEMALIGN_F64(name, member)                                        \
  {name,                                                                  \
   {[](const RunConfig& c) { return Json(c.member); },                    \
    [](RunConfig& c, const std::string& k, const Json& v) {               \
      c.member = get_double(k, v);                                        \
    }}}
#define MEMALIGN_BOOL(name, member)                                       \
  {name,                                                                  \
   {[](const RunConfig& c) { return Json(c.member); },                    \
    [](RunConfig& c, const std::string& k, const Json& v) {               \
      c.member = get_bool(k, v);                                          \
    }}}
#define MEMALIGN_LIST(name, member)                                       \
  {name,                                                                  \
   {[](const RunConfig& c) { return Json(c.member); },                    \
    [](RunConfig& c, const std::string& k, const Json& v) {               \
      c.member = get_int_list(k, v);                                      \
    }}}

// Ordered as they appear in echoed documents.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"seed",
       {[](const RunConfig& c) { return Json(c.train.seed); },
        [](RunConfig& c, const std::string& k, const Json& v) {
          const auto seed = get_unsigned<std::uint64_t>(k, v);
          c.corpus.seed = seed;
          c.train.seed = seed;
          c.eval.seed = seed;
        }}},
      {"corpus_seed",
       {[](const RunConfig& c) { return Json(c.corpus.seed); },
        [](RunConfig& c, const std::string& k, const Json& v) {
          c.corpus.seed = get_unsigned<std::uint64_t>(k, v);
        }}},
      MEMALIGN_U32("n_train_speakers", corpus.n_train_speakers),
      MEMALIGN_U32("n_holdout_speakers", corpus.n_holdout_speakers),
      MEMALIGN_U32("images_per_speaker", corpus.images_per_speaker),
      MEMALIGN_U32("utterances_per_speaker", corpus.utterances_per_speaker),
      MEMALIGN_U32("latent_dim", corpus.latent_dim),
      MEMALIGN_U32("embedding_dim", corpus.embedding_dim),
      MEMALIGN_F64("face_noise", corpus.face_noise),
      MEMALIGN_F64("voice_noise", corpus.voice_noise),
      MEMALIGN_U32("frames", corpus.frames),
      MEMALIGN_U32("content_dim", corpus.content_dim),
      MEMALIGN_F64("lambda1", train.lambda1),
      MEMALIGN_F64("lambda2", train.lambda2),
      MEMALIGN_F64("lambda3", train.lambda3),
      MEMALIGN_I64("steps", train.steps),
      MEMALIGN_U32("batch_pairs", train.batch_pairs),
      MEMALIGN_F64("peak_lr", train.peak_lr),
      MEMALIGN_I64("warmup_steps", train.warmup_steps),
      MEMALIGN_LIST("decay_points", train.decay_points),
      MEMALIGN_F64("decay_factor", train.decay_factor),
      MEMALIGN_F64("adam_beta1", train.adam.beta1),
      MEMALIGN_F64("adam_beta2", train.adam.beta2),
      MEMALIGN_F64("adam_epsilon", train.adam.epsilon),
      MEMALIGN_BOOL("no_inter", train.no_inter),
      MEMALIGN_BOOL("no_mfva", train.no_mfva),
      MEMALIGN_BOOL("no_pretrain", train.no_pretrain),
      MEMALIGN_BOOL("detach_voice_weights", train.detach_voice_weights),
      MEMALIGN_BOOL("inter_updates_decoder", train.inter_updates_decoder),
      MEMALIGN_F64("temperature", train.temperature),
      MEMALIGN_U32("n_slots", train.n_slots),
      MEMALIGN_U32("hidden_width", train.hidden_width),
      MEMALIGN_U32("output_dim", train.output_dim),
      MEMALIGN_I64("pretrain_steps", train.pretrain_steps),
      MEMALIGN_U32("pretrain_batch", train.pretrain_batch),
      MEMALIGN_F64("pretrain_peak_lr", train.pretrain_peak_lr),
      MEMALIGN_I64("pretrain_warmup_steps", train.pretrain_warmup_steps),
      MEMALIGN_LIST("pretrain_decay_points", train.pretrain_decay_points),
      {"mode",
       {[](const RunConfig& c) { return Json(to_string(c.eval.mode)); },
        [](RunConfig& c, const std::string& k, const Json& v) {
          if (!v.is_string()) bad_type(k, "\"embedding\" or \"output\"");
          c.eval.mode = parse_eval_mode(v.get<std::string>());
        }}},
      MEMALIGN_U32("shr_shuffles", eval.shr_shuffles),
      MEMALIGN_U32("sdr_shuffles", eval.sdr_shuffles),
      MEMALIGN_U32("n_target_speakers", eval.n_target_speakers),
      MEMALIGN_U32("n_source_speakers", eval.n_source_speakers),
      MEMALIGN_U32("source_utterances", eval.source_utterances),
      MEMALIGN_U32("target_images", eval.target_images),
  };
  return table;
}

#undef MEMALIGN_U32
#undef MEMALIGN_I64
#undef MEMALIGN_F64
#undef MEMALIGN_BOOL
#undef MEMALIGN_LIST

const Field* find_field(const std::string& key) {
  for (const auto& [name, field] : fields()) {
    if (name == key) return &field;
  }
  return nullptr;
}

const char* kCorpusKeys[] = {
    "n_train_speakers", "n_holdout_speakers", "images_per_speaker",
    "utterances_per_speaker", "latent_dim", "embedding_dim", "face_noise",
    "voice_noise", "frames", "content_dim"};

}  // namespace

void set_value(RunConfig& config, const std::string& key, const Json& value) {
  const Field* field = find_field(key);
  if (field == nullptr) {
    throw ConfigError("unknown config key '" + key + "'");
  }
  field->set(config, key, value);
}

void apply_json(RunConfig& config, const Json& object) {
  if (!object.is_object()) {
    throw ConfigError("config must be a flat JSON object");
  }
  // "seed" fans out to every stream, so it goes first and more specific
  // keys such as corpus_seed can refine it.
  if (object.contains("seed")) set_value(config, "seed", object.at("seed"));
  for (const auto& [key, value] : object.items()) {
    if (key != "seed") set_value(config, key, value);
  }
}

void apply_assignment(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_value(config, key, value);
}

nlohmann::ordered_json to_json(const RunConfig& config) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& [name, field] : fields()) {
    out[name] = nlohmann::ordered_json::parse(field.get(config).dump());
  }
  return out;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  Json parsed = Json::parse(text, nullptr, false);
  if (parsed.is_discarded()) {
    throw ConfigError("config " + path.string() + " is not valid JSON");
  }
  RunConfig config;
  apply_json(config, parsed);
  return config;
}

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, field] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

nlohmann::ordered_json corpus_spec_to_json(const CorpusSpec& spec) {
  RunConfig c;
  c.corpus = spec;
  const auto all = to_json(c);
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const char* key : kCorpusKeys) out[key] = all[key];
  out["seed"] = spec.seed;
  return out;
}

CorpusSpec corpus_spec_from_json(const Json& object) {
  if (!object.is_object()) {
    throw ConfigError("corpus spec must be a flat JSON object");
  }
  RunConfig c;
  for (const auto& [key, value] : object.items()) {
    bool known = key == "seed";
    for (const char* k : kCorpusKeys) known = known || key == k;
    if (!known) throw ConfigError("unknown corpus spec key '" + key + "'");
    set_value(c, key == "seed" ? "corpus_seed" : key, value);
  }
  for (const char* k : kCorpusKeys) {
    if (!object.contains(k)) {
      throw ConfigError(std::string("corpus spec is missing '") + k + "'");
    }
  }
  if (!object.contains("seed")) {
    throw ConfigError("corpus spec is missing 'seed'");
  }
  return c.corpus;
}

void validate(const RunConfig& config) {
  validate(config.corpus);
  validate(config.train);
}

}  // namespace memalign
