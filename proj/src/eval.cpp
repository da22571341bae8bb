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

#include "memalign/eval.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "memalign/random.hpp"
#include "memalign/util.hpp"

namespace memalign {

std::string to_string(EvalMode mode) {
  return mode == EvalMode::kOutput ? "output" : "embedding";
}

EvalMode parse_eval_mode(const std::string& text) {
  if (text == "embedding") return EvalMode::kEmbedding;
  if (text == "output") return EvalMode::kOutput;
  throw ConfigError("mode must be 'embedding' or 'output', got '" + text + "'");
}

Vector SpeakerProbe::apply(const Vector& pooled) const {
  if (pooled.size() + 1 != map.cols()) {
    throw DimensionError("probe: pooled frame length " +
                         std::to_string(pooled.size()) + " != " +
                         std::to_string(map.cols() - 1));
  }
  return map.leftCols(pooled.size()) * pooled + map.col(map.cols() - 1);
}

SpeakerProbe fit_probe(const TrainedModel& model,
                       const SyntheticCorpus& corpus) {
  const auto& spec = corpus.spec;
  const Eigen::Index features = model.decoder.output_dim() + 1;
  const Eigen::Index rows =
      Eigen::Index(spec.n_train_speakers) * spec.utterances_per_speaker;
  if (rows < features) {
    throw ConfigError("output mode: probe needs at least " +
                      std::to_string(features) +
                      " training utterances, corpus has " +
                      std::to_string(rows));
  }
  Matrix design(rows, features);
  Matrix targets(rows, spec.embedding_dim);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& utt = corpus.utterances[std::size_t(r)];
    const Vector& s = corpus.voices[std::size_t(r)].vector;
    const Matrix out = decode(model.decoder, utt.content, s, utt.pitch);
    design.row(r).head(features - 1) = out.colwise().mean();
    design(r, features - 1) = 1.0;
    targets.row(r) = s.transpose();
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < features) {
    throw ConfigError("output mode: probe design is rank deficient (rank " +
                      std::to_string(qr.rank()) + " < " +
                      std::to_string(features) + ")");
  }
  const Matrix solution = qr.solve(targets);  // features x D
  SpeakerProbe probe;
  probe.map = solution.transpose();
  probe.residual =
      (design * solution - targets).squaredNorm() / double(targets.size());
  return probe;
}

HoldoutSelection select_holdout(const SyntheticCorpus& corpus,
                                const EvalOptions& options) {
  if (options.n_target_speakers < 1 || options.n_source_speakers < 1 ||
      options.source_utterances < 1 || options.target_images < 1) {
    throw ConfigError("eval: target/source counts must all be >= 1");
  }
  if (options.source_utterances > corpus.spec.utterances_per_speaker) {
    throw ConfigError("eval: source_utterances exceeds utterances_per_speaker");
  }
  if (options.target_images > corpus.spec.images_per_speaker) {
    throw ConfigError("eval: target_images exceeds images_per_speaker");
  }
  std::vector<std::uint32_t> male, female;
  for (const auto id : corpus.speakers_in_split(true)) {
    (corpus.speakers[id].gender == 1 ? male : female).push_back(id);
  }
  const std::uint32_t want_male = (options.n_target_speakers + 1) / 2;
  const std::uint32_t want_female = options.n_target_speakers / 2;
  if (male.size() < want_male || female.size() < want_female) {
    throw ConfigError("eval: held-out split has " +
                      std::to_string(male.size()) + " gender-1 and " +
                      std::to_string(female.size()) +
                      " gender-0 speakers; need " + std::to_string(want_male) +
                      " and " + std::to_string(want_female) + " targets");
  }
  HoldoutSelection sel;
  sel.targets.assign(male.begin(), male.begin() + want_male);
  sel.targets.insert(sel.targets.end(), female.begin(),
                     female.begin() + want_female);
  for (const auto id : corpus.speakers_in_split(true)) {
    if (sel.sources.size() == options.n_source_speakers) break;
    if (std::find(sel.targets.begin(), sel.targets.end(), id) ==
        sel.targets.end()) {
      sel.sources.push_back(id);
    }
  }
  if (sel.sources.size() < options.n_source_speakers) {
    throw ConfigError("eval: held-out split too small for " +
                      std::to_string(options.n_target_speakers) +
                      " targets and " +
                      std::to_string(options.n_source_speakers) + " sources");
  }
  return sel;
}

std::vector<ConversionRecord> convert_all(const TrainedModel& model,
                                          const SyntheticCorpus& corpus,
                                          const EvalOptions& options,
                                          const SpeakerProbe* probe) {
  if (corpus.spec.n_holdout_speakers == 0) {
    throw ConfigError("eval: empty held-out split");
  }
  if (options.mode == EvalMode::kOutput && probe == nullptr) {
    throw ConfigError("eval: output mode requires a speaker probe");
  }
  const HoldoutSelection sel = select_holdout(corpus, options);
  // Conditioning depends only on the face image, so compute it once.
  std::map<std::uint32_t, Vector> conditioning;
  for (const auto target : sel.targets) {
    for (std::uint32_t i = 0; i < options.target_images; ++i) {
      const auto& face = corpus.face(target, i);
      conditioning.emplace(face.entity_id, model.condition(face.vector));
    }
  }
  std::vector<ConversionRecord> records;
  for (const auto source : sel.sources) {
    for (std::uint32_t u = 0; u < options.source_utterances; ++u) {
      const auto& utt = corpus.utterance(source, u);
      for (const auto target : sel.targets) {
        for (std::uint32_t i = 0; i < options.target_images; ++i) {
          const auto& face = corpus.face(target, i);
          ConversionRecord rec{source, utt.utterance_id, target,
                               face.entity_id, Vector()};
          const Vector& cond = conditioning.at(face.entity_id);
          if (options.mode == EvalMode::kEmbedding) {
            rec.embedding = cond;
          } else {
            const Matrix out =
                decode(model.decoder, utt.content, cond, utt.pitch);
            rec.embedding = probe->apply(out.colwise().mean().transpose());
          }
          if (!rec.embedding.allFinite()) {
            throw NumericError("eval: non-finite converted embedding");
          }
          records.push_back(std::move(rec));
        }
      }
    }
  }
  return records;
}

namespace {

// Random matching within groups: each shuffle draws a uniform permutation π
// of a group, pairs member i with π(i) and averages cosine over admissible
// pairs. Group-shuffle averages are then averaged.
template <typename Admissible>
MetricValue random_matching(const std::vector<ConversionRecord>& records,
                            const std::map<std::uint32_t,
                                           std::vector<std::size_t>>& groups,
                            std::uint32_t n_shuffles, std::uint64_t seed,
                            Admissible admissible, const char* name) {
  if (n_shuffles < 1) {
    throw ConfigError(std::string(name) + ": shuffle count must be >= 1");
  }
  MetricValue result;
  struct Prepared {
    std::uint32_t key;
    std::vector<std::size_t> members;
    Matrix cosine;
  };
  std::vector<Prepared> prepared;
  for (const auto& [key, members] : groups) {
    if (members.size() < 2) {
      result.warnings.push_back(std::string(name) + ": group " +
                                std::to_string(key) +
                                " has fewer than 2 records; excluded");
      continue;
    }
    Prepared p{key, members, Matrix(members.size(), members.size())};
    bool any = false;
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = 0; j < members.size(); ++j) {
        p.cosine(i, j) = cosine_similarity(records[members[i]].embedding,
                                           records[members[j]].embedding);
        if (i != j && admissible(records[members[i]], records[members[j]])) {
          any = true;
        }
      }
    }
    if (!any) {
      result.warnings.push_back(std::string(name) + ": group " +
                                std::to_string(key) +
                                " has no admissible pair; excluded");
      continue;
    }
    prepared.push_back(std::move(p));
  }
  if (prepared.empty()) {
    throw ConfigError(std::string(name) + ": no group has an admissible pair");
  }
  SplitMix64 rng(seed);
  double total = 0;
  std::size_t total_count = 0;
  std::vector<double> group_sum(prepared.size(), 0.0);
  std::vector<std::size_t> group_count(prepared.size(), 0);
  std::vector<std::size_t> perm;
  for (std::uint32_t s = 0; s < n_shuffles; ++s) {
    for (std::size_t g = 0; g < prepared.size(); ++g) {
      const auto& p = prepared[g];
      const std::size_t m = p.members.size();
      perm.resize(m);
      std::iota(perm.begin(), perm.end(), std::size_t(0));
      for (std::size_t i = m - 1; i > 0; --i) {
        std::swap(perm[i], perm[std::size_t(rng.below(i + 1))]);
      }
      double sum = 0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = perm[i];
        if (i == j) continue;
        if (!admissible(records[p.members[i]], records[p.members[j]])) continue;
        sum += p.cosine(Eigen::Index(i), Eigen::Index(j));
        ++count;
      }
      if (count == 0) continue;
      const double mean = sum / double(count);
      group_sum[g] += mean;
      ++group_count[g];
      total += mean;
      ++total_count;
    }
  }
  if (total_count == 0) {
    throw NumericError(std::string(name) +
                       ": no admissible pair drawn in any shuffle");
  }
  result.value = total / double(total_count);
  for (std::size_t g = 0; g < prepared.size(); ++g) {
    if (group_count[g] > 0) {
      result.per_speaker[prepared[g].key] =
          group_sum[g] / double(group_count[g]);
    }
  }
  return result;
}

// One-to-one matching: every unordered admissible pair inside each group,
// pooled into a single mean. Per-speaker values pool by `speaker_of`.
template <typename Admissible, typename SpeakerOf>
MetricValue one_to_one(
    const std::vector<ConversionRecord>& records,
    const std::map<std::pair<std::uint32_t, std::uint32_t>,
                   std::vector<std::size_t>>& groups,
    Admissible admissible, SpeakerOf speaker_of, const char* name) {
  MetricValue result;
  double total = 0;
  std::size_t count = 0;
  std::map<std::uint32_t, std::pair<double, std::size_t>> per;
  for (const auto& [key, members] : groups) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        const auto& a = records[members[i]];
        const auto& b = records[members[j]];
        if (!admissible(a, b)) continue;
        const double c = cosine_similarity(a.embedding, b.embedding);
        total += c;
        ++count;
        auto& slot = per[speaker_of(key)];
        slot.first += c;
        ++slot.second;
      }
    }
  }
  if (count == 0) {
    throw ConfigError(std::string(name) + ": no admissible pair");
  }
  result.value = total / double(count);
  for (const auto& [speaker, acc] : per) {
    result.per_speaker[speaker] = acc.first / double(acc.second);
  }
  return result;
}

bool distinct_faces(const ConversionRecord& a, const ConversionRecord& b) {
  return a.target_face != b.target_face;
}

bool distinct_targets(const ConversionRecord& a, const ConversionRecord& b) {
  return a.target_speaker != b.target_speaker;
}

std::size_t count_targets(const std::vector<ConversionRecord>& records) {
  std::vector<std::uint32_t> ids;
  for (const auto& r : records) ids.push_back(r.target_speaker);
  std::sort(ids.begin(), ids.end());
  return std::size_t(std::unique(ids.begin(), ids.end()) - ids.begin());
}

void require_two_targets(const std::vector<ConversionRecord>& records,
                         const char* name) {
  if (count_targets(records) < 2) {
    throw ConfigError(std::string(name) +
                      ": needs at least 2 distinct target speakers");
  }
}

}  // namespace

MetricValue speaker_homogeneity_random(
    const std::vector<ConversionRecord>& records, std::uint32_t n_shuffles,
    std::uint64_t seed) {
  std::map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    groups[records[i].target_speaker].push_back(i);
  }
  return random_matching(records, groups, n_shuffles, seed, distinct_faces,
                         "shr");
}

MetricValue speaker_homogeneity_one_to_one(
    const std::vector<ConversionRecord>& records) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::size_t>>
      groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    groups[{records[i].source_utterance, records[i].target_speaker}]
        .push_back(i);
  }
  return one_to_one(
      records, groups, distinct_faces,
      [](const std::pair<std::uint32_t, std::uint32_t>& key) {
        return key.second;
      },
      "sho");
}

MetricValue speaker_diversity_random(
    const std::vector<ConversionRecord>& records, std::uint32_t n_shuffles,
    std::uint64_t seed) {
  require_two_targets(records, "sdr");
  std::map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    groups[records[i].source_speaker].push_back(i);
  }
  return random_matching(records, groups, n_shuffles, seed, distinct_targets,
                         "sdr");
}

MetricValue speaker_diversity_one_to_one(
    const std::vector<ConversionRecord>& records) {
  require_two_targets(records, "sdo");
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::size_t>>
      groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    groups[{records[i].source_speaker, records[i].source_utterance}]
        .push_back(i);
  }
  return one_to_one(
      records, groups, distinct_targets,
      [](const std::pair<std::uint32_t, std::uint32_t>& key) {
        return key.first;
      },
      "sdo");
}

std::uint8_t GenderCentroids::classify(const Vector& embedding) const {
  return cosine_similarity(embedding, male) >=
                 cosine_similarity(embedding, female)
             ? 1
             : 0;
}

GenderCentroids gender_centroids(const SyntheticCorpus& corpus) {
  const Eigen::Index dim = corpus.spec.embedding_dim;
  Vector sum[2] = {Vector::Zero(dim), Vector::Zero(dim)};
  std::size_t count[2] = {0, 0};
  for (const auto& v : corpus.voices) {
    if (corpus.is_holdout(v.speaker_id)) continue;
    const int g = v.attribute ? 1 : 0;
    sum[g] += v.vector;
    ++count[g];
  }
  for (int g = 0; g < 2; ++g) {
    if (count[g] == 0) {
      throw ConfigError("gender accuracy: no training voice embeddings for "
                        "gender " +
                        std::to_string(g));
    }
  }
  return {sum[0] / double(count[0]), sum[1] / double(count[1])};
}

double gender_accuracy(const std::vector<ConversionRecord>& records,
                       const SyntheticCorpus& corpus) {
  if (records.empty()) throw ConfigError("gender accuracy: no records");
  const GenderCentroids centroids = gender_centroids(corpus);
  std::size_t correct = 0;
  for (const auto& r : records) {
    if (r.target_speaker >= corpus.speakers.size()) {
      throw ConfigError("gender accuracy: unknown target speaker " +
                        std::to_string(r.target_speaker));
    }
    if (centroids.classify(r.embedding) ==
        corpus.speakers[r.target_speaker].gender) {
      ++correct;
    }
  }
  return double(correct) / double(records.size());
}

EvalReport evaluate(const TrainedModel& model, const SyntheticCorpus& corpus,
                    const EvalOptions& options,
                    std::vector<ConversionRecord>* records_out) {
  EvalReport report;
  report.mode = options.mode;
  report.shr_shuffles = options.shr_shuffles;
  report.sdr_shuffles = options.sdr_shuffles;
  report.seed = options.seed;
  report.conditioning = to_string(model.conditioning());
  if (model.memory) report.temperature = model.memory->temperature;

  std::optional<SpeakerProbe> probe;
  if (options.mode == EvalMode::kOutput) {
    probe = fit_probe(model, corpus);
    report.probe_residual = probe->residual;
  }
  std::vector<ConversionRecord> records =
      convert_all(model, corpus, options, probe ? &*probe : nullptr);
  report.n_conversions = records.size();

  const std::uint64_t shuffle_seed =
      derive_seed(options.seed, kStreamEvalShuffle);
  // A metric that is undefined for this selection (for example diversity with
  // a single target) is left out of the report with a warning.
  std::vector<std::string> failures;
  auto attempt = [&](auto&& compute) -> std::optional<MetricValue> {
    try {
      return compute();
    } catch (const ConfigError& e) {
      failures.push_back(e.what());
      return std::nullopt;
    }
  };
  const auto shr_v = attempt([&] {
    return shr(records, options.shr_shuffles, derive_seed(shuffle_seed, 0));
  });
  const auto sho_v = attempt([&] { return sho(records); });
  const auto sdr_v = attempt([&] {
    return sdr(records, options.sdr_shuffles, derive_seed(shuffle_seed, 1));
  });
  const auto sdo_v = attempt([&] { return sdo(records); });
  if (shr_v) report.shr = shr_v->value;
  if (sho_v) report.sho = sho_v->value;
  if (sdr_v) report.sdr = sdr_v->value;
  if (sdo_v) report.sdo = sdo_v->value;
  report.ga = gender_accuracy(records, corpus);
  if (shr_v) {
    for (const auto& [id, v] : shr_v->per_speaker) report.per_target[id].shr = v;
  }
  if (sho_v) {
    for (const auto& [id, v] : sho_v->per_speaker) report.per_target[id].sho = v;
  }
  for (const auto* m : {&shr_v, &sho_v, &sdr_v, &sdo_v}) {
    if (!*m) continue;
    report.warnings.insert(report.warnings.end(), (*m)->warnings.begin(),
                           (*m)->warnings.end());
  }
  report.warnings.insert(report.warnings.end(), failures.begin(),
                         failures.end());
  if (records_out != nullptr) *records_out = std::move(records);
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["mode"] = to_string(report.mode);
  doc["conditioning"] = report.conditioning;
  doc["n_conversions"] = report.n_conversions;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) doc[key] = *v;
  };
  put("shr", report.shr);
  put("sho", report.sho);
  put("sdr", report.sdr);
  put("sdo", report.sdo);
  put("ga", report.ga);
  doc["shr_shuffles"] = report.shr_shuffles;
  doc["sdr_shuffles"] = report.sdr_shuffles;
  doc["seed"] = report.seed;
  put("temperature", report.temperature);
  put("probe_residual", report.probe_residual);
  for (const auto& [id, row] : report.per_target) {
    const std::string prefix = "target_" + std::to_string(id) + "_";
    put((prefix + "shr").c_str(), row.shr);
    put((prefix + "sho").c_str(), row.sho);
  }
  if (!report.warnings.empty()) doc["warnings"] = report.warnings;
  if (report.config.is_object()) {
    for (const auto& [key, value] : report.config.items()) {
      doc["config." + key] = value;
    }
  }
  return doc.dump(2) + "\n";
}

void emit_report(const EvalReport& report, const std::filesystem::path& path) {
  write_file_atomic(path, report_to_json(report));
}

std::string pairs_csv(const std::vector<ConversionRecord>& records) {
  std::ostringstream out;
  out << "metric,source_utterance,target_a,face_a,target_b,face_b,cosine\n";
  auto emit = [&](const char* metric, const ConversionRecord& a,
                  const ConversionRecord& b) {
    out << metric << ',' << a.source_utterance << ',' << a.target_speaker
        << ',' << a.target_face << ',' << b.target_speaker << ','
        << b.target_face << ','
        << format_double(cosine_similarity(a.embedding, b.embedding)) << '\n';
  };
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t j = i + 1; j < records.size(); ++j) {
      const auto& a = records[i];
      const auto& b = records[j];
      if (a.source_utterance != b.source_utterance ||
          a.source_speaker != b.source_speaker) {
        continue;
      }
      if (a.target_speaker == b.target_speaker) {
        if (a.target_face != b.target_face) emit("sho", a, b);
      } else {
        emit("sdo", a, b);
      }
    }
  }
  return out.str();
}

}  // namespace memalign
