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

#include "memalign/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "memalign/archive.hpp"
#include "memalign/corpus.hpp"
#include "memalign/eval.hpp"
#include "memalign/gradcheck.hpp"
#include "memalign/model_io.hpp"
#include "memalign/pca.hpp"
#include "memalign/run_config.hpp"
#include "memalign/trainer.hpp"
#include "memalign/util.hpp"

namespace memalign {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  bool quiet = false;
};

class Context {
 public:
  Context(std::ostream& out, std::ostream& err, const GlobalOptions& g)
      : out_(out), err_(err), globals_(g) {}

  std::ostream& info() { return globals_.quiet ? null_ : out_; }
  std::ostream& out() { return out_; }
  std::ostream& err() { return err_; }

  // Config file, then --set overrides, then --seed.
  RunConfig config() const {
    RunConfig rc;
    if (!globals_.config_path.empty()) rc = load_run_config(globals_.config_path);
    for (const auto& a : globals_.overrides) apply_assignment(rc, a);
    if (globals_.seed) set_value(rc, "seed", *globals_.seed);
    return rc;
  }

 private:
  std::ostream& out_;
  std::ostream& err_;
  const GlobalOptions& globals_;
  std::ostringstream null_;
};

constexpr const char* kFaceArchive = "face.xmeb";
constexpr const char* kVoiceArchive = "voice.xmeb";
constexpr const char* kCorpusSpec = "corpus.json";

// Regenerates the synthetic features from corpus.json and loads the
// embeddings from the two archives in `dir`.
SyntheticCorpus load_corpus(const fs::path& dir) {
  const std::string text = read_file(dir / kCorpusSpec);
  const auto parsed = nlohmann::json::parse(text, nullptr, false);
  if (parsed.is_discarded()) {
    throw ConfigError((dir / kCorpusSpec).string() + " is not valid JSON");
  }
  SyntheticCorpus corpus = generate_corpus(corpus_spec_from_json(parsed));
  apply_archives(corpus, read_archive(dir / kFaceArchive),
                 read_archive(dir / kVoiceArchive));
  return corpus;
}

std::size_t thread_count() {
  const char* env = std::getenv("MEMALIGN_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const unsigned long n = std::strtoul(env, &end, 10);
  if (end == env || *end != '\0' || n == 0) {
    throw ConfigError("MEMALIGN_THREADS must be a positive integer");
  }
  return std::size_t(n);
}

void print_terms(std::ostream& os, const LossTerms& t) {
  os << "total=" << format_double(t.total)
     << " store=" << format_double(t.store)
     << " align=" << format_double(t.align)
     << " intra=" << format_double(t.intra)
     << " inter=" << format_double(t.inter) << "\n";
}

fs::path loss_csv_path(const fs::path& model_path, const std::string& flag) {
  if (!flag.empty()) return flag;
  fs::path p = model_path;
  p += ".loss.csv";
  return p;
}

void require_dims(const TrainedModel& model, const SyntheticCorpus& corpus) {
  const auto model_dim = model.decoder.cond_dim;
  const auto corpus_dim = Eigen::Index(corpus.spec.embedding_dim);
  if (model_dim != corpus_dim) {
    throw DimensionError("model embedding dimension " +
                         std::to_string(model_dim) +
                         " != corpus embedding dimension " +
                         std::to_string(corpus_dim));
  }
  if (model.decoder.content_dim != Eigen::Index(corpus.spec.content_dim)) {
    throw DimensionError("model content dimension " +
                         std::to_string(model.decoder.content_dim) +
                         " != corpus content dimension " +
                         std::to_string(corpus.spec.content_dim));
  }
}

const MfvaModule& require_memory(const TrainedModel& model) {
  if (!model.memory) {
    throw ConfigError("model has no memory module (conditioning: " +
                      to_string(model.conditioning()) + ")");
  }
  return *model.memory;
}

const EmbeddingRecord& find_face(const SyntheticCorpus& corpus,
                                 std::uint32_t entity) {
  if (entity >= corpus.faces.size()) {
    throw ConfigError("unknown face entity id " + std::to_string(entity) +
                      " (corpus has " + std::to_string(corpus.faces.size()) +
                      " face images)");
  }
  return corpus.faces[entity];
}

// --- gen ------------------------------------------------------------------

int cmd_gen(Context& ctx, const std::string& out_dir) {
  const RunConfig rc = ctx.config();
  validate(rc.corpus);
  const SyntheticCorpus corpus = generate_corpus(rc.corpus);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir);
  const fs::path dir(out_dir);
  write_archive(corpus.faces, dir / kFaceArchive);
  write_archive(corpus.voices, dir / kVoiceArchive);
  write_file_atomic(dir / kCorpusSpec,
                    corpus_spec_to_json(rc.corpus).dump(2) + "\n");
  ctx.info() << "wrote " << corpus.faces.size() << " face and "
             << corpus.voices.size() << " voice embeddings (dim "
             << rc.corpus.embedding_dim << ") to " << out_dir << "\n";
  return kExitOk;
}

// --- pretrain / train -----------------------------------------------------

RunConfig config_for_corpus(const Context& ctx, const SyntheticCorpus& corpus) {
  RunConfig rc = ctx.config();
  rc.corpus = corpus.spec;
  validate(rc);
  return rc;
}

int cmd_pretrain(Context& ctx, const std::string& corpus_dir,
                 const std::string& out, const std::string& loss_csv,
                 std::optional<std::int64_t> steps) {
  const SyntheticCorpus corpus = load_corpus(corpus_dir);
  RunConfig rc = config_for_corpus(ctx, corpus);
  if (steps) rc.train.pretrain_steps = *steps;
  validate(rc);
  LossCurve curve;
  PretrainResult result = pretrain(corpus, rc.train, &curve);
  TrainedModel model;
  model.decoder = std::move(result.decoder);
  model.config = rc.train;
  model.metadata.phase = "pretrain";
  model.metadata.steps_completed = result.steps_completed;
  model.metadata.final_losses.total = result.final_loss;
  model.metadata.final_losses.intra = result.final_loss;
  save_model(model, out, to_json(rc));
  write_file_atomic(loss_csv_path(out, loss_csv), loss_curve_csv(curve));
  ctx.info() << "pretrain: " << result.steps_completed << " steps, final ";
  print_terms(ctx.info(), model.metadata.final_losses);
  return kExitOk;
}

struct TrainFlags {
  std::string corpus_dir;
  std::string pretrained;
  std::string out;
  std::string loss_csv;
  std::optional<std::int64_t> steps;
  bool no_inter = false;
  bool no_mfva = false;
  bool no_pretrain = false;
};

int cmd_train(Context& ctx, const TrainFlags& f) {
  const SyntheticCorpus corpus = load_corpus(f.corpus_dir);
  RunConfig rc = config_for_corpus(ctx, corpus);
  if (f.steps) rc.train.steps = *f.steps;
  if (f.no_inter) rc.train.no_inter = true;
  if (f.no_mfva) rc.train.no_mfva = true;
  if (f.no_pretrain) rc.train.no_pretrain = true;
  validate(rc);
  std::optional<TrainedModel> pretrained;
  if (!rc.train.no_pretrain) {
    if (f.pretrained.empty()) {
      throw ConfigError("train: --pretrained MODEL is required unless "
                        "--no-pretrain is given");
    }
    pretrained = load_model(f.pretrained);
  }
  LossCurve curve;
  const TrainedModel model =
      fit(corpus, rc.train, pretrained ? &pretrained->decoder : nullptr,
          &curve, thread_count());
  save_model(model, f.out, to_json(rc));
  write_file_atomic(loss_csv_path(f.out, f.loss_csv), loss_curve_csv(curve));
  ctx.info() << "train: " << model.metadata.steps_completed
             << " steps, conditioning " << to_string(model.conditioning())
             << ", final ";
  print_terms(ctx.info(), model.metadata.final_losses);
  return kExitOk;
}

// --- eval -----------------------------------------------------------------

struct EvalFlags {
  std::string model;
  std::string corpus_dir;
  std::string mode;
  std::string report;
  std::string pairs_csv;
  std::string slot_weights_csv;
  std::string pca_csv;
};

int cmd_eval(Context& ctx, const EvalFlags& f) {
  const TrainedModel model = load_model(f.model);
  const SyntheticCorpus corpus = load_corpus(f.corpus_dir);
  require_dims(model, corpus);
  RunConfig rc = config_for_corpus(ctx, corpus);
  if (!f.mode.empty()) rc.eval.mode = parse_eval_mode(f.mode);
  std::vector<ConversionRecord> records;
  EvalReport report = evaluate(model, corpus, rc.eval, &records);
  report.config = to_json(rc);
  for (const auto& w : report.warnings) ctx.err() << "warning: " << w << "\n";
  emit_report(report, f.report);
  if (!f.pairs_csv.empty()) write_file_atomic(f.pairs_csv, pairs_csv(records));
  if (!f.slot_weights_csv.empty()) {
    const MfvaModule& memory = require_memory(model);
    std::ostringstream csv;
    csv << "speaker_id,entity_id";
    for (Eigen::Index i = 0; i < memory.n_slots(); ++i) csv << ",w_" << i;
    csv << "\n";
    const HoldoutSelection sel = select_holdout(corpus, rc.eval);
    for (const auto target : sel.targets) {
      for (std::uint32_t i = 0; i < rc.eval.target_images; ++i) {
        const auto& face = corpus.face(target, i);
        const Vector w = recall_face(face.vector, memory).weights;
        csv << face.speaker_id << ',' << face.entity_id;
        for (Eigen::Index k = 0; k < w.size(); ++k) {
          csv << ',' << format_double(w[k]);
        }
        csv << "\n";
      }
    }
    write_file_atomic(f.slot_weights_csv, csv.str());
  }
  if (!f.pca_csv.empty()) {
    std::vector<Vector> vectors;
    for (const auto& r : records) vectors.push_back(r.embedding);
    const Matrix points = pca_project_2d(stack_rows(vectors));
    std::ostringstream csv;
    csv << "source_speaker,source_utterance,target_speaker,target_face,pc1,"
           "pc2\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      csv << r.source_speaker << ',' << r.source_utterance << ','
          << r.target_speaker << ',' << r.target_face << ','
          << format_double(points(Eigen::Index(i), 0)) << ','
          << format_double(points(Eigen::Index(i), 1)) << "\n";
    }
    write_file_atomic(f.pca_csv, csv.str());
  }
  auto show = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("n/a");
  };
  ctx.info() << "eval (" << to_string(report.mode) << "): n_conversions="
             << report.n_conversions << " shr=" << show(report.shr)
             << " sho=" << show(report.sho) << " sdr=" << show(report.sdr)
             << " sdo=" << show(report.sdo) << " ga=" << show(report.ga)
             << "\n";
  return kExitOk;
}

// --- gradcheck ------------------------------------------------------------

int cmd_gradcheck(Context& ctx, double eps, double tol,
                  std::uint32_t configurations) {
  const RunConfig rc = ctx.config();
  GradcheckOptions opts;
  opts.seed = rc.seed();
  opts.step = eps;
  opts.tolerance = tol;
  opts.configurations = configurations;
  const auto results = run_gradcheck(opts);
  bool ok = true;
  for (const auto& r : results) {
    ctx.out() << r.loss << " max_rel_err=" << format_double(r.max_relative_error)
              << " configurations=" << r.configurations
              << (r.passed ? " ok" : " FAIL") << "\n";
    if (!r.passed) {
      ok = false;
      ctx.err() << "gradcheck: " << r.loss << " failed (tolerance "
                << format_double(tol) << ")";
      for (const auto& b : r.leaking_blocks) {
        ctx.err() << "; nonzero gradient in blocked parameter " << b;
      }
      ctx.err() << "\n";
    }
  }
  return ok ? kExitOk : kExitNumeric;
}

// --- interp ---------------------------------------------------------------

int cmd_interp(Context& ctx, const std::string& model_path,
               const std::string& corpus_dir, std::uint32_t face_a,
               std::uint32_t face_b, std::uint32_t steps,
               const std::string& out) {
  if (steps < 2) throw ConfigError("interp: --steps must be >= 2");
  const TrainedModel model = load_model(model_path);
  const SyntheticCorpus corpus = load_corpus(corpus_dir);
  require_dims(model, corpus);
  const MfvaModule& memory = require_memory(model);
  const auto& a = find_face(corpus, face_a);
  const auto& b = find_face(corpus, face_b);
  const Vector wa = recall_face(a.vector, memory).weights;
  const Vector wb = recall_face(b.vector, memory).weights;
  const Vector centroid_a = corpus.voice_centroid(a.speaker_id);
  const Vector centroid_b = corpus.voice_centroid(b.speaker_id);
  std::ostringstream csv;
  csv << "alpha,cos_to_a,cos_to_b";
  for (Eigen::Index i = 0; i < memory.n_slots(); ++i) csv << ",w_" << i;
  for (Eigen::Index i = 0; i < memory.dim(); ++i) csv << ",e_" << i;
  csv << "\n";
  for (std::uint32_t s = 0; s < steps; ++s) {
    const double alpha = double(s) / double(steps - 1);
    const RecallResult r = interpolate_recall(wa, wb, alpha, memory);
    csv << format_double(alpha) << ','
        << format_double(cosine_similarity(r.embedding, centroid_a)) << ','
        << format_double(cosine_similarity(r.embedding, centroid_b));
    for (Eigen::Index i = 0; i < r.weights.size(); ++i) {
      csv << ',' << format_double(r.weights[i]);
    }
    for (Eigen::Index i = 0; i < r.embedding.size(); ++i) {
      csv << ',' << format_double(r.embedding[i]);
    }
    csv << "\n";
  }
  write_file_atomic(out, csv.str());
  ctx.info() << "interp: " << steps << " rows from face " << face_a
             << " (speaker " << a.speaker_id << ") to face " << face_b
             << " (speaker " << b.speaker_id << ") written to " << out << "\n";
  return kExitOk;
}

// --- recall ---------------------------------------------------------------

struct LabeledQuery {
  std::string label;
  Vector face;
};

// PATH, PATH@ENTITY or a comma-separated literal vector.
std::vector<LabeledQuery> parse_face_source(const std::string& source) {
  std::vector<LabeledQuery> queries;
  const bool literal =
      !source.empty() &&
      source.find_first_not_of("0123456789+-.eE, ") == std::string::npos &&
      !fs::exists(source);
  if (literal) {
    std::vector<double> values;
    std::stringstream ss(source);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(item, &used));
      } catch (const std::exception&) {
        throw ConfigError("recall: cannot parse '" + item + "' as a number");
      }
    }
    queries.push_back({"literal", Eigen::Map<Vector>(values.data(),
                                                     Eigen::Index(values.size()))});
    return queries;
  }
  std::string path = source;
  std::optional<std::uint32_t> entity;
  const auto at = source.rfind('@');
  if (at != std::string::npos) {
    path = source.substr(0, at);
    try {
      entity = std::uint32_t(std::stoul(source.substr(at + 1)));
    } catch (const std::exception&) {
      throw ConfigError("recall: bad entity id in '" + source + "'");
    }
  }
  for (const auto& rec : read_archive(path)) {
    if (rec.modality != Modality::kFace) continue;
    if (entity && rec.entity_id != *entity) continue;
    queries.push_back({std::to_string(rec.speaker_id) + ":" +
                           std::to_string(rec.entity_id),
                       rec.vector});
  }
  if (queries.empty()) {
    throw ConfigError("recall: no matching face records in " + path);
  }
  return queries;
}

int cmd_recall(Context& ctx, const std::string& model_path,
               const std::string& source, const std::string& out) {
  const TrainedModel model = load_model(model_path);
  const MfvaModule& memory = require_memory(model);
  const auto queries = parse_face_source(source);
  std::ostringstream csv;
  csv << "source";
  for (Eigen::Index i = 0; i < memory.n_slots(); ++i) csv << ",w_" << i;
  for (Eigen::Index i = 0; i < memory.dim(); ++i) csv << ",e_" << i;
  csv << "\n";
  for (const auto& q : queries) {
    if (q.face.size() != memory.dim()) {
      throw DimensionError("recall: face embedding dimension " +
                           std::to_string(q.face.size()) +
                           " != model dimension " +
                           std::to_string(memory.dim()));
    }
    const RecallResult r = recall_face(q.face, memory);
    csv << q.label;
    for (Eigen::Index i = 0; i < r.weights.size(); ++i) {
      csv << ',' << format_double(r.weights[i]);
    }
    for (Eigen::Index i = 0; i < r.embedding.size(); ++i) {
      csv << ',' << format_double(r.embedding[i]);
    }
    csv << "\n";
  }
  write_file_atomic(out, csv.str());
  ctx.info() << "recall: " << queries.size() << " queries written to " << out
             << "\n";
  return kExitOk;
}

}  // namespace

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Memory-based face/voice alignment experiments", "memalign"};
  app.require_subcommand(1);
  GlobalOptions globals;
  app.add_option("--config", globals.config_path, "Flat JSON run config")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", globals.seed, "Seed for every random stream");
  app.add_option("--set", globals.overrides,
                 "Override a config key (key=value), repeatable");
  app.add_flag("--quiet", globals.quiet, "Suppress progress output");

  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  gen->add_option("--out", gen_out, "Output directory")->required();

  std::string pre_corpus, pre_out, pre_csv;
  std::optional<std::int64_t> pre_steps;
  auto* pre = app.add_subcommand("pretrain", "Pretrain the toy decoder");
  pre->add_option("--corpus", pre_corpus, "Corpus directory")->required();
  pre->add_option("--out", pre_out, "Model document to write")->required();
  pre->add_option("--loss-csv", pre_csv, "Loss curve CSV path");
  pre->add_option("--steps", pre_steps, "Override pretrain_steps");

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "Train the alignment phase");
  train->add_option("--corpus", tf.corpus_dir, "Corpus directory")->required();
  train->add_option("--pretrained", tf.pretrained, "Pretrained model document");
  train->add_option("--out", tf.out, "Model document to write")->required();
  train->add_option("--loss-csv", tf.loss_csv, "Loss curve CSV path");
  train->add_option("--steps", tf.steps, "Override steps");
  train->add_flag("--no-inter", tf.no_inter, "Drop the inter-speaker loss");
  train->add_flag("--no-mfva", tf.no_mfva,
                  "Replace the memory with an affine face projection");
  train->add_flag("--no-pretrain", tf.no_pretrain,
                  "Start from a randomly initialized decoder");

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained model");
  eval->add_option("--model", ef.model, "Model document")->required();
  eval->add_option("--corpus", ef.corpus_dir, "Corpus directory")->required();
  eval->add_option("--mode", ef.mode, "embedding | output");
  eval->add_option("--report", ef.report, "Report JSON path")->required();
  eval->add_option("--pairs-csv", ef.pairs_csv, "Per-pair similarity CSV");
  eval->add_option("--slot-weights-csv", ef.slot_weights_csv,
                   "Slot weights per target face image");
  eval->add_option("--pca-csv", ef.pca_csv,
                   "2-D PCA projection of converted embeddings");

  double gc_eps = 1e-5, gc_tol = 1e-4;
  std::uint32_t gc_configs = 100;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gc->add_option("--eps", gc_eps, "Central-difference step");
  gc->add_option("--tol", gc_tol, "Max relative error");
  gc->add_option("--configs", gc_configs, "Random configurations per loss");

  std::string ip_model, ip_corpus, ip_out;
  std::uint32_t ip_a = 0, ip_b = 0, ip_steps = 11;
  auto* interp = app.add_subcommand("interp", "Slot-weight interpolation");
  interp->add_option("--model", ip_model, "Model document")->required();
  interp->add_option("--corpus", ip_corpus, "Corpus directory")->required();
  interp->add_option("--face-a", ip_a, "Face entity id of endpoint A")
      ->required();
  interp->add_option("--face-b", ip_b, "Face entity id of endpoint B")
      ->required();
  interp->add_option("--steps", ip_steps, "Grid points including endpoints");
  interp->add_option("--out", ip_out, "Output CSV")->required();

  std::string rc_model, rc_source, rc_out;
  auto* recall = app.add_subcommand("recall", "Recall from face embeddings");
  recall->add_option("--model", rc_model, "Model document")->required();
  recall->add_option("--face-embedding", rc_source,
                     "ARCHIVE, ARCHIVE@ENTITY or comma-separated values")
      ->required();
  recall->add_option("--out", rc_out, "Output CSV")->required();

  // Global options may also follow the subcommand.
  for (auto* sub : {gen, pre, train, eval, gc, interp, recall}) {
    sub->fallthrough();
  }

  std::vector<const char*> argv;
  argv.push_back("memalign");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  Context ctx(out, err, globals);
  try {
    if (gen->parsed()) return cmd_gen(ctx, gen_out);
    if (pre->parsed()) {
      return cmd_pretrain(ctx, pre_corpus, pre_out, pre_csv, pre_steps);
    }
    if (train->parsed()) return cmd_train(ctx, tf);
    if (eval->parsed()) return cmd_eval(ctx, ef);
    if (gc->parsed()) return cmd_gradcheck(ctx, gc_eps, gc_tol, gc_configs);
    if (interp->parsed()) {
      return cmd_interp(ctx, ip_model, ip_corpus, ip_a, ip_b, ip_steps,
                        ip_out);
    }
    if (recall->parsed()) return cmd_recall(ctx, rc_model, rc_source, rc_out);
  } catch (...) {
    return exit_code_for_current_exception(err);
  }
  return kExitValidation;
}

}  // namespace memalign
