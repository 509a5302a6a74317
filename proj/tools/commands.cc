// Copyright 2026 The emotrans Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "commands.h"

#include <algorithm>
#include <fstream>
#include <iostream>

#include "emotrans/checkpoint.h"
#include "emotrans/errors.h"
#include "emotrans/evaluation.h"
#include "emotrans/grad_suite.h"

namespace emotrans::cli {
namespace {

namespace fs = std::filesystem;

fs::path require_out(const RunConfig& c) {
  if (c.out_dir.empty()) throw UsageError("an output directory is required (--out or paths.out_dir)");
  fs::create_directories(c.out_dir);
  return c.out_dir;
}

void require_manifests(const RunConfig& c) {
  if (c.manifest_x.empty() || c.manifest_y.empty()) {
    throw UsageError("both domain manifests are required (--manifest-x/--manifest-y or paths.*)");
  }
}

std::string jstr(const fs::path& p) { return p.string(); }

// Progress lines on stderr every `every` iterations.
std::function<bool(const TrainerState&, const LossReport&)> progress(std::uint64_t every) {
  return [every](const TrainerState& s, const LossReport& r) {
    if (s.iteration % every == 0) {
      std::cerr << "iter " << s.iteration << "  adv_g " << r.loss_adv_g << "  dx " << r.loss_adv_dx
                << "  dy " << r.loss_adv_dy;
      if (r.loss_cyc) std::cerr << "  cyc " << *r.loss_cyc;
      if (r.loss_li) std::cerr << "  li " << *r.loss_li;
      if (r.loss_sv) std::cerr << "  sv " << *r.loss_sv;
      std::cerr << '\n';
    }
    return true;
  };
}

double tail_mean_cycle(const std::vector<LossReport>& reports) {
  const std::size_t n = std::min<std::size_t>(100, reports.size());
  double total = 0;
  for (std::size_t i = reports.size() - n; i < reports.size(); ++i) {
    total += reports[i].loss_cyc.value_or(0.0);
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

struct RunOutcome {
  fs::path checkpoint;
  fs::path metrics;
  std::vector<LossReport> reports;
};

// Runs the loop, streaming metrics and writing checkpoints under `dir`.
RunOutcome run_loop(const RunConfig& cfg, TrainerState& state, const TrainingData& data,
                    const fs::path& dir, bool append) {
  RunOutcome outcome;
  outcome.metrics = dir / "metrics.jsonl";
  outcome.checkpoint = dir / "checkpoint.etgc";
  std::ofstream metrics(outcome.metrics, append ? std::ios::app : std::ios::trunc);
  if (!metrics) throw IoError("cannot open '" + outcome.metrics.string() + "'");
  LoopHooks hooks;
  hooks.metrics = &metrics;
  hooks.wall_time = cfg.metrics_wall_time;
  hooks.on_iteration = progress(100);
  hooks.on_checkpoint = [&](const TrainerState& s) {
    const bool last = s.iteration >= cfg.training.iterations;
    char name[40];
    std::snprintf(name, sizeof(name), "checkpoint_%06llu.etgc",
                  static_cast<unsigned long long>(s.iteration));
    save_checkpoint(cfg.generator, cfg.critic, cfg.classifier, cfg.training, s,
                    last ? outcome.checkpoint : dir / name);
  };
  outcome.reports = train_loop(state, data, cfg.training, hooks);
  return outcome;
}

Json summary(const RunOutcome& o, const TrainerState& state) {
  Json j;
  j["checkpoint"] = jstr(o.checkpoint);
  j["metrics"] = jstr(o.metrics);
  j["iteration"] = state.iteration;
  if (!o.reports.empty()) j["final"] = Json::parse(to_json_line(o.reports.back()));
  return j;
}

std::vector<FeatureMatrix> load_generated(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.path().extension() == ".etgf") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<FeatureMatrix> out;
    for (const auto& f : files) out.push_back(read_features(f));
    return out;
  }
  return load_corpus(read_manifest(path));
}

}  // namespace

RunConfig load_config(const CommonOptions& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : read_run_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.training.seed = *o.seed;
  }
  if (o.iterations) c.training.iterations = *o.iterations;
  if (!o.out.empty()) c.out_dir = o.out;
  if (!o.manifest_x.empty()) c.manifest_x = o.manifest_x;
  if (!o.manifest_y.empty()) c.manifest_y = o.manifest_y;
  c.validate();
  return c;
}

int cmd_synth_data(const CommonOptions& common, const SynthOptions& options, std::ostream& out) {
  RunConfig cfg = load_config(common);
  if (options.language == "tgt") {
    cfg.synth.language = target_language();
  } else if (options.language != "src") {
    throw UsageError("--language must be src or tgt");
  }
  const fs::path dir = require_out(cfg);
  std::mt19937_64 rng(cfg.seed);
  const SynthDataset ds = synth_dataset(cfg.synth, dir, rng);
  cfg.manifest_x = ds.manifest_a;
  cfg.manifest_y = ds.manifest_b;
  write_run_config(cfg, dir / "config.json");
  Json j;
  j["manifest_x"] = jstr(ds.manifest_a);
  j["manifest_y"] = jstr(ds.manifest_b);
  j["files"] = ds.domain_a.entries.size() + ds.domain_b.entries.size();
  j["config"] = jstr(dir / "config.json");
  out << j.dump() << '\n';
  return 0;
}

int cmd_train(const CommonOptions& common, const TrainOptions& options, std::ostream& out) {
  RunConfig cfg = load_config(common);
  if (!options.ablation.empty()) apply_ablation(cfg.training, find_ablation(options.ablation));
  cfg.validate();
  require_manifests(cfg);
  const fs::path dir = require_out(cfg);

  TrainerState state;
  std::optional<TrainingData> data;
  if (!options.resume.empty()) {
    Checkpoint ck = load_checkpoint(options.resume);
    data = prepare_training_data(read_manifest(cfg.manifest_x), read_manifest(cfg.manifest_y),
                                 cfg.training.segment_length, ck.state.stats);
    cfg.classifier.n_speakers = data->n_speakers;
    state = init_trainer(cfg.generator, cfg.critic, cfg.classifier, cfg.seed, data->stats);
    restore_into(ck.state, state);
  } else {
    data = prepare_training_data(read_manifest(cfg.manifest_x), read_manifest(cfg.manifest_y),
                                 cfg.training.segment_length);
    cfg.classifier.n_speakers = data->n_speakers;
    state = init_trainer(cfg.generator, cfg.critic, cfg.classifier, cfg.seed, data->stats);
  }
  write_run_config(cfg, dir / "config.json");
  const RunOutcome o = run_loop(cfg, state, *data, dir, !options.resume.empty());
  out << summary(o, state).dump() << '\n';
  return 0;
}

int cmd_transfer(const CommonOptions& common, const TrainOptions& options, std::ostream& out) {
  if (options.source.empty()) throw UsageError("transfer needs --source CHECKPOINT");
  RunConfig cfg = load_config(common);
  if (!options.ablation.empty()) apply_ablation(cfg.training, find_ablation(options.ablation));
  cfg.validate();
  require_manifests(cfg);
  const fs::path dir = require_out(cfg);
  const TrainingData data = prepare_training_data(
      read_manifest(cfg.manifest_x), read_manifest(cfg.manifest_y), cfg.training.segment_length);
  cfg.classifier.n_speakers = data.n_speakers;

  TransferPlan plan;
  plan.source_checkpoint = options.source;
  plan.generator = cfg.generator;
  plan.critic = cfg.critic;
  plan.classifier = cfg.classifier;
  plan.seed = cfg.seed;
  plan.fine_tune_iterations = cfg.training.iterations;
  TrainerState state = transfer_init(plan, data.stats);
  write_run_config(cfg, dir / "config.json");
  const RunOutcome o = run_loop(cfg, state, data, dir, false);
  Json j = summary(o, state);
  j["source"] = jstr(options.source);
  out << j.dump() << '\n';
  return 0;
}

int cmd_generate(const GenerateOptions& options, std::ostream& out) {
  if (options.direction != "x2y" && options.direction != "y2x") {
    throw UsageError("--direction must be x2y or y2x");
  }
  if (options.checkpoint.empty() || options.input.empty() || options.output.empty()) {
    throw UsageError("generate needs --checkpoint, --input and --output");
  }
  const Checkpoint ck = load_checkpoint(options.checkpoint);
  const Generator<float>& g =
      options.direction == "x2y" ? ck.state.models.gen_xy : ck.state.models.gen_yx;
  Json j;
  j["direction"] = options.direction;
  if (options.input.extension() == ".json") {
    const DatasetManifest in = read_manifest(options.input);
    fs::create_directories(options.output);
    DatasetManifest converted;
    converted.speakers = in.speakers;
    converted.base_dir = options.output;
    for (const auto& e : in.entries) {
      FeatureMatrix f = read_features(in.resolve(e));
      f.speaker_id = e.speaker_id;
      const FeatureMatrix c = convert_features(g, f, ck.state.stats);
      const std::string name = fs::path(e.path).filename().string();
      write_features(c, options.output / name);
      converted.entries.push_back({name, e.speaker_id, e.emotion, e.language});
    }
    write_manifest(converted, options.output / "manifest.json");
    j["output"] = jstr(options.output / "manifest.json");
    j["count"] = converted.entries.size();
  } else {
    const FeatureMatrix f = read_features(options.input);
    const FeatureMatrix c = convert_features(g, f, ck.state.stats);
    write_features(c, options.output);
    j["output"] = jstr(options.output);
    j["frames"] = c.frames();
  }
  out << j.dump() << '\n';
  return 0;
}

int cmd_evaluate(const EvaluateOptions& options, std::ostream& out) {
  if (options.real.empty() || options.generated.empty()) {
    throw UsageError("evaluate needs --real and --generated");
  }
  const auto real = load_corpus(read_manifest(options.real));
  const auto generated = load_generated(options.generated);
  Json j;
  j["metric"] = options.metric;
  if (options.metric == "fad") {
    const EmbedderKind kind = parse_embedder_kind(options.embedder);
    std::optional<Checkpoint> ck;
    Embedder embedder = Embedder::identity();
    if (kind == EmbedderKind::kClassifier) {
      if (options.checkpoint.empty()) {
        throw UsageError("--embedder classifier needs --checkpoint");
      }
      ck = load_checkpoint(options.checkpoint);
      embedder = Embedder::classifier(ck->state.models.classifier, ck->state.stats);
    }
    j["value"] = fad(real, generated, embedder);
    j["embedder"] = std::string(to_string(kind));
  } else if (options.metric == "mcd") {
    if (real.size() != generated.size()) {
      throw ValidationError("mcd pairs recordings in order; got " + std::to_string(real.size()) +
                            " real and " + std::to_string(generated.size()) + " generated");
    }
    double total = 0;
    for (std::size_t i = 0; i < real.size(); ++i) total += mcd(real[i], generated[i]);
    j["value"] = real.empty() ? 0.0 : total / static_cast<double>(real.size());
    j["embedder"] = "none";
  } else {
    throw UsageError("--metric must be fad or mcd");
  }
  j["n_real"] = real.size();
  j["n_generated"] = generated.size();
  out << j.dump() << '\n';
  return 0;
}

int cmd_grad_check(std::uint64_t seed, std::ostream& out) {
  GradSuiteOptions o;
  o.seed = seed;
  bool ok = true;
  for (const auto& e : run_grad_suite(o)) {
    Json j;
    j["name"] = e.name;
    j["group"] = e.group;
    j["max_rel_error"] = e.max_relative_error;
    j["tolerance"] = e.tolerance;
    j["points"] = e.points;
    j["pass"] = e.passed();
    out << j.dump() << '\n';
    ok = ok && e.passed();
  }
  return ok ? 0 : 4;
}

int cmd_ablate(const CommonOptions& common, std::ostream& out) {
  RunConfig cfg = load_config(common);
  require_manifests(cfg);
  const fs::path dir = require_out(cfg);
  const DatasetManifest mx = read_manifest(cfg.manifest_x);
  const DatasetManifest my = read_manifest(cfg.manifest_y);
  const TrainingData data = prepare_training_data(mx, my, cfg.training.segment_length);
  cfg.classifier.n_speakers = data.n_speakers;
  const auto real_x = load_corpus(mx);
  const auto real_y = load_corpus(my);
  const double baseline = fad(real_x, real_y, Embedder::identity());

  std::ofstream table(dir / "ablation.jsonl", std::ios::trunc);
  std::size_t row = 0;
  for (const auto& preset : ablation_presets()) {
    RunConfig run = cfg;
    apply_ablation(run.training, preset);
    const fs::path rdir = dir / std::string(preset.name);
    fs::create_directories(rdir);
    write_run_config(run, rdir / "config.json");
    std::cerr << "ablation " << preset.name << '\n';
    TrainerState state = init_trainer(run.generator, run.critic, run.classifier, run.seed, data.stats);
    const RunOutcome o = run_loop(run, state, data, rdir, false);
    const double value = fad(real_y, convert_corpus(state.models.gen_xy, real_x, data.stats),
                             Embedder::identity());
    Json j;
    j["row"] = ++row;
    j["ablation"] = std::string(preset.name);
    j["adversarial"] = std::string(to_string(preset.adversarial));
    j["fad"] = value;
    j["fad_baseline"] = baseline;
    j["fad_ratio"] = baseline > 0 ? value / baseline : 0.0;
    j["final_cycle"] = tail_mean_cycle(o.reports);
    j["seed"] = run.seed;
    j["iterations"] = state.iteration;
    out << j.dump() << '\n';
    table << j.dump() << '\n';
  }
  return 0;
}

}  // namespace emotrans::cli
