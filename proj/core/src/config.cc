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

#include "emotrans/config.h"

#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "emotrans/errors.h"

namespace emotrans {
namespace {

// Pulls typed fields out of one JSON object and complains about whatever is
// left over.
class Fields {
 public:
  Fields(const Json& j, std::string_view where) : j_(j), where_(where) {
    if (!j.is_object()) throw ValidationError(std::string(where) + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ValidationError("expected a boolean");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) throw ValidationError("expected a non-negative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ValidationError("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ValidationError("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ValidationError("expected a string");
      }
      out = it->template get<T>();
    } catch (const ValidationError& e) {
      throw ValidationError(path(key) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path(key) + ": " + e.what());
    }
  }

  void get_path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  // Nested object handed to `read`; absent keeps the default.
  template <typename F>
  void nested(const char* key, F&& read) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it != j_.end()) read(*it, path(key));
  }

  template <typename Parse, typename T>
  void named(const char* key, T& out, Parse&& parse) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_string()) throw ValidationError(path(key) + ": expected a string");
    out = parse(it->template get<std::string>());
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ValidationError("unknown key '" + path(it.key()) + "'");
    }
  }

  std::string path(std::string_view key) const { return std::string(where_) + "." + std::string(key); }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string, std::less<>> seen_;
};

std::vector<double> read_vector(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ValidationError(where + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

constexpr std::array<AblationPreset, 6> kPresets{{
    {"cycle_only", {true, false, false}, AdversarialKind::kGan},
    {"cycle_li", {true, true, false}, AdversarialKind::kGan},
    {"cycle_sv", {true, false, true}, AdversarialKind::kGan},
    {"cycle_li_sv", {true, true, true}, AdversarialKind::kGan},
    {"cycle_li_sv_clip", {true, true, true}, AdversarialKind::kWganClip},
    {"full", {true, true, true}, AdversarialKind::kWganGp},
}};

}  // namespace

Json to_json(const GeneratorConfig& c) {
  return {{"base_channels", c.base_channels}, {"n_residual", c.n_residual},
          {"kernel_initial", c.kernel_initial}, {"kernel_down", c.kernel_down},
          {"kernel_res", c.kernel_res}, {"upsample_factor", c.upsample_factor}};
}

Json to_json(const CriticConfig& c) {
  return {{"base_channels", c.base_channels}, {"n_layers", c.n_layers}, {"kernel", c.kernel},
          {"stride_h", c.stride_h}, {"stride_w", c.stride_w}};
}

Json to_json(const ClassifierConfig& c) {
  return {{"n_speakers", c.n_speakers}, {"embedding_dim", c.embedding_dim}, {"depth", c.depth},
          {"base_channels", c.base_channels}};
}

Json to_json(const TrainingConfig& c) {
  Json j;
  j["lr_generator"] = c.lr_generator;
  j["lr_critic"] = c.lr_critic;
  j["lr_classifier"] = c.lr_classifier;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon_adam"] = c.epsilon_adam;
  j["n_critic"] = c.n_critic;
  j["iterations"] = c.iterations;
  j["seed"] = c.seed;
  j["batch_size"] = c.batch_size;
  j["segment_length"] = c.segment_length;
  j["weights"] = {{"lambda_cyc", c.weights.lambda_cyc}, {"lambda_li", c.weights.lambda_li},
                  {"lambda_sv", c.weights.lambda_sv},
                  {"lambda_gradient", c.weights.lambda_gradient}};
  j["adversarial"] = {{"kind", std::string(to_string(c.adversarial.kind))},
                      {"clip", c.adversarial.clip}};
  j["ablation"] = {{"use_cycle", c.ablation.use_cycle}, {"use_li", c.ablation.use_li},
                   {"use_sv", c.ablation.use_sv}};
  j["li_as_printed"] = c.li_as_printed;
  j["checkpoint_every"] = c.checkpoint_every;
  return j;
}

Json to_json(const SynthConfig& c) {
  Json j;
  j["samples_per_domain"] = c.samples_per_domain;
  j["n_speakers"] = c.n_speakers;
  j["min_frames"] = c.min_frames;
  j["max_frames"] = c.max_frames;
  j["speaker_scale"] = c.speaker_scale;
  j["speaker_gain_scale"] = c.speaker_gain_scale;
  j["content_amplitude"] = c.content_amplitude;
  j["trajectories"] = c.trajectories;
  j["language"] = {{"tag", c.language.tag},
                   {"seed", c.language.seed},
                   {"offset_scale", c.language.offset_scale},
                   {"min_freq_hz", c.language.min_freq_hz},
                   {"max_freq_hz", c.language.max_freq_hz}};
  j["emotion_a"] = std::string(to_string(c.emotion_a));
  j["emotion_b"] = std::string(to_string(c.emotion_b));
  return j;
}

Json to_json(const NormalizationStats& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"sample_count", s.sample_count}};
}

void from_json(const Json& j, GeneratorConfig& c, std::string_view where) {
  Fields f(j, where);
  f.get("base_channels", c.base_channels);
  f.get("n_residual", c.n_residual);
  f.get("kernel_initial", c.kernel_initial);
  f.get("kernel_down", c.kernel_down);
  f.get("kernel_res", c.kernel_res);
  f.get("upsample_factor", c.upsample_factor);
  f.finish();
}

void from_json(const Json& j, CriticConfig& c, std::string_view where) {
  Fields f(j, where);
  f.get("base_channels", c.base_channels);
  f.get("n_layers", c.n_layers);
  f.get("kernel", c.kernel);
  f.get("stride_h", c.stride_h);
  f.get("stride_w", c.stride_w);
  f.finish();
}

void from_json(const Json& j, ClassifierConfig& c, std::string_view where) {
  Fields f(j, where);
  f.get("n_speakers", c.n_speakers);
  f.get("embedding_dim", c.embedding_dim);
  f.get("depth", c.depth);
  f.get("base_channels", c.base_channels);
  f.finish();
}

void from_json(const Json& j, TrainingConfig& c, std::string_view where) {
  Fields f(j, where);
  f.get("lr_generator", c.lr_generator);
  f.get("lr_critic", c.lr_critic);
  f.get("lr_classifier", c.lr_classifier);
  f.get("beta1", c.beta1);
  f.get("beta2", c.beta2);
  f.get("epsilon_adam", c.epsilon_adam);
  f.get("n_critic", c.n_critic);
  f.get("iterations", c.iterations);
  f.get("seed", c.seed);
  f.get("batch_size", c.batch_size);
  f.get("segment_length", c.segment_length);
  f.nested("weights", [&](const Json& w, const std::string& at) {
    Fields g(w, at);
    g.get("lambda_cyc", c.weights.lambda_cyc);
    g.get("lambda_li", c.weights.lambda_li);
    g.get("lambda_sv", c.weights.lambda_sv);
    g.get("lambda_gradient", c.weights.lambda_gradient);
    g.finish();
  });
  f.nested("adversarial", [&](const Json& a, const std::string& at) {
    Fields g(a, at);
    g.named("kind", c.adversarial.kind, parse_adversarial_kind);
    g.get("clip", c.adversarial.clip);
    g.finish();
  });
  f.nested("ablation", [&](const Json& a, const std::string& at) {
    Fields g(a, at);
    g.get("use_cycle", c.ablation.use_cycle);
    g.get("use_li", c.ablation.use_li);
    g.get("use_sv", c.ablation.use_sv);
    g.finish();
  });
  f.get("li_as_printed", c.li_as_printed);
  f.get("checkpoint_every", c.checkpoint_every);
  f.finish();
}

void from_json(const Json& j, SynthConfig& c, std::string_view where) {
  Fields f(j, where);
  f.get("samples_per_domain", c.samples_per_domain);
  f.get("n_speakers", c.n_speakers);
  f.get("min_frames", c.min_frames);
  f.get("max_frames", c.max_frames);
  f.get("speaker_scale", c.speaker_scale);
  f.get("speaker_gain_scale", c.speaker_gain_scale);
  f.get("content_amplitude", c.content_amplitude);
  f.get("trajectories", c.trajectories);
  f.nested("language", [&](const Json& l, const std::string& at) {
    Fields g(l, at);
    g.get("tag", c.language.tag);
    g.get("seed", c.language.seed);
    g.get("offset_scale", c.language.offset_scale);
    g.get("min_freq_hz", c.language.min_freq_hz);
    g.get("max_freq_hz", c.language.max_freq_hz);
    g.finish();
  });
  f.named("emotion_a", c.emotion_a, parse_emotion);
  f.named("emotion_b", c.emotion_b, parse_emotion);
  f.finish();
}

void from_json(const Json& j, NormalizationStats& s, std::string_view where) {
  Fields f(j, where);
  f.nested("mean", [&](const Json& v, const std::string& at) { s.mean = read_vector(v, at); });
  f.nested("std", [&](const Json& v, const std::string& at) { s.std = read_vector(v, at); });
  f.get("sample_count", s.sample_count);
  f.finish();
  if (s.mean.size() != kMcepDims || s.std.size() != kMcepDims) {
    throw ValidationError(std::string(where) + ": mean and std need 24 entries each");
  }
  for (double v : s.std) {
    if (!(v > 0)) throw ValidationError(std::string(where) + ": std entries must be positive");
  }
}

std::span<const AblationPreset> ablation_presets() { return kPresets; }

const AblationPreset& find_ablation(std::string_view name) {
  for (const auto& p : kPresets) {
    if (p.name == name) return p;
  }
  std::string names;
  for (const auto& p : kPresets) names += (names.empty() ? "" : ", ") + std::string(p.name);
  throw ValidationError("unknown ablation '" + std::string(name) + "' (expected one of " + names +
                        ")");
}

void apply_ablation(TrainingConfig& config, const AblationPreset& preset) {
  config.ablation = preset.flags;
  config.adversarial.kind = preset.adversarial;
}

void RunConfig::validate() const {
  try {
    generator.validate();
    critic.validate();
    classifier.validate();
  } catch (const ContractError& e) {
    throw ValidationError(e.what());
  }
  training.validate();
  if (synth.n_speakers < 2) {
    throw ValidationError("synth.n_speakers must be at least 2 (the speaker classifier needs two classes)");
  }
  if (synth.min_frames < training.segment_length || synth.max_frames < synth.min_frames) {
    throw ValidationError("synth frame range must start at the segment length or above");
  }
  if (synth.samples_per_domain < 2) throw ValidationError("synth.samples_per_domain must be >= 2");
  if (synth.trajectories == 0) throw ValidationError("synth.trajectories must be >= 1");
}

Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["generator"] = to_json(c.generator);
  j["critic"] = to_json(c.critic);
  j["classifier"] = to_json(c.classifier);
  Json training = to_json(c.training);
  training.erase("seed");  // the top-level seed drives every command
  j["training"] = training;
  j["synth"] = to_json(c.synth);
  j["evaluation"] = {{"embedder", std::string(to_string(c.evaluation.embedder))}};
  j["paths"] = {{"manifest_x", c.manifest_x.string()},
                {"manifest_y", c.manifest_y.string()},
                {"out_dir", c.out_dir.string()}};
  j["metrics_wall_time"] = c.metrics_wall_time;
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  Fields f(j, "config");
  f.get("seed", c.seed);
  f.nested("generator", [&](const Json& v, const std::string& at) { from_json(v, c.generator, at); });
  f.nested("critic", [&](const Json& v, const std::string& at) { from_json(v, c.critic, at); });
  f.nested("classifier",
           [&](const Json& v, const std::string& at) { from_json(v, c.classifier, at); });
  f.nested("training", [&](const Json& v, const std::string& at) {
    if (v.is_object() && v.contains("seed")) {
      throw ValidationError("unknown key '" + at + ".seed' (use the top-level seed)");
    }
    from_json(v, c.training, at);
  });
  f.nested("synth", [&](const Json& v, const std::string& at) { from_json(v, c.synth, at); });
  f.nested("evaluation", [&](const Json& v, const std::string& at) {
    Fields g(v, at);
    g.named("embedder", c.evaluation.embedder, parse_embedder_kind);
    g.finish();
  });
  f.nested("paths", [&](const Json& v, const std::string& at) {
    Fields g(v, at);
    g.get_path("manifest_x", c.manifest_x);
    g.get_path("manifest_y", c.manifest_y);
    g.get_path("out_dir", c.out_dir);
    g.finish();
  });
  f.get("metrics_wall_time", c.metrics_wall_time);
  f.finish();
  c.training.seed = c.seed;
  return c;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  RunConfig c = run_config_from_json(j);
  const std::filesystem::path base = path.parent_path();
  for (auto* p : {&c.manifest_x, &c.manifest_y, &c.out_dir}) {
    if (!p->empty() && p->is_relative()) *p = (base / *p).lexically_normal();
  }
  return c;
}

void write_run_config(const RunConfig& config, const std::filesystem::path& path) {
  // Paths inside the config's directory are stored relative to it, so a
  // directory tree stays valid (and byte-identical) wherever it lives.
  namespace fs = std::filesystem;
  const fs::path base = fs::absolute(path).parent_path().lexically_normal();
  const auto local = [&](const fs::path& p) {
    if (p.empty()) return p;
    const fs::path rel = fs::absolute(p).lexically_normal().lexically_relative(base);
    if (rel.empty() || *rel.begin() == "..") return p;
    return rel;
  };
  RunConfig stored = config;
  stored.manifest_x = local(config.manifest_x);
  stored.manifest_y = local(config.manifest_y);
  stored.out_dir = local(config.out_dir);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << to_json(stored).dump(2) << '\n';
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace emotrans
