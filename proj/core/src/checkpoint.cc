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

#include "emotrans/checkpoint.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "emotrans/errors.h"

namespace emotrans {
namespace {

constexpr std::array<char, 4> kMagic{'E', 'T', 'G', 'C'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kPrefixBytes = 4 + 4 + 8;

struct NetworkRef {
  const char* kind;
  ModelParameters<float>* params;
  AdamState<float>* adam;
};

std::array<NetworkRef, 5> networks(TrainerState& s) {
  Models& m = s.models;
  Optimizers& o = s.optimizers;
  return {{{"generator_xy", &m.gen_xy.params, &o.gen_xy},
           {"generator_yx", &m.gen_yx.params, &o.gen_yx},
           {"critic_x", &m.critic_x.params, &o.critic_x},
           {"critic_y", &m.critic_y.params, &o.critic_y},
           {"classifier", &m.classifier.params, &o.classifier}}};
}

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_floats(std::string& out, std::span<const float> values) {
  for (float f : values) put_le(out, std::bit_cast<std::uint32_t>(f), 4);
}

void get_floats(const unsigned char*& p, std::span<float> out) {
  for (float& f : out) {
    f = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(p, 4)));
    p += 4;
  }
}

template <typename T>
T header_field(const Json& header, const char* key) {
  auto it = header.find(key);
  if (it == header.end()) throw FormatError(std::string("checkpoint header lacks '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header field '") + key + "': " + e.what());
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  save_checkpoint(checkpoint.generator, checkpoint.critic, checkpoint.classifier,
                  checkpoint.training, checkpoint.state, path);
}

void save_checkpoint(const GeneratorConfig& generator, const CriticConfig& critic,
                     const ClassifierConfig& classifier, const TrainingConfig& training,
                     const TrainerState& saved, const std::filesystem::path& path) {
  // networks() wants a mutable state; nothing below writes through it.
  TrainerState& state = const_cast<TrainerState&>(saved);
  Json header;
  header["generator"] = to_json(generator);
  header["critic"] = to_json(critic);
  header["classifier"] = to_json(classifier);
  header["training"] = to_json(training);
  header["iteration"] = state.iteration;
  std::ostringstream rng;
  rng << state.rng;
  header["rng"] = rng.str();
  header["stats"] = to_json(state.stats);
  Json nets = Json::array();
  for (const auto& n : networks(state)) {
    Json table = Json::array();
    for (const auto& p : *n.params) table.push_back({{"name", p.name}, {"shape", p.value.shape()}});
    nets.push_back({{"kind", n.kind}, {"adam_t", n.adam->t}, {"parameters", table}});
  }
  header["networks"] = nets;
  const std::string text = header.dump();

  std::string out(kMagic.begin(), kMagic.end());
  put_le(out, kVersion, 4);
  put_le(out, text.size(), 8);
  out += text;
  for (const auto& n : networks(state)) {
    for (const auto& p : *n.params) put_floats(out, p.value.data());
    for (const auto& m : n.adam->m) put_floats(out, m.data());
    for (const auto& v : n.adam->v) put_floats(out, v.data());
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string where = "checkpoint '" + path.string() + "'";

  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
    throw FormatError(where + ": bad magic");
  }
  if (bytes.size() < kPrefixBytes) throw IoError(where + ": truncated header");
  const auto version = get_le(data + 4, 4);
  if (version != kVersion) {
    throw FormatError(where + ": unsupported version " + std::to_string(version));
  }
  const std::uint64_t header_bytes = get_le(data + 8, 8);
  if (header_bytes > bytes.size() - kPrefixBytes) throw IoError(where + ": truncated header");

  Json header;
  try {
    header = Json::parse(bytes.begin() + kPrefixBytes,
                         bytes.begin() + static_cast<std::ptrdiff_t>(kPrefixBytes + header_bytes));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(where + ": header is not valid JSON: " + e.what());
  }

  Checkpoint c;
  try {
    from_json(header_field<Json>(header, "generator"), c.generator);
    from_json(header_field<Json>(header, "critic"), c.critic);
    from_json(header_field<Json>(header, "classifier"), c.classifier);
    from_json(header_field<Json>(header, "training"), c.training);
    from_json(header_field<Json>(header, "stats"), c.state.stats);
    c.generator.validate();
    c.critic.validate();
    c.classifier.validate();
  } catch (const ValidationError& e) {
    throw FormatError(where + ": " + e.what());
  } catch (const ContractError& e) {
    throw FormatError(where + ": " + e.what());
  }

  TrainerState saved = init_trainer(c.generator, c.critic, c.classifier, 0, c.state.stats);
  saved.iteration = header_field<std::uint64_t>(header, "iteration");
  std::istringstream rng(header_field<std::string>(header, "rng"));
  rng >> saved.rng;
  if (!rng) throw FormatError(where + ": unreadable sampling-stream state");

  const Json nets = header_field<Json>(header, "networks");
  auto refs = networks(saved);
  if (!nets.is_array() || nets.size() != refs.size()) {
    throw FormatError(where + ": expected " + std::to_string(refs.size()) + " networks");
  }
  std::size_t floats = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const Json& n = nets[i];
    if (header_field<std::string>(n, "kind") != refs[i].kind) {
      throw FormatError(where + ": network " + std::to_string(i) + " should be " + refs[i].kind);
    }
    const Json table = header_field<Json>(n, "parameters");
    auto& params = *refs[i].params;
    if (!table.is_array()) throw FormatError(where + ": parameter table is not an array");
    for (const auto& entry : table) {
      const auto name = header_field<std::string>(entry, "name");
      const auto shape = header_field<Shape>(entry, "shape");
      if (!params.contains(name)) {
        throw DimensionError(where + ": unexpected parameter " + name);
      }
      if (params.at(name).value.shape() != shape) {
        throw DimensionError(where + ": parameter " + name + " has shape " +
                             shape_to_string(shape) + ", config implies " +
                             shape_to_string(params.at(name).value.shape()));
      }
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (k >= table.size() || header_field<std::string>(table[k], "name") != params[k].name) {
        throw DimensionError(where + ": missing parameter " + params[k].name);
      }
      floats += 3 * params[k].value.size();
    }
    if (table.size() != params.size()) {
      throw DimensionError(where + ": " + refs[i].kind + " lists " +
                           std::to_string(table.size()) + " parameters, expected " +
                           std::to_string(params.size()));
    }
    refs[i].adam->t = header_field<std::uint64_t>(n, "adam_t");
  }

  const std::size_t payload = bytes.size() - kPrefixBytes - header_bytes;
  if (payload < 4 * floats) {
    throw IoError(where + ": payload holds " + std::to_string(payload) + " bytes, expected " +
                  std::to_string(4 * floats));
  }
  if (payload > 4 * floats) throw FormatError(where + ": trailing bytes after payload");

  const unsigned char* p = data + kPrefixBytes + header_bytes;
  for (const auto& n : refs) {
    for (auto& param : *n.params) get_floats(p, param.value.data());
    for (auto& m : n.adam->m) get_floats(p, m.data());
    for (auto& v : n.adam->v) get_floats(p, v.data());
  }
  c.state = std::move(saved);
  return c;
}

void restore_into(const TrainerState& source, TrainerState& target) {
  auto src = networks(const_cast<TrainerState&>(source));
  auto dst = networks(target);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    auto& from = *src[i].params;
    auto& to = *dst[i].params;
    for (std::size_t k = 0; k < to.size(); ++k) {
      const std::string& name = to[k].name;
      if (!from.contains(name)) throw DimensionError("checkpoint lacks parameter " + name);
      const std::size_t j = from.index_of(name);
      if (from[j].value.shape() != to[k].value.shape()) {
        throw DimensionError("parameter " + name + " has shape " +
                             shape_to_string(from[j].value.shape()) + " in the checkpoint, " +
                             shape_to_string(to[k].value.shape()) + " in the model");
      }
    }
    if (from.size() != to.size()) {
      for (const auto& p : from) {
        if (!to.contains(p.name)) throw DimensionError("model has no parameter " + p.name);
      }
    }
    for (std::size_t k = 0; k < to.size(); ++k) {
      const std::size_t j = from.index_of(to[k].name);
      to[k].value = from[j].value;
      dst[i].adam->m[k] = src[i].adam->m[j];
      dst[i].adam->v[k] = src[i].adam->v[j];
    }
    dst[i].adam->t = src[i].adam->t;
  }
  target.iteration = source.iteration;
  target.rng = source.rng;
  target.stats = source.stats;
}

TrainerState transfer_init(const TransferPlan& plan, NormalizationStats target_stats) {
  const Checkpoint source = load_checkpoint(plan.source_checkpoint);
  return transfer_init(source.state.models, plan, std::move(target_stats));
}

}  // namespace emotrans
