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

#include <iostream>

#include <CLI11.hpp>

#include "commands.h"
#include "emotrans/errors.h"

namespace {

using namespace emotrans::cli;

void add_common(CLI::App* app, CommonOptions& o, bool with_iterations = true) {
  app->add_option("--config", o.config, "run config JSON");
  app->add_option("--seed", o.seed, "overrides the config seed");
  app->add_option("--out", o.out, "output directory");
  if (with_iterations) app->add_option("--iterations", o.iterations, "training iterations");
  app->add_option("--manifest-x", o.manifest_x, "domain X manifest");
  app->add_option("--manifest-y", o.manifest_y, "domain Y manifest");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emotrans: emotion transfer training and evaluation"};
  app.require_subcommand(1);

  CommonOptions common;
  SynthOptions synth;
  TrainOptions train;
  GenerateOptions generate;
  EvaluateOptions evaluate;
  std::uint64_t grad_seed = 0;

  auto* synth_cmd = app.add_subcommand("synth-data", "write a synthetic two-domain corpus");
  add_common(synth_cmd, common, false);
  synth_cmd->add_option("--language", synth.language, "src or tgt")
      ->check(CLI::IsMember({"src", "tgt"}));

  auto* train_cmd = app.add_subcommand("train", "train all networks from scratch");
  add_common(train_cmd, common);
  train_cmd->add_option("--ablation", train.ablation, "named loss configuration");
  train_cmd->add_option("--resume", train.resume, "continue from a checkpoint");

  auto* transfer_cmd = app.add_subcommand("transfer", "fine-tune from a source checkpoint");
  add_common(transfer_cmd, common);
  transfer_cmd->add_option("--source", train.source, "source checkpoint")->required();
  transfer_cmd->add_option("--ablation", train.ablation, "named loss configuration");

  auto* generate_cmd = app.add_subcommand("generate", "convert features with a trained generator");
  generate_cmd->add_option("--checkpoint", generate.checkpoint)->required();
  generate_cmd->add_option("--direction", generate.direction, "x2y or y2x")
      ->required()
      ->check(CLI::IsMember({"x2y", "y2x"}));
  generate_cmd->add_option("--input", generate.input, "ETGF file or manifest")->required();
  generate_cmd->add_option("--output", generate.output, "ETGF file or directory")->required();

  auto* evaluate_cmd = app.add_subcommand("evaluate", "FAD or MCD between two sets");
  evaluate_cmd->add_option("--real", evaluate.real, "real manifest")->required();
  evaluate_cmd->add_option("--generated", evaluate.generated, "manifest or directory")->required();
  evaluate_cmd->add_option("--embedder", evaluate.embedder, "identity or classifier")
      ->default_val("identity")
      ->check(CLI::IsMember({"identity", "classifier"}));
  evaluate_cmd->add_option("--metric", evaluate.metric, "fad or mcd")
      ->check(CLI::IsMember({"fad", "mcd"}));
  evaluate_cmd->add_option("--checkpoint", evaluate.checkpoint, "for the classifier embedder");

  auto* grad_cmd = app.add_subcommand("grad-check", "finite-difference check of every op and loss");
  grad_cmd->add_option("--seed", grad_seed);

  auto* ablate_cmd = app.add_subcommand("ablate", "train and score the six loss configurations");
  add_common(ablate_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    std::ostream& out = std::cout;
    if (*synth_cmd) return cmd_synth_data(common, synth, out);
    if (*train_cmd) return cmd_train(common, train, out);
    if (*transfer_cmd) return cmd_transfer(common, train, out);
    if (*generate_cmd) return cmd_generate(generate, out);
    if (*evaluate_cmd) return cmd_evaluate(evaluate, out);
    if (*grad_cmd) return cmd_grad_check(grad_seed, out);
    if (*ablate_cmd) return cmd_ablate(common, out);
  } catch (const UsageError& e) {
    std::cerr << "emotrans: usage: " << e.what() << '\n';
    return 2;
  } catch (const emotrans::NumericError& e) {
    std::cerr << "emotrans: numeric abort: " << e.what() << '\n';
    return 4;
  } catch (const emotrans::Error& e) {
    std::cerr << "emotrans: error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "emotrans: internal error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
