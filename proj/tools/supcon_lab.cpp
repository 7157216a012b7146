/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "supcon/experiment.hpp"

namespace {

using namespace supcon;

ExperimentConfig load_config(const std::string& path,
                             std::optional<std::uint64_t> seed_override,
                             std::optional<std::string> stage_override) {
  ExperimentConfig cfg = ExperimentConfig::load(path);
  if (seed_override.has_value()) cfg.seed = *seed_override;
  if (stage_override.has_value()) cfg.stage = *stage_override;
  cfg.validate();
  return cfg;
}

void print_result(const RunResult& r) {
  std::printf("%-40s", r.run_id.c_str());
  for (const auto& [split, e] : r.split_eers) {
    std::printf("  %s=%.3f%%", split.c_str(), e);
  }
  if (r.pooled.has_value()) std::printf("  pooled=%.4f", *r.pooled);
  std::printf("  epochs=%d  wall=%.1fs\n", r.epochs_run, r.wall_time_s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"supcon-lab: contrastive anti-spoofing experiments on synthetic data"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", split, checkpoint_path, out_path;
  std::string score_path, label_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> stage_override;

  auto add_common = [&](CLI::App* cmd, bool with_stage) {
    cmd->add_option("--config", config_path, "experiment config JSON")
        ->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed_override, "override the config seed");
    if (with_stage) {
      cmd->add_option("--stage", stage_override,
                      "override the config stage (1, 2, both)");
    }
  };

  CLI::App* gen_cmd = app.add_subcommand(
      "generate-data", "write synthetic dataset splits plus a manifest");
  add_common(gen_cmd, false);

  CLI::App* train = app.add_subcommand(
      "train", "run an experiment: train, evaluate, write artifacts and a results row");
  add_common(train, true);

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "score eval splits with an existing checkpoint");
  add_common(evaluate, false);
  evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")
      ->required();

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "run every grid point of a sweep spec");
  sweep_cmd->add_option("--config", config_path, "sweep spec JSON")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory");
  sweep_cmd->add_option("--seed", seed_override, "override the base seed");

  CLI::App* export_cmd = app.add_subcommand(
      "export-embeddings", "embed one split with a checkpoint and write JSONL");
  add_common(export_cmd, false);
  export_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")
      ->required();
  export_cmd->add_option("--split", split, "split name (train, dev, eval_*)")
      ->required();
  export_cmd->add_option("--output", out_path, "output JSONL path")->required();

  CLI::App* score_cmd = app.add_subcommand(
      "score", "EER from external two-column score and label files");
  score_cmd->add_option("--scores", score_path, "score file")->required();
  score_cmd->add_option("--labels", label_path, "label file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) {
      const ExperimentConfig cfg =
          load_config(config_path, seed_override, std::nullopt);
      if (cfg.data.kind != DataConfig::Kind::Synthetic) {
        throw std::invalid_argument("generate-data needs a synthetic data config");
      }
      write_manifest(generate(cfg.data.synthetic), out_dir);
      std::printf("wrote %s/manifest.json\n", out_dir.c_str());
    } else if (train->parsed()) {
      const ExperimentConfig cfg =
          load_config(config_path, seed_override, stage_override);
      print_result(run_experiment(cfg, out_dir));
    } else if (evaluate->parsed()) {
      const ExperimentConfig cfg =
          load_config(config_path, seed_override, std::nullopt);
      const Checkpoint ckpt = load_checkpoint(checkpoint_path);
      const DataBundle bundle = load_data_bundle(cfg.data);
      const SimilarityKind kind =
          cfg.is_baseline() ? SimilarityKind::Cosine
                            : similarity_from_string(cfg.similarity);
      for (const auto& [name, scores] :
           score_eval_splits(ckpt.params, ckpt.stage, bundle, kind,
                             cfg.train.target_frames)) {
        const EerResult r = eer(scores);
        std::printf("%-16s EER %.3f%%  (threshold %.6g)\n", name.c_str(),
                    r.eer_percent, r.threshold);
      }
    } else if (sweep_cmd->parsed()) {
      SweepSpec sweep = SweepSpec::load(config_path);
      if (seed_override.has_value()) sweep.base.seed = *seed_override;
      const auto results = run_sweep(sweep, out_dir);
      for (const RunResult& r : results) print_result(r);
      std::printf("%zu/%zu runs succeeded; results in %s/results.csv\n",
                  results.size(), sweep.expand().size(), out_dir.c_str());
    } else if (export_cmd->parsed()) {
      const ExperimentConfig cfg =
          load_config(config_path, seed_override, std::nullopt);
      export_embeddings(checkpoint_path, cfg, split, out_path);
      std::printf("wrote %s\n", out_path.c_str());
    } else if (score_cmd->parsed()) {
      const EerResult r = eer(read_scores(score_path, label_path));
      std::printf("EER %.4f%%  threshold %.6g\n", r.eer_percent, r.threshold);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
