/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#ifndef SUPCON_EXPERIMENT_HPP
#define SUPCON_EXPERIMENT_HPP

#include <map>
#include <optional>

#include "supcon/checkpoint.hpp"
#include "supcon/metrics.hpp"
#include "supcon/trainer.hpp"

namespace supcon {

struct DataConfig {
  enum class Kind { Synthetic, Manifest, Embeddings };

  Kind kind = Kind::Synthetic;
  SyntheticSpec synthetic;
  std::filesystem::path manifest_path;
  // Embedding-file runs (classifier stage only): split name -> JSONL path.
  // Requires "train", "dev", and at least one "eval*" entry.
  std::map<std::string, std::filesystem::path> embedding_paths;
};

// One experiment grid point. JSON parsing is strict: unknown keys are
// rejected before any compute.
struct ExperimentConfig {
  std::string name = "run";
  std::string similarity = "cosine";  // "cosine" | "geodesic" | "none" (BCE)
  double temperature = 0.3;
  QueueSchedule queue;
  TrainSettings train;
  OptimConfig optim;
  ModelDims model;
  std::uint64_t seed = 1337;
  std::string stage = "both";  // "1" | "2" | "both"
  std::filesystem::path init_checkpoint;  // stage-1 params for stage "2"
  DataConfig data;

  bool is_baseline() const { return similarity == "none"; }
  void validate() const;
  std::string run_id() const;
  std::string config_hash() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

struct SweepSpec {
  ExperimentConfig base;
  std::vector<std::string> similarities = {"cosine", "geodesic"};
  std::vector<double> temperatures;           // temperature axis
  std::vector<std::size_t> queue_capacities;  // queue axis
  // Temperatures used by a capacities-only sweep (best no-queue value per
  // similarity).
  std::map<std::string, double> tau_per_similarity = {{"cosine", 0.30},
                                                      {"geodesic", 0.07}};

  static SweepSpec from_json(const nlohmann::json& j);
  static SweepSpec load(const std::filesystem::path& path);
  // Grid of configs; throws std::invalid_argument when no axis is given.
  std::vector<ExperimentConfig> expand() const;
};

struct RunResult {
  std::string run_id;
  std::string similarity;
  std::optional<double> tau;  // empty for the BCE baseline
  std::size_t queue_capacity = 0;
  int e_start = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> split_eers;  // split -> EER %
  std::optional<double> pooled;  // mean when exactly 4 eval splits exist
  int epochs_run = 0;
  double wall_time_s = 0.0;
};

// Trains per the config, evaluates every eval split with the best
// checkpoint, and writes artifacts under out_dir/<run_id>/: checkpoint.json,
// log.jsonl, scores/<split>.txt (+ labels), and a row in out_dir/results.csv.
// A failure leaves a FAILED marker next to the partial artifacts.
RunResult run_experiment(const ExperimentConfig& config,
                         const std::filesystem::path& out_dir);

// One run per grid point; per-run failures are recorded and the sweep
// continues.
std::vector<RunResult> run_sweep(const SweepSpec& sweep,
                                 const std::filesystem::path& out_dir);

// Embeds one split with the checkpoint's parameters and writes embedding
// JSONL records to out_path.
void export_embeddings(const std::filesystem::path& checkpoint_path,
                       const ExperimentConfig& config, const std::string& split,
                       const std::filesystem::path& out_path);

// Scores every eval split: classifier logits when a trained classifier
// exists (stage2/baseline checkpoints), otherwise the stage-1 probe.
std::vector<std::pair<std::string, ScoreSet>> score_eval_splits(
    const ModelParams& params, const std::string& checkpoint_stage,
    const DataBundle& bundle, SimilarityKind probe_kind, int target_frames);

// Results CSV (exclusive append; header fixed by the first row's splits).
void append_result_csv(const std::filesystem::path& csv_path,
                       const RunResult& result);
std::vector<std::map<std::string, std::string>> read_results_csv(
    const std::filesystem::path& csv_path);

DataBundle load_data_bundle(const DataConfig& data);

}  // namespace supcon

#endif  // SUPCON_EXPERIMENT_HPP
