/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#ifndef SUPCON_TRAINER_HPP
#define SUPCON_TRAINER_HPP

#include <nlohmann/json.hpp>

#include "supcon/data.hpp"
#include "supcon/metrics.hpp"
#include "supcon/optim.hpp"

namespace supcon {

struct AugmentConfig {
  double prob = 0.7;
  double sigma = 0.1;

  void validate() const;
};

struct TrainSettings {
  int batch_size = 32;
  int max_epochs = 100;
  int target_frames = 20;
  AugmentConfig augment;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  std::string stage;
  double mean_loss = 0.0;
  double dev_eer = 0.0;
  std::size_t queue_len = 0;
  bool queue_enabled = false;
  double wall_time_s = 0.0;
};

nlohmann::json epoch_record_to_json(const EpochRecord& rec);

struct StageResult {
  ModelParams best_params;
  nlohmann::json best_optim_state;  // AdamW state at the best epoch
  std::vector<EpochRecord> log;
  double best_dev_eer = 100.0;
  int best_epoch = -1;
  int epochs_run = 0;
  // First epoch in which a step actually drew queue negatives; -1 if never.
  int first_queue_epoch = -1;
};

// With probability prob, adds zero-mean Gaussian noise (stddev sigma) to
// every frame; otherwise returns the utterance unchanged.
Utterance augment(const Utterance& utt, double prob, double sigma, Rng& rng);

struct EmbeddingSet {
  std::vector<std::string> ids;
  std::vector<Label> labels;
  std::vector<Vec> embeddings;
};

// Embeds a whole split with eval-mode chunking and no augmentation.
EmbeddingSet embed_dataset(const ModelParams& params, const Dataset& ds,
                           int target_frames);

// Closed-form separability scores for a split: sim(z, mu_bona) -
// sim(z, mu_spoof) with normalized class means taken from the train split.
ScoreSet probe_scores(const ModelParams& params, const Dataset& train,
                      const Dataset& target, SimilarityKind kind,
                      int target_frames);

// Stage-1 selection metric: probe scores over the dev split reduced to EER.
double probe_dev_eer(const ModelParams& params, const Dataset& train,
                     const Dataset& dev, SimilarityKind kind,
                     int target_frames);

// Classifier logits over an embedded split.
ScoreSet classifier_scores(const ModelParams& params, const EmbeddingSet& set);

// Contrastive fine-tuning of encoder + projection with the queue schedule.
StageResult train_stage1(const ModelParams& init, const Dataset& train,
                         const Dataset& dev, const LossConfig& loss_config,
                         const QueueSchedule& schedule,
                         const TrainSettings& settings,
                         const OptimConfig& optim, std::uint64_t seed);

// Linear classifier on frozen embeddings with BCE; encoder and projection
// of `frozen` are carried through bitwise unchanged.
StageResult train_stage2(const ModelParams& frozen, const EmbeddingSet& train,
                         const EmbeddingSet& dev, const TrainSettings& settings,
                         const OptimConfig& optim, std::uint64_t seed);

// Single-stage reference: encoder, projection, and classifier trained
// jointly with BCE.
StageResult train_bce_end_to_end(const ModelParams& init, const Dataset& train,
                                 const Dataset& dev,
                                 const TrainSettings& settings,
                                 const OptimConfig& optim, std::uint64_t seed);

}  // namespace supcon

#endif  // SUPCON_TRAINER_HPP
