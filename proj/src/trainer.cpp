/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "supcon/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "supcon/metrics.hpp"

namespace supcon {

void AugmentConfig::validate() const {
  if (prob < 0.0 || prob > 1.0) {
    throw std::invalid_argument("augment prob must lie in [0, 1]");
  }
  if (sigma < 0.0) {
    throw std::invalid_argument("augment sigma must be non-negative");
  }
}

void TrainSettings::validate() const {
  if (batch_size < 2) {
    throw std::invalid_argument("batch_size must be at least 2");
  }
  if (max_epochs < 1) {
    throw std::invalid_argument("max_epochs must be positive");
  }
  if (target_frames < 1) {
    throw std::invalid_argument("target_frames must be positive");
  }
  augment.validate();
}

nlohmann::json epoch_record_to_json(const EpochRecord& rec) {
  nlohmann::json j;
  j["epoch"] = rec.epoch;
  j["stage"] = rec.stage;
  j["mean_loss"] = rec.mean_loss;
  j["dev_eer"] = rec.dev_eer;
  j["queue_len"] = rec.queue_len;
  j["queue_enabled"] = rec.queue_enabled;
  j["wall_time_s"] = rec.wall_time_s;
  return j;
}

Utterance augment(const Utterance& utt, double prob, double sigma, Rng& rng) {
  if (prob < 0.0 || prob > 1.0) {
    throw std::invalid_argument("augment prob must lie in [0, 1]");
  }
  if (!rng.bernoulli(prob)) return utt;
  Utterance out = utt;
  for (Eigen::Index r = 0; r < out.frames.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.frames.cols(); ++c) {
      out.frames(r, c) += sigma * rng.gaussian();
    }
  }
  return out;
}

EmbeddingSet embed_dataset(const ModelParams& params, const Dataset& ds,
                           int target_frames) {
  EmbeddingSet set;
  const std::size_t n = ds.utterances.size();
  set.ids.resize(n);
  set.labels.resize(n);
  set.embeddings.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const Utterance& utt = ds.utterances[i];
    Utterance chunked = utt;
    chunked.frames = chunk_or_pad(utt.frames, target_frames, ChunkMode::Eval,
                                  nullptr);
    set.ids[i] = utt.id;
    set.labels[i] = utt.label;
    set.embeddings[i] = embed(params, chunked);
  });
  return set;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_both_classes(const Dataset& ds, const char* role) {
  bool bona = false, spoof = false;
  for (const Utterance& u : ds.utterances) {
    (u.label == Label::Bonafide ? bona : spoof) = true;
  }
  if (!bona || !spoof) {
    throw std::invalid_argument(std::string(role) +
                                " split must contain both classes");
  }
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   int batch_size,
                                                   Rng& shuffle_rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t lo = 0; lo < n; lo += static_cast<std::size_t>(batch_size)) {
    const std::size_t hi = std::min(n, lo + static_cast<std::size_t>(batch_size));
    if (hi - lo < 2) break;  // SupCon needs pairs; a 1-sample tail is dropped
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                         order.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return batches;
}

std::string join_ids(const std::vector<Utterance>& batch) {
  std::string out;
  for (const Utterance& u : batch) {
    if (!out.empty()) out += ", ";
    out += u.id;
  }
  return out;
}

}  // namespace

ScoreSet classifier_scores(const ModelParams& params, const EmbeddingSet& set) {
  ScoreSet scores;
  scores.scores.reserve(set.ids.size());
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    scores.scores.emplace_back(set.ids[i], classify(params, set.embeddings[i]));
    scores.labels.emplace(set.ids[i], set.labels[i]);
  }
  return scores;
}

ScoreSet probe_scores(const ModelParams& params, const Dataset& train,
                      const Dataset& target, SimilarityKind kind,
                      int target_frames) {
  const EmbeddingSet train_set = embed_dataset(params, train, target_frames);
  Vec bona_sum = Vec::Zero(params.dims.embedding_dim);
  Vec spoof_sum = Vec::Zero(params.dims.embedding_dim);
  std::size_t n_bona = 0, n_spoof = 0;
  for (std::size_t i = 0; i < train_set.labels.size(); ++i) {
    if (train_set.labels[i] == Label::Bonafide) {
      bona_sum += train_set.embeddings[i];
      ++n_bona;
    } else {
      spoof_sum += train_set.embeddings[i];
      ++n_spoof;
    }
  }
  if (n_bona == 0 || n_spoof == 0) {
    throw std::invalid_argument("probe needs both classes in the train split");
  }
  const Vec mu_bona = l2_normalize(bona_sum / static_cast<double>(n_bona));
  const Vec mu_spoof = l2_normalize(spoof_sum / static_cast<double>(n_spoof));

  const EmbeddingSet target_set = embed_dataset(params, target, target_frames);
  ScoreSet scores;
  for (std::size_t i = 0; i < target_set.ids.size(); ++i) {
    const double s = similarity(kind, target_set.embeddings[i], mu_bona) -
                     similarity(kind, target_set.embeddings[i], mu_spoof);
    scores.scores.emplace_back(target_set.ids[i], s);
    scores.labels.emplace(target_set.ids[i], target_set.labels[i]);
  }
  return scores;
}

double probe_dev_eer(const ModelParams& params, const Dataset& train,
                     const Dataset& dev, SimilarityKind kind,
                     int target_frames) {
  return eer(probe_scores(params, train, dev, kind, target_frames)).eer_percent;
}

StageResult train_stage1(const ModelParams& init, const Dataset& train,
                         const Dataset& dev, const LossConfig& loss_config,
                         const QueueSchedule& schedule,
                         const TrainSettings& settings,
                         const OptimConfig& optim, std::uint64_t seed) {
  settings.validate();
  optim.validate();
  loss_config.validate();
  schedule.validate();
  require_both_classes(train, "train");
  require_both_classes(dev, "dev");

  ModelParams params = init;
  AdamW adamw(optim, params.dims);
  MemoryQueue queue;
  Rng shuffle_rng(seed, "stage1/shuffle");
  Rng augment_rng(seed, "stage1/augment");
  Rng crop_rng(seed, "stage1/crop");
  EarlyStopState stop;

  StageResult result;
  result.best_params = params;

  for (int epoch = 1; epoch <= settings.max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    queue.maybe_enable(schedule, epoch - 1);

    double loss_sum = 0.0;
    int steps = 0;
    for (const auto& batch_indices :
         make_batches(train.utterances.size(), settings.batch_size, shuffle_rng)) {
      std::vector<Utterance> batch;
      batch.reserve(batch_indices.size());
      for (std::size_t idx : batch_indices) {
        Utterance utt = train.utterances[idx];
        utt.frames = chunk_or_pad(utt.frames, settings.target_frames,
                                  ChunkMode::Train, &crop_rng);
        batch.push_back(augment(utt, settings.augment.prob,
                                settings.augment.sigma, augment_rng));
      }

      if (result.first_queue_epoch < 0 && queue.enabled() && queue.size() > 0) {
        for (const Utterance& u : batch) {
          if (queue.count_with_label(opposite(u.label)) > 0) {
            result.first_queue_epoch = epoch;
            break;
          }
        }
      }

      BackwardResult bw;
      try {
        bw = backward(params, batch, LossKind::Supcon, loss_config, &queue);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " [epoch " +
                                 std::to_string(epoch) + ", batch: " +
                                 join_ids(batch) + "]");
      }
      adamw.step(params, bw.grads);

      if (queue.enabled()) {
        LabeledBatch lb;
        lb.embeddings = bw.embeddings;
        for (const Utterance& u : batch) lb.labels.push_back(u.label);
        queue.enqueue(lb);
      }

      loss_sum += bw.loss;
      ++steps;
    }

    const double dev_eer = probe_dev_eer(params, train, dev,
                                         loss_config.similarity,
                                         settings.target_frames);
    const EarlyStopDecision decision =
        early_stop_update(stop, dev_eer, epoch, optim.patience);
    if (decision.is_new_best) {
      result.best_params = params;
      result.best_optim_state = adamw.state_to_json();
    }

    result.log.push_back(EpochRecord{
        epoch, "stage1", steps > 0 ? loss_sum / steps : 0.0, dev_eer,
        queue.size(), queue.enabled(), seconds_since(t0)});
    result.epochs_run = epoch;
    if (decision.should_stop) break;
  }

  result.best_dev_eer = stop.best_metric;
  result.best_epoch = stop.best_epoch;
  return result;
}

StageResult train_stage2(const ModelParams& frozen, const EmbeddingSet& train,
                         const EmbeddingSet& dev, const TrainSettings& settings,
                         const OptimConfig& optim, std::uint64_t seed) {
  settings.validate();
  optim.validate();
  if (train.ids.size() < 2) {
    throw std::invalid_argument("stage 2 needs at least 2 training embeddings");
  }

  ModelParams params = frozen;
  AdamW adamw(optim, params.dims);
  Rng shuffle_rng(seed, "stage2/shuffle");
  EarlyStopState stop;

  StageResult result;
  result.best_params = params;

  const std::size_t n = train.ids.size();
  for (int epoch = 1; epoch <= settings.max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    double loss_sum = 0.0;
    int steps = 0;
    for (const auto& batch_indices :
         make_batches(n, settings.batch_size, shuffle_rng)) {
      const double b = static_cast<double>(batch_indices.size());
      Vec w_grad = Vec::Zero(params.cls_w.size());
      double b_grad = 0.0;
      double batch_loss = 0.0;
      for (std::size_t idx : batch_indices) {
        const double logit = classify(params, train.embeddings[idx]);
        const double target = bce_target(train.labels[idx]);
        const double term = bce_with_logits(logit, target);
        if (!std::isfinite(term)) {
          throw std::runtime_error("non-finite BCE loss at utterance '" +
                                   train.ids[idx] + "'");
        }
        batch_loss += term;
        const double sig = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit))
                                        : std::exp(logit) / (1.0 + std::exp(logit));
        const double d_logit = (sig - target) / b;
        w_grad += d_logit * train.embeddings[idx];
        b_grad += d_logit;
      }
      GradientSet grads;
      grads.classifier = ClassifierGrads{std::move(w_grad), b_grad};
      adamw.step(params, grads);
      loss_sum += batch_loss / b;
      ++steps;
    }

    const double dev_eer = eer(classifier_scores(params, dev)).eer_percent;
    const EarlyStopDecision decision =
        early_stop_update(stop, dev_eer, epoch, optim.patience);
    if (decision.is_new_best) {
      result.best_params = params;
      result.best_optim_state = adamw.state_to_json();
    }
    result.log.push_back(EpochRecord{epoch, "stage2",
                                     steps > 0 ? loss_sum / steps : 0.0,
                                     dev_eer, 0, false, seconds_since(t0)});
    result.epochs_run = epoch;
    if (decision.should_stop) break;
  }

  result.best_dev_eer = stop.best_metric;
  result.best_epoch = stop.best_epoch;
  return result;
}

StageResult train_bce_end_to_end(const ModelParams& init, const Dataset& train,
                                 const Dataset& dev,
                                 const TrainSettings& settings,
                                 const OptimConfig& optim, std::uint64_t seed) {
  settings.validate();
  optim.validate();
  require_both_classes(train, "train");
  require_both_classes(dev, "dev");

  ModelParams params = init;
  AdamW adamw(optim, params.dims);
  Rng shuffle_rng(seed, "baseline/shuffle");
  Rng augment_rng(seed, "baseline/augment");
  Rng crop_rng(seed, "baseline/crop");
  EarlyStopState stop;

  StageResult result;
  result.best_params = params;

  for (int epoch = 1; epoch <= settings.max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    double loss_sum = 0.0;
    int steps = 0;
    for (const auto& batch_indices :
         make_batches(train.utterances.size(), settings.batch_size, shuffle_rng)) {
      std::vector<Utterance> batch;
      batch.reserve(batch_indices.size());
      for (std::size_t idx : batch_indices) {
        Utterance utt = train.utterances[idx];
        utt.frames = chunk_or_pad(utt.frames, settings.target_frames,
                                  ChunkMode::Train, &crop_rng);
        batch.push_back(augment(utt, settings.augment.prob,
                                settings.augment.sigma, augment_rng));
      }
      BackwardResult bw;
      try {
        bw = backward(params, batch, LossKind::BceEndToEnd, LossConfig{});
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " [epoch " +
                                 std::to_string(epoch) + ", batch: " +
                                 join_ids(batch) + "]");
      }
      adamw.step(params, bw.grads);
      loss_sum += bw.loss;
      ++steps;
    }

    const double dev_eer =
        eer(classifier_scores(params,
                              embed_dataset(params, dev, settings.target_frames)))
            .eer_percent;
    const EarlyStopDecision decision =
        early_stop_update(stop, dev_eer, epoch, optim.patience);
    if (decision.is_new_best) {
      result.best_params = params;
      result.best_optim_state = adamw.state_to_json();
    }
    result.log.push_back(EpochRecord{epoch, "baseline",
                                     steps > 0 ? loss_sum / steps : 0.0,
                                     dev_eer, 0, false, seconds_since(t0)});
    result.epochs_run = epoch;
    if (decision.should_stop) break;
  }

  result.best_dev_eer = stop.best_metric;
  result.best_epoch = stop.best_epoch;
  return result;
}

}  // namespace supcon
