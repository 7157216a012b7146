/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "supcon/supcon_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace supcon {

void LossConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be positive and finite");
  }
}

CandidateSet build_candidate_set(int anchor_index, const LabeledBatch& batch,
                                 const MemoryQueue* queue) {
  const int b = batch.size();
  if (anchor_index < 0 || anchor_index >= b) {
    throw std::invalid_argument("anchor index out of range");
  }
  CandidateSet set;
  set.batch_indices.reserve(static_cast<std::size_t>(b) - 1);
  for (int j = 0; j < b; ++j) {
    if (j != anchor_index) set.batch_indices.push_back(j);
  }
  if (queue != nullptr) {
    const Label anchor_label = batch.labels[static_cast<std::size_t>(anchor_index)];
    int q = 0;
    for (const QueueEntry& e : queue->entries()) {
      if (e.label != anchor_label) set.queue_refs.push_back(q);
      ++q;
    }
  }
  return set;
}

namespace {

struct AnchorWork {
  double term = 0.0;
  bool contributes = false;
  // d(term)/d(sim(i, a)) for every candidate, batch candidates first in
  // index order, then queue refs in queue order.
  std::vector<double> sim_grads;
  CandidateSet candidates;
};

// One anchor of the loss: term = logsumexp_a(s_a) - mean_p(s_p) with
// s = sim / temperature, stabilized by max subtraction.
AnchorWork anchor_term(int i, const LabeledBatch& batch,
                       const LossConfig& config, const MemoryQueue* queue,
                       bool want_grads) {
  AnchorWork work;
  work.candidates = build_candidate_set(i, batch, queue);
  const Label anchor_label = batch.labels[static_cast<std::size_t>(i)];
  const Vec& anchor = batch.embeddings[static_cast<std::size_t>(i)];

  const std::size_t n_batch = work.candidates.batch_indices.size();
  const std::size_t n_total = n_batch + work.candidates.queue_refs.size();

  std::vector<double> logits(n_total);
  std::vector<bool> is_positive(n_total, false);
  std::size_t n_positive = 0;

  for (std::size_t k = 0; k < n_batch; ++k) {
    const int j = work.candidates.batch_indices[k];
    const double sim = similarity(
        config.similarity, anchor, batch.embeddings[static_cast<std::size_t>(j)]);
    logits[k] = sim / config.temperature;
    if (batch.labels[static_cast<std::size_t>(j)] == anchor_label) {
      is_positive[k] = true;
      ++n_positive;
    }
  }
  if (queue != nullptr) {
    const auto& entries = queue->entries();
    for (std::size_t k = 0; k < work.candidates.queue_refs.size(); ++k) {
      const auto& entry =
          entries[static_cast<std::size_t>(work.candidates.queue_refs[k])];
      logits[n_batch + k] =
          similarity(config.similarity, anchor, entry.embedding) /
          config.temperature;
    }
  }

  if (n_positive == 0) return work;  // skipped anchor

  double max_logit = -std::numeric_limits<double>::infinity();
  for (double s : logits) max_logit = std::max(max_logit, s);
  double exp_sum = 0.0;
  for (double s : logits) exp_sum += std::exp(s - max_logit);
  const double lse = max_logit + std::log(exp_sum);

  double positive_mean = 0.0;
  for (std::size_t k = 0; k < n_total; ++k) {
    if (is_positive[k]) positive_mean += logits[k];
  }
  positive_mean /= static_cast<double>(n_positive);

  work.term = lse - positive_mean;
  work.contributes = true;

  if (want_grads) {
    work.sim_grads.resize(n_total);
    const double inv_pos = 1.0 / static_cast<double>(n_positive);
    for (std::size_t k = 0; k < n_total; ++k) {
      const double softmax = std::exp(logits[k] - lse);
      const double d_logit = softmax - (is_positive[k] ? inv_pos : 0.0);
      work.sim_grads[k] = d_logit / config.temperature;
    }
  }
  return work;
}

// Single-label batches with no opposite-label queue entry carry no
// contrastive signal; they report zero loss with the degenerate flag.
bool no_contrastive_signal(const LabeledBatch& batch, const MemoryQueue* queue) {
  const Label first = batch.labels.front();
  for (Label l : batch.labels) {
    if (l != first) return false;
  }
  return queue == nullptr || queue->count_with_label(opposite(first)) == 0;
}

SupconValue assemble(const LabeledBatch& batch,
                     const std::vector<AnchorWork>& work) {
  SupconValue value;
  value.per_anchor.assign(static_cast<std::size_t>(batch.size()), 0.0);
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (!work[i].contributes) continue;
    if (!std::isfinite(work[i].term)) {
      throw NonFiniteLossError(static_cast<int>(i));
    }
    value.per_anchor[i] = work[i].term;
    value.sum += work[i].term;
    ++value.contributing;
  }
  if (value.contributing > 0) {
    value.mean = value.sum / static_cast<double>(value.contributing);
  } else {
    value.degenerate = true;
  }
  return value;
}

std::vector<AnchorWork> run_anchors(const LabeledBatch& batch,
                                    const LossConfig& config,
                                    const MemoryQueue* queue, bool want_grads) {
  std::vector<AnchorWork> work(static_cast<std::size_t>(batch.size()));
  parallel_for(work.size(), [&](std::size_t i) {
    work[i] = anchor_term(static_cast<int>(i), batch, config, queue, want_grads);
  });
  return work;
}

}  // namespace

SupconValue supcon_loss(const LabeledBatch& batch, const LossConfig& config,
                        const MemoryQueue* queue) {
  batch.validate();
  config.validate();
  if (no_contrastive_signal(batch, queue)) {
    SupconValue value;
    value.per_anchor.assign(static_cast<std::size_t>(batch.size()), 0.0);
    value.degenerate = true;
    return value;
  }
  return assemble(batch, run_anchors(batch, config, queue, false));
}

SupconGradient supcon_loss_grad(const LabeledBatch& batch,
                                const LossConfig& config,
                                const MemoryQueue* queue) {
  batch.validate();
  config.validate();

  SupconGradient result;
  const std::size_t b = static_cast<std::size_t>(batch.size());
  const Eigen::Index dim = batch.embeddings.front().size();
  result.wrt_embeddings.assign(b, Vec::Zero(dim));

  if (no_contrastive_signal(batch, queue)) {
    result.value.per_anchor.assign(b, 0.0);
    result.value.degenerate = true;
    return result;
  }

  const std::vector<AnchorWork> work = run_anchors(batch, config, queue, true);
  result.value = assemble(batch, work);

  // Fixed accumulation order: anchors ascending, candidates in set order.
  const auto* entries = queue != nullptr ? &queue->entries() : nullptr;
  for (std::size_t i = 0; i < b; ++i) {
    const AnchorWork& w = work[i];
    if (!w.contributes) continue;
    const Vec& anchor = batch.embeddings[i];
    const std::size_t n_batch = w.candidates.batch_indices.size();
    for (std::size_t k = 0; k < w.sim_grads.size(); ++k) {
      const double coeff = w.sim_grads[k];
      if (coeff == 0.0) continue;
      if (k < n_batch) {
        const std::size_t j =
            static_cast<std::size_t>(w.candidates.batch_indices[k]);
        const double dot = anchor.dot(batch.embeddings[j]);
        const double dsim = similarity_dot_grad(config.similarity, dot);
        result.wrt_embeddings[i] += coeff * dsim * batch.embeddings[j];
        result.wrt_embeddings[j] += coeff * dsim * anchor;
      } else {
        // Queue entries are detached: only the anchor side accumulates.
        const auto& entry = (*entries)[static_cast<std::size_t>(
            w.candidates.queue_refs[k - n_batch])];
        const double dot = anchor.dot(entry.embedding);
        const double dsim = similarity_dot_grad(config.similarity, dot);
        result.wrt_embeddings[i] += coeff * dsim * entry.embedding;
      }
    }
  }
  return result;
}

}  // namespace supcon
