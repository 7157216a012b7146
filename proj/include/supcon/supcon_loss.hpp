/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#ifndef SUPCON_SUPCON_LOSS_HPP
#define SUPCON_SUPCON_LOSS_HPP

#include <vector>

#include "supcon/geometry.hpp"
#include "supcon/memory_queue.hpp"

namespace supcon {

struct LossConfig {
  double temperature = 0.3;
  SimilarityKind similarity = SimilarityKind::Cosine;

  void validate() const;  // temperature > 0
};

// Denominator candidates for one anchor: all non-self batch indices plus the
// opposite-label queue entries. Positives always come from the batch.
struct CandidateSet {
  std::vector<int> batch_indices;
  std::vector<int> queue_refs;  // indices into queue entries, oldest first
};

CandidateSet build_candidate_set(int anchor_index, const LabeledBatch& batch,
                                 const MemoryQueue* queue = nullptr);

struct SupconValue {
  double sum = 0.0;   // total over contributing anchors
  double mean = 0.0;  // sum / contributing; what optimization uses
  std::vector<double> per_anchor;  // 0 for skipped anchors
  int contributing = 0;            // anchors with at least one positive
  // True when the batch carried no contrastive signal: no anchor had a
  // positive, or a single-label batch saw no opposite-label queue entry.
  bool degenerate = false;
};

// Supervised contrastive loss over the batch, candidate sets optionally
// extended with queue negatives. Anchors without positives contribute zero
// and are excluded from the anchor count.
SupconValue supcon_loss(const LabeledBatch& batch, const LossConfig& config,
                        const MemoryQueue* queue = nullptr);

struct SupconGradient {
  SupconValue value;
  // d(sum)/d(embedding_i) for every batch embedding; queue entries are
  // constants and have no slot here.
  std::vector<Vec> wrt_embeddings;
};

struct NonFiniteLossError : std::runtime_error {
  explicit NonFiniteLossError(int anchor)
      : std::runtime_error("non-finite loss term at anchor " +
                           std::to_string(anchor)),
        anchor_index(anchor) {}
  int anchor_index;
};

SupconGradient supcon_loss_grad(const LabeledBatch& batch,
                                const LossConfig& config,
                                const MemoryQueue* queue = nullptr);

}  // namespace supcon

#endif  // SUPCON_SUPCON_LOSS_HPP
