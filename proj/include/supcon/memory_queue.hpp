/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#ifndef SUPCON_MEMORY_QUEUE_HPP
#define SUPCON_MEMORY_QUEUE_HPP

#include <cstddef>
#include <deque>
#include <iosfwd>

#include "supcon/common.hpp"

namespace supcon {

struct QueueSchedule {
  int start_epoch = 6;       // batch-only epochs before activation
  std::size_t capacity = 0;  // 0 keeps the queue permanently disabled

  void validate() const;
};

struct QueueEntry {
  Vec embedding;
  Label label;
};

// Bounded FIFO of detached embeddings from past minibatches. Entries carry
// no gradient information; they are plain value copies. Single-writer,
// owned by the training loop.
class MemoryQueue {
 public:
  // Default-constructed queues start disabled with no capacity; the
  // schedule turns them on via maybe_enable. The capacity constructor
  // yields an immediately active queue (capacity 0 stays disabled).
  MemoryQueue() = default;
  explicit MemoryQueue(std::size_t capacity)
      : capacity_(capacity), enabled_(capacity > 0) {}

  // Appends all batch embeddings in batch order, evicting oldest entries
  // beyond capacity. Returns false (and counts a dropped call) while the
  // queue is disabled.
  bool enqueue(const LabeledBatch& batch);

  // Opposite-label entries, oldest first.
  std::vector<Vec> negatives_for(Label anchor_label) const;

  std::size_t count_with_label(Label l) const {
    return l == Label::Bonafide ? n_bonafide_ : n_spoof_;
  }

  // Enables once completed_epochs >= start_epoch and capacity > 0.
  // Idempotent; never disables.
  void maybe_enable(const QueueSchedule& schedule, int completed_epochs);

  bool enabled() const { return enabled_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t dropped_enqueues() const { return dropped_enqueues_; }
  const std::deque<QueueEntry>& entries() const { return entries_; }

  // One embedding record per line, oldest first (same JSONL schema as the
  // data module's embedding files).
  void dump_jsonl(std::ostream& out) const;

 private:
  std::deque<QueueEntry> entries_;
  std::size_t capacity_ = 0;
  bool enabled_ = false;
  std::size_t n_bonafide_ = 0;
  std::size_t n_spoof_ = 0;
  std::size_t dropped_enqueues_ = 0;
};

}  // namespace supcon

#endif  // SUPCON_MEMORY_QUEUE_HPP
