/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "supcon/memory_queue.hpp"

#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace supcon {

void QueueSchedule::validate() const {
  if (start_epoch < 0) {
    throw std::invalid_argument("queue start_epoch must be non-negative");
  }
}

bool MemoryQueue::enqueue(const LabeledBatch& batch) {
  if (!enabled_) {
    ++dropped_enqueues_;
    return false;
  }
  if (batch.embeddings.size() != batch.labels.size()) {
    throw std::invalid_argument("enqueue: embeddings/labels length mismatch");
  }
  for (std::size_t i = 0; i < batch.embeddings.size(); ++i) {
    entries_.push_back(QueueEntry{batch.embeddings[i], batch.labels[i]});
    if (batch.labels[i] == Label::Bonafide) {
      ++n_bonafide_;
    } else {
      ++n_spoof_;
    }
  }
  while (entries_.size() > capacity_) {
    if (entries_.front().label == Label::Bonafide) {
      --n_bonafide_;
    } else {
      --n_spoof_;
    }
    entries_.pop_front();
  }
  return true;
}

std::vector<Vec> MemoryQueue::negatives_for(Label anchor_label) const {
  std::vector<Vec> out;
  out.reserve(count_with_label(opposite(anchor_label)));
  for (const QueueEntry& e : entries_) {
    if (e.label != anchor_label) out.push_back(e.embedding);
  }
  return out;
}

void MemoryQueue::maybe_enable(const QueueSchedule& schedule,
                               int completed_epochs) {
  if (enabled_) return;
  if (schedule.capacity == 0) return;
  if (completed_epochs >= schedule.start_epoch) {
    capacity_ = schedule.capacity;
    enabled_ = true;
  }
}

void MemoryQueue::dump_jsonl(std::ostream& out) const {
  std::size_t idx = 0;
  for (const QueueEntry& e : entries_) {
    nlohmann::json j;
    j["id"] = "queue_" + std::to_string(idx++);
    j["label"] = label_to_string(e.label);
    j["vector"] = std::vector<double>(e.embedding.begin(), e.embedding.end());
    out << j.dump() << '\n';
  }
}

}  // namespace supcon
