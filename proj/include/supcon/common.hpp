/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#ifndef SUPCON_COMMON_HPP
#define SUPCON_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace supcon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Label { Bonafide, Spoof };

inline const char* label_to_string(Label l) {
  return l == Label::Bonafide ? "bonafide" : "spoof";
}

inline Label label_from_string(std::string_view s) {
  if (s == "bonafide") return Label::Bonafide;
  if (s == "spoof") return Label::Spoof;
  throw std::invalid_argument("unknown label: '" + std::string(s) + "'");
}

inline Label opposite(Label l) {
  return l == Label::Bonafide ? Label::Spoof : Label::Bonafide;
}

/// Minibatch of unit-norm embeddings with binary labels.
struct LabeledBatch {
  std::vector<Vec> embeddings;
  std::vector<Label> labels;

  int size() const { return static_cast<int>(embeddings.size()); }
  // Throws std::invalid_argument on size mismatch, B < 2, or non-unit rows.
  // The tolerance leaves room for finite-difference probes of the loss.
  void validate(double norm_tol = 1e-5) const;
};

std::uint64_t fnv1a64(std::string_view data);

// Worker count for internal parallelism; SUPCON_LAB_THREADS caps it
// (unset or <=1 means sequential).
int thread_budget();

// Runs fn(i) for i in [0, n). Each index is processed exactly once; callers
// must only write to per-index slots so results do not depend on the
// thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const int budget = thread_budget();
  if (budget <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(budget, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = n * w / workers;
    const std::size_t hi = n * (w + 1) / workers;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace supcon

#endif  // SUPCON_COMMON_HPP
