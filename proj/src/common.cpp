/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "supcon/common.hpp"

#include <cmath>
#include <cstdlib>

namespace supcon {

void LabeledBatch::validate(double norm_tol) const {
  if (embeddings.size() != labels.size()) {
    throw std::invalid_argument("batch embeddings/labels length mismatch");
  }
  if (embeddings.size() < 2) {
    throw std::invalid_argument("batch requires at least 2 samples");
  }
  const Eigen::Index dim = embeddings.front().size();
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const Vec& z = embeddings[i];
    if (z.size() != dim) {
      throw std::invalid_argument("batch embedding dimension mismatch at index " +
                                  std::to_string(i));
    }
    if (!z.allFinite()) {
      throw std::invalid_argument("non-finite embedding at index " +
                                  std::to_string(i));
    }
    if (std::abs(z.norm() - 1.0) > norm_tol) {
      throw std::invalid_argument("embedding at index " + std::to_string(i) +
                                  " is not unit norm");
    }
  }
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

int thread_budget() {
  static const int budget = [] {
    const char* env = std::getenv("SUPCON_LAB_THREADS");
    if (env == nullptr) return 1;
    const long v = std::strtol(env, nullptr, 10);
    return v > 1 ? static_cast<int>(v) : 1;
  }();
  return budget;
}

}  // namespace supcon
