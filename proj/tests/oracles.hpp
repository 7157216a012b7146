// Test-only reference implementations. These evaluate the definitions
// term by term with no shared code or algebraic shortcuts, so they stay
// independent of the library paths they check.
#ifndef SUPCON_TESTS_ORACLES_HPP
#define SUPCON_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "supcon/geometry.hpp"
#include "supcon/memory_queue.hpp"

namespace oracle {

inline long double similarity(supcon::SimilarityKind kind, const supcon::Vec& a,
                              const supcon::Vec& b) {
  long double dot = 0.0L;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a(i)) * static_cast<long double>(b(i));
  }
  dot = std::clamp(dot, -1.0L, 1.0L);
  if (kind == supcon::SimilarityKind::Cosine) return dot;
  const long double theta = acosl(dot);
  const long double pi = 3.14159265358979323846264338327950288L;
  return 1.0L - 2.0L * (theta / pi);
}

struct SupconOracleResult {
  long double sum = 0.0L;
  int contributing = 0;
};

// Literal per-anchor, per-positive evaluation; the denominator is recomputed
// from scratch for every positive.
inline SupconOracleResult supcon_loss(
    const std::vector<supcon::Vec>& embeddings,
    const std::vector<supcon::Label>& labels, supcon::SimilarityKind kind,
    double temperature,
    const std::vector<std::pair<supcon::Vec, supcon::Label>>& queue = {}) {
  SupconOracleResult result;
  const std::size_t b = embeddings.size();
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<std::size_t> positives;
    for (std::size_t p = 0; p < b; ++p) {
      if (p != i && labels[p] == labels[i]) positives.push_back(p);
    }
    if (positives.empty()) continue;

    long double anchor_term = 0.0L;
    for (std::size_t p : positives) {
      long double denom = 0.0L;
      for (std::size_t a = 0; a < b; ++a) {
        if (a == i) continue;
        denom += expl(oracle::similarity(kind, embeddings[i], embeddings[a]) /
                      static_cast<long double>(temperature));
      }
      for (const auto& [q_emb, q_label] : queue) {
        if (q_label == labels[i]) continue;
        denom += expl(oracle::similarity(kind, embeddings[i], q_emb) /
                      static_cast<long double>(temperature));
      }
      const long double numer =
          expl(oracle::similarity(kind, embeddings[i], embeddings[p]) /
               static_cast<long double>(temperature));
      anchor_term += -logl(numer / denom);
    }
    result.sum += anchor_term / static_cast<long double>(positives.size());
    ++result.contributing;
  }
  return result;
}

struct EerOracleResult {
  double eer_percent = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

// Scans all 2n+1 threshold intervals: at every score, between consecutive
// scores, and beyond both ends. FAR = fraction of spoof >= t, FRR =
// fraction of bona < t; first (lowest) threshold minimizing |FAR - FRR|.
inline EerOracleResult eer(const std::vector<double>& bona,
                           const std::vector<double>& spoof) {
  std::vector<double> all;
  all.insert(all.end(), bona.begin(), bona.end());
  all.insert(all.end(), spoof.begin(), spoof.end());
  std::sort(all.begin(), all.end());

  std::vector<double> candidates;
  candidates.push_back(all.front() - 1.0);
  for (std::size_t k = 0; k < all.size(); ++k) {
    candidates.push_back(all[k]);
    if (k + 1 < all.size()) candidates.push_back((all[k] + all[k + 1]) / 2.0);
  }
  candidates.push_back(all.back() + 1.0);

  EerOracleResult best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double t : candidates) {
    std::size_t accepted_spoof = 0;
    for (double s : spoof) {
      if (s >= t) ++accepted_spoof;
    }
    std::size_t rejected_bona = 0;
    for (double s : bona) {
      if (s < t) ++rejected_bona;
    }
    const double far = static_cast<double>(accepted_spoof) /
                       static_cast<double>(spoof.size());
    const double frr = static_cast<double>(rejected_bona) /
                       static_cast<double>(bona.size());
    if (std::abs(far - frr) < best_gap) {
      best_gap = std::abs(far - frr);
      best = EerOracleResult{(far + frr) / 2.0 * 100.0, far, frr};
    }
  }
  return best;
}

// Central finite difference of a scalar function of one perturbable value.
inline double central_diff(const std::function<double(double)>& f, double x0,
                           double h = 1e-6) {
  return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

// Relative error with an absolute floor for near-zero pairs.
inline double rel_err(double a, double b, double floor = 1e-8) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

}  // namespace oracle

#endif  // SUPCON_TESTS_ORACLES_HPP
