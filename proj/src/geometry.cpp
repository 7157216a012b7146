/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "supcon/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace supcon {

namespace {
constexpr double kPi = std::numbers::pi;
}

const char* to_string(SimilarityKind kind) {
  return kind == SimilarityKind::Cosine ? "cosine" : "geodesic";
}

SimilarityKind similarity_from_string(std::string_view s) {
  if (s == "cosine") return SimilarityKind::Cosine;
  if (s == "geodesic") return SimilarityKind::Geodesic;
  throw std::invalid_argument("unknown similarity kind: '" + std::string(s) +
                              "'");
}

Vec l2_normalize(const Vec& v) {
  if (v.size() == 0 || !v.allFinite()) {
    throw std::domain_error("l2_normalize: input must be finite and non-empty");
  }
  const double norm = v.norm();
  if (norm == 0.0) {
    throw std::domain_error("l2_normalize: zero vector");
  }
  return v / norm;
}

double sim_cosine(const Vec& a, const Vec& b) {
  return similarity_from_dot(SimilarityKind::Cosine, a.dot(b));
}

double sim_geodesic(const Vec& a, const Vec& b) {
  return similarity_from_dot(SimilarityKind::Geodesic, a.dot(b));
}

double similarity(SimilarityKind kind, const Vec& a, const Vec& b) {
  return similarity_from_dot(kind, a.dot(b));
}

double similarity_from_dot(SimilarityKind kind, double dot) {
  const double clipped = std::clamp(dot, -1.0, 1.0);
  if (kind == SimilarityKind::Cosine) return clipped;
  const double theta = std::acos(clipped);
  return 1.0 - 2.0 * (theta / kPi);
}

double similarity_dot_grad(SimilarityKind kind, double dot) {
  if (kind == SimilarityKind::Cosine) return 1.0;
  const double limit = 1.0 - kGeodesicGradClamp;
  const double d = std::clamp(dot, -limit, limit);
  return (2.0 / kPi) / std::sqrt(1.0 - d * d);
}

SimGrad sim_gradient(SimilarityKind kind, const Vec& a, const Vec& b) {
  const double coeff = similarity_dot_grad(kind, a.dot(b));
  return SimGrad{coeff * b, coeff * a};
}

}  // namespace supcon
