/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#ifndef SUPCON_GEOMETRY_HPP
#define SUPCON_GEOMETRY_HPP

#include <string_view>

#include "supcon/common.hpp"

namespace supcon {

enum class SimilarityKind { Cosine, Geodesic };

const char* to_string(SimilarityKind kind);
SimilarityKind similarity_from_string(std::string_view s);

// Dot-product clamp for the geodesic backward path; bounds the
// 1/sqrt(1 - d^2) factor near d = +-1.
inline constexpr double kGeodesicGradClamp = 1e-7;

// Scales v to unit norm. Throws std::domain_error on zero or non-finite
// input.
Vec l2_normalize(const Vec& v);

// Dot product of unit vectors, clipped to [-1, 1] against rounding drift.
double sim_cosine(const Vec& a, const Vec& b);

// Hyperspherical angle theta = arccos(clip(a.b, -1, 1)) rescaled linearly
// onto [-1, 1]: identical vectors map to +1, antipodal to -1.
double sim_geodesic(const Vec& a, const Vec& b);

double similarity(SimilarityKind kind, const Vec& a, const Vec& b);

// Similarity value as a function of the (clipped) dot product.
double similarity_from_dot(SimilarityKind kind, double dot);

// d(sim)/d(dot). Cosine: 1. Geodesic: (2/pi)/sqrt(1 - d^2) with |d| clamped
// to 1 - kGeodesicGradClamp.
double similarity_dot_grad(SimilarityKind kind, double dot);

struct SimGrad {
  Vec wrt_a;
  Vec wrt_b;
};

// Exact partial derivatives of similarity(kind, a, b) with respect to each
// input, treating the inputs as free vectors.
SimGrad sim_gradient(SimilarityKind kind, const Vec& a, const Vec& b);

}  // namespace supcon

#endif  // SUPCON_GEOMETRY_HPP
