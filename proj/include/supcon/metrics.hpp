/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#ifndef SUPCON_METRICS_HPP
#define SUPCON_METRICS_HPP

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "supcon/common.hpp"

namespace supcon {

struct ScoreSet {
  std::vector<std::pair<std::string, double>> scores;  // (utt id, score)
  std::unordered_map<std::string, Label> labels;

  void validate() const;  // every scored id labeled, no duplicates
};

struct EerResult {
  double eer_percent = 0.0;  // (FAR + FRR)/2 * 100 at the chosen threshold
  double threshold = 0.0;
};

// Equal error rate. Candidate thresholds are the sorted unique scores plus
// +-inf sentinels; FAR(t) = fraction of spoof scores >= t, FRR(t) = fraction
// of bona-fide scores < t; the lowest threshold minimizing |FAR - FRR| wins.
// Throws std::domain_error unless both classes are present.
EerResult eer(const ScoreSet& scores);

// Arithmetic mean of exactly four per-benchmark EERs.
double pooled_eer(const std::vector<double>& eers);

// Two-column text files: score lines "utt_id score", label lines
// "utt_id label". Joined on id; unmatched or duplicate ids are errors.
ScoreSet read_scores(const std::filesystem::path& score_path,
                     const std::filesystem::path& label_path);
void write_scores(const ScoreSet& scores, const std::filesystem::path& path);
void write_labels(const ScoreSet& scores, const std::filesystem::path& path);

}  // namespace supcon

#endif  // SUPCON_METRICS_HPP
