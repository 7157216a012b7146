/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "supcon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace supcon {

void ScoreSet::validate() const {
  std::set<std::string> seen;
  for (const auto& [id, score] : scores) {
    if (!seen.insert(id).second) {
      throw std::invalid_argument("duplicate score for id '" + id + "'");
    }
    if (!labels.contains(id)) {
      throw std::invalid_argument("score for unknown id '" + id + "'");
    }
    if (!std::isfinite(score)) {
      throw std::invalid_argument("non-finite score for id '" + id + "'");
    }
  }
}

EerResult eer(const ScoreSet& set) {
  set.validate();
  std::vector<double> bona, spoof;
  for (const auto& [id, score] : set.scores) {
    (set.labels.at(id) == Label::Bonafide ? bona : spoof).push_back(score);
  }
  if (bona.empty() || spoof.empty()) {
    throw std::domain_error("EER needs at least one score per class");
  }
  std::sort(bona.begin(), bona.end());
  std::sort(spoof.begin(), spoof.end());

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> thresholds;
  thresholds.reserve(bona.size() + spoof.size() + 2);
  thresholds.push_back(-inf);
  std::merge(bona.begin(), bona.end(), spoof.begin(), spoof.end(),
             std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  thresholds.push_back(inf);

  const double n_bona = static_cast<double>(bona.size());
  const double n_spoof = static_cast<double>(spoof.size());
  double best_gap = inf;
  double best_far = 0.0, best_frr = 0.0, best_threshold = 0.0;
  for (double t : thresholds) {
    // FAR: spoof accepted (score >= t). FRR: bona-fide rejected (score < t).
    const auto spoof_below =
        std::lower_bound(spoof.begin(), spoof.end(), t) - spoof.begin();
    const auto bona_below =
        std::lower_bound(bona.begin(), bona.end(), t) - bona.begin();
    const double far = (n_spoof - static_cast<double>(spoof_below)) / n_spoof;
    const double frr = static_cast<double>(bona_below) / n_bona;
    const double gap = std::abs(far - frr);
    if (gap < best_gap) {  // strict: lowest threshold wins ties
      best_gap = gap;
      best_far = far;
      best_frr = frr;
      best_threshold = t;
    }
  }
  return EerResult{(best_far + best_frr) / 2.0 * 100.0, best_threshold};
}

double pooled_eer(const std::vector<double>& eers) {
  if (eers.size() != 4) {
    throw std::invalid_argument("pooled_eer expects exactly 4 per-benchmark EERs, got " +
                                std::to_string(eers.size()));
  }
  return (eers[0] + eers[1] + eers[2] + eers[3]) / 4.0;
}

namespace {

// "token token" lines; any run of whitespace separates the two fields.
std::vector<std::pair<std::string, std::string>> read_two_column(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::string a, b, extra;
    if (!(ss >> a >> b)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected two columns");
    }
    if (ss >> extra) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": trailing tokens");
    }
    rows.emplace_back(std::move(a), std::move(b));
  }
  return rows;
}

}  // namespace

ScoreSet read_scores(const std::filesystem::path& score_path,
                     const std::filesystem::path& label_path) {
  ScoreSet set;
  for (auto& [id, text] : read_two_column(label_path)) {
    if (set.labels.contains(id)) {
      throw std::runtime_error("duplicate label for id '" + id + "' in " +
                               label_path.string());
    }
    set.labels.emplace(id, label_from_string(text));
  }
  std::set<std::string> seen;
  std::vector<std::string> unmatched;
  for (auto& [id, text] : read_two_column(score_path)) {
    if (!seen.insert(id).second) {
      throw std::runtime_error("duplicate score for id '" + id + "' in " +
                               score_path.string());
    }
    std::size_t consumed = 0;
    double value = 0.0;
    try {
      value = std::stod(text, &consumed);
    } catch (const std::exception&) {
      throw std::runtime_error("bad score value '" + text + "' for id '" + id +
                               "'");
    }
    if (consumed != text.size() || !std::isfinite(value)) {
      throw std::runtime_error("bad score value '" + text + "' for id '" + id +
                               "'");
    }
    if (!set.labels.contains(id)) unmatched.push_back(id);
    set.scores.emplace_back(id, value);
  }
  if (!unmatched.empty()) {
    std::string msg = "scores without labels:";
    for (const std::string& id : unmatched) msg += " " + id;
    throw std::runtime_error(msg);
  }
  return set;
}

void write_scores(const ScoreSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.precision(17);
  for (const auto& [id, score] : set.scores) {
    out << id << ' ' << score << '\n';
  }
}

void write_labels(const ScoreSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (const auto& [id, score] : set.scores) {
    out << id << ' ' << label_to_string(set.labels.at(id)) << '\n';
  }
}

}  // namespace supcon
