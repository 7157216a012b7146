#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "supcon/metrics.hpp"
#include "supcon/rng.hpp"

#include "oracles.hpp"

using namespace supcon;

namespace {

ScoreSet make_set(const std::vector<double>& bona,
                  const std::vector<double>& spoof) {
  ScoreSet set;
  int k = 0;
  for (double s : bona) {
    const std::string id = "b" + std::to_string(k++);
    set.scores.emplace_back(id, s);
    set.labels.emplace(id, Label::Bonafide);
  }
  for (double s : spoof) {
    const std::string id = "s" + std::to_string(k++);
    set.scores.emplace_back(id, s);
    set.labels.emplace(id, Label::Spoof);
  }
  return set;
}

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "supcon_metrics_test";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("EER on perfectly separated scores is zero") {
  const EerResult r = eer(make_set({1.0, 1.0}, {0.0, 0.0}));
  CHECK(r.eer_percent == 0.0);
}

TEST_CASE("EER worked example") {
  const EerResult r = eer(make_set({0.9, 0.8, 0.4}, {0.6, 0.2, 0.1}));
  CHECK(r.eer_percent == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("EER is invariant under strictly increasing transforms") {
  Rng rng(31);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> bona, spoof;
    const int nb = 1 + static_cast<int>(rng.uniform_index(6));
    const int ns = 1 + static_cast<int>(rng.uniform_index(6));
    for (int i = 0; i < nb; ++i) bona.push_back(rng.uniform(-2.0, 2.0));
    for (int i = 0; i < ns; ++i) spoof.push_back(rng.uniform(-2.0, 2.0));
    const double base = eer(make_set(bona, spoof)).eer_percent;

    auto transform = [](double x) { return std::tanh(x) * 3.0 + x / 7.0; };
    std::vector<double> bona_t, spoof_t;
    for (double s : bona) bona_t.push_back(transform(s));
    for (double s : spoof) spoof_t.push_back(transform(s));
    CHECK(eer(make_set(bona_t, spoof_t)).eer_percent ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("EER is invariant under duplicating the whole score set") {
  const std::vector<double> bona{0.9, 0.3, 0.5};
  const std::vector<double> spoof{0.4, 0.45, 0.2};
  std::vector<double> bona2 = bona, spoof2 = spoof;
  bona2.insert(bona2.end(), bona.begin(), bona.end());
  spoof2.insert(spoof2.end(), spoof.begin(), spoof.end());
  CHECK(eer(make_set(bona, spoof)).eer_percent ==
        doctest::Approx(eer(make_set(bona2, spoof2)).eer_percent).epsilon(1e-12));
}

TEST_CASE("EER matches the exhaustive threshold oracle") {
  Rng rng(37);
  for (int k = 0; k < 300; ++k) {
    std::vector<double> bona, spoof;
    const int nb = 1 + static_cast<int>(rng.uniform_index(6));
    const int ns = 1 + static_cast<int>(rng.uniform_index(6));
    for (int i = 0; i < nb; ++i) {
      bona.push_back(rng.uniform_index(8) * 0.25);  // ties on purpose
    }
    for (int i = 0; i < ns; ++i) {
      spoof.push_back(rng.uniform_index(8) * 0.25);
    }
    const double got = eer(make_set(bona, spoof)).eer_percent;
    const double want = oracle::eer(bona, spoof).eer_percent;
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("EER rejects single-class input") {
  ScoreSet set;
  set.scores.emplace_back("a", 1.0);
  set.labels.emplace("a", Label::Bonafide);
  set.scores.emplace_back("b", 0.5);
  set.labels.emplace("b", Label::Bonafide);
  CHECK_THROWS_AS(eer(set), std::domain_error);
}

TEST_CASE("ScoreSet validation") {
  ScoreSet set;
  set.scores.emplace_back("a", 1.0);
  CHECK_THROWS_WITH_AS(set.validate(), doctest::Contains("unknown id 'a'"),
                       std::invalid_argument);
  set.labels.emplace("a", Label::Bonafide);
  CHECK_NOTHROW(set.validate());
  set.scores.emplace_back("a", 0.5);
  CHECK_THROWS_WITH_AS(set.validate(), doctest::Contains("duplicate"),
                       std::invalid_argument);
}

TEST_CASE("pooled EER") {
  CHECK(pooled_eer({0.25, 8.70, 6.16, 6.11}) ==
        doctest::Approx(5.305).epsilon(1e-12));
  CHECK(pooled_eer({0.35, 9.99, 6.58, 6.18}) ==
        doctest::Approx(5.775).epsilon(1e-12));
  CHECK(pooled_eer({3.5, 3.5, 3.5, 3.5}) == 3.5);
  CHECK_THROWS_AS(pooled_eer({1.0, 2.0, 3.0}), std::invalid_argument);
  CHECK_THROWS_AS(pooled_eer({1.0, 2.0, 3.0, 4.0, 5.0}), std::invalid_argument);
}

TEST_CASE("score file round trip and tokenization") {
  const auto dir = temp_dir();
  const auto score_path = dir / "scores.txt";
  const auto label_path = dir / "labels.txt";

  ScoreSet set = make_set({0.75, -1.25}, {0.5});
  write_scores(set, score_path);
  write_labels(set, label_path);
  const ScoreSet loaded = read_scores(score_path, label_path);
  REQUIRE(loaded.scores.size() == set.scores.size());
  for (std::size_t i = 0; i < set.scores.size(); ++i) {
    CHECK(loaded.scores[i].first == set.scores[i].first);
    CHECK(loaded.scores[i].second == set.scores[i].second);
  }

  // Whitespace-variant lines parse identically.
  {
    std::ofstream out(score_path);
    out << "u1 0.5\n";
    out << "u2      1.5\n";
    out << "u3\t-0.25\n";
    std::ofstream lout(label_path);
    lout << "u1 bonafide\nu2 spoof\nu3 bonafide\n";
  }
  const ScoreSet ws = read_scores(score_path, label_path);
  CHECK(ws.scores.size() == 3);
  CHECK(ws.scores[1].second == 1.5);
  CHECK(ws.scores[2].second == -0.25);
}

TEST_CASE("score file error paths") {
  const auto dir = temp_dir();
  const auto score_path = dir / "bad_scores.txt";
  const auto label_path = dir / "bad_labels.txt";
  {
    std::ofstream out(score_path);
    out << "u1 0.5\nu_unknown 0.7\n";
    std::ofstream lout(label_path);
    lout << "u1 bonafide\n";
  }
  CHECK_THROWS_WITH_AS(read_scores(score_path, label_path),
                       doctest::Contains("u_unknown"), std::runtime_error);

  {
    std::ofstream out(score_path);
    out << "u1 0.5\nu1 0.7\n";
    std::ofstream lout(label_path);
    lout << "u1 bonafide\n";
  }
  CHECK_THROWS_WITH_AS(read_scores(score_path, label_path),
                       doctest::Contains("duplicate"), std::runtime_error);

  {
    std::ofstream out(score_path);
    out << "u1 not_a_number\n";
    std::ofstream lout(label_path);
    lout << "u1 bonafide\n";
  }
  CHECK_THROWS_AS(read_scores(score_path, label_path), std::runtime_error);

  {
    std::ofstream out(score_path);
    out << "u1 0.5 extra\n";
    std::ofstream lout(label_path);
    lout << "u1 bonafide\n";
  }
  CHECK_THROWS_WITH_AS(read_scores(score_path, label_path),
                       doctest::Contains("trailing"), std::runtime_error);
}
