#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "supcon/data.hpp"

using namespace supcon;

namespace {

std::filesystem::path temp_dir(const std::string& leaf) {
  const auto dir = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::create_directories(dir);
  return dir;
}

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.frame_dim = 8;
  spec.frames = 6;
  spec.n_train = 40;
  spec.n_dev = 20;
  spec.n_eval = 20;
  spec.n_ood_splits = 2;
  spec.seed = 99;
  return spec;
}

}  // namespace

TEST_CASE("generation is deterministic under spec + seed") {
  const SyntheticSpec spec = small_spec();
  const DataBundle a = generate(spec);
  const DataBundle b = generate(spec);
  REQUIRE(a.train.utterances.size() == b.train.utterances.size());
  for (std::size_t i = 0; i < a.train.utterances.size(); ++i) {
    CHECK(a.train.utterances[i].id == b.train.utterances[i].id);
    CHECK(a.train.utterances[i].label == b.train.utterances[i].label);
    CHECK((a.train.utterances[i].frames - b.train.utterances[i].frames)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  SyntheticSpec other = spec;
  other.seed = 100;
  const DataBundle c = generate(other);
  CHECK((a.train.utterances[0].frames - c.train.utterances[0].frames)
            .cwiseAbs()
            .maxCoeff() != 0.0);
}

TEST_CASE("class balance is exact and splits are disjoint by id") {
  SyntheticSpec spec = small_spec();
  spec.balance = 0.5;
  const DataBundle bundle = generate(spec);

  auto count_bona = [](const Dataset& ds) {
    std::size_t n = 0;
    for (const Utterance& u : ds.utterances) {
      if (u.label == Label::Bonafide) ++n;
    }
    return n;
  };
  CHECK(count_bona(bundle.train) == 20);
  CHECK(count_bona(bundle.dev) == 10);

  std::set<std::string> ids;
  auto insert_all = [&](const Dataset& ds) {
    for (const Utterance& u : ds.utterances) {
      CHECK(ids.insert(u.id).second);
    }
  };
  insert_all(bundle.train);
  insert_all(bundle.dev);
  for (const Dataset& e : bundle.evals) insert_all(e);

  REQUIRE(bundle.evals.size() == 3);  // eval_id + 2 OOD splits
  CHECK(bundle.evals[0].name == "eval_id");
  CHECK(bundle.evals[1].name == "eval_ood1");
}

TEST_CASE("zero noise bona-fide frames equal the cluster direction exactly") {
  SyntheticSpec spec = small_spec();
  spec.frame_noise_sigma = 0.0;
  spec.frames = 1;
  const DataBundle bundle = generate(spec);
  for (const Utterance& u : bundle.train.utterances) {
    if (u.label != Label::Bonafide) continue;
    for (int f = 0; f < spec.frame_dim; ++f) {
      CHECK(u.frames(0, f) == (f == 0 ? 1.0 : 0.0));  // default bona center
    }
  }
  // Spoof utterances also repeat their per-utterance direction exactly.
  SyntheticSpec multi = spec;
  multi.frames = 3;
  for (const Utterance& u : generate(multi).train.utterances) {
    CHECK((u.frames.row(0) - u.frames.row(1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((u.frames.row(0) - u.frames.row(2)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("small-noise cluster means stay near their centers") {
  SyntheticSpec spec = small_spec();
  spec.frame_noise_sigma = 0.02;
  spec.n_train = 200;
  const DataBundle bundle = generate(spec);
  Vec mean = Vec::Zero(spec.frame_dim);
  std::size_t n = 0;
  for (const Utterance& u : bundle.train.utterances) {
    if (u.label != Label::Bonafide) continue;
    mean += u.frames.colwise().mean().transpose();
    ++n;
  }
  mean /= static_cast<double>(n);
  const double cosine = mean.normalized()(0);  // dot with default center e0
  CHECK(std::acos(std::clamp(cosine, -1.0, 1.0)) < 0.05);  // within ~3 degrees
}

TEST_CASE("chunk_or_pad policies") {
  Mat frames(4, 3);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 3; ++c) frames(r, c) = r * 10 + c;
  }

  SUBCASE("identity when already at target") {
    Rng rng(1);
    CHECK((chunk_or_pad(frames, 4, ChunkMode::Train, &rng) - frames).norm() == 0.0);
    CHECK((chunk_or_pad(frames, 4, ChunkMode::Eval, nullptr) - frames).norm() == 0.0);
  }

  SUBCASE("eval truncates from the head and never pads") {
    const Mat cut = chunk_or_pad(frames, 2, ChunkMode::Eval, nullptr);
    CHECK(cut.rows() == 2);
    CHECK(cut(1, 2) == 12.0);
    const Mat through = chunk_or_pad(frames, 9, ChunkMode::Eval, nullptr);
    CHECK(through.rows() == 4);  // shorter utterances pass through
  }

  SUBCASE("train pads with zeros after the original frames") {
    Rng rng(2);
    const Mat padded = chunk_or_pad(frames, 6, ChunkMode::Train, &rng);
    REQUIRE(padded.rows() == 6);
    CHECK((padded.topRows(4) - frames).norm() == 0.0);
    CHECK(padded.bottomRows(2).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("train crops a contiguous window") {
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
      const Mat cropped = chunk_or_pad(frames, 2, ChunkMode::Train, &rng);
      REQUIRE(cropped.rows() == 2);
      const int start = static_cast<int>(cropped(0, 0) / 10.0);
      CHECK(start >= 0);
      CHECK(start <= 2);
      CHECK(cropped(1, 0) == (start + 1) * 10);
    }
  }

  SUBCASE("bad arguments") {
    Rng rng(4);
    CHECK_THROWS_AS(chunk_or_pad(frames, 0, ChunkMode::Eval, nullptr),
                    std::invalid_argument);
    CHECK_THROWS_AS(chunk_or_pad(frames, 2, ChunkMode::Train, nullptr),
                    std::invalid_argument);
  }
}

TEST_CASE("utterance JSONL and manifest round trip") {
  const auto dir = temp_dir("supcon_data_manifest");
  SyntheticSpec spec = small_spec();
  spec.n_train = 10;
  spec.n_dev = 6;
  spec.n_eval = 6;
  const DataBundle bundle = generate(spec);
  write_manifest(bundle, dir);

  const DataBundle loaded = read_manifest(dir / "manifest.json");
  REQUIRE(loaded.train.utterances.size() == bundle.train.utterances.size());
  REQUIRE(loaded.evals.size() == bundle.evals.size());
  for (std::size_t i = 0; i < bundle.train.utterances.size(); ++i) {
    const Utterance& a = bundle.train.utterances[i];
    const Utterance& b = loaded.train.utterances[i];
    CHECK(a.id == b.id);
    CHECK(a.label == b.label);
    CHECK((a.frames - b.frames).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("embedding JSONL loading") {
  const auto dir = temp_dir("supcon_data_embeddings");

  SUBCASE("empty file gives an empty stream") {
    const auto path = dir / "empty.jsonl";
    std::ofstream(path).close();
    CHECK(load_embeddings(path).empty());
  }

  SUBCASE("round trip normalizes and preserves") {
    const auto path = dir / "roundtrip.jsonl";
    std::vector<EmbeddingRecord> records;
    Rng rng(17);
    for (int i = 0; i < 5; ++i) {
      Vec v(4);
      for (int k = 0; k < 4; ++k) v(k) = rng.uniform(-2.0, 2.0);
      records.push_back(EmbeddingRecord{
          "e" + std::to_string(i), i % 2 ? Label::Spoof : Label::Bonafide, v});
    }
    write_embeddings_jsonl(records, path);
    const auto loaded = load_embeddings(path);
    REQUIRE(loaded.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(loaded[i].id == records[i].id);
      CHECK(loaded[i].label == records[i].label);
      CHECK((loaded[i].vector - l2_normalize(records[i].vector)).norm() < 1e-12);
    }
  }

  SUBCASE("dimension mismatch names the line") {
    const auto path = dir / "dim.jsonl";
    {
      std::ofstream out(path);
      out << R"({"id":"a","label":"bonafide","vector":[1,0]})" << "\n";
      out << R"({"id":"b","label":"spoof","vector":[0,1]})" << "\n";
      out << R"({"id":"c","label":"spoof","vector":[0,1,2]})" << "\n";
    }
    CHECK_THROWS_WITH_AS(load_embeddings(path), doctest::Contains(":3"),
                         std::runtime_error);
  }

  SUBCASE("malformed JSON and unknown labels carry line numbers") {
    const auto path = dir / "bad.jsonl";
    {
      std::ofstream out(path);
      out << R"({"id":"a","label":"bonafide","vector":[1,0]})" << "\n";
      out << "not json\n";
    }
    CHECK_THROWS_WITH_AS(load_embeddings(path), doctest::Contains(":2"),
                         std::runtime_error);
    {
      std::ofstream out(path);
      out << R"({"id":"a","label":"genuine","vector":[1,0]})" << "\n";
    }
    CHECK_THROWS_WITH_AS(load_embeddings(path), doctest::Contains("label"),
                         std::runtime_error);
    {
      std::ofstream out(path);
      out << R"({"id":"a","label":"spoof","vector":[0,0]})" << "\n";
    }
    CHECK_THROWS_AS(load_embeddings(path), std::runtime_error);
  }
}

TEST_CASE("spec validation") {
  SyntheticSpec spec = small_spec();
  spec.balance = 0.0;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);

  spec = small_spec();
  spec.frame_dim = 4;  // too small for the default cluster layout
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);

  spec = small_spec();
  spec.spoof_subclusters.push_back({Vec::Zero(8), 50.0});
  CHECK_THROWS_AS(generate(spec), std::domain_error);  // zero direction

  spec = small_spec();
  spec.spoof_subclusters.push_back({Vec::Ones(8), -1.0});
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}
