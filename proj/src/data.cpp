/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "supcon/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "supcon/geometry.hpp"

namespace supcon {

namespace {

Vec axis(int dim, int k) {
  Vec v = Vec::Zero(dim);
  v(k) = 1.0;
  return v;
}

Vec gaussian_vec(int dim, Rng& rng) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.gaussian();
  return v;
}

}  // namespace

void SyntheticSpec::finalize() {
  if (frame_dim < 1 || frames < 1) {
    throw std::invalid_argument("synthetic spec: frame_dim and frames must be positive");
  }
  if (n_train < 2 || n_dev < 2 || n_eval < 2) {
    throw std::invalid_argument("synthetic spec: split sizes must be at least 2");
  }
  if (n_ood_splits < 0) {
    throw std::invalid_argument("synthetic spec: n_ood_splits must be non-negative");
  }
  if (balance <= 0.0 || balance >= 1.0) {
    throw std::invalid_argument("synthetic spec: balance must lie in (0, 1)");
  }
  if (frame_noise_sigma < 0.0 || ood_noise_scale <= 0.0) {
    throw std::invalid_argument("synthetic spec: bad noise settings");
  }

  const bool needs_defaults =
      bona_center.size() == 0 || spoof_subclusters.empty() ||
      (ood_subclusters.empty() && n_ood_splits > 0);
  if (needs_defaults && frame_dim < 6) {
    throw std::invalid_argument(
        "synthetic spec: default cluster layout needs frame_dim >= 6");
  }

  if (bona_center.size() == 0) bona_center = axis(frame_dim, 0);
  if (spoof_subclusters.empty()) {
    // In-domain spoof lives orthogonal to the bona-fide direction.
    spoof_subclusters = {{axis(frame_dim, 1), 50.0},
                         {axis(frame_dim, 2), 50.0},
                         {axis(frame_dim, 3), 50.0}};
  }
  if (ood_subclusters.empty() && n_ood_splits > 0) {
    // Held-out spoof tilted toward the bona-fide direction (35 degrees), so
    // OOD separation is genuinely harder than in-domain.
    const double angle = 35.0 * std::numbers::pi / 180.0;
    const double c = std::cos(angle), s = std::sin(angle);
    ood_subclusters = {{c * axis(frame_dim, 0) + s * axis(frame_dim, 4), 30.0},
                       {c * axis(frame_dim, 0) + s * axis(frame_dim, 5), 30.0}};
  }

  bona_center = l2_normalize(bona_center);
  if (bona_center.size() != frame_dim) {
    throw std::invalid_argument("synthetic spec: bona_center dim mismatch");
  }
  auto check = [&](std::vector<Subcluster>& subs, const char* what) {
    for (Subcluster& sc : subs) {
      if (sc.direction.size() != frame_dim) {
        throw std::invalid_argument(std::string("synthetic spec: ") + what +
                                    " direction dim mismatch");
      }
      if (!(sc.concentration > 0.0)) {
        throw std::invalid_argument(std::string("synthetic spec: ") + what +
                                    " concentration must be positive");
      }
      sc.direction = l2_normalize(sc.direction);
    }
  };
  check(spoof_subclusters, "spoof subcluster");
  check(ood_subclusters, "ood subcluster");
}

namespace {

Dataset make_split(const SyntheticSpec& spec, const std::string& name, int n,
                   const std::vector<Subcluster>& spoof_pool,
                   double noise_scale) {
  Rng rng(spec.seed, "split:" + name);
  const int n_bona = static_cast<int>(std::llround(n * spec.balance));
  const double sigma = spec.frame_noise_sigma * noise_scale;

  Dataset ds;
  ds.name = name;
  ds.utterances.reserve(static_cast<std::size_t>(n));
  char id_buf[64];
  for (int i = 0; i < n; ++i) {
    Utterance utt;
    std::snprintf(id_buf, sizeof(id_buf), "%s_%06d", name.c_str(), i);
    utt.id = id_buf;
    utt.label = i < n_bona ? Label::Bonafide : Label::Spoof;

    Vec direction;
    if (utt.label == Label::Bonafide) {
      direction = spec.bona_center;
    } else {
      const Subcluster& sc = spoof_pool[rng.uniform_index(spoof_pool.size())];
      const double spread = 1.0 / std::sqrt(sc.concentration);
      direction = l2_normalize(sc.direction + spread * gaussian_vec(spec.frame_dim, rng));
    }

    utt.frames.resize(spec.frames, spec.frame_dim);
    for (int t = 0; t < spec.frames; ++t) {
      for (int f = 0; f < spec.frame_dim; ++f) {
        utt.frames(t, f) = direction(f) + sigma * rng.gaussian();
      }
    }
    ds.utterances.push_back(std::move(utt));
  }
  return ds;
}

}  // namespace

DataBundle generate(const SyntheticSpec& raw_spec) {
  SyntheticSpec spec = raw_spec;
  spec.finalize();

  DataBundle bundle;
  bundle.train = make_split(spec, "train", spec.n_train, spec.spoof_subclusters, 1.0);
  bundle.dev = make_split(spec, "dev", spec.n_dev, spec.spoof_subclusters, 1.0);
  bundle.evals.push_back(
      make_split(spec, "eval_id", spec.n_eval, spec.spoof_subclusters, 1.0));
  for (int k = 1; k <= spec.n_ood_splits; ++k) {
    // Later OOD splits shift further from the training condition.
    const double scale =
        1.0 + (spec.ood_noise_scale - 1.0) * static_cast<double>(k) /
                  static_cast<double>(spec.n_ood_splits);
    bundle.evals.push_back(make_split(spec, "eval_ood" + std::to_string(k),
                                      spec.n_eval, spec.ood_subclusters, scale));
  }
  return bundle;
}

Mat chunk_or_pad(const Mat& frames, int target_frames, ChunkMode mode,
                 Rng* rng) {
  if (target_frames < 1) {
    throw std::invalid_argument("chunk_or_pad: target_frames must be positive");
  }
  const Eigen::Index t = frames.rows();
  if (t == target_frames) return frames;
  if (t > target_frames) {
    if (mode == ChunkMode::Eval) {
      return frames.topRows(target_frames);
    }
    if (rng == nullptr) {
      throw std::invalid_argument("chunk_or_pad: train mode needs an rng");
    }
    const std::size_t start =
        rng->uniform_index(static_cast<std::size_t>(t - target_frames) + 1);
    return frames.middleRows(static_cast<Eigen::Index>(start), target_frames);
  }
  // Shorter: eval passes through, train zero-pads to the target.
  if (mode == ChunkMode::Eval) return frames;
  Mat out = Mat::Zero(target_frames, frames.cols());
  out.topRows(t) = frames;
  return out;
}

// --- utterance files --------------------------------------------------------

void write_utterances_jsonl(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  for (const Utterance& utt : ds.utterances) {
    nlohmann::json j;
    j["id"] = utt.id;
    j["label"] = label_to_string(utt.label);
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < utt.frames.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < utt.frames.cols(); ++c) {
        row.push_back(utt.frames(r, c));
      }
      rows.push_back(std::move(row));
    }
    j["frames"] = std::move(rows);
    out << j.dump() << '\n';
  }
}

Dataset read_utterances_jsonl(const std::filesystem::path& path, std::string name) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open: " + path.string());
  }
  Dataset ds;
  ds.name = std::move(name);
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index frame_dim = -1;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                             ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("malformed JSON: ") + e.what());
    }
    Utterance utt;
    try {
      utt.id = j.at("id").get<std::string>();
      utt.label = label_from_string(j.at("label").get<std::string>());
      const nlohmann::json& rows = j.at("frames");
      if (!rows.is_array() || rows.empty()) fail("frames must be a non-empty array");
      const Eigen::Index t = static_cast<Eigen::Index>(rows.size());
      const Eigen::Index f = static_cast<Eigen::Index>(rows.at(0).size());
      if (frame_dim < 0) frame_dim = f;
      if (f != frame_dim) fail("frame dimension mismatch");
      utt.frames.resize(t, f);
      for (Eigen::Index r = 0; r < t; ++r) {
        const nlohmann::json& row = rows.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != f) {
          fail("ragged frame row");
        }
        for (Eigen::Index c = 0; c < f; ++c) {
          utt.frames(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
      }
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("bad record: ") + e.what());
    }
    if (!utt.frames.allFinite()) fail("non-finite frame values");
    ds.utterances.push_back(std::move(utt));
  }
  return ds;
}

void write_manifest(const DataBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  auto add = [&](const Dataset& ds) {
    const std::string file = ds.name + ".jsonl";
    write_utterances_jsonl(ds, dir / file);
    manifest["splits"][ds.name]["path"] = file;
    manifest["splits"][ds.name]["count"] = ds.utterances.size();
  };
  add(bundle.train);
  add(bundle.dev);
  nlohmann::json eval_order = nlohmann::json::array();
  for (const Dataset& ds : bundle.evals) {
    add(ds);
    eval_order.push_back(ds.name);
  }
  manifest["eval_splits"] = std::move(eval_order);
  std::ofstream out(dir / "manifest.json");
  if (!out) {
    throw std::runtime_error("cannot write manifest under " + dir.string());
  }
  out << manifest.dump(2) << '\n';
}

DataBundle read_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw std::runtime_error("cannot open manifest: " + manifest_path.string());
  }
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad manifest " + manifest_path.string() + ": " +
                             e.what());
  }
  const auto dir = manifest_path.parent_path();
  auto split_path = [&](const std::string& name) {
    return dir /
           manifest.at("splits").at(name).at("path").get<std::string>();
  };
  DataBundle bundle;
  bundle.train = read_utterances_jsonl(split_path("train"), "train");
  bundle.dev = read_utterances_jsonl(split_path("dev"), "dev");
  for (const auto& name_json : manifest.at("eval_splits")) {
    const std::string name = name_json.get<std::string>();
    bundle.evals.push_back(read_utterances_jsonl(split_path(name), name));
  }
  return bundle;
}

// --- embedding exchange ------------------------------------------------------

std::vector<EmbeddingRecord> load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open: " + path.string());
  }
  std::vector<EmbeddingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index dim = -1;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                             ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("malformed JSON: ") + e.what());
    }
    EmbeddingRecord rec;
    try {
      rec.id = j.at("id").get<std::string>();
      rec.label = label_from_string(j.at("label").get<std::string>());
      const nlohmann::json& values = j.at("vector");
      if (!values.is_array() || values.empty()) fail("vector must be a non-empty array");
      rec.vector.resize(static_cast<Eigen::Index>(values.size()));
      for (std::size_t k = 0; k < values.size(); ++k) {
        rec.vector(static_cast<Eigen::Index>(k)) = values.at(k).get<double>();
      }
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("bad record: ") + e.what());
    }
    if (dim < 0) dim = rec.vector.size();
    if (rec.vector.size() != dim) {
      fail("vector dimension " + std::to_string(rec.vector.size()) +
           " does not match first record's " + std::to_string(dim));
    }
    try {
      rec.vector = l2_normalize(rec.vector);
    } catch (const std::domain_error& e) {
      fail(e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_embeddings_jsonl(const std::vector<EmbeddingRecord>& records,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  for (const EmbeddingRecord& rec : records) {
    nlohmann::json j;
    j["id"] = rec.id;
    j["label"] = label_to_string(rec.label);
    j["vector"] = std::vector<double>(rec.vector.begin(), rec.vector.end());
    out << j.dump() << '\n';
  }
}

}  // namespace supcon
