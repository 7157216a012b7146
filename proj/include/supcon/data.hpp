/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#ifndef SUPCON_DATA_HPP
#define SUPCON_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "supcon/model.hpp"
#include "supcon/rng.hpp"

namespace supcon {

struct Subcluster {
  Vec direction;  // unit
  double concentration = 50.0;
};

// Synthetic bona-fide/spoof generator. Bona-fide utterances sit on a single
// direction; spoof utterances draw a per-utterance direction around one of
// several subclusters (spread 1/sqrt(concentration)), so the spoof class is
// heterogeneous. OOD eval splits use held-out subclusters and scaled frame
// noise.
struct SyntheticSpec {
  int frame_dim = 32;
  int frames = 20;
  int n_train = 2000;
  int n_dev = 500;
  int n_eval = 500;  // per eval split
  int n_ood_splits = 3;
  double balance = 0.5;  // bona-fide fraction
  double frame_noise_sigma = 0.3;
  double ood_noise_scale = 1.6;
  Vec bona_center;                         // empty -> default axis layout
  std::vector<Subcluster> spoof_subclusters;  // in-domain; empty -> 3 defaults
  std::vector<Subcluster> ood_subclusters;    // eval-only; empty -> 2 defaults
  std::uint64_t seed = 1337;

  // Fills default directions and checks invariants; throws
  // std::invalid_argument on a bad spec.
  void finalize();
};

struct Dataset {
  std::string name;
  std::vector<Utterance> utterances;
};

struct DataBundle {
  Dataset train;
  Dataset dev;
  std::vector<Dataset> evals;  // eval_id first, then eval_ood1..N
};

DataBundle generate(const SyntheticSpec& spec);

enum class ChunkMode { Train, Eval };

// Train mode: random crop when longer, zero-pad when shorter. Eval mode:
// head truncation only; shorter utterances pass through unchanged and no
// RNG is consumed.
Mat chunk_or_pad(const Mat& frames, int target_frames, ChunkMode mode,
                 Rng* rng);

// --- utterance files ------------------------------------------------------

void write_utterances_jsonl(const Dataset& ds, const std::filesystem::path& path);
Dataset read_utterances_jsonl(const std::filesystem::path& path, std::string name);

void write_manifest(const DataBundle& bundle,
                    const std::filesystem::path& dir);  // files + manifest.json
DataBundle read_manifest(const std::filesystem::path& manifest_path);

// --- embedding exchange ----------------------------------------------------
// One record per line: {"id": str, "label": "bonafide"|"spoof",
// "vector": [float, ...]}.

struct EmbeddingRecord {
  std::string id;
  Label label = Label::Bonafide;
  Vec vector;
};

// Parses and l2-normalizes records; errors carry the 1-based line number.
std::vector<EmbeddingRecord> load_embeddings(const std::filesystem::path& path);
void write_embeddings_jsonl(const std::vector<EmbeddingRecord>& records,
                            const std::filesystem::path& path);

}  // namespace supcon

#endif  // SUPCON_DATA_HPP
