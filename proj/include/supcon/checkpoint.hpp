/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#ifndef SUPCON_CHECKPOINT_HPP
#define SUPCON_CHECKPOINT_HPP

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "supcon/model.hpp"

namespace supcon {

// Versioned JSON container holding all parameter tensors, shapes, the
// config hash, the training stage, and (optionally) optimizer state.
// Contains no timestamps, so identical runs produce identical files.
struct Checkpoint {
  int version = 1;
  std::string stage;        // "stage1" | "stage2" | "baseline"
  std::string config_hash;  // hex of the canonical experiment config
  ModelParams params;
  nlohmann::json optimizer;  // null when absent
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Mat& m);
Mat matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vec& v);
Vec vector_from_json(const nlohmann::json& j);

}  // namespace supcon

#endif  // SUPCON_CHECKPOINT_HPP
