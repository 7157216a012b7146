/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "supcon/checkpoint.hpp"

#include <fstream>

namespace supcon {

nlohmann::json matrix_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat matrix_from_json(const nlohmann::json& j) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.at(0).size();
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (j.at(r).size() != cols) {
      throw std::runtime_error("ragged matrix in checkpoint");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j.at(r).at(c).get<double>();
    }
  }
  return m;
}

nlohmann::json vector_to_json(const Vec& v) {
  return std::vector<double>(v.begin(), v.end());
}

Vec vector_from_json(const nlohmann::json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  }
  return v;
}

nlohmann::json params_to_json(const ModelParams& p) {
  nlohmann::json j;
  j["dims"] = {{"frame_dim", p.dims.frame_dim},
               {"hidden_dim", p.dims.hidden_dim},
               {"feature_dim", p.dims.feature_dim},
               {"embedding_dim", p.dims.embedding_dim}};
  j["enc_w1"] = matrix_to_json(p.enc_w1);
  j["enc_b1"] = vector_to_json(p.enc_b1);
  j["enc_w2"] = matrix_to_json(p.enc_w2);
  j["enc_b2"] = vector_to_json(p.enc_b2);
  j["proj_w"] = matrix_to_json(p.proj_w);
  j["proj_b"] = vector_to_json(p.proj_b);
  j["cls_w"] = vector_to_json(p.cls_w);
  j["cls_b"] = p.cls_b;
  return j;
}

ModelParams params_from_json(const nlohmann::json& j) {
  ModelParams p;
  const nlohmann::json& d = j.at("dims");
  p.dims.frame_dim = d.at("frame_dim").get<int>();
  p.dims.hidden_dim = d.at("hidden_dim").get<int>();
  p.dims.feature_dim = d.at("feature_dim").get<int>();
  p.dims.embedding_dim = d.at("embedding_dim").get<int>();
  p.dims.validate();
  p.enc_w1 = matrix_from_json(j.at("enc_w1"));
  p.enc_b1 = vector_from_json(j.at("enc_b1"));
  p.enc_w2 = matrix_from_json(j.at("enc_w2"));
  p.enc_b2 = vector_from_json(j.at("enc_b2"));
  p.proj_w = matrix_from_json(j.at("proj_w"));
  p.proj_b = vector_from_json(j.at("proj_b"));
  p.cls_w = vector_from_json(j.at("cls_w"));
  p.cls_b = j.at("cls_b").get<double>();
  if (p.enc_w1.rows() != p.dims.hidden_dim ||
      p.enc_w1.cols() != p.dims.frame_dim ||
      p.enc_w2.rows() != p.dims.feature_dim ||
      p.enc_w2.cols() != p.dims.hidden_dim ||
      p.proj_w.rows() != p.dims.embedding_dim ||
      p.proj_w.cols() != p.dims.feature_dim ||
      p.enc_b1.size() != p.dims.hidden_dim ||
      p.enc_b2.size() != p.dims.feature_dim ||
      p.proj_b.size() != p.dims.embedding_dim ||
      p.cls_w.size() != p.dims.embedding_dim) {
    throw std::runtime_error("checkpoint tensor shapes do not match dims");
  }
  return p;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "supcon-lab-checkpoint";
  j["version"] = ckpt.version;
  j["stage"] = ckpt.stage;
  j["config_hash"] = ckpt.config_hash;
  j["params"] = params_to_json(ckpt.params);
  if (!ckpt.optimizer.is_null()) j["optimizer"] = ckpt.optimizer;
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "supcon-lab-checkpoint") {
    throw std::runtime_error(path.string() + " is not a supcon-lab checkpoint");
  }
  Checkpoint ckpt;
  ckpt.version = j.at("version").get<int>();
  if (ckpt.version != 1) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(ckpt.version));
  }
  ckpt.stage = j.at("stage").get<std::string>();
  ckpt.config_hash = j.at("config_hash").get<std::string>();
  ckpt.params = params_from_json(j.at("params"));
  if (j.contains("optimizer")) ckpt.optimizer = j.at("optimizer");
  return ckpt;
}

}  // namespace supcon
