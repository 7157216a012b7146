/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "supcon/optim.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace supcon {

void OptimConfig::validate() const {
  if (!(encoder_lr > 0.0) || !(projection_lr > 0.0) || !(classifier_lr > 0.0)) {
    throw std::invalid_argument("learning rates must be positive");
  }
  if (weight_decay < 0.0) {
    throw std::invalid_argument("weight_decay must be non-negative");
  }
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw std::invalid_argument("betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) {
    throw std::invalid_argument("eps must be positive");
  }
  if (patience < 1) {
    throw std::invalid_argument("patience must be positive");
  }
}

AdamW::AdamW(const OptimConfig& config, const ModelDims& dims) : cfg_(config) {
  cfg_.validate();
  dims.validate();
  auto zeros = [](Eigen::Index r, Eigen::Index c) {
    return Moments{Mat::Zero(r, c), Mat::Zero(r, c)};
  };
  enc_w1_ = zeros(dims.hidden_dim, dims.frame_dim);
  enc_b1_ = zeros(dims.hidden_dim, 1);
  enc_w2_ = zeros(dims.feature_dim, dims.hidden_dim);
  enc_b2_ = zeros(dims.feature_dim, 1);
  proj_w_ = zeros(dims.embedding_dim, dims.feature_dim);
  proj_b_ = zeros(dims.embedding_dim, 1);
  cls_w_ = zeros(dims.embedding_dim, 1);
  cls_b_ = zeros(1, 1);
}

void AdamW::update_tensor(const char* group, Mat& param, const Mat& grad,
                          Moments& mom, double lr, bool decay) {
  if (!grad.allFinite()) {
    throw std::runtime_error(std::string("non-finite gradient in parameter group '") +
                             group + "'");
  }
  mom.m = cfg_.beta1 * mom.m + (1.0 - cfg_.beta1) * grad;
  mom.v = cfg_.beta2 * mom.v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
  const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const Mat m_hat = mom.m / bias1;
  const Mat v_hat = mom.v / bias2;
  param -= lr * (m_hat.array() / (v_hat.array().sqrt() + cfg_.eps)).matrix();
  if (decay && cfg_.weight_decay != 0.0) {
    param -= (lr * cfg_.weight_decay) * param;
  }
}

void AdamW::step(ModelParams& params, const GradientSet& grads) {
  ++t_;
  if (grads.encoder_projection.has_value()) {
    const EncoderProjectionGrads& g = *grads.encoder_projection;
    update_tensor("encoder", params.enc_w1, g.enc_w1, enc_w1_, cfg_.encoder_lr,
                  true);
    {
      Mat b1 = params.enc_b1;
      update_tensor("encoder", b1, g.enc_b1, enc_b1_, cfg_.encoder_lr, false);
      params.enc_b1 = b1;
    }
    update_tensor("encoder", params.enc_w2, g.enc_w2, enc_w2_, cfg_.encoder_lr,
                  true);
    {
      Mat b2 = params.enc_b2;
      update_tensor("encoder", b2, g.enc_b2, enc_b2_, cfg_.encoder_lr, false);
      params.enc_b2 = b2;
    }
    update_tensor("projection", params.proj_w, g.proj_w, proj_w_,
                  cfg_.projection_lr, true);
    {
      Mat pb = params.proj_b;
      update_tensor("projection", pb, g.proj_b, proj_b_, cfg_.projection_lr,
                    false);
      params.proj_b = pb;
    }
  }
  if (grads.classifier.has_value()) {
    const ClassifierGrads& g = *grads.classifier;
    {
      Mat w = params.cls_w;
      update_tensor("classifier", w, g.w, cls_w_, cfg_.classifier_lr, true);
      params.cls_w = w;
    }
    {
      Mat b(1, 1);
      b(0, 0) = params.cls_b;
      Mat gb(1, 1);
      gb(0, 0) = g.b;
      update_tensor("classifier", b, gb, cls_b_, cfg_.classifier_lr, false);
      params.cls_b = b(0, 0);
    }
  }
  if (!params.all_finite()) {
    throw std::runtime_error("non-finite parameters after optimizer step");
  }
}

namespace {

nlohmann::json mat_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const nlohmann::json& j) {
  const auto rows = j.size();
  const auto cols = rows == 0 ? 0 : j.at(0).size();
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j.at(r).at(c).get<double>();
    }
  }
  return m;
}

}  // namespace

nlohmann::json AdamW::state_to_json() const {
  nlohmann::json j;
  j["step"] = t_;
  auto slot = [](const Moments& mom) {
    nlohmann::json s;
    s["m"] = mat_json(mom.m);
    s["v"] = mat_json(mom.v);
    return s;
  };
  j["moments"]["enc_w1"] = slot(enc_w1_);
  j["moments"]["enc_b1"] = slot(enc_b1_);
  j["moments"]["enc_w2"] = slot(enc_w2_);
  j["moments"]["enc_b2"] = slot(enc_b2_);
  j["moments"]["proj_w"] = slot(proj_w_);
  j["moments"]["proj_b"] = slot(proj_b_);
  j["moments"]["cls_w"] = slot(cls_w_);
  j["moments"]["cls_b"] = slot(cls_b_);
  return j;
}

void AdamW::state_from_json(const nlohmann::json& j) {
  t_ = j.at("step").get<long>();
  auto load = [&](const char* key, Moments& mom) {
    const nlohmann::json& s = j.at("moments").at(key);
    mom.m = mat_from_json(s.at("m"));
    mom.v = mat_from_json(s.at("v"));
  };
  load("enc_w1", enc_w1_);
  load("enc_b1", enc_b1_);
  load("enc_w2", enc_w2_);
  load("enc_b2", enc_b2_);
  load("proj_w", proj_w_);
  load("proj_b", proj_b_);
  load("cls_w", cls_w_);
  load("cls_b", cls_b_);
}

EarlyStopDecision early_stop_update(EarlyStopState& state,
                                    double current_dev_eer, int epoch,
                                    int patience) {
  if (current_dev_eer < 0.0 || current_dev_eer > 100.0) {
    throw std::invalid_argument("dev EER out of [0, 100]");
  }
  EarlyStopDecision decision;
  if (!state.has_best || current_dev_eer < state.best_metric) {
    state.best_metric = current_dev_eer;
    state.best_epoch = epoch;
    state.epochs_since_best = 0;
    state.has_best = true;
    decision.is_new_best = true;
  } else {
    ++state.epochs_since_best;
  }
  decision.should_stop = state.epochs_since_best >= patience;
  return decision;
}

}  // namespace supcon
