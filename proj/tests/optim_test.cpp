#include <doctest.h>

#include <cmath>

#include "supcon/optim.hpp"
#include "supcon/rng.hpp"

using namespace supcon;

namespace {

ModelParams tiny_params(Rng& rng) {
  return ModelParams::init(ModelDims{3, 4, 3, 5}, rng);
}

GradientSet zero_grads(const ModelDims& dims, bool classifier = true) {
  GradientSet g;
  g.encoder_projection = EncoderProjectionGrads::zeros(dims);
  if (classifier) {
    g.classifier = ClassifierGrads{Vec::Zero(dims.embedding_dim), 0.0};
  }
  return g;
}

}  // namespace

TEST_CASE("zero gradients give pure multiplicative decay on weights") {
  Rng rng(41);
  ModelParams params = tiny_params(rng);
  params.cls_w = Vec::Constant(5, 0.5);
  OptimConfig cfg;
  cfg.weight_decay = 3e-3;
  AdamW opt(cfg, params.dims);

  Mat expected_w1 = params.enc_w1;
  Vec expected_b1 = params.enc_b1;
  Vec expected_cls = params.cls_w;
  for (int step = 0; step < 25; ++step) {
    opt.step(params, zero_grads(params.dims));
    expected_w1 *= (1.0 - cfg.encoder_lr * cfg.weight_decay);
    expected_cls *= (1.0 - cfg.classifier_lr * cfg.weight_decay);
    // Biases are never decayed.
    CHECK((params.enc_b1 - expected_b1).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((params.enc_w1 - expected_w1).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((params.cls_w - expected_cls).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(params.cls_b == 0.0);
}

TEST_CASE("single decay step shrinks by exactly (1 - lr * wd)") {
  Rng rng(43);
  ModelParams params = tiny_params(rng);
  OptimConfig cfg;
  cfg.projection_lr = 5e-4;
  cfg.weight_decay = 3e-3;
  const Mat before = params.proj_w;
  AdamW opt(cfg, params.dims);
  opt.step(params, zero_grads(params.dims, false));
  const Mat want = before * (1.0 - 1.5e-6);
  CHECK((params.proj_w - want).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("first step with unit gradient moves by about -lr") {
  Rng rng(47);
  ModelParams params = tiny_params(rng);
  OptimConfig cfg;
  cfg.weight_decay = 0.0;
  cfg.classifier_lr = 5e-4;
  const double before = params.cls_w(0);
  AdamW opt(cfg, params.dims);
  GradientSet grads;
  Vec gw = Vec::Zero(5);
  gw(0) = 1.0;
  grads.classifier = ClassifierGrads{gw, 0.0};
  opt.step(params, grads);
  CHECK(std::abs((params.cls_w(0) - before) + cfg.classifier_lr) <
        cfg.classifier_lr * 1e-7);
}

TEST_CASE("with zero weight decay AdamW reduces to a reference Adam") {
  Rng rng(53);
  ModelParams params = tiny_params(rng);
  OptimConfig cfg;
  cfg.weight_decay = 0.0;
  cfg.classifier_lr = 1e-2;
  AdamW opt(cfg, params.dims);

  // Independent scalar-wise Adam on the classifier weights.
  Vec ref_param = params.cls_w;
  Vec ref_m = Vec::Zero(5), ref_v = Vec::Zero(5);
  for (int t = 1; t <= 30; ++t) {
    Vec g(5);
    for (int i = 0; i < 5; ++i) g(i) = rng.uniform(-2.0, 2.0);

    for (int i = 0; i < 5; ++i) {
      ref_m(i) = cfg.beta1 * ref_m(i) + (1.0 - cfg.beta1) * g(i);
      ref_v(i) = cfg.beta2 * ref_v(i) + (1.0 - cfg.beta2) * g(i) * g(i);
      const double m_hat = ref_m(i) / (1.0 - std::pow(cfg.beta1, t));
      const double v_hat = ref_v(i) / (1.0 - std::pow(cfg.beta2, t));
      ref_param(i) -= cfg.classifier_lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }

    GradientSet grads;
    grads.classifier = ClassifierGrads{g, 0.0};
    opt.step(params, grads);
    CHECK((params.cls_w - ref_param).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("per-group learning rates apply to their own tensors") {
  Rng rng(59);
  ModelParams params = tiny_params(rng);
  OptimConfig cfg;
  cfg.encoder_lr = 1e-5;
  cfg.projection_lr = 5e-4;
  cfg.weight_decay = 0.0;
  AdamW opt(cfg, params.dims);

  GradientSet grads;
  grads.encoder_projection = EncoderProjectionGrads::zeros(params.dims);
  grads.encoder_projection->enc_w1.setConstant(1.0);
  grads.encoder_projection->proj_w.setConstant(1.0);
  const double enc_before = params.enc_w1(0, 0);
  const double proj_before = params.proj_w(0, 0);
  opt.step(params, grads);
  CHECK(std::abs(params.enc_w1(0, 0) - enc_before) < 2.0 * cfg.encoder_lr);
  CHECK(std::abs(params.enc_w1(0, 0) - enc_before) > 0.5 * cfg.encoder_lr);
  CHECK(std::abs(params.proj_w(0, 0) - proj_before) > 0.5 * cfg.projection_lr);
}

TEST_CASE("non-finite gradients name the parameter group") {
  Rng rng(61);
  ModelParams params = tiny_params(rng);
  AdamW opt(OptimConfig{}, params.dims);
  GradientSet grads = zero_grads(params.dims);
  grads.encoder_projection->proj_w(0, 0) =
      std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(opt.step(params, grads), doctest::Contains("projection"),
                       std::runtime_error);
}

TEST_CASE("optimizer state serializes and restores") {
  Rng rng(67);
  ModelParams a = tiny_params(rng);
  OptimConfig cfg;
  AdamW opt_a(cfg, a.dims);

  GradientSet grads = zero_grads(a.dims);
  grads.classifier->w.setConstant(0.3);
  opt_a.step(a, grads);
  opt_a.step(a, grads);

  // Restore into a fresh optimizer; the next step must match exactly.
  ModelParams b = a;
  AdamW opt_b(cfg, b.dims);
  opt_b.state_from_json(opt_a.state_to_json());
  CHECK(opt_b.step_count() == opt_a.step_count());

  opt_a.step(a, grads);
  opt_b.step(b, grads);
  CHECK((a.cls_w - b.cls_w).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.cls_b == b.cls_b);
}

TEST_CASE("early stopping counter semantics") {
  EarlyStopState state;
  const int patience = 2;

  auto d1 = early_stop_update(state, 10.0, 1, patience);
  CHECK(d1.is_new_best);
  CHECK_FALSE(d1.should_stop);
  auto d2 = early_stop_update(state, 9.0, 2, patience);
  CHECK(d2.is_new_best);
  auto d3 = early_stop_update(state, 9.0, 3, patience);  // tie: not a best
  CHECK_FALSE(d3.is_new_best);
  CHECK_FALSE(d3.should_stop);
  auto d4 = early_stop_update(state, 9.0, 4, patience);
  CHECK_FALSE(d4.is_new_best);
  CHECK(d4.should_stop);
  CHECK(state.best_epoch == 2);  // first occurrence of the minimum
  CHECK(state.best_metric == 9.0);
}

TEST_CASE("monotonically decreasing EER never stops") {
  EarlyStopState state;
  for (int epoch = 1; epoch <= 50; ++epoch) {
    const auto d = early_stop_update(state, 50.0 - epoch, epoch, 3);
    CHECK(d.is_new_best);
    CHECK_FALSE(d.should_stop);
  }
}

TEST_CASE("early stopping rejects out-of-range EER") {
  EarlyStopState state;
  CHECK_THROWS_AS(early_stop_update(state, -0.1, 1, 3), std::invalid_argument);
  CHECK_THROWS_AS(early_stop_update(state, 100.5, 1, 3), std::invalid_argument);
}

TEST_CASE("optim config validation") {
  OptimConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = OptimConfig{};
  bad.encoder_lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = OptimConfig{};
  bad.weight_decay = -1e-3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = OptimConfig{};
  bad.patience = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
