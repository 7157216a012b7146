/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#ifndef SUPCON_OPTIM_HPP
#define SUPCON_OPTIM_HPP

#include <nlohmann/json_fwd.hpp>

#include "supcon/model.hpp"

namespace supcon {

struct OptimConfig {
  double encoder_lr = 1e-5;
  double projection_lr = 5e-4;
  double classifier_lr = 5e-4;
  double weight_decay = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int patience = 10;

  void validate() const;
};

// AdamW with decoupled weight decay and per-group learning rates. Decay
// applies to weight matrices only, never biases. Frozen groups (absent from
// the GradientSet) are left untouched. No learning-rate schedule exists.
class AdamW {
 public:
  AdamW(const OptimConfig& config, const ModelDims& dims);

  // Applies one update. Throws std::runtime_error naming the parameter
  // group on non-finite gradients.
  void step(ModelParams& params, const GradientSet& grads);

  long step_count() const { return t_; }

  nlohmann::json state_to_json() const;
  void state_from_json(const nlohmann::json& j);

 private:
  struct Moments {
    Mat m, v;  // vectors stored as n x 1
  };

  void update_tensor(const char* group, Mat& param, const Mat& grad,
                     Moments& mom, double lr, bool decay);

  OptimConfig cfg_;
  long t_ = 0;
  Moments enc_w1_, enc_b1_, enc_w2_, enc_b2_, proj_w_, proj_b_, cls_w_, cls_b_;
};

struct EarlyStopState {
  double best_metric = 0.0;  // dev EER, percent
  int best_epoch = -1;
  int epochs_since_best = 0;
  bool has_best = false;
};

struct EarlyStopDecision {
  bool should_stop = false;
  bool is_new_best = false;
};

// Strictly-lower metric resets the counter and marks a checkpoint; ties do
// not count. Stops once epochs_since_best >= patience.
EarlyStopDecision early_stop_update(EarlyStopState& state, double current_dev_eer,
                                    int epoch, int patience);

}  // namespace supcon

#endif  // SUPCON_OPTIM_HPP
