/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#ifndef SUPCON_MODEL_HPP
#define SUPCON_MODEL_HPP

#include <optional>
#include <string>
#include <vector>

#include "supcon/rng.hpp"
#include "supcon/supcon_loss.hpp"

namespace supcon {

struct ModelDims {
  int frame_dim = 32;       // F
  int hidden_dim = 64;      // H
  int feature_dim = 64;     // E
  int embedding_dim = 256;  // D

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

struct Utterance {
  std::string id;
  Label label = Label::Bonafide;
  Mat frames;  // T x F
};

// Frame encoder (F -> H -> E, tanh hidden), frame-wise linear projection
// E -> D, temporal mean pooling, l2 normalization, plus the linear
// classifier D -> 1 trained in the second stage.
struct ModelParams {
  ModelDims dims;
  Mat enc_w1;  // H x F
  Vec enc_b1;  // H
  Mat enc_w2;  // E x H
  Vec enc_b2;  // E
  Mat proj_w;  // D x E
  Vec proj_b;  // D
  Vec cls_w;   // D
  double cls_b = 0.0;

  // Encoder/projection uniform(-1/sqrt(fan_in), +1/sqrt(fan_in));
  // classifier zeros.
  static ModelParams init(const ModelDims& dims, Rng& rng);

  std::size_t parameter_count() const;
  bool all_finite() const;
};

// Per-frame intermediates kept for the backward pass.
struct EmbedTrace {
  Mat hidden;    // T x H, post-tanh
  Mat features;  // T x E
  Vec pooled;    // D, pre-normalization
  double pooled_norm = 0.0;
  Vec embedding;  // D, unit norm
};

Vec embed(const ModelParams& params, const Utterance& utt);
EmbedTrace embed_trace(const ModelParams& params, const Utterance& utt);

// w . emb + b; higher means more bona-fide-like.
double classify(const ModelParams& params, const Vec& embedding);

// Numerically stable binary cross-entropy with logits; target in {0, 1}
// (bonafide = 1).
double bce_with_logits(double logit, double target);
double bce_target(Label l);

struct EncoderProjectionGrads {
  Mat enc_w1;
  Vec enc_b1;
  Mat enc_w2;
  Vec enc_b2;
  Mat proj_w;
  Vec proj_b;

  static EncoderProjectionGrads zeros(const ModelDims& dims);
  void add(const EncoderProjectionGrads& other);
};

struct ClassifierGrads {
  Vec w;
  double b = 0.0;
};

// Frozen parameter groups have no slot at all.
struct GradientSet {
  std::optional<EncoderProjectionGrads> encoder_projection;
  std::optional<ClassifierGrads> classifier;
};

enum class LossKind {
  Supcon,        // batch mean of the contrastive loss; encoder+projection grads
  BceFrozen,     // classifier-only grads on fixed embeddings
  BceEndToEnd,   // single-stage baseline; all groups receive grads
};

struct BackwardResult {
  double loss = 0.0;  // scalar that was differentiated (batch mean)
  GradientSet grads;
  std::vector<Vec> embeddings;  // forward embeddings, batch order
  bool degenerate = false;      // contrastive loss carried no signal
};

// Exact analytic gradients of the selected loss for one minibatch. The
// queue feeds extra Supcon negatives only; its entries receive no gradient.
// Throws std::runtime_error naming the offending utterance if a loss term
// is non-finite.
BackwardResult backward(const ModelParams& params,
                        const std::vector<Utterance>& batch, LossKind kind,
                        const LossConfig& loss_config,
                        const MemoryQueue* queue = nullptr);

}  // namespace supcon

#endif  // SUPCON_MODEL_HPP
