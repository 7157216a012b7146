/**
 * supcon-lab
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "supcon/model.hpp"

#include <cmath>
#include <stdexcept>

namespace supcon {

void ModelDims::validate() const {
  if (frame_dim < 1 || hidden_dim < 1 || feature_dim < 1 || embedding_dim < 1) {
    throw std::invalid_argument("model dimensions must be positive");
  }
}

namespace {

void fill_uniform(Mat& m, double bound, Rng& rng) {
  // Row-major fill so the draw order is independent of Eigen's storage.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.uniform(-bound, bound);
    }
  }
}

void fill_uniform(Vec& v, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = rng.uniform(-bound, bound);
  }
}

}  // namespace

ModelParams ModelParams::init(const ModelDims& dims, Rng& rng) {
  dims.validate();
  ModelParams p;
  p.dims = dims;
  p.enc_w1.resize(dims.hidden_dim, dims.frame_dim);
  p.enc_b1.resize(dims.hidden_dim);
  p.enc_w2.resize(dims.feature_dim, dims.hidden_dim);
  p.enc_b2.resize(dims.feature_dim);
  p.proj_w.resize(dims.embedding_dim, dims.feature_dim);
  p.proj_b.resize(dims.embedding_dim);

  const double bound1 = 1.0 / std::sqrt(static_cast<double>(dims.frame_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(dims.hidden_dim));
  const double bound3 = 1.0 / std::sqrt(static_cast<double>(dims.feature_dim));
  fill_uniform(p.enc_w1, bound1, rng);
  fill_uniform(p.enc_b1, bound1, rng);
  fill_uniform(p.enc_w2, bound2, rng);
  fill_uniform(p.enc_b2, bound2, rng);
  fill_uniform(p.proj_w, bound3, rng);
  fill_uniform(p.proj_b, bound3, rng);

  p.cls_w = Vec::Zero(dims.embedding_dim);
  p.cls_b = 0.0;
  return p;
}

std::size_t ModelParams::parameter_count() const {
  return static_cast<std::size_t>(enc_w1.size() + enc_b1.size() +
                                  enc_w2.size() + enc_b2.size() +
                                  proj_w.size() + proj_b.size() +
                                  cls_w.size()) +
         1;
}

bool ModelParams::all_finite() const {
  return enc_w1.allFinite() && enc_b1.allFinite() && enc_w2.allFinite() &&
         enc_b2.allFinite() && proj_w.allFinite() && proj_b.allFinite() &&
         cls_w.allFinite() && std::isfinite(cls_b);
}

EmbedTrace embed_trace(const ModelParams& params, const Utterance& utt) {
  if (utt.frames.rows() < 1) {
    throw std::invalid_argument("utterance '" + utt.id + "' has no frames");
  }
  if (utt.frames.cols() != params.dims.frame_dim) {
    throw std::invalid_argument(
        "utterance '" + utt.id + "' frame dim " +
        std::to_string(utt.frames.cols()) + " does not match model frame dim " +
        std::to_string(params.dims.frame_dim));
  }
  EmbedTrace trace;
  const Eigen::Index t = utt.frames.rows();
  trace.hidden = ((utt.frames * params.enc_w1.transpose()).rowwise() +
                  params.enc_b1.transpose())
                     .array()
                     .tanh()
                     .matrix();
  trace.features = (trace.hidden * params.enc_w2.transpose()).rowwise() +
                   params.enc_b2.transpose();
  const Mat projected = (trace.features * params.proj_w.transpose()).rowwise() +
                        params.proj_b.transpose();
  trace.pooled = (projected.colwise().sum() / static_cast<double>(t)).transpose();
  trace.pooled_norm = trace.pooled.norm();
  trace.embedding = l2_normalize(trace.pooled);
  return trace;
}

Vec embed(const ModelParams& params, const Utterance& utt) {
  return embed_trace(params, utt).embedding;
}

double classify(const ModelParams& params, const Vec& embedding) {
  if (embedding.size() != params.cls_w.size()) {
    throw std::invalid_argument("embedding dim does not match classifier");
  }
  return params.cls_w.dot(embedding) + params.cls_b;
}

double bce_with_logits(double logit, double target) {
  return std::max(logit, 0.0) - logit * target +
         std::log1p(std::exp(-std::abs(logit)));
}

double bce_target(Label l) { return l == Label::Bonafide ? 1.0 : 0.0; }

EncoderProjectionGrads EncoderProjectionGrads::zeros(const ModelDims& dims) {
  EncoderProjectionGrads g;
  g.enc_w1 = Mat::Zero(dims.hidden_dim, dims.frame_dim);
  g.enc_b1 = Vec::Zero(dims.hidden_dim);
  g.enc_w2 = Mat::Zero(dims.feature_dim, dims.hidden_dim);
  g.enc_b2 = Vec::Zero(dims.feature_dim);
  g.proj_w = Mat::Zero(dims.embedding_dim, dims.feature_dim);
  g.proj_b = Vec::Zero(dims.embedding_dim);
  return g;
}

void EncoderProjectionGrads::add(const EncoderProjectionGrads& other) {
  enc_w1 += other.enc_w1;
  enc_b1 += other.enc_b1;
  enc_w2 += other.enc_w2;
  enc_b2 += other.enc_b2;
  proj_w += other.proj_w;
  proj_b += other.proj_b;
}

namespace {

// Chain rule from d(loss)/d(embedding) back to encoder and projection
// parameters for one utterance. The normalization Jacobian is
// (I - zz^T)/||pooled||.
EncoderProjectionGrads backprop_embedding(const ModelParams& params,
                                          const Utterance& utt,
                                          const EmbedTrace& trace,
                                          const Vec& d_embedding) {
  EncoderProjectionGrads g;
  const double t = static_cast<double>(utt.frames.rows());
  const Vec& z = trace.embedding;
  const Vec d_pooled =
      (d_embedding - z * z.dot(d_embedding)) / trace.pooled_norm;

  // Every frame's projected output receives d_pooled / T; summing those
  // rows back out collapses the per-frame outer products into GEMMs.
  const Vec d_proj_row = d_pooled / t;  // D
  g.proj_w = d_pooled * (trace.features.colwise().sum() / t);  // D x E
  g.proj_b = d_pooled;
  const Mat d_features =
      Vec::Ones(utt.frames.rows()) * (params.proj_w.transpose() * d_proj_row)
          .transpose();  // T x E, identical rows
  g.enc_w2 = d_features.transpose() * trace.hidden;
  g.enc_b2 = d_features.colwise().sum().transpose();
  const Mat d_hidden = d_features * params.enc_w2;  // T x H
  const Mat d_pre =
      (d_hidden.array() * (1.0 - trace.hidden.array().square())).matrix();
  g.enc_w1 = d_pre.transpose() * utt.frames;
  g.enc_b1 = d_pre.colwise().sum().transpose();
  return g;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

BackwardResult backward(const ModelParams& params,
                        const std::vector<Utterance>& batch, LossKind kind,
                        const LossConfig& loss_config,
                        const MemoryQueue* queue) {
  if (batch.size() < 2) {
    throw std::invalid_argument("backward requires a batch of at least 2");
  }
  const std::size_t b = batch.size();

  std::vector<EmbedTrace> traces(b);
  parallel_for(b, [&](std::size_t i) { traces[i] = embed_trace(params, batch[i]); });

  BackwardResult result;
  result.embeddings.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    result.embeddings[i] = traces[i].embedding;
  }

  std::vector<Vec> d_embeddings;  // filled per loss kind

  if (kind == LossKind::Supcon) {
    LabeledBatch lb;
    lb.embeddings = result.embeddings;
    lb.labels.reserve(b);
    for (const Utterance& u : batch) lb.labels.push_back(u.label);

    SupconGradient sg;
    try {
      sg = supcon_loss_grad(lb, loss_config, queue);
    } catch (const NonFiniteLossError& e) {
      throw std::runtime_error(
          "non-finite contrastive loss at utterance '" +
          batch[static_cast<std::size_t>(e.anchor_index)].id + "'");
    }
    result.loss = sg.value.mean;
    result.degenerate = sg.value.degenerate;
    d_embeddings.resize(b);
    const double scale =
        sg.value.contributing > 0
            ? 1.0 / static_cast<double>(sg.value.contributing)
            : 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      d_embeddings[i] = scale * sg.wrt_embeddings[i];
    }
  } else {
    double loss_sum = 0.0;
    std::vector<double> d_logits(b);
    Vec cls_w_grad = Vec::Zero(params.cls_w.size());
    double cls_b_grad = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      const double logit = classify(params, result.embeddings[i]);
      const double target = bce_target(batch[i].label);
      const double term = bce_with_logits(logit, target);
      if (!std::isfinite(term)) {
        throw std::runtime_error("non-finite BCE loss at utterance '" +
                                 batch[i].id + "'");
      }
      loss_sum += term;
      d_logits[i] = (sigmoid(logit) - target) / static_cast<double>(b);
      cls_w_grad += d_logits[i] * result.embeddings[i];
      cls_b_grad += d_logits[i];
    }
    result.loss = loss_sum / static_cast<double>(b);
    result.grads.classifier = ClassifierGrads{cls_w_grad, cls_b_grad};
    if (kind == LossKind::BceEndToEnd) {
      d_embeddings.resize(b);
      for (std::size_t i = 0; i < b; ++i) {
        d_embeddings[i] = d_logits[i] * params.cls_w;
      }
    }
  }

  if (!d_embeddings.empty()) {
    std::vector<EncoderProjectionGrads> per_utt(b);
    parallel_for(b, [&](std::size_t i) {
      per_utt[i] = backprop_embedding(params, batch[i], traces[i], d_embeddings[i]);
    });
    EncoderProjectionGrads total = EncoderProjectionGrads::zeros(params.dims);
    for (std::size_t i = 0; i < b; ++i) total.add(per_utt[i]);
    result.grads.encoder_projection = std::move(total);
  }
  return result;
}

}  // namespace supcon
