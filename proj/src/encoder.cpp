#include "overlap/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace overlap {

namespace {

constexpr double kNormFloor = 1e-12;

// Stable log(sum(exp(v))) over a row.
double logsumexp_row(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

Mat rowwise_softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

void check_same_shape(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string("infonce: ") + what +
                                " shape mismatch");
  }
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "softmax") return Activation::Softmax;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Softmax: return "softmax";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "softmax";
}

EncoderParams EncoderParams::init(int input, int hidden, int output,
                                  Activation act, Rng& rng) {
  if (input < 1 || hidden < 1 || output < 1) {
    throw std::invalid_argument("EncoderParams::init: dimensions must be >= 1");
  }
  EncoderParams p;
  p.activation = act;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  p.w1.resize(hidden, input);
  p.b1.resize(hidden);
  p.w2.resize(output, hidden);
  p.b2.resize(output);
  for (int r = 0; r < hidden; ++r) {
    for (int c = 0; c < input; ++c) p.w1(r, c) = rng.uniform(-s1, s1);
  }
  for (int r = 0; r < hidden; ++r) p.b1[r] = rng.uniform(-s1, s1);
  for (int r = 0; r < output; ++r) {
    for (int c = 0; c < hidden; ++c) p.w2(r, c) = rng.uniform(-s2, s2);
  }
  for (int r = 0; r < output; ++r) p.b2[r] = rng.uniform(-s2, s2);
  return p;
}

ForwardCache encoder_forward_cache(const EncoderParams& p, const Mat& inputs) {
  if (inputs.cols() != p.input_dim()) {
    throw std::invalid_argument("encoder forward: input dimension mismatch");
  }
  ForwardCache c;
  c.inputs = inputs;
  c.hpre = (inputs * p.w1.transpose()).rowwise() + p.b1.transpose();
  switch (p.activation) {
    case Activation::Softmax:
      c.act = rowwise_softmax(c.hpre);
      break;
    case Activation::Tanh:
      c.act = c.hpre.array().tanh().matrix();
      break;
    case Activation::Relu:
      c.act = c.hpre.cwiseMax(0.0);
      break;
  }
  c.zpre = (c.act * p.w2.transpose()).rowwise() + p.b2.transpose();
  c.znorm = c.zpre.rowwise().norm();
  c.z.resize(c.zpre.rows(), c.zpre.cols());
  c.degenerate.assign(static_cast<size_t>(c.zpre.rows()), 0);
  for (Eigen::Index i = 0; i < c.zpre.rows(); ++i) {
    if (c.znorm[i] < kNormFloor) {
      // degenerate-input rule: fall back to a fixed basis vector
      c.z.row(i).setZero();
      c.z(i, 0) = 1.0;
      c.degenerate[static_cast<size_t>(i)] = 1;
    } else {
      c.z.row(i) = c.zpre.row(i) / c.znorm[i];
    }
  }
  return c;
}

Mat encoder_forward_batch(const EncoderParams& p, const Mat& inputs) {
  return encoder_forward_cache(p, inputs).z;
}

Vec encoder_forward(const EncoderParams& p, const Eigen::Ref<const Vec>& x) {
  Mat in(1, x.size());
  in.row(0) = x.transpose();
  return encoder_forward_batch(p, in).row(0).transpose();
}

Mat encoder_input_jacobian(const EncoderParams& p,
                           const Eigen::Ref<const Vec>& x) {
  Mat in(1, x.size());
  in.row(0) = x.transpose();
  const ForwardCache c = encoder_forward_cache(p, in);
  const int m = p.output_dim();
  if (c.degenerate[0]) {
    return Mat::Zero(m, p.input_dim());
  }
  const Vec a = c.act.row(0).transpose();
  Mat act_jac; // hidden x hidden
  switch (p.activation) {
    case Activation::Softmax:
      act_jac = Mat(a.asDiagonal()) - a * a.transpose();
      break;
    case Activation::Tanh: {
      const Vec t = (1.0 - a.array().square()).matrix();
      act_jac = t.asDiagonal();
      break;
    }
    case Activation::Relu: {
      const Vec mask =
          (c.hpre.row(0).transpose().array() > 0.0).cast<double>().matrix();
      act_jac = mask.asDiagonal();
      break;
    }
  }
  const Vec z = c.z.row(0).transpose();
  const Mat norm_jac = (Mat::Identity(m, m) - z * z.transpose()) / c.znorm[0];
  return norm_jac * p.w2 * act_jac * p.w1;
}

ParamGrads ParamGrads::zeros_like(const EncoderParams& p) {
  ParamGrads g;
  g.w1 = Mat::Zero(p.w1.rows(), p.w1.cols());
  g.b1 = Vec::Zero(p.b1.size());
  g.w2 = Mat::Zero(p.w2.rows(), p.w2.cols());
  g.b2 = Vec::Zero(p.b2.size());
  return g;
}

double ParamGrads::squared_norm() const {
  return w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() +
         b2.squaredNorm();
}

void encoder_backward(const EncoderParams& p, const ForwardCache& cache,
                      const Mat& grad_z, ParamGrads& grads) {
  check_same_shape(cache.z, grad_z, "embedding gradient");
  const Eigen::Index n = cache.z.rows();

  // Through the normalization layer: gu = (g - (g.z) z) / ||zpre||.
  Mat gu(n, cache.z.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (cache.degenerate[static_cast<size_t>(i)]) {
      gu.row(i).setZero();
    } else {
      const double gz_dot_z = grad_z.row(i).dot(cache.z.row(i));
      gu.row(i) = (grad_z.row(i) - gz_dot_z * cache.z.row(i)) / cache.znorm[i];
    }
  }

  grads.w2.noalias() += gu.transpose() * cache.act;
  grads.b2 += gu.colwise().sum().transpose();

  Mat ga = gu * p.w2; // n x hidden
  Mat gh;
  switch (p.activation) {
    case Activation::Softmax: {
      const Vec srow = (cache.act.array() * ga.array()).rowwise().sum().matrix();
      gh = (cache.act.array() * (ga.array().colwise() - srow.array())).matrix();
      break;
    }
    case Activation::Tanh:
      gh = (ga.array() * (1.0 - cache.act.array().square())).matrix();
      break;
    case Activation::Relu:
      gh = (ga.array() * (cache.hpre.array() > 0.0).cast<double>()).matrix();
      break;
  }
  grads.w1.noalias() += gh.transpose() * cache.inputs;
  grads.b1 += gh.colwise().sum().transpose();
}

double infonce_from_embeddings(const Mat& za, const Mat& zp,
                               const std::vector<Mat>& zn) {
  check_same_shape(za, zp, "anchor/positive");
  const Eigen::Index b = za.rows();
  if (static_cast<Eigen::Index>(zn.size()) != b) {
    throw std::invalid_argument("infonce: one negative block per anchor required");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    if (zn[i].rows() < 1) {
      throw std::invalid_argument("infonce: at least one negative required");
    }
    const Eigen::RowVectorXd sims = za.row(i) * zn[i].transpose();
    total += -za.row(i).dot(zp.row(i)) + logsumexp_row(sims);
  }
  return total / static_cast<double>(b);
}

double infonce_loss(const EncoderParams& p, const Mat& anchors,
                    const Mat& positives, const std::vector<Mat>& negatives) {
  const Mat za = encoder_forward_batch(p, anchors);
  const Mat zp = encoder_forward_batch(p, positives);
  std::vector<Mat> zn;
  zn.reserve(negatives.size());
  for (const Mat& block : negatives) {
    zn.push_back(encoder_forward_batch(p, block));
  }
  return infonce_from_embeddings(za, zp, zn);
}

ParamGrads infonce_grad(const EncoderParams& p, const Mat& anchors,
                        const Mat& positives, const std::vector<Mat>& negatives,
                        double* loss_out) {
  check_same_shape(anchors, positives, "anchor/positive");
  const Eigen::Index b = anchors.rows();
  if (static_cast<Eigen::Index>(negatives.size()) != b || b == 0) {
    throw std::invalid_argument("infonce_grad: one negative block per anchor required");
  }

  const ForwardCache ca = encoder_forward_cache(p, anchors);
  const ForwardCache cp = encoder_forward_cache(p, positives);
  std::vector<ForwardCache> cn;
  cn.reserve(negatives.size());
  for (const Mat& block : negatives) {
    if (block.rows() < 1) {
      throw std::invalid_argument("infonce_grad: at least one negative required");
    }
    cn.push_back(encoder_forward_cache(p, block));
  }

  const double inv_b = 1.0 / static_cast<double>(b);
  Mat ga = Mat::Zero(b, p.output_dim());
  Mat gp = Mat::Zero(b, p.output_dim());
  double total = 0.0;

  ParamGrads grads = ParamGrads::zeros_like(p);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Mat& zni = cn[static_cast<size_t>(i)].z;
    const Eigen::RowVectorXd sims = ca.z.row(i) * zni.transpose();
    const double lse = logsumexp_row(sims);
    total += -ca.z.row(i).dot(cp.z.row(i)) + lse;

    const Eigen::RowVectorXd soft = (sims.array() - lse).exp().matrix();
    ga.row(i) = inv_b * (soft * zni - cp.z.row(i));
    gp.row(i) = -inv_b * ca.z.row(i);
    const Mat gn = inv_b * soft.transpose() * ca.z.row(i);
    encoder_backward(p, cn[static_cast<size_t>(i)], gn, grads);
  }
  encoder_backward(p, ca, ga, grads);
  encoder_backward(p, cp, gp, grads);

  if (loss_out) *loss_out = total * inv_b;
  return grads;
}

double infonce_loss_shared(const EncoderParams& p, const Mat& anchors,
                           const Mat& positives, const Mat& negatives) {
  if (negatives.rows() < 1) {
    throw std::invalid_argument("infonce: at least one negative required");
  }
  const Mat za = encoder_forward_batch(p, anchors);
  const Mat zp = encoder_forward_batch(p, positives);
  const Mat zn = encoder_forward_batch(p, negatives);
  check_same_shape(za, zp, "anchor/positive");
  double total = 0.0;
  for (Eigen::Index i = 0; i < za.rows(); ++i) {
    const Eigen::RowVectorXd sims = za.row(i) * zn.transpose();
    total += -za.row(i).dot(zp.row(i)) + logsumexp_row(sims);
  }
  return total / static_cast<double>(za.rows());
}

ParamGrads infonce_grad_shared(const EncoderParams& p, const Mat& anchors,
                               const Mat& positives, const Mat& negatives,
                               double* loss_out) {
  check_same_shape(anchors, positives, "anchor/positive");
  if (anchors.rows() == 0 || negatives.rows() < 1) {
    throw std::invalid_argument("infonce_grad: empty batch or negative pool");
  }
  const ForwardCache ca = encoder_forward_cache(p, anchors);
  const ForwardCache cp = encoder_forward_cache(p, positives);
  const ForwardCache cn = encoder_forward_cache(p, negatives);

  const Eigen::Index b = anchors.rows();
  const double inv_b = 1.0 / static_cast<double>(b);

  Mat sims = ca.z * cn.z.transpose(); // b x M
  double total = 0.0;
  Mat soft(b, sims.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    const double lse = logsumexp_row(sims.row(i));
    total += -ca.z.row(i).dot(cp.z.row(i)) + lse;
    soft.row(i) = (sims.row(i).array() - lse).exp().matrix();
  }

  const Mat ga = inv_b * (soft * cn.z - cp.z);
  const Mat gp = -inv_b * ca.z;
  const Mat gn = inv_b * soft.transpose() * ca.z;

  ParamGrads grads = ParamGrads::zeros_like(p);
  encoder_backward(p, ca, ga, grads);
  encoder_backward(p, cp, gp, grads);
  encoder_backward(p, cn, gn, grads);

  if (loss_out) *loss_out = total * inv_b;
  return grads;
}

void TrainConfig::validate() const {
  if (negatives < 1) throw std::invalid_argument("train config: negatives must be >= 1");
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (learning_rate <= 0.0) {
    throw std::invalid_argument("train config: learning_rate must be > 0");
  }
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (hidden < 1 || output_dim < 1) {
    throw std::invalid_argument("train config: encoder dimensions must be >= 1");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("train config: momentum must lie in [0, 1)");
  }
  if (r < 0.0 || r > std::numbers::pi) {
    throw std::invalid_argument("train config: r must lie in [0, pi]");
  }
  if (metrics_every < 0) {
    throw std::invalid_argument("train config: metrics_every must be >= 0");
  }
}

TrainResult train(const LabeledSphereDataset& dataset, const TrainConfig& cfg,
                  const MetricsProbe& probe) {
  cfg.validate();
  const int n = dataset.size();
  if (cfg.batch_size > n) {
    throw std::invalid_argument("train: batch_size exceeds dataset size");
  }

  Rng rng(cfg.seed);
  EncoderParams params = EncoderParams::init(
      dataset.ambient_dim(), cfg.hidden, cfg.output_dim, cfg.activation, rng);
  ParamGrads velocity = ParamGrads::zeros_like(params);

  const int dim = dataset.ambient_dim();
  const int steps = n / cfg.batch_size;
  Mat anchors(cfg.batch_size, dim);
  Mat positives(cfg.batch_size, dim);
  Mat negatives(cfg.negatives, dim);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainingTrace trace;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(i + 1)]);
    }
    double epoch_loss = 0.0;
    for (int step = 0; step < steps; ++step) {
      for (int b = 0; b < cfg.batch_size; ++b) {
        const int idx = order[step * cfg.batch_size + b];
        const Vec x = dataset.points.row(idx).transpose();
        anchors.row(b) =
            (cfg.symmetric_views ? augment(x, cfg.r, rng) : x).transpose();
        positives.row(b) = augment(x, cfg.r, rng).transpose();
      }
      for (int m = 0; m < cfg.negatives; ++m) {
        const Vec x = dataset.points.row(rng.uniform_int(n)).transpose();
        negatives.row(m) = augment(x, cfg.r, rng).transpose();
      }

      double loss = 0.0;
      ParamGrads g =
          infonce_grad_shared(params, anchors, positives, negatives, &loss);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training loss became non-finite at epoch " +
                              std::to_string(epoch));
      }
      if (cfg.optimizer == TrainConfig::Optimizer::SgdMomentum) {
        velocity.w1 = cfg.momentum * velocity.w1 - cfg.learning_rate * g.w1;
        velocity.b1 = cfg.momentum * velocity.b1 - cfg.learning_rate * g.b1;
        velocity.w2 = cfg.momentum * velocity.w2 - cfg.learning_rate * g.w2;
        velocity.b2 = cfg.momentum * velocity.b2 - cfg.learning_rate * g.b2;
        params.w1 += velocity.w1;
        params.b1 += velocity.b1;
        params.w2 += velocity.w2;
        params.b2 += velocity.b2;
      } else {
        params.w1 -= cfg.learning_rate * g.w1;
        params.b1 -= cfg.learning_rate * g.b1;
        params.w2 -= cfg.learning_rate * g.w2;
        params.b2 -= cfg.learning_rate * g.b2;
      }
      epoch_loss += loss;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = epoch_loss / std::max(1, steps);
    if (probe && cfg.metrics_every > 0 &&
        (epoch % cfg.metrics_every == 0 || epoch == cfg.epochs)) {
      const auto [acr, eps] = probe(params, epoch);
      rec.acr = acr;
      rec.eps = eps;
    }
    trace.records.push_back(rec);
  }
  return {std::move(params), std::move(trace)};
}

}  // namespace overlap
