#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "overlap/sphere.hpp"

namespace overlap {

enum class Activation { Softmax, Tanh, Relu };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

// Single-hidden-layer encoder with unit-normalized outputs:
//   z = normalize(W2 * act(W1 * x + b1) + b2)
struct EncoderParams {
  Mat w1; // hidden x input
  Vec b1;
  Mat w2; // output x hidden
  Vec b2;
  Activation activation = Activation::Softmax;

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int output_dim() const { return static_cast<int>(w2.rows()); }

  // Entries i.i.d. uniform on [-s, s] with s = 1/sqrt(fan_in).
  static EncoderParams init(int input, int hidden, int output, Activation act,
                            Rng& rng);
};

// Forward pass caches for a batch (one sample per row).
struct ForwardCache {
  Mat inputs;
  Mat hpre; // pre-activation, n x hidden
  Mat act;  // hidden activations
  Mat zpre; // pre-normalization outputs, n x output
  Mat z;    // unit-normalized outputs
  Vec znorm;
  std::vector<std::uint8_t> degenerate; // rows that hit the norm fallback
};

ForwardCache encoder_forward_cache(const EncoderParams& p, const Mat& inputs);
Mat encoder_forward_batch(const EncoderParams& p, const Mat& inputs);
Vec encoder_forward(const EncoderParams& p, const Eigen::Ref<const Vec>& x);

// Jacobian dz/dx at a point, output_dim x input_dim.
Mat encoder_input_jacobian(const EncoderParams& p,
                           const Eigen::Ref<const Vec>& x);

struct ParamGrads {
  Mat w1;
  Vec b1;
  Mat w2;
  Vec b2;

  static ParamGrads zeros_like(const EncoderParams& p);
  double squared_norm() const;
};

// Accumulates parameter gradients given dLoss/dz for each cached row.
void encoder_backward(const EncoderParams& p, const ForwardCache& cache,
                      const Mat& grad_z, ParamGrads& grads);

// InfoNCE objective over a batch: mean over anchors of
//   -f(x)^T f(x+) + log sum_i exp(f(x)^T f(x-_i)),
// with the positive excluded from the denominator.
// negatives[i] holds the M negative inputs of anchor i (M identical across anchors).
double infonce_loss(const EncoderParams& p, const Mat& anchors,
                    const Mat& positives, const std::vector<Mat>& negatives);
ParamGrads infonce_grad(const EncoderParams& p, const Mat& anchors,
                        const Mat& positives, const std::vector<Mat>& negatives,
                        double* loss_out = nullptr);

// Same objective where all anchors score against one shared negative pool
// (the training-step layout).
double infonce_loss_shared(const EncoderParams& p, const Mat& anchors,
                           const Mat& positives, const Mat& negatives);
ParamGrads infonce_grad_shared(const EncoderParams& p, const Mat& anchors,
                               const Mat& positives, const Mat& negatives,
                               double* loss_out = nullptr);

// Objective evaluated directly on embeddings (rows unit-norm); used by the
// loss functions above and exposed for numeric checks.
double infonce_from_embeddings(const Mat& za, const Mat& zp,
                               const std::vector<Mat>& zn);

struct TrainConfig {
  double r = 0.1;          // augmentation radius
  int negatives = 255;     // M, fresh augmented negatives per step
  int batch_size = 256;
  int epochs = 200;
  double learning_rate = 0.05;
  enum class Optimizer { Sgd, SgdMomentum };
  Optimizer optimizer = Optimizer::SgdMomentum;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  int hidden = 128;
  int output_dim = 16;
  Activation activation = Activation::Softmax;
  int metrics_every = 0;        // epochs between trace metric evaluations; 0 = off
  bool symmetric_views = false; // augment the anchor side as well

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> acr;
  std::optional<double> eps;
};

struct TrainingTrace {
  std::vector<EpochRecord> records;
};

struct TrainResult {
  EncoderParams params;
  TrainingTrace trace;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Evaluated on the cadence configured by metrics_every; returns {acr, eps}.
using MetricsProbe =
    std::function<std::pair<double, double>(const EncoderParams&, int epoch)>;

// Mini-batch optimization of the InfoNCE loss on the dataset. Anchors are
// natural samples; each step draws one fresh positive per anchor and a fresh
// pool of `negatives` augmented views of uniformly chosen samples. Fully
// deterministic given the seed. Throws DivergenceError if the loss becomes
// non-finite.
TrainResult train(const LabeledSphereDataset& dataset, const TrainConfig& cfg,
                  const MetricsProbe& probe = {});

}  // namespace overlap
