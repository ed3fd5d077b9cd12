#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "overlap/encoder.hpp"
#include "overlap/graph.hpp"
#include "overlap/sphere.hpp"

namespace overlap {

struct FeatureTable {
  std::vector<int> ids;
  std::vector<int> labels;
  Mat features; // n x m, rows unit-norm
  bool renormalized = false;

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  int num_classes() const;
};

// Encoder outputs on the natural samples of a dataset.
FeatureTable features_from_encoder(const EncoderParams& p,
                                   const LabeledSphereDataset& dataset);

// Classwise mean rows (not re-normalized), K x m. Every class must be nonempty.
Mat class_means(const FeatureTable& t);

// Cross entropy of the classifier whose weight rows are the class means.
double mean_ce_loss(const FeatureTable& t);

struct ProbeConfig {
  int max_iters = 5000;
  double tol = 1e-5; // gradient Frobenius norm
  double learning_rate = 1.0;
};

struct ProbeResult {
  Mat weights; // K x m
  double train_acc = 0.0;
  double test_acc = 0.0;
  double train_ce = 0.0;
  int iters = 0;
};

// Multinomial logistic regression g(z) = Wz on frozen features, minimized by
// full-batch gradient descent. Deterministic; argmax ties go to the smallest
// class index.
ProbeResult linear_probe(const FeatureTable& train, const FeatureTable& test,
                         const ProbeConfig& cfg = {});

// Class-weighted intra-class feature variance
// E_y E_{x|y} || f(x) - E_{x|y} f(x) ||^2.
double conditional_variance(const FeatureTable& t);

struct AlignmentErrorEstimate {
  double max_eps = 0.0;
  double mean_eps = 0.0;
  int pairs = 0;
};

// Sampled estimate of the positive-pair feature distance ||f(x) - f(x+)||.
AlignmentErrorEstimate alignment_error(const EncoderParams& p,
                                       const LabeledSphereDataset& dataset,
                                       double r, int n_pairs, Rng& rng);

struct InfonceEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int negatives = 0;
  int draws = 0;
};

// Monte Carlo estimate of the InfoNCE risk with fresh positives and
// negatives per anchor draw.
InfonceEstimate empirical_infonce(const EncoderParams& p,
                                  const LabeledSphereDataset& dataset, double r,
                                  int negatives, int n_draws, Rng& rng);

// Mean |LSE_M - LSE_exact| per subsample size, where LSE_exact is the log of
// the exact mean of exp(f(x)^T f(x')) over the full table and LSE_M its
// M-subsample estimate; averaged over trials with random anchors.
std::vector<double> lse_approximation_error(const FeatureTable& t,
                                            const std::vector<int>& m_list,
                                            int trials, Rng& rng);

struct BoundsReport {
  double l_nce = 0.0;
  double l_nce_std_error = 0.0;
  double l_ce_mu = 0.0;
  double var_cond = 0.0;
  int m = 0;
  int k = 0;
  double log_m_over_k = 0.0;
  double epsilon = 0.0;           // sampled max positive-pair distance
  std::optional<int> diameter;    // nullopt = infinite
  double lse_error_estimate = 0.0;
  double upper_slack = 0.0;
  double lower_slack = 0.0;
  bool upper_holds = false;
  bool lower_holds = false;
  double upper_margin = 0.0; // rhs - lhs of the upper line
  double lower_margin = 0.0; // lhs - rhs of the lower line
  std::optional<bool> weak_upper_holds; // diameter-based line, finite D only
};

struct BoundsOptions {
  int infonce_draws = 8000;
  int eps_pairs = 10000;
  int lse_trials = 200;
};

// Numerical evaluation of the two-sided generalization bound relating the
// InfoNCE risk to the mean-classifier CE risk, with slack calibrated from
// the Monte Carlo standard error and the measured LSE subsampling error.
// Violations are reported, not thrown.
BoundsReport bounds_report(const EncoderParams& p,
                           const LabeledSphereDataset& dataset, double r, int m,
                           int k, const AugmentationGraph& g, Rng& rng,
                           const BoundsOptions& opt = {});

struct CounterexampleResult {
  FeatureTable table;
  double probe_acc = 0.0; // held-out accuracy
};

// Features drawn uniformly on S^{m-1} with uniformly random labels and
// positive pairs mapped to identical rows: perfectly aligned, maximally
// uniform, and nearly uninformative for classification.
CounterexampleResult uniform_counterexample(int n, int k, int m,
                                            std::uint64_t seed);

}  // namespace overlap
