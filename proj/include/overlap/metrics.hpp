#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "overlap/encoder.hpp"
#include "overlap/sphere.hpp"

namespace overlap {

// C augmented views per source sample, with features per view.
struct AugmentedFeatureSet {
  std::vector<int> source_id;  // per row
  std::vector<int> view_index; // per row, in [0, C)
  Mat features;                // rows unit-norm
  int views_per_source = 0;    // C

  int rows() const { return static_cast<int>(features.rows()); }
  int num_sources() const {
    return views_per_source > 0 ? rows() / views_per_source : 0;
  }
};

// Encoder features of C fresh augmented views per dataset sample.
// Row order is source-major: row = source * C + view.
AugmentedFeatureSet build_augmented_features(const EncoderParams& p,
                                             const LabeledSphereDataset& dataset,
                                             int views, double r,
                                             std::uint64_t seed);

// Same layout with the augmented points themselves as features (no encoder),
// for measuring overlap in the raw input space.
AugmentedFeatureSet build_augmented_inputs(const LabeledSphereDataset& dataset,
                                           int views, double r,
                                           std::uint64_t seed);

struct ConfusionReport {
  std::vector<double> cr_values; // per row, in [0, 1]
  double acr = 0.0;              // mean of cr_values
  int k = 1;
  int views = 0;
  std::string distance = "euclidean";
};

// Confusion ratio per row: the fraction of a row's k nearest neighbors
// (itself excluded, Euclidean distance, ties to the smaller row index) that
// come from a different source sample. ACR is the mean.
ConfusionReport confusion_ratio_all(const AugmentedFeatureSet& s, int k);

// (1 - acr_final) / (1 - acr_init); +infinity when acr_init = 1.
double arc_score(double acr_init, double acr_final);

struct SweepRow {
  double r = 0.0;
  double acr_init = 0.0;
  double acr_final = 0.0;
  double arc = 0.0;
  double probe_acc = 0.0;
  std::optional<int> diameter; // max intra-class diameter at this r
};

// ACR before/after training, ARC, probe accuracy and graph diameter for each
// augmentation radius. encoder_final_per_r pairs each radius with the encoder
// trained at that radius.
std::vector<SweepRow> acr_sweep(
    const LabeledSphereDataset& train, const LabeledSphereDataset& test,
    const EncoderParams& encoder_init,
    const std::vector<std::pair<double, EncoderParams>>& encoder_final_per_r,
    int views, int k, std::uint64_t seed, double connect_factor = 2.0);

// Trace hook evaluating ACR on a source subsample plus the sampled alignment
// error, for use with train().
MetricsProbe make_training_probe(const LabeledSphereDataset& dataset, double r,
                                 int views, int k, int max_sources,
                                 std::uint64_t seed);

}  // namespace overlap
