#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "overlap/sphere.hpp"

namespace overlap {

struct GraphEdge {
  int i = 0;
  int j = 0; // i < j
  double dist = 0.0;
};

// Neighborhood graph over natural samples: an edge joins two samples whose
// radius-r augmentation disks can produce a common view, i.e. whose geodesic
// distance is at most connect_factor * r (connect_factor 2 = overlapping
// supports, 1 = literal distance threshold).
struct AugmentationGraph {
  int n = 0;
  std::vector<GraphEdge> edges;
  double r = 0.0;
  double connect_factor = 2.0;
  std::vector<int> labels; // empty when absent

  bool has_labels() const { return !labels.empty(); }
  int num_classes() const;
  std::vector<std::vector<int>> adjacency() const;
};

AugmentationGraph build_graph(const LabeledSphereDataset& dataset, double r,
                              double connect_factor = 2.0);

// Component id per vertex, ids assigned in order of each component's
// smallest vertex index.
std::vector<int> connected_components(const AugmentationGraph& g);

// Whether each class's induced subgraph is connected. Requires labels and
// every class in [0, K) nonempty.
std::vector<bool> classwise_connected(const AugmentationGraph& g);

struct EdgeLabelStats {
  long inter_edges = 0;
  long intra_edges = 0;
  double inter_fraction = 0.0; // 0 when edgeless
};

EdgeLabelStats label_consistency_violations(const AugmentationGraph& g);

// Hop-count diameters of the class-induced subgraphs. nullopt marks a
// disconnected (infinite-diameter) class; max is nullopt if any class is.
struct DiameterReport {
  std::vector<std::optional<int>> per_class;
  std::optional<int> max_diameter;
};

DiameterReport intra_class_diameter(const AugmentationGraph& g);

struct CriticalRadii {
  double r1 = 0.0;              // minimum pairwise distance
  double r2 = 0.0;              // maximum pairwise distance
  std::optional<double> r3;     // half the minimum inter-class distance
  double c_n = 0.0;             // bottleneck connectivity distance (longest MST edge)
  double d_n = 0.0;             // largest nearest-neighbor distance
};

CriticalRadii critical_radii(const LabeledSphereDataset& dataset);

struct ScalingRecord {
  int n_samples = 0;
  int dim = 0;   // intrinsic dimension of the sample region (sphere S^dim)
  int trial = 0;
  double c_n = 0.0;
  double d_n = 0.0;
  double region_area = 0.0;      // S, surface area of the sampled cap
  double unit_ball_volume = 0.0; // V_u in R^dim
  double statistic_cn = 0.0;     // c_n^dim * n^2 / log n
  double statistic_dn = 0.0;     // d_n^dim * n^2 / log n
  double alt_statistic_cn = 0.0; // c_n^dim * n / log n
};

// Connectivity thresholds of uniform samples drawn from a single area-1 cap
// on S^dim, across sample counts and trials. Deterministic in the seed.
std::vector<ScalingRecord> scaling_experiment(const std::vector<int>& n_list,
                                              int dim, int trials,
                                              std::uint64_t seed);

}  // namespace overlap
