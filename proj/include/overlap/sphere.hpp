#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "overlap/rng.hpp"

namespace overlap {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Geodesic (great-circle) distance between two unit vectors, in radians.
// The inner product is clamped to [-1, 1] so rounding never produces NaN.
double geodesic_distance(const Eigen::Ref<const Vec>& u,
                         const Eigen::Ref<const Vec>& v);

// Surface area of the unit sphere S^{ambient_dim-1} embedded in R^ambient_dim.
double sphere_area(int ambient_dim);

// Surface area of a spherical cap of the given geodesic radius on
// S^{ambient_dim-1}. Closed form for ambient_dim <= 3, quadrature otherwise.
double cap_area(double radius, int ambient_dim);

// Inverse of cap_area in the radius argument.
double cap_radius_from_area(double area, int ambient_dim);

struct SphericalCap {
  Vec center;          // unit vector
  double radius = 0.0; // geodesic radius, radians, in (0, pi]
  double area = 0.0;   // derived surface area

  int ambient_dim() const { return static_cast<int>(center.size()); }

  static SphericalCap from_radius(Vec center, double radius);
  static SphericalCap from_area(Vec center, double area);
};

// Cap size given either as surface area (the default parameterization) or as
// a geodesic radius.
struct CapExtent {
  enum class Kind { Area, Radius };
  Kind kind = Kind::Area;
  double value = 1.0;

  static CapExtent area(double a) { return {Kind::Area, a}; }
  static CapExtent radius(double r) { return {Kind::Radius, r}; }

  SphericalCap make_cap(Vec center) const;
};

// Uniform point on the full sphere S^{ambient_dim-1}.
Vec sample_sphere_uniform(int ambient_dim, Rng& rng);

// Uniform point on a spherical cap. Exact inverse-CDF construction for
// ambient dimensions 2 and 3; rejection sampling from the full sphere for
// higher dimensions (throws if the acceptance rate would fall below 1e-6).
Vec sample_cap_uniform(const SphericalCap& cap, Rng& rng);

// Random augmentation: a uniform sample from the radius-r cap centered at x.
// r = 0 returns x unchanged; r outside [0, pi] is rejected.
Vec augment(const Eigen::Ref<const Vec>& x, double r, Rng& rng);

struct LabeledSphereDataset {
  Mat points;                     // one sample per row, rows unit-norm
  std::vector<int> labels;        // class index in [0, K)
  std::vector<SphericalCap> caps; // one cap per class
  std::uint64_t seed = 0;
  // Samples strictly closer to a foreign cap center than to their own;
  // nonzero means the caps overlap.
  int misplaced = 0;

  int size() const { return static_cast<int>(points.rows()); }
  int ambient_dim() const { return static_cast<int>(points.cols()); }
  int num_classes() const { return static_cast<int>(caps.size()); }
};

// Per-class uniform cap samples, deterministic in the seed. Centers are
// normalized; they must be pairwise distinct.
LabeledSphereDataset make_dataset(int num_classes, int per_class,
                                  const std::vector<Vec>& centers,
                                  const CapExtent& extent, std::uint64_t seed);

// Two antipodal caps on S^2 centered at (0,0,1) and (0,0,-1).
LabeledSphereDataset two_pole_dataset(int per_class, double cap_area,
                                      std::uint64_t seed);

}  // namespace overlap
