#include <doctest.h>

#include <cmath>
#include <numbers>

#include "overlap/rng.hpp"
#include "overlap/sphere.hpp"

using namespace overlap;

namespace {

constexpr double kPi = std::numbers::pi;
// arccos(1 - 1/(2*pi)): radius of the area-1 cap on S^2
constexpr double kAreaOneRadius = 0.5719537610547145;

Vec unit3(double x, double y, double z) {
  Vec v(3);
  v << x, y, z;
  return v.normalized();
}

}  // namespace

TEST_CASE("geodesic distance basics") {
  const Vec e1 = unit3(1, 0, 0), e2 = unit3(0, 1, 0), e3 = unit3(0, 0, 1);
  CHECK(geodesic_distance(e1, e1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(geodesic_distance(e1, e2) == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(geodesic_distance(e3, unit3(0, 0, -1)) == doctest::Approx(kPi).epsilon(1e-12));

  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const Vec u = sample_sphere_uniform(4, rng);
    const Vec v = sample_sphere_uniform(4, rng);
    CHECK(geodesic_distance(u, v) == doctest::Approx(geodesic_distance(v, u)));
    CHECK(geodesic_distance(u, v) >= 0.0);
    CHECK(geodesic_distance(u, v) <= kPi);
  }
  // clamping absorbs rounding
  Vec w = unit3(0.3, -0.2, 0.9);
  CHECK(std::isfinite(geodesic_distance(w, w)));
}

TEST_CASE("cap area and radius conversions") {
  const auto cap = SphericalCap::from_area(unit3(0, 0, 1), 1.0);
  CHECK(cap.radius == doctest::Approx(kAreaOneRadius).epsilon(1e-12));
  CHECK(2.0 * kPi * (1.0 - std::cos(cap.radius)) == doctest::Approx(1.0).epsilon(1e-9));

  const auto cap2 = SphericalCap::from_radius(unit3(0, 0, 1), cap.radius);
  CHECK(cap2.area == doctest::Approx(1.0).epsilon(1e-9));

  // general-dimension inverse consistency
  for (const double a : {0.5, 1.0, 4.0}) {
    const double r4 = cap_radius_from_area(a, 4);
    CHECK(cap_area(r4, 4) == doctest::Approx(a).epsilon(1e-9));
  }
  // the full sphere is a cap of radius pi
  CHECK(cap_area(kPi, 3) == doctest::Approx(sphere_area(3)).epsilon(1e-12));
  CHECK(cap_area(kPi, 5) == doctest::Approx(sphere_area(5)).epsilon(1e-9));

  CHECK_THROWS(SphericalCap::from_radius(unit3(0, 0, 1), 0.0));
  CHECK_THROWS(SphericalCap::from_radius(unit3(0, 0, 1), 4.0));
  CHECK_THROWS(SphericalCap::from_area(unit3(0, 0, 1), 0.0));
  CHECK_THROWS(SphericalCap::from_area(unit3(0, 0, 1), 100.0));
}

TEST_CASE("cap sampling stays on the cap and on the sphere") {
  Rng rng(11);
  const auto cap = SphericalCap::from_area(unit3(0.2, -0.4, 0.7), 1.0);
  for (int i = 0; i < 10000; ++i) {
    const Vec s = sample_cap_uniform(cap, rng);
    CHECK(std::abs(s.norm() - 1.0) <= 1e-9);
    CHECK(geodesic_distance(s, cap.center) <= cap.radius + 1e-9);
  }
}

TEST_CASE("cap sampling matches the analytic height mean") {
  // For the area-1 cap at the north pole the height coordinate is uniform
  // on [cos(theta_max), 1]; its mean is (1 + cos(theta_max)) / 2.
  Rng rng(13);
  const auto cap = SphericalCap::from_area(unit3(0, 0, 1), 1.0);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_cap_uniform(cap, rng)[2];
  const double mean = sum / n;
  const double expected = 0.9204225284540523;
  const double se = (1.0 - std::cos(kAreaOneRadius)) / std::sqrt(12.0 * n);
  CHECK(std::abs(mean - expected) <= 3.0 * se);

  // same statistic against a rotated center
  const Vec c = unit3(0.5, 0.5, -0.3);
  const auto cap_r = SphericalCap::from_area(c, 1.0);
  sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_cap_uniform(cap_r, rng).dot(c);
  CHECK(std::abs(sum / n - expected) <= 3.0 * se);
}

TEST_CASE("cap sampling is uniform across equal-area annuli") {
  // chi-square over 10 equal-area bins; 0.999 quantile at 9 dof
  const double kChi2Crit = 27.877164871256568;

  SUBCASE("inverse-CDF sampler on S^2") {
    Rng rng(17);
    const auto cap = SphericalCap::from_area(unit3(0, 0, 1), 1.0);
    const int n = 100000;
    const double zmin = std::cos(cap.radius);
    int counts[10] = {0};
    for (int i = 0; i < n; ++i) {
      const double z = sample_cap_uniform(cap, rng)[2];
      int bin = static_cast<int>((z - zmin) / (1.0 - zmin) * 10.0);
      bin = std::min(std::max(bin, 0), 9);
      ++counts[bin];
    }
    double stat = 0.0;
    const double expected = n / 10.0;
    for (int c : counts) stat += (c - expected) * (c - expected) / expected;
    CHECK(stat < kChi2Crit);
  }

  SUBCASE("rejection sampler on S^3") {
    Rng rng(19);
    Vec pole = Vec::Unit(4, 3);
    const auto cap = SphericalCap::from_area(pole, 1.0);
    double edges[11];
    for (int i = 0; i <= 10; ++i) {
      edges[i] = i == 0 ? 0.0 : cap_radius_from_area(cap.area * i / 10.0, 4);
    }
    const int n = 20000;
    int counts[10] = {0};
    for (int i = 0; i < n; ++i) {
      const double d = geodesic_distance(sample_cap_uniform(cap, rng), pole);
      for (int b = 0; b < 10; ++b) {
        if (d <= edges[b + 1]) {
          ++counts[b];
          break;
        }
      }
    }
    double stat = 0.0;
    const double expected = n / 10.0;
    for (int c : counts) stat += (c - expected) * (c - expected) / expected;
    CHECK(stat < kChi2Crit);
  }

  SUBCASE("arc sampler on S^1") {
    Rng rng(23);
    Vec pole = Vec::Unit(2, 1);
    const auto cap = SphericalCap::from_radius(pole, 0.8);
    const int n = 20000;
    int counts[10] = {0};
    for (int i = 0; i < n; ++i) {
      const double d = geodesic_distance(sample_cap_uniform(cap, rng), pole);
      int bin = static_cast<int>(d / cap.radius * 10.0);
      bin = std::min(std::max(bin, 0), 9);
      ++counts[bin];
    }
    double stat = 0.0;
    const double expected = n / 10.0;
    for (int c : counts) stat += (c - expected) * (c - expected) / expected;
    CHECK(stat < kChi2Crit);
  }
}

TEST_CASE("rejection sampler aborts on vanishing acceptance") {
  Rng rng(29);
  Vec pole = Vec::Unit(6, 5);
  const auto cap = SphericalCap::from_radius(pole, 0.001);
  CHECK(cap.area / sphere_area(6) < 1e-6);
  CHECK_THROWS_AS(sample_cap_uniform(cap, rng), std::runtime_error);
}

TEST_CASE("augment basics") {
  Rng rng(31);
  const Vec x = unit3(0.1, -0.7, 0.4);

  SUBCASE("zero radius is the identity") {
    const Vec y = augment(x, 0.0, rng);
    CHECK(y == x);
  }

  SUBCASE("support constraint and near-boundary order statistics") {
    const Vec pole = unit3(0, 0, 1);
    double max_d = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double d = geodesic_distance(augment(pole, 0.1, rng), pole);
      CHECK(d <= 0.1 + 1e-12);
      max_d = std::max(max_d, d);
    }
    // the maximum of 1e4 uniform cap draws sits essentially at the boundary
    CHECK(max_d >= 0.095);
    CHECK(max_d <= 0.1);
  }

  SUBCASE("invalid radius rejected") {
    CHECK_THROWS(augment(x, -0.1, rng));
    CHECK_THROWS(augment(x, 3.5, rng));
  }

  SUBCASE("distributionally symmetric about the center") {
    const int n = 20000;
    const double r = 0.3;
    Mat tang(n, 3);
    for (int i = 0; i < n; ++i) {
      const Vec s = augment(x, r, rng);
      tang.row(i) = (s - s.dot(x) * x).transpose();
    }
    const Vec mean = tang.colwise().mean().transpose();
    double trace_cov = 0.0;
    for (int c = 0; c < 3; ++c) {
      trace_cov += (tang.col(c).array() - mean[c]).square().mean();
    }
    CHECK(mean.norm() <= 3.0 * std::sqrt(trace_cov / n));
  }
}

TEST_CASE("make_dataset contracts") {
  SUBCASE("two-cap preset geometry") {
    const auto ds = two_pole_dataset(250, 1.0, 42);
    CHECK(ds.size() == 500);
    CHECK(ds.num_classes() == 2);
    CHECK(ds.caps[0].radius == doctest::Approx(kAreaOneRadius).epsilon(1e-12));
    CHECK(ds.misplaced == 0);
    int count0 = 0;
    for (int i = 0; i < ds.size(); ++i) {
      count0 += ds.labels[i] == 0 ? 1 : 0;
      CHECK(std::abs(ds.points.row(i).norm() - 1.0) <= 1e-9);
      const auto& cap = ds.caps[ds.labels[i]];
      CHECK(geodesic_distance(ds.points.row(i).transpose(), cap.center) <=
            cap.radius + 1e-9);
    }
    CHECK(count0 == 250);
  }

  SUBCASE("deterministic in the seed") {
    const auto a = two_pole_dataset(100, 1.0, 7);
    const auto b = two_pole_dataset(100, 1.0, 7);
    CHECK(a.points == b.points);
    CHECK(a.labels == b.labels);
    const auto c = two_pole_dataset(100, 1.0, 8);
    CHECK(a.points != c.points);
  }

  SUBCASE("single class labels everything 0") {
    const auto ds = make_dataset(1, 50, {unit3(0, 0, 1)}, CapExtent::area(1.0), 3);
    for (int l : ds.labels) CHECK(l == 0);
  }

  SUBCASE("radius parameterization") {
    const auto ds =
        make_dataset(1, 50, {unit3(0, 0, 1)}, CapExtent::radius(0.25), 3);
    CHECK(ds.caps[0].radius == doctest::Approx(0.25));
  }

  SUBCASE("overlapping caps are counted, not rejected") {
    const auto ds = make_dataset(
        2, 200, {unit3(1, 0, 0), unit3(0.995, 0.0998, 0)}, CapExtent::area(1.0), 5);
    CHECK(ds.misplaced > 0);
  }

  SUBCASE("bad inputs rejected") {
    CHECK_THROWS(make_dataset(2, 10, {unit3(0, 0, 1)}, CapExtent::area(1.0), 1));
    CHECK_THROWS(make_dataset(2, 10, {unit3(0, 0, 1), unit3(0, 0, 1)},
                              CapExtent::area(1.0), 1));
    CHECK_THROWS(make_dataset(0, 10, {}, CapExtent::area(1.0), 1));
  }
}
