#include "overlap/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace overlap {

namespace {

constexpr double kPi = std::numbers::pi;

// Composite Simpson rule for \int_0^theta sin^k(t) dt.
double integrate_sin_power(double theta, int k) {
  const int intervals = 1 << 14; // even
  const double h = theta / intervals;
  auto f = [k](double t) { return std::pow(std::sin(t), k); };
  double sum = f(0.0) + f(theta);
  for (int i = 1; i < intervals; ++i) {
    sum += f(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return sum * h / 3.0;
}

// Householder reflection taking the last coordinate axis to `center`.
// An isometry of the sphere, so uniform samples stay uniform.
Vec reflect_pole_to(const Vec& center, Vec p) {
  const int n = static_cast<int>(center.size());
  Vec u = Vec::Unit(n, n - 1) - center;
  const double uu = u.squaredNorm();
  if (uu > 1e-24) {
    p -= u * (2.0 * u.dot(p) / uu);
  }
  p.normalize();
  return p;
}

}  // namespace

double geodesic_distance(const Eigen::Ref<const Vec>& u,
                         const Eigen::Ref<const Vec>& v) {
  const double dot = std::clamp(u.dot(v), -1.0, 1.0);
  return std::acos(dot);
}

double sphere_area(int ambient_dim) {
  if (ambient_dim < 1) {
    throw std::invalid_argument("sphere_area: ambient dimension must be >= 1");
  }
  const double half = 0.5 * ambient_dim;
  return 2.0 * std::pow(kPi, half) / std::tgamma(half);
}

double cap_area(double radius, int ambient_dim) {
  if (ambient_dim < 2) {
    throw std::invalid_argument("cap_area: ambient dimension must be >= 2");
  }
  if (!(radius > 0.0 && radius <= kPi)) {
    throw std::invalid_argument("cap_area: radius must lie in (0, pi]");
  }
  if (ambient_dim == 2) {
    return 2.0 * radius; // arc length
  }
  if (ambient_dim == 3) {
    return 2.0 * kPi * (1.0 - std::cos(radius));
  }
  return sphere_area(ambient_dim - 1) *
         integrate_sin_power(radius, ambient_dim - 2);
}

double cap_radius_from_area(double area, int ambient_dim) {
  if (ambient_dim < 2) {
    throw std::invalid_argument(
        "cap_radius_from_area: ambient dimension must be >= 2");
  }
  const double total = sphere_area(ambient_dim);
  if (!(area > 0.0 && area <= total + 1e-12)) {
    throw std::invalid_argument(
        "cap_radius_from_area: area must lie in (0, sphere area]");
  }
  if (ambient_dim == 2) {
    return std::min(area / 2.0, kPi);
  }
  if (ambient_dim == 3) {
    return std::acos(std::clamp(1.0 - area / (2.0 * kPi), -1.0, 1.0));
  }
  // cap_area is strictly increasing in the radius; bisect.
  double lo = 0.0, hi = kPi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cap_area(mid, ambient_dim) < area) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

SphericalCap SphericalCap::from_radius(Vec center, double radius) {
  if (!(radius > 0.0 && radius <= kPi)) {
    throw std::invalid_argument("SphericalCap: radius must lie in (0, pi]");
  }
  if (std::abs(center.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("SphericalCap: center must be unit-norm");
  }
  SphericalCap cap;
  cap.area = cap_area(radius, static_cast<int>(center.size()));
  cap.center = std::move(center);
  cap.radius = radius;
  return cap;
}

SphericalCap SphericalCap::from_area(Vec center, double area) {
  const double radius =
      cap_radius_from_area(area, static_cast<int>(center.size()));
  SphericalCap cap = from_radius(std::move(center), radius);
  cap.area = area;
  return cap;
}

SphericalCap CapExtent::make_cap(Vec center) const {
  return kind == Kind::Area ? SphericalCap::from_area(std::move(center), value)
                            : SphericalCap::from_radius(std::move(center), value);
}

Vec sample_sphere_uniform(int ambient_dim, Rng& rng) {
  if (ambient_dim < 2) {
    throw std::invalid_argument(
        "sample_sphere_uniform: ambient dimension must be >= 2");
  }
  Vec v(ambient_dim);
  double norm;
  do {
    for (int i = 0; i < ambient_dim; ++i) {
      v[i] = rng.normal();
    }
    norm = v.norm();
  } while (norm < 1e-12);
  return v / norm;
}

Vec sample_cap_uniform(const SphericalCap& cap, Rng& rng) {
  const int n = cap.ambient_dim();
  if (n < 2) {
    throw std::invalid_argument(
        "sample_cap_uniform: ambient dimension must be >= 2");
  }
  if (n == 2) {
    const double a = rng.uniform(-cap.radius, cap.radius);
    Vec p(2);
    p << std::sin(a), std::cos(a);
    return reflect_pole_to(cap.center, std::move(p));
  }
  if (n == 3) {
    // Area measure on S^2 is uniform in the height coordinate.
    const double z = rng.uniform(std::cos(cap.radius), 1.0);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    Vec p(3);
    p << s * std::cos(phi), s * std::sin(phi), z;
    return reflect_pole_to(cap.center, std::move(p));
  }
  // Reference method for higher dimensions: rejection from the full sphere.
  const double accept = cap.area / sphere_area(n);
  if (accept < 1e-6) {
    throw std::runtime_error(
        "sample_cap_uniform: expected acceptance rate " +
        std::to_string(accept) +
        " below 1e-6; cap too small for this dimension");
  }
  const long max_attempts = 100'000'000;
  for (long attempt = 0; attempt < max_attempts; ++attempt) {
    Vec v = sample_sphere_uniform(n, rng);
    if (geodesic_distance(v, cap.center) <= cap.radius) {
      return v;
    }
  }
  throw std::runtime_error("sample_cap_uniform: rejection sampler exhausted");
}

Vec augment(const Eigen::Ref<const Vec>& x, double r, Rng& rng) {
  if (r < 0.0 || r > kPi) {
    throw std::invalid_argument(
        "augment: radius must lie in [0, pi], got " + std::to_string(r));
  }
  if (r == 0.0) {
    return x;
  }
  return sample_cap_uniform(SphericalCap::from_radius(x, r), rng);
}

LabeledSphereDataset make_dataset(int num_classes, int per_class,
                                  const std::vector<Vec>& centers,
                                  const CapExtent& extent,
                                  std::uint64_t seed) {
  if (num_classes <= 0 || per_class <= 0) {
    throw std::invalid_argument("make_dataset: class count and size must be positive");
  }
  if (static_cast<int>(centers.size()) != num_classes) {
    throw std::invalid_argument("make_dataset: need one center per class");
  }
  std::vector<Vec> unit_centers;
  unit_centers.reserve(centers.size());
  for (const Vec& c : centers) {
    if (c.norm() < 1e-12) {
      throw std::invalid_argument("make_dataset: zero center");
    }
    unit_centers.push_back(c.normalized());
  }
  for (size_t a = 0; a < unit_centers.size(); ++a) {
    for (size_t b = a + 1; b < unit_centers.size(); ++b) {
      if (geodesic_distance(unit_centers[a], unit_centers[b]) < 1e-12) {
        throw std::invalid_argument("make_dataset: centers must be pairwise distinct");
      }
    }
  }

  LabeledSphereDataset ds;
  ds.seed = seed;
  const int ambient = static_cast<int>(unit_centers.front().size());
  const int n = num_classes * per_class;
  ds.points.resize(n, ambient);
  ds.labels.resize(n);
  ds.caps.reserve(num_classes);

  Rng rng(seed);
  int row = 0;
  for (int k = 0; k < num_classes; ++k) {
    ds.caps.push_back(extent.make_cap(unit_centers[k]));
    for (int i = 0; i < per_class; ++i, ++row) {
      ds.points.row(row) = sample_cap_uniform(ds.caps.back(), rng).transpose();
      ds.labels[row] = k;
    }
  }

  for (int i = 0; i < n; ++i) {
    const double own =
        geodesic_distance(ds.points.row(i), unit_centers[ds.labels[i]]);
    for (int k = 0; k < num_classes; ++k) {
      if (k == ds.labels[i]) continue;
      if (geodesic_distance(ds.points.row(i), unit_centers[k]) < own) {
        ++ds.misplaced;
        break;
      }
    }
  }
  return ds;
}

LabeledSphereDataset two_pole_dataset(int per_class, double cap_area,
                                      std::uint64_t seed) {
  Vec north(3), south(3);
  north << 0, 0, 1;
  south << 0, 0, -1;
  return make_dataset(2, per_class, {north, south}, CapExtent::area(cap_area),
                      seed);
}

}  // namespace overlap
