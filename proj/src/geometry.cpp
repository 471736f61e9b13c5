// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "drolt/geometry.hpp"

#include <cmath>
#include <string>

#include "drolt/error.hpp"

namespace drolt {

double euclidean_distance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("euclidean_distance: dimension mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  return (a - b).norm();
}

double kl_spherical_gaussian(const Vector& mu_q, const Vector& mu_p, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("kl_spherical_gaussian: sigma must be positive");
  const double d = euclidean_distance(mu_q, mu_p);
  return d * d / (2.0 * sigma * sigma);
}

Radius radius_from_divergence(double kl_radius, double sigma) {
  if (!(kl_radius >= 0.0) || !(sigma >= 0.0)) {
    throw DomainError("radius_from_divergence: kl_radius and sigma must be nonnegative");
  }
  return Radius{kl_radius, sigma, sigma * std::sqrt(2.0 * kl_radius)};
}

}  // namespace drolt
