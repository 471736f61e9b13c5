// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <Eigen/Core>

namespace drolt {

using Vector = Eigen::VectorXd;
/// Samples are stored one per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Plain (non-squared) L2 distance. Throws DimensionError on size mismatch.
double euclidean_distance(const Vector& a, const Vector& b);

/// KL(q || p) between two spherical Gaussians sharing the standard deviation sigma:
/// ||mu_q - mu_p||^2 / (2 sigma^2).
double kl_spherical_gaussian(const Vector& mu_q, const Vector& mu_p, double sigma);

/// A KL budget together with the Euclidean centroid displacement it allows.
struct Radius {
  double kl_radius = 0.0;
  double sigma = 0.0;
  double metric_radius = 0.0;  // sigma * sqrt(2 * kl_radius)
};

/// Any centroid mu_q with KL(q || p) <= kl_radius lies within metric_radius of mu_p.
Radius radius_from_divergence(double kl_radius, double sigma);

}  // namespace drolt
