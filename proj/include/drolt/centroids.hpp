// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "drolt/geometry.hpp"

namespace drolt {

/// Per-class empirical centroids, frozen between two calls to recompute().
///
/// The bank is immutable once built; a new epoch gets a new bank.
class CentroidBank {
 public:
  /// Exact per-class means and spreads of `features` (one row per sample).
  /// Every class in [0, num_classes) must have at least one sample.
  static CentroidBank recompute(const Matrix& features, std::span<const int> labels, int num_classes, int epoch);

  /// A bank with given centroids (one row per class); counts and spreads are left at zero.
  static CentroidBank from_centroids(const Matrix& centroids, int epoch = 0);

  const Vector& get(int c) const;
  int num_classes() const { return static_cast<int>(centroids_.size()); }
  int dim() const { return centroids_.empty() ? 0 : static_cast<int>(centroids_.front().size()); }
  std::span<const std::size_t> counts() const { return counts_; }
  /// Mean Euclidean distance of a class's samples to its centroid.
  std::span<const double> spreads() const { return spreads_; }
  int epoch() const { return epoch_; }

  /// class,count,spread,c0,c1,... with 17 significant digits.
  void write_csv(std::ostream& os) const;

 private:
  std::vector<Vector> centroids_;
  std::vector<std::size_t> counts_;
  std::vector<double> spreads_;
  int epoch_ = 0;
};

}  // namespace drolt
