// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "drolt/centroids.hpp"

#include <ostream>
#include <string>

#include "drolt/error.hpp"
#include "textio.hpp"

namespace drolt {

CentroidBank CentroidBank::recompute(const Matrix& features, std::span<const int> labels, int num_classes,
                                     int epoch) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw DimensionError("CentroidBank::recompute: " + std::to_string(features.rows()) + " feature rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 1) throw DomainError("CentroidBank::recompute: num_classes must be positive");

  const Eigen::Index d = features.cols();
  CentroidBank bank;
  bank.epoch_ = epoch;
  bank.centroids_.assign(num_classes, Vector::Zero(d));
  bank.counts_.assign(num_classes, 0);
  bank.spreads_.assign(num_classes, 0.0);

  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= num_classes) {
      throw LookupError("CentroidBank::recompute: label " + std::to_string(c) + " out of range");
    }
    bank.centroids_[c] += features.row(static_cast<Eigen::Index>(i)).transpose();
    ++bank.counts_[c];
  }
  for (int c = 0; c < num_classes; ++c) {
    if (bank.counts_[c] == 0) {
      throw DomainError("CentroidBank::recompute: class " + std::to_string(c) + " has no samples");
    }
    bank.centroids_[c] /= static_cast<double>(bank.counts_[c]);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    bank.spreads_[c] += (features.row(static_cast<Eigen::Index>(i)).transpose() - bank.centroids_[c]).norm();
  }
  for (int c = 0; c < num_classes; ++c) bank.spreads_[c] /= static_cast<double>(bank.counts_[c]);
  return bank;
}

CentroidBank CentroidBank::from_centroids(const Matrix& centroids, int epoch) {
  if (centroids.rows() < 1) throw DomainError("CentroidBank::from_centroids: no classes");
  CentroidBank bank;
  bank.epoch_ = epoch;
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) bank.centroids_.push_back(centroids.row(c).transpose());
  bank.counts_.assign(bank.centroids_.size(), 0);
  bank.spreads_.assign(bank.centroids_.size(), 0.0);
  return bank;
}

const Vector& CentroidBank::get(int c) const {
  if (c < 0 || c >= num_classes()) throw LookupError("CentroidBank: no centroid for class " + std::to_string(c));
  return centroids_[c];
}

void CentroidBank::write_csv(std::ostream& os) const {
  os << "class,count,spread";
  for (int k = 0; k < dim(); ++k) os << ",c" << k;
  os << '\n';
  for (int c = 0; c < num_classes(); ++c) {
    os << c << ',' << counts_[c] << ',' << textio::exact(spreads_[c]);
    for (int k = 0; k < dim(); ++k) os << ',' << textio::exact(centroids_[c][k]);
    os << '\n';
  }
}

}  // namespace drolt
