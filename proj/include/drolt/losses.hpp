// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "drolt/centroids.hpp"
#include "drolt/epsilon.hpp"
#include "drolt/geometry.hpp"

namespace drolt {

/// How the per-class weights w(c) of the centroid losses are chosen.
enum class WeightMode {
  inverse_count,  // w(c) = 1 / |S_c| with the dataset-level class count
  in_batch,       // w(c) = 1 / (number of class-c samples in the batch)
  uniform,        // w(c) = 1
};

std::string_view to_string(WeightMode m);
WeightMode parse_weight_mode(std::string_view name);

/// A minibatch of embeddings (one row per sample) with labels and per-class weights.
///
/// The rows of `embeddings` are the set Z over which every likelihood is normalized.
struct FeatureBatch {
  Matrix embeddings;
  std::vector<int> labels;
  std::vector<double> class_weights;  // indexed by class id

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(embeddings.cols()); }
  int num_classes() const { return static_cast<int>(class_weights.size()); }
};

/// Weights for `batch_labels` under `mode`. `dataset_counts` fixes the number of classes.
std::vector<double> class_weights(WeightMode mode, std::span<const std::size_t> dataset_counts,
                                  std::span<const int> batch_labels);

/// Gradients are zero-filled when not applicable; grad_epsilon is d loss / d eps_c.
struct LossResult {
  double value = 0.0;
  Matrix grad_embeddings;           // batch.size() x dim
  Matrix grad_centroids;            // num_classes x dim
  std::vector<double> grad_epsilon;  // num_classes
};

/// exp(-d(centroid, z)) / sum_{z' in batch} exp(-d(centroid, z')). `z` must be a row of the batch.
double sample_likelihood(const Vector& z, const Vector& centroid, const FeatureBatch& all);

/// -sum_c w(c) sum_{z in S_c} log P(z | mu_c).
LossResult nll_loss(const FeatureBatch& batch, const CentroidBank& bank);

/// The robust surrogate: every own-class distance in the numerator and the denominator is
/// inflated by 2 eps_c. grad_epsilon is reported only for the learned variant.
LossResult robust_loss(const FeatureBatch& batch, const CentroidBank& bank, const EpsilonPolicy& eps);
/// Same, with explicit per-class radii; grad_epsilon is always filled.
LossResult robust_loss(const FeatureBatch& batch, const CentroidBank& bank, std::span<const double> eps);

/// Unweighted per-sample terms of the respective losses.
std::vector<double> nll_per_sample(const FeatureBatch& batch, const CentroidBank& bank);
std::vector<double> robust_loss_per_sample(const FeatureBatch& batch, const CentroidBank& bank,
                                           std::span<const double> eps);
std::vector<double> lower_bound_loss(const FeatureBatch& batch, const CentroidBank& bank,
                                     std::span<const double> eps);
std::vector<double> lower_bound_loss(const FeatureBatch& batch, const CentroidBank& bank, const EpsilonPolicy& eps);

/// Mean over samples of (upper - lower) / upper. Throws DomainError when some per-sample
/// robust loss is zero (e.g. a batch of one sample).
double bound_gap_ratio(const FeatureBatch& batch, const CentroidBank& bank, std::span<const double> eps);
double bound_gap_ratio(const FeatureBatch& batch, const CentroidBank& bank, const EpsilonPolicy& eps);

/// Mean softmax cross-entropy over the rows of `logits`.
struct CrossEntropyResult {
  double value = 0.0;
  Matrix grad_logits;
};
CrossEntropyResult cross_entropy(const Matrix& logits, std::span<const int> labels);

struct JointLoss {
  double value = 0.0;
  double ce = 0.0;
  double robust = 0.0;
  Matrix grad_logits;
  Matrix grad_embeddings;
  Matrix grad_centroids;
  std::vector<double> grad_epsilon;
};

/// lambda * CE + (1 - lambda) * robust, gradients combined the same way. lambda in [0, 1].
JointLoss joint_loss(const CrossEntropyResult& ce, const LossResult& robust, double lambda);

}  // namespace drolt
