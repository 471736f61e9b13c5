// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "drolt/data.hpp"
#include "drolt/epsilon.hpp"
#include "drolt/model.hpp"

namespace drolt {

/// Accuracy per frequency split. A split with no classes is absent (nullopt), not zero.
struct SplitAccuracy {
  std::optional<double> many;
  std::optional<double> med;
  std::optional<double> few;
  double balanced = 0.0;  // unweighted mean of per-class accuracies
};

/// Fraction of correct predictions per class; classes without samples get nullopt.
std::vector<std::optional<double>> per_class_accuracy(std::span<const int> predictions, std::span<const int> labels,
                                                      int num_classes);

/// Split and balanced accuracies; each split reports the mean of its classes' accuracies.
SplitAccuracy split_accuracy(std::span<const int> predictions, std::span<const int> labels, const ClassSplits& splits,
                             int num_classes);

/// Classifier accuracy of `net` on the balanced test set.
SplitAccuracy test_accuracy(const Network& net, const LongTailDataset& ds);

/// Nearest-centroid classification at one layer: layer 0 is the raw input, layer l >= 1 is
/// the output of backbone layer l (the last one is the embedding). Centroids come from the
/// training set, queries from the test set; ties go to the lowest class id.
SplitAccuracy nearest_centroid_probe(const Network& net, const LongTailDataset& ds, int layer);

struct ProbeRow {
  int layer = 0;
  int width = 0;
  SplitAccuracy accuracy;
};
std::vector<ProbeRow> probe_all_layers(const Network& net, const LongTailDataset& ds);
void write_probe_csv(std::ostream& os, const std::vector<ProbeRow>& rows);

/// Monte-Carlo estimate of the probability that the empirical centroid of n draws from
/// N(0, sigma^2 I_d) lies within eps_metric of the true mean.
struct CoverageEstimate {
  double p_hat = 0.0;
  std::size_t trials = 0;
  double std_error = 0.0;  // sqrt(p_hat (1 - p_hat) / trials)
};
CoverageEstimate estimate_coverage(int n, double sigma, int d, double eps_metric, std::size_t trials,
                                   std::uint64_t seed);
/// Closed form of the same probability: chi-square CDF with d degrees of freedom at n eps^2 / sigma^2.
double coverage_closed_form(int n, double sigma, int d, double eps_metric);

struct ErrorGapRow {
  int cls = 0;
  std::size_t count = 0;
  double train_error = 0.0;
  double test_error = 0.0;
  double gap() const { return test_error - train_error; }
};
/// Per-class train and balanced-test error, sorted by class count (descending, then class id).
std::vector<ErrorGapRow> error_gap_report(const Network& net, const LongTailDataset& ds);
void write_error_gap_csv(std::ostream& os, const std::vector<ErrorGapRow>& rows);

struct EpsilonRow {
  int cls = 0;
  std::size_t count = 0;
  double epsilon = 0.0;
};
struct EpsilonReport {
  std::vector<EpsilonRow> rows;
  std::optional<double> spearman;  // count vs epsilon; absent when either side is constant
};
EpsilonReport epsilon_report(const EpsilonPolicy& policy, std::span<const std::size_t> class_counts);
void write_epsilon_csv(std::ostream& os, const EpsilonReport& report);

/// Spearman rank correlation with average ranks for ties; nullopt when undefined.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

}  // namespace drolt
