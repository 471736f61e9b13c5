// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "drolt/geometry.hpp"

namespace drolt {

struct SynthSpec {
  int classes = 10;
  int n_max = 500;
  double beta = 100.0;  // imbalance factor n_max / n_min
  int dim = 16;
  double spread = 1.0;      // per-coordinate standard deviation of every class
  double separation = 4.0;  // mean inter-centroid distance, in units of spread
  int test_per_class = 50;
  int val_per_class = 0;
  std::uint64_t seed = 1;
};

/// Gaussian-mixture data with an exponentially decaying class-count profile.
/// Train counts follow `class_counts`; test and validation sets are class-balanced.
struct LongTailDataset {
  SynthSpec spec;
  Matrix true_means;  // classes x dim
  std::vector<std::size_t> class_counts;
  Matrix train_inputs;
  std::vector<int> train_labels;
  Matrix test_inputs;
  std::vector<int> test_labels;
  Matrix val_inputs;
  std::vector<int> val_labels;

  int num_classes() const { return static_cast<int>(class_counts.size()); }
  int dim() const { return static_cast<int>(train_inputs.cols()); }
  std::size_t train_size() const { return train_labels.size(); }
};

/// n_c = round(n_max * beta^(-c / (C - 1))) for c = 0..C-1.
std::vector<std::size_t> long_tail_counts(int classes, int n_max, double beta);

LongTailDataset synthesize(const SynthSpec& spec);

struct SplitSpec {
  std::size_t many_threshold = 100;  // Many: n_c > many_threshold
  std::size_t med_threshold = 20;    // Few: n_c < med_threshold; Med otherwise
};

struct ClassSplits {
  std::vector<int> many;
  std::vector<int> med;
  std::vector<int> few;
};

ClassSplits assign_splits(std::span<const std::size_t> counts, const SplitSpec& spec = {});

/// Infinite stream of training indices in which every class is equally likely.
/// Draws a class uniformly, then a sample of that class uniformly (with replacement).
class BalancedSampler {
 public:
  BalancedSampler(std::span<const int> labels, int num_classes, std::uint64_t seed);

  std::size_t next();

 private:
  std::vector<std::vector<std::size_t>> by_class_;
  std::mt19937_64 rng_;
};

void save_dataset(const LongTailDataset& ds, std::ostream& os);
void save_dataset(const LongTailDataset& ds, const std::filesystem::path& path);
LongTailDataset load_dataset(std::istream& is);
LongTailDataset load_dataset(const std::filesystem::path& path);

inline constexpr int kDatasetFormatVersion = 1;

}  // namespace drolt
