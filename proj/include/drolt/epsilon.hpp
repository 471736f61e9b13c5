// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace drolt {

enum class EpsilonVariant { shared, sqrt_n, learned };

std::string_view to_string(EpsilonVariant v);
/// Accepts "shared", "sqrt_n", "learned". Throws DomainError otherwise.
EpsilonVariant parse_epsilon_variant(std::string_view name);

/// log(1 + e^x), evaluated without overflow.
double softplus(double x);
/// Inverse of softplus on (0, inf).
double softplus_inverse(double y);
/// d softplus / dx, i.e. the logistic sigmoid.
double softplus_derivative(double x);

/// Per-class uncertainty radius (the metric radius consumed by the robust loss).
///
/// shared:  every class gets `value`.
/// sqrt_n:  class c gets value / sqrt(n_c).
/// learned: class c gets softplus(param_c); the params are trained.
class EpsilonPolicy {
 public:
  static EpsilonPolicy shared(double value, std::vector<std::size_t> class_counts);
  static EpsilonPolicy sqrt_n(double value, std::vector<std::size_t> class_counts);
  /// Every class starts at radius `initial` (> 0).
  static EpsilonPolicy learned(std::vector<std::size_t> class_counts, double initial = 1.0);
  static EpsilonPolicy learned_from_params(std::vector<std::size_t> class_counts, std::vector<double> params);

  EpsilonVariant variant() const { return variant_; }
  bool is_learned() const { return variant_ == EpsilonVariant::learned; }
  double shared_value() const { return shared_value_; }
  std::span<const double> params() const { return params_; }
  std::span<const std::size_t> class_counts() const { return counts_; }
  int num_classes() const { return static_cast<int>(counts_.size()); }

  double epsilon_for_class(int c) const;
  std::vector<double> epsilons() const;

  /// Chain rule through the softplus: d loss / d param_c from d loss / d eps_c.
  /// Returns zeros for the non-learned variants.
  std::vector<double> param_gradient(std::span<const double> grad_epsilon) const;

 private:
  EpsilonPolicy(EpsilonVariant v, double value, std::vector<std::size_t> counts, std::vector<double> params);

  EpsilonVariant variant_;
  double shared_value_;
  std::vector<std::size_t> counts_;
  std::vector<double> params_;
};

/// One SGD step on the learned parameters. `grad_epsilon` is d loss / d eps_c.
EpsilonPolicy update_learned_epsilon(const EpsilonPolicy& policy, std::span<const double> grad_epsilon, double lr);

}  // namespace drolt
