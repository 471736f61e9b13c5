// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "drolt/epsilon.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "drolt/error.hpp"

namespace drolt {

std::string_view to_string(EpsilonVariant v) {
  switch (v) {
    case EpsilonVariant::shared:
      return "shared";
    case EpsilonVariant::sqrt_n:
      return "sqrt_n";
    case EpsilonVariant::learned:
      return "learned";
  }
  return "unknown";
}

EpsilonVariant parse_epsilon_variant(std::string_view name) {
  if (name == "shared") return EpsilonVariant::shared;
  if (name == "sqrt_n") return EpsilonVariant::sqrt_n;
  if (name == "learned") return EpsilonVariant::learned;
  throw DomainError("unknown epsilon variant '" + std::string(name) + "' (expected shared, sqrt_n or learned)");
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw DomainError("softplus_inverse: argument must be positive");
  // log(e^y - 1) = y + log(1 - e^-y)
  return y + std::log(-std::expm1(-y));
}

double softplus_derivative(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

EpsilonPolicy::EpsilonPolicy(EpsilonVariant v, double value, std::vector<std::size_t> counts,
                             std::vector<double> params)
    : variant_(v), shared_value_(value), counts_(std::move(counts)), params_(std::move(params)) {
  if (counts_.empty()) throw DomainError("EpsilonPolicy: at least one class required");
}

EpsilonPolicy EpsilonPolicy::shared(double value, std::vector<std::size_t> class_counts) {
  if (!(value >= 0.0) || !std::isfinite(value)) throw DomainError("EpsilonPolicy: shared value must be >= 0");
  return EpsilonPolicy(EpsilonVariant::shared, value, std::move(class_counts), {});
}

EpsilonPolicy EpsilonPolicy::sqrt_n(double value, std::vector<std::size_t> class_counts) {
  if (!(value >= 0.0) || !std::isfinite(value)) throw DomainError("EpsilonPolicy: sqrt_n value must be >= 0");
  for (std::size_t c = 0; c < class_counts.size(); ++c) {
    if (class_counts[c] == 0) {
      throw DomainError("EpsilonPolicy: sqrt_n needs a positive count for class " + std::to_string(c));
    }
  }
  return EpsilonPolicy(EpsilonVariant::sqrt_n, value, std::move(class_counts), {});
}

EpsilonPolicy EpsilonPolicy::learned(std::vector<std::size_t> class_counts, double initial) {
  const double p = softplus_inverse(initial);
  std::vector<double> params(class_counts.size(), p);
  return EpsilonPolicy(EpsilonVariant::learned, 0.0, std::move(class_counts), std::move(params));
}

EpsilonPolicy EpsilonPolicy::learned_from_params(std::vector<std::size_t> class_counts, std::vector<double> params) {
  if (params.size() != class_counts.size()) throw DimensionError("EpsilonPolicy: one parameter per class required");
  for (double p : params) {
    if (!std::isfinite(p)) throw DomainError("EpsilonPolicy: non-finite learned parameter");
  }
  return EpsilonPolicy(EpsilonVariant::learned, 0.0, std::move(class_counts), std::move(params));
}

double EpsilonPolicy::epsilon_for_class(int c) const {
  if (c < 0 || c >= num_classes()) {
    throw LookupError("epsilon_for_class: unknown class " + std::to_string(c));
  }
  switch (variant_) {
    case EpsilonVariant::shared:
      return shared_value_;
    case EpsilonVariant::sqrt_n:
      return shared_value_ / std::sqrt(static_cast<double>(counts_[c]));
    case EpsilonVariant::learned:
      return softplus(params_[c]);
  }
  return 0.0;
}

std::vector<double> EpsilonPolicy::epsilons() const {
  std::vector<double> out(counts_.size());
  for (int c = 0; c < num_classes(); ++c) out[c] = epsilon_for_class(c);
  return out;
}

std::vector<double> EpsilonPolicy::param_gradient(std::span<const double> grad_epsilon) const {
  if (static_cast<int>(grad_epsilon.size()) != num_classes()) {
    throw DimensionError("param_gradient: one gradient entry per class required");
  }
  std::vector<double> out(grad_epsilon.size(), 0.0);
  if (!is_learned()) return out;
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = grad_epsilon[c] * softplus_derivative(params_[c]);
  return out;
}

EpsilonPolicy update_learned_epsilon(const EpsilonPolicy& policy, std::span<const double> grad_epsilon, double lr) {
  if (!policy.is_learned()) {
    throw StateError("update_learned_epsilon: policy variant is '" + std::string(to_string(policy.variant())) +
                     "', not learned");
  }
  if (!(lr >= 0.0)) throw DomainError("update_learned_epsilon: lr must be nonnegative");
  const std::vector<double> g = policy.param_gradient(grad_epsilon);
  std::vector<double> params(policy.params().begin(), policy.params().end());
  for (std::size_t c = 0; c < params.size(); ++c) params[c] -= lr * g[c];
  return EpsilonPolicy::learned_from_params(
      std::vector<std::size_t>(policy.class_counts().begin(), policy.class_counts().end()), std::move(params));
}

}  // namespace drolt
