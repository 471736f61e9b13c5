// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "drolt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "drolt/error.hpp"

namespace drolt {

std::string_view to_string(WeightMode m) {
  switch (m) {
    case WeightMode::inverse_count:
      return "inverse_count";
    case WeightMode::in_batch:
      return "in_batch";
    case WeightMode::uniform:
      return "uniform";
  }
  return "unknown";
}

WeightMode parse_weight_mode(std::string_view name) {
  if (name == "inverse_count") return WeightMode::inverse_count;
  if (name == "in_batch") return WeightMode::in_batch;
  if (name == "uniform") return WeightMode::uniform;
  throw DomainError("unknown weight mode '" + std::string(name) + "' (expected inverse_count, in_batch or uniform)");
}

std::vector<double> class_weights(WeightMode mode, std::span<const std::size_t> dataset_counts,
                                  std::span<const int> batch_labels) {
  const std::size_t C = dataset_counts.size();
  std::vector<double> w(C, 0.0);
  switch (mode) {
    case WeightMode::uniform:
      std::fill(w.begin(), w.end(), 1.0);
      break;
    case WeightMode::inverse_count:
      for (std::size_t c = 0; c < C; ++c) w[c] = dataset_counts[c] > 0 ? 1.0 / static_cast<double>(dataset_counts[c]) : 0.0;
      break;
    case WeightMode::in_batch: {
      std::vector<std::size_t> m(C, 0);
      for (int y : batch_labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= C) throw LookupError("class_weights: label " + std::to_string(y) + " out of range");
        ++m[y];
      }
      for (std::size_t c = 0; c < C; ++c) w[c] = m[c] > 0 ? 1.0 / static_cast<double>(m[c]) : 0.0;
      break;
    }
  }
  return w;
}

namespace {

void check_batch(const FeatureBatch& batch) {
  if (batch.size() == 0) throw DomainError("empty feature batch");
  if (static_cast<std::size_t>(batch.embeddings.rows()) != batch.size()) {
    throw DimensionError("feature batch: " + std::to_string(batch.embeddings.rows()) + " embeddings but " +
                         std::to_string(batch.size()) + " labels");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= batch.num_classes()) {
      throw LookupError("feature batch: label " + std::to_string(y) + " has no class weight");
    }
  }
}

void check_bank(const FeatureBatch& batch, const CentroidBank& bank) {
  for (int y : batch.labels) {
    if (y >= bank.num_classes()) throw LookupError("no centroid for class " + std::to_string(y));
  }
  if (bank.dim() != batch.dim()) {
    throw DimensionError("centroid dimension " + std::to_string(bank.dim()) + " does not match embedding dimension " +
                         std::to_string(batch.dim()));
  }
}

void check_eps(std::span<const double> eps, const CentroidBank& bank) {
  if (static_cast<int>(eps.size()) != bank.num_classes()) {
    throw DimensionError("expected " + std::to_string(bank.num_classes()) + " per-class radii, got " +
                         std::to_string(eps.size()));
  }
  for (std::size_t c = 0; c < eps.size(); ++c) {
    if (!(eps[c] >= 0.0) || !std::isfinite(eps[c])) {
      throw DomainError("radius for class " + std::to_string(c) + " must be finite and nonnegative");
    }
  }
}

// Scores s_j = -d(mu_c, z_j) + sign * 2 eps_c * [y_j == c] for every class present in the batch.
// sign = -1 gives the robust upper bound, +1 the lower bound, eps = 0 the plain NLL.
struct MarginPass {
  std::vector<double> per_sample;
  LossResult result;
};

MarginPass margin_pass(const FeatureBatch& batch, const CentroidBank& bank, std::span<const double> eps, double sign,
                       bool with_grads) {
  check_batch(batch);
  check_bank(batch, bank);
  check_eps(eps, bank);

  const auto n = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index d = batch.dim();
  const int C = bank.num_classes();

  MarginPass out;
  out.per_sample.assign(batch.size(), 0.0);
  if (with_grads) {
    out.result.grad_embeddings = Matrix::Zero(n, d);
    out.result.grad_centroids = Matrix::Zero(C, d);
    out.result.grad_epsilon.assign(C, 0.0);
  }

  std::vector<std::size_t> in_batch(C, 0);
  for (int y : batch.labels) ++in_batch[y];

  std::vector<double> dist(n), score(n);
  for (int c = 0; c < C; ++c) {
    if (in_batch[c] == 0) continue;
    const Vector& mu = bank.get(c);
    const double margin = sign * 2.0 * eps[c];

    Eigen::Index arg = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      dist[j] = (batch.embeddings.row(j).transpose() - mu).norm();
      score[j] = -dist[j] + (batch.labels[j] == c ? margin : 0.0);
      if (score[j] > score[arg]) arg = j;
    }
    const double top = score[arg];
    double tail = 0.0;  // sum over j != arg of exp(s_j - top)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != arg) tail += std::exp(score[j] - top);
    }
    const double log1p_tail = std::log1p(tail);
    const double lse = top + log1p_tail;

    const double w = batch.class_weights[c];
    double class_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (batch.labels[i] != c) continue;
      // lse - s_i, keeping full precision when s_i is the largest score
      const double li = (i == arg) ? log1p_tail : (top - score[i]) + log1p_tail;
      out.per_sample[i] = li;
      class_sum += li;
    }
    out.result.value += w * class_sum;

    if (!with_grads) continue;
    const double m = static_cast<double>(in_batch[c]);
    double grad_eps = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool own = batch.labels[j] == c;
      const double p = std::exp(score[j] - lse);
      const double g = w * (m * p - (own ? 1.0 : 0.0));  // d loss / d s_j
      if (own) grad_eps += g * sign * 2.0;
      if (dist[j] > 0.0) {
        const Vector u = (batch.embeddings.row(j).transpose() - mu) / dist[j];
        out.result.grad_embeddings.row(j) -= g * u.transpose();
        out.result.grad_centroids.row(c) += g * u.transpose();
      }
    }
    out.result.grad_epsilon[c] = grad_eps;
  }
  return out;
}

std::vector<double> zeros_like(const CentroidBank& bank) { return std::vector<double>(bank.num_classes(), 0.0); }

}  // namespace

double sample_likelihood(const Vector& z, const Vector& centroid, const FeatureBatch& all) {
  if (all.size() == 0 || all.embeddings.rows() == 0) throw DomainError("sample_likelihood: empty batch");
  if (z.size() != all.dim() || centroid.size() != all.dim()) {
    throw DimensionError("sample_likelihood: dimension mismatch");
  }
  const Eigen::Index n = all.embeddings.rows();
  bool member = false;
  std::vector<double> s(n);
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    s[j] = -(all.embeddings.row(j).transpose() - centroid).norm();
    top = std::max(top, s[j]);
    if (!member && all.embeddings.row(j).transpose() == z) member = true;
  }
  if (!member) throw LookupError("sample_likelihood: z is not a member of the batch");
  double acc = 0.0;
  for (double v : s) acc += std::exp(v - top);
  const double sz = -(z - centroid).norm();
  return std::exp(sz - top - std::log(acc));
}

LossResult nll_loss(const FeatureBatch& batch, const CentroidBank& bank) {
  const auto zeros = zeros_like(bank);
  return margin_pass(batch, bank, zeros, -1.0, true).result;
}

LossResult robust_loss(const FeatureBatch& batch, const CentroidBank& bank, std::span<const double> eps) {
  return margin_pass(batch, bank, eps, -1.0, true).result;
}

LossResult robust_loss(const FeatureBatch& batch, const CentroidBank& bank, const EpsilonPolicy& eps) {
  if (eps.num_classes() != bank.num_classes()) {
    throw DimensionError("epsilon policy covers " + std::to_string(eps.num_classes()) + " classes, bank has " +
                         std::to_string(bank.num_classes()));
  }
  const auto radii = eps.epsilons();
  LossResult r = margin_pass(batch, bank, radii, -1.0, true).result;
  if (!eps.is_learned()) std::fill(r.grad_epsilon.begin(), r.grad_epsilon.end(), 0.0);
  return r;
}

std::vector<double> nll_per_sample(const FeatureBatch& batch, const CentroidBank& bank) {
  const auto zeros = zeros_like(bank);
  return margin_pass(batch, bank, zeros, -1.0, false).per_sample;
}

std::vector<double> robust_loss_per_sample(const FeatureBatch& batch, const CentroidBank& bank,
                                           std::span<const double> eps) {
  return margin_pass(batch, bank, eps, -1.0, false).per_sample;
}

std::vector<double> lower_bound_loss(const FeatureBatch& batch, const CentroidBank& bank,
                                     std::span<const double> eps) {
  return margin_pass(batch, bank, eps, +1.0, false).per_sample;
}

std::vector<double> lower_bound_loss(const FeatureBatch& batch, const CentroidBank& bank, const EpsilonPolicy& eps) {
  const auto radii = eps.epsilons();
  return lower_bound_loss(batch, bank, radii);
}

double bound_gap_ratio(const FeatureBatch& batch, const CentroidBank& bank, std::span<const double> eps) {
  const auto upper = robust_loss_per_sample(batch, bank, eps);
  const auto lower = lower_bound_loss(batch, bank, eps);
  double acc = 0.0;
  for (std::size_t i = 0; i < upper.size(); ++i) {
    if (!(upper[i] > 0.0)) {
      throw DomainError("bound_gap_ratio: robust loss of sample " + std::to_string(i) +
                        " is zero; the ratio is undefined for this batch");
    }
    acc += std::abs(upper[i] - lower[i]) / upper[i];
  }
  return acc / static_cast<double>(upper.size());
}

double bound_gap_ratio(const FeatureBatch& batch, const CentroidBank& bank, const EpsilonPolicy& eps) {
  const auto radii = eps.epsilons();
  return bound_gap_ratio(batch, bank, radii);
}

CrossEntropyResult cross_entropy(const Matrix& logits, std::span<const int> labels) {
  const auto n = logits.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw DimensionError("cross_entropy: logits/labels row mismatch");
  if (n == 0) throw DomainError("cross_entropy: empty batch");
  CrossEntropyResult out;
  out.grad_logits = Matrix::Zero(n, logits.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= logits.cols()) throw LookupError("cross_entropy: label " + std::to_string(y) + " out of range");
    const double top = logits.row(i).maxCoeff();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) acc += std::exp(logits(i, k) - top);
    const double lse = top + std::log(acc);
    out.value += (lse - logits(i, y)) * inv_n;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      out.grad_logits(i, k) = std::exp(logits(i, k) - lse) * inv_n;
    }
    out.grad_logits(i, y) -= inv_n;
  }
  return out;
}

JointLoss joint_loss(const CrossEntropyResult& ce, const LossResult& robust, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("joint_loss: lambda must lie in [0, 1]");
  JointLoss out;
  out.ce = ce.value;
  out.robust = robust.value;
  out.value = lambda * ce.value + (1.0 - lambda) * robust.value;
  out.grad_logits = lambda * ce.grad_logits;
  out.grad_embeddings = (1.0 - lambda) * robust.grad_embeddings;
  out.grad_centroids = (1.0 - lambda) * robust.grad_centroids;
  out.grad_epsilon = robust.grad_epsilon;
  for (double& g : out.grad_epsilon) g *= (1.0 - lambda);
  return out;
}

}  // namespace drolt
