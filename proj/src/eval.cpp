// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "drolt/eval.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "drolt/error.hpp"
#include "textio.hpp"

namespace drolt {

std::vector<std::optional<double>> per_class_accuracy(std::span<const int> predictions, std::span<const int> labels,
                                                      int num_classes) {
  if (predictions.size() != labels.size()) throw DimensionError("per_class_accuracy: size mismatch");
  std::vector<std::size_t> hit(num_classes, 0), total(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes) throw LookupError("per_class_accuracy: label " + std::to_string(y) + " out of range");
    ++total[y];
    if (predictions[i] == y) ++hit[y];
  }
  std::vector<std::optional<double>> acc(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    if (total[c] > 0) acc[c] = static_cast<double>(hit[c]) / static_cast<double>(total[c]);
  }
  return acc;
}

namespace {

std::optional<double> mean_over(const std::vector<std::optional<double>>& acc, const std::vector<int>& classes) {
  double sum = 0.0;
  int k = 0;
  for (int c : classes) {
    if (acc[c]) {
      sum += *acc[c];
      ++k;
    }
  }
  if (k == 0) return std::nullopt;
  return sum / k;
}

std::string opt(const std::optional<double>& v) { return v ? textio::brief(*v) : "NA"; }

}  // namespace

SplitAccuracy split_accuracy(std::span<const int> predictions, std::span<const int> labels, const ClassSplits& splits,
                             int num_classes) {
  const auto acc = per_class_accuracy(predictions, labels, num_classes);
  SplitAccuracy out;
  out.many = mean_over(acc, splits.many);
  out.med = mean_over(acc, splits.med);
  out.few = mean_over(acc, splits.few);
  std::vector<int> all(num_classes);
  std::iota(all.begin(), all.end(), 0);
  out.balanced = mean_over(acc, all).value_or(0.0);
  return out;
}

SplitAccuracy test_accuracy(const Network& net, const LongTailDataset& ds) {
  const auto pred = net.predict(ds.test_inputs);
  return split_accuracy(pred, ds.test_labels, assign_splits(ds.class_counts), ds.num_classes());
}

namespace {

std::vector<int> nearest_centroid(const Matrix& centroids, const Matrix& queries) {
  std::vector<int> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (queries.row(i) - centroids.row(c)).squaredNorm();
      if (d < best_d) {  // strict: ties keep the lower class id
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    out[i] = best;
  }
  return out;
}

Matrix class_means(const Matrix& x, std::span<const int> labels, int num_classes) {
  Matrix m = Matrix::Zero(num_classes, x.cols());
  std::vector<double> n(num_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    m.row(labels[i]) += x.row(static_cast<Eigen::Index>(i));
    n[labels[i]] += 1.0;
  }
  for (int c = 0; c < num_classes; ++c) {
    if (n[c] == 0.0) throw DomainError("nearest_centroid_probe: class " + std::to_string(c) + " has no training samples");
    m.row(c) /= n[c];
  }
  return m;
}

}  // namespace

SplitAccuracy nearest_centroid_probe(const Network& net, const LongTailDataset& ds, int layer) {
  if (layer < 0 || layer > net.backbone_depth()) {
    throw LookupError("nearest_centroid_probe: layer " + std::to_string(layer) + " out of range [0, " +
                      std::to_string(net.backbone_depth()) + "]");
  }
  const auto train = net.forward(ds.train_inputs);
  const auto test = net.forward(ds.test_inputs);
  const Matrix centroids = class_means(train.activations[layer], ds.train_labels, ds.num_classes());
  const auto pred = nearest_centroid(centroids, test.activations[layer]);
  return split_accuracy(pred, ds.test_labels, assign_splits(ds.class_counts), ds.num_classes());
}

std::vector<ProbeRow> probe_all_layers(const Network& net, const LongTailDataset& ds) {
  std::vector<ProbeRow> rows;
  const auto train = net.forward(ds.train_inputs);
  const auto test = net.forward(ds.test_inputs);
  const auto splits = assign_splits(ds.class_counts);
  for (int l = 0; l <= net.backbone_depth(); ++l) {
    const Matrix centroids = class_means(train.activations[l], ds.train_labels, ds.num_classes());
    const auto pred = nearest_centroid(centroids, test.activations[l]);
    rows.push_back({l, static_cast<int>(train.activations[l].cols()),
                    split_accuracy(pred, ds.test_labels, splits, ds.num_classes())});
  }
  return rows;
}

void write_probe_csv(std::ostream& os, const std::vector<ProbeRow>& rows) {
  os << "layer,width,acc_many,acc_med,acc_few,acc_balanced\n";
  for (const auto& r : rows) {
    os << r.layer << ',' << r.width << ',' << opt(r.accuracy.many) << ',' << opt(r.accuracy.med) << ','
       << opt(r.accuracy.few) << ',' << textio::brief(r.accuracy.balanced) << '\n';
  }
}

CoverageEstimate estimate_coverage(int n, double sigma, int d, double eps_metric, std::size_t trials,
                                   std::uint64_t seed) {
  if (trials < 1) throw DomainError("estimate_coverage: trials must be >= 1");
  if (n < 1 || d < 1) throw DomainError("estimate_coverage: n and d must be >= 1");
  if (!(sigma > 0.0)) throw DomainError("estimate_coverage: sigma must be positive");
  if (!(eps_metric >= 0.0)) throw DomainError("estimate_coverage: eps_metric must be nonnegative");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<double> centroid(d);
  std::size_t covered = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) centroid[k] += normal(rng);
    }
    double sq = 0.0;
    for (int k = 0; k < d; ++k) {
      const double m = centroid[k] / n;
      sq += m * m;
    }
    if (std::sqrt(sq) <= eps_metric) ++covered;
  }
  CoverageEstimate est;
  est.trials = trials;
  est.p_hat = static_cast<double>(covered) / static_cast<double>(trials);
  est.std_error = std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(trials));
  return est;
}

double coverage_closed_form(int n, double sigma, int d, double eps_metric) {
  if (n < 1 || d < 1 || !(sigma > 0.0) || !(eps_metric >= 0.0)) {
    throw DomainError("coverage_closed_form: invalid arguments");
  }
  if (std::isinf(eps_metric)) return 1.0;
  const double x = n * eps_metric * eps_metric / (sigma * sigma);
  return boost::math::cdf(boost::math::chi_squared_distribution<double>(d), x);
}

std::vector<ErrorGapRow> error_gap_report(const Network& net, const LongTailDataset& ds) {
  const int C = ds.num_classes();
  const auto train_acc = per_class_accuracy(net.predict(ds.train_inputs), ds.train_labels, C);
  const auto test_acc = per_class_accuracy(net.predict(ds.test_inputs), ds.test_labels, C);
  std::vector<ErrorGapRow> rows;
  for (int c = 0; c < C; ++c) {
    rows.push_back({c, ds.class_counts[c], 1.0 - train_acc[c].value_or(1.0), 1.0 - test_acc[c].value_or(1.0)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
  return rows;
}

void write_error_gap_csv(std::ostream& os, const std::vector<ErrorGapRow>& rows) {
  os << "class,count,train_error,test_error,gap\n";
  for (const auto& r : rows) {
    os << r.cls << ',' << r.count << ',' << textio::brief(r.train_error) << ',' << textio::brief(r.test_error) << ','
       << textio::brief(r.gap()) << '\n';
  }
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman: size mismatch");
  if (a.size() < 2) return std::nullopt;
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

EpsilonReport epsilon_report(const EpsilonPolicy& policy, std::span<const std::size_t> class_counts) {
  if (static_cast<int>(class_counts.size()) != policy.num_classes()) {
    throw DimensionError("epsilon_report: class count list does not match the policy");
  }
  EpsilonReport rep;
  std::vector<double> n, e;
  for (int c = 0; c < policy.num_classes(); ++c) {
    rep.rows.push_back({c, class_counts[c], policy.epsilon_for_class(c)});
    n.push_back(static_cast<double>(class_counts[c]));
    e.push_back(rep.rows.back().epsilon);
  }
  rep.spearman = spearman(n, e);
  return rep;
}

void write_epsilon_csv(std::ostream& os, const EpsilonReport& report) {
  os << "# spearman(count, epsilon) = " << (report.spearman ? textio::exact(*report.spearman) : "undefined") << '\n';
  os << "class,count,epsilon\n";
  for (const auto& r : report.rows) os << r.cls << ',' << r.count << ',' << textio::exact(r.epsilon) << '\n';
}

}  // namespace drolt
