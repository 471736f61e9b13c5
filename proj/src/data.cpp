// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "drolt/data.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <string>

#include "drolt/error.hpp"
#include "textio.hpp"

namespace drolt {

std::vector<std::size_t> long_tail_counts(int classes, int n_max, double beta) {
  if (classes < 2) throw DomainError("synthesize: at least 2 classes required");
  if (n_max < 1) throw DomainError("synthesize: n_max must be >= 1");
  if (!(beta >= 1.0) || !std::isfinite(beta)) throw DomainError("synthesize: beta must be >= 1");
  std::vector<std::size_t> counts(classes);
  for (int c = 0; c < classes; ++c) {
    const double n = n_max * std::pow(beta, -static_cast<double>(c) / (classes - 1));
    const long long r = std::llround(n);
    if (r < 1) {
      throw DomainError("synthesize: n_max=" + std::to_string(n_max) + " with beta=" + textio::exact(beta) +
                        " gives class " + std::to_string(c) + " fewer than one sample");
    }
    counts[c] = static_cast<std::size_t>(r);
  }
  return counts;
}

namespace {

void draw_split(const Matrix& means, double spread, std::span<const std::size_t> per_class, std::mt19937_64& rng,
                Matrix& inputs, std::vector<int>& labels) {
  std::size_t total = 0;
  for (auto n : per_class) total += n;
  const Eigen::Index d = means.cols();
  inputs.resize(static_cast<Eigen::Index>(total), d);
  labels.resize(total);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    for (std::size_t i = 0; i < per_class[c]; ++i, ++row) {
      for (Eigen::Index k = 0; k < d; ++k) inputs(row, k) = means(static_cast<Eigen::Index>(c), k) + spread * normal(rng);
      labels[row] = static_cast<int>(c);
    }
  }
}

}  // namespace

LongTailDataset synthesize(const SynthSpec& spec) {
  LongTailDataset ds;
  ds.spec = spec;
  ds.class_counts = long_tail_counts(spec.classes, spec.n_max, spec.beta);
  if (spec.dim < 1) throw DomainError("synthesize: dim must be >= 1");
  if (!(spec.spread > 0.0)) throw DomainError("synthesize: spread must be positive");
  if (!(spec.separation > 0.0)) throw DomainError("synthesize: separation must be positive");
  if (spec.test_per_class < 1) throw DomainError("synthesize: test_per_class must be >= 1");
  if (spec.val_per_class < 0) throw DomainError("synthesize: val_per_class must be >= 0");

  std::mt19937_64 rng(spec.seed);
  const int C = spec.classes;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  ds.true_means.resize(C, spec.dim);
  for (int c = 0; c < C; ++c) {
    for (int k = 0; k < spec.dim; ++k) ds.true_means(c, k) = unit(rng);
  }
  // Rescale so the mean pairwise centroid distance is separation * spread.
  double mean_dist = 0.0;
  int pairs = 0;
  for (int a = 0; a < C; ++a) {
    for (int b = a + 1; b < C; ++b, ++pairs) mean_dist += (ds.true_means.row(a) - ds.true_means.row(b)).norm();
  }
  mean_dist /= pairs;
  ds.true_means *= spec.separation * spec.spread / mean_dist;

  draw_split(ds.true_means, spec.spread, ds.class_counts, rng, ds.train_inputs, ds.train_labels);
  const std::vector<std::size_t> test_counts(C, static_cast<std::size_t>(spec.test_per_class));
  draw_split(ds.true_means, spec.spread, test_counts, rng, ds.test_inputs, ds.test_labels);
  const std::vector<std::size_t> val_counts(C, static_cast<std::size_t>(spec.val_per_class));
  draw_split(ds.true_means, spec.spread, val_counts, rng, ds.val_inputs, ds.val_labels);
  return ds;
}

ClassSplits assign_splits(std::span<const std::size_t> counts, const SplitSpec& spec) {
  ClassSplits s;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const int id = static_cast<int>(c);
    if (counts[c] > spec.many_threshold) {
      s.many.push_back(id);
    } else if (counts[c] < spec.med_threshold) {
      s.few.push_back(id);
    } else {
      s.med.push_back(id);
    }
  }
  return s;
}

BalancedSampler::BalancedSampler(std::span<const int> labels, int num_classes, std::uint64_t seed)
    : by_class_(num_classes), rng_(seed) {
  if (labels.empty()) throw DomainError("BalancedSampler: empty dataset");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw LookupError("BalancedSampler: label out of range");
    by_class_[labels[i]].push_back(i);
  }
  std::erase_if(by_class_, [](const auto& v) { return v.empty(); });
}

std::size_t BalancedSampler::next() {
  std::uniform_int_distribution<std::size_t> pick_class(0, by_class_.size() - 1);
  const auto& members = by_class_[pick_class(rng_)];
  std::uniform_int_distribution<std::size_t> pick_member(0, members.size() - 1);
  return members[pick_member(rng_)];
}

// ---------------------------------------------------------------------------
// File format (text, one record per line):
//
//   drolt-dataset
//   version 1
//   classes C
//   dim d
//   n_max N
//   beta B
//   spread S
//   separation R
//   seed K
//   test_per_class T
//   val_per_class V
//   counts n_0 ... n_{C-1}
//   means
//   <C lines, d values each>
//   train <rows>            followed by <rows> lines "label x_0 ... x_{d-1}"
//   test <rows>             same
//   val <rows>              same
//   end
//
// Reals use 17 significant digits so a save/load round trip is bit-identical.

namespace {

void write_rows(std::ostream& os, const char* name, const Matrix& x, const std::vector<int>& y) {
  os << name << ' ' << y.size() << '\n';
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    os << y[i];
    for (Eigen::Index k = 0; k < x.cols(); ++k) os << ' ' << textio::exact(x(i, k));
    os << '\n';
  }
}

double to_real(textio::LineReader& r, const std::string& tok) {
  auto v = textio::parse_double(tok);
  if (!v) r.fail("malformed number '" + tok + "'");
  return *v;
}

long long to_int(textio::LineReader& r, const std::string& tok) {
  auto v = textio::parse_int(tok);
  if (!v) r.fail("malformed integer '" + tok + "'");
  return *v;
}

void read_rows(textio::LineReader& r, const char* name, int classes, int d, Matrix& x, std::vector<int>& y) {
  const auto rows = to_int(r, r.expect_record(name, 1)[0]);
  if (rows < 0) r.fail("negative row count");
  x.resize(rows, d);
  y.resize(static_cast<std::size_t>(rows));
  for (long long i = 0; i < rows; ++i) {
    auto toks = textio::tokens(r.expect(std::string(name) + " row"));
    if (toks.size() != static_cast<std::size_t>(d) + 1) {
      r.fail(std::string(name) + " row expects " + std::to_string(d + 1) + " fields, found " +
             std::to_string(toks.size()));
    }
    const auto label = to_int(r, toks[0]);
    if (label < 0 || label >= classes) r.fail("label " + toks[0] + " out of range");
    y[i] = static_cast<int>(label);
    for (int k = 0; k < d; ++k) x(i, k) = to_real(r, toks[k + 1]);
  }
}

}  // namespace

void save_dataset(const LongTailDataset& ds, std::ostream& os) {
  const auto& s = ds.spec;
  os << "drolt-dataset\n";
  os << "version " << kDatasetFormatVersion << '\n';
  os << "classes " << s.classes << '\n';
  os << "dim " << s.dim << '\n';
  os << "n_max " << s.n_max << '\n';
  os << "beta " << textio::exact(s.beta) << '\n';
  os << "spread " << textio::exact(s.spread) << '\n';
  os << "separation " << textio::exact(s.separation) << '\n';
  os << "seed " << s.seed << '\n';
  os << "test_per_class " << s.test_per_class << '\n';
  os << "val_per_class " << s.val_per_class << '\n';
  os << "counts";
  for (auto n : ds.class_counts) os << ' ' << n;
  os << "\nmeans\n";
  for (Eigen::Index c = 0; c < ds.true_means.rows(); ++c) {
    for (Eigen::Index k = 0; k < ds.true_means.cols(); ++k) os << (k ? " " : "") << textio::exact(ds.true_means(c, k));
    os << '\n';
  }
  write_rows(os, "train", ds.train_inputs, ds.train_labels);
  write_rows(os, "test", ds.test_inputs, ds.test_labels);
  write_rows(os, "val", ds.val_inputs, ds.val_labels);
  os << "end\n";
}

void save_dataset(const LongTailDataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  save_dataset(ds, os);
  if (!os) throw Error("write to '" + path.string() + "' failed");
}

LongTailDataset load_dataset(std::istream& is) {
  textio::LineReader r(is);
  if (textio::trim(r.expect("header")) != "drolt-dataset") r.fail("not a drolt dataset file");
  const auto version = to_int(r, r.expect_record("version", 1)[0]);
  if (version != kDatasetFormatVersion) {
    throw VersionError("unsupported dataset format version " + std::to_string(version) + " (supported: " +
                       std::to_string(kDatasetFormatVersion) + ")");
  }
  LongTailDataset ds;
  auto& s = ds.spec;
  s.classes = static_cast<int>(to_int(r, r.expect_record("classes", 1)[0]));
  s.dim = static_cast<int>(to_int(r, r.expect_record("dim", 1)[0]));
  if (s.classes < 1 || s.dim < 1) r.fail("classes and dim must be positive");
  s.n_max = static_cast<int>(to_int(r, r.expect_record("n_max", 1)[0]));
  s.beta = to_real(r, r.expect_record("beta", 1)[0]);
  s.spread = to_real(r, r.expect_record("spread", 1)[0]);
  s.separation = to_real(r, r.expect_record("separation", 1)[0]);
  {
    const auto tok = r.expect_record("seed", 1)[0];
    auto v = textio::parse_u64(tok);
    if (!v) r.fail("malformed seed '" + tok + "'");
    s.seed = *v;
  }
  s.test_per_class = static_cast<int>(to_int(r, r.expect_record("test_per_class", 1)[0]));
  s.val_per_class = static_cast<int>(to_int(r, r.expect_record("val_per_class", 1)[0]));
  for (const auto& tok : r.expect_record("counts", static_cast<std::size_t>(s.classes))) {
    const auto n = to_int(r, tok);
    if (n < 0) r.fail("negative class count");
    ds.class_counts.push_back(static_cast<std::size_t>(n));
  }
  if (textio::trim(r.expect("means")) != "means") r.fail("expected 'means'");
  ds.true_means.resize(s.classes, s.dim);
  for (int c = 0; c < s.classes; ++c) {
    auto toks = textio::tokens(r.expect("mean row"));
    if (toks.size() != static_cast<std::size_t>(s.dim)) r.fail("mean row expects " + std::to_string(s.dim) + " values");
    for (int k = 0; k < s.dim; ++k) ds.true_means(c, k) = to_real(r, toks[k]);
  }
  read_rows(r, "train", s.classes, s.dim, ds.train_inputs, ds.train_labels);
  read_rows(r, "test", s.classes, s.dim, ds.test_inputs, ds.test_labels);
  read_rows(r, "val", s.classes, s.dim, ds.val_inputs, ds.val_labels);
  if (textio::trim(r.expect("end")) != "end") r.fail("expected 'end'");

  std::vector<std::size_t> seen(s.classes, 0);
  for (int y : ds.train_labels) ++seen[y];
  if (seen != ds.class_counts) r.fail("train labels disagree with the declared class counts");
  return ds;
}

LongTailDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open dataset '" + path.string() + "'");
  return load_dataset(is);
}

}  // namespace drolt
