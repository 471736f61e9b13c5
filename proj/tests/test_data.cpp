// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "drolt/centroids.hpp"
#include "drolt/data.hpp"
#include "drolt/error.hpp"

using namespace drolt;

namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.classes = 4;
  s.n_max = 40;
  s.beta = 10;
  s.dim = 3;
  s.test_per_class = 5;
  s.val_per_class = 2;
  s.seed = 9;
  return s;
}

bool same(const LongTailDataset& a, const LongTailDataset& b) {
  return a.class_counts == b.class_counts && a.train_inputs == b.train_inputs && a.train_labels == b.train_labels &&
         a.test_inputs == b.test_inputs && a.test_labels == b.test_labels && a.val_inputs == b.val_inputs &&
         a.val_labels == b.val_labels && a.true_means == b.true_means && a.spec.seed == b.spec.seed &&
         a.spec.beta == b.spec.beta && a.spec.spread == b.spec.spread;
}

}  // namespace

TEST_CASE("count profile") {
  const auto counts = long_tail_counts(10, 500, 100);
  CHECK(counts.front() == 500);
  CHECK(counts.back() == 5);
  for (std::size_t c = 1; c < counts.size(); ++c) CHECK(counts[c] <= counts[c - 1]);
  for (int c = 0; c < 10; ++c) CHECK(counts[c] == static_cast<std::size_t>(std::llround(500 * std::pow(100.0, -c / 9.0))));
  for (auto n : long_tail_counts(6, 30, 1)) CHECK(n == 30);
  CHECK_THROWS_AS(long_tail_counts(10, 5, 100), DomainError);
  CHECK_THROWS_AS(long_tail_counts(1, 5, 2), DomainError);
  CHECK_THROWS_AS(long_tail_counts(3, 5, 0.5), DomainError);
}

TEST_CASE("synthesized dataset shape and balance") {
  const auto ds = synthesize(small_spec());
  CHECK(ds.num_classes() == 4);
  CHECK(ds.dim() == 3);
  std::map<int, std::size_t> train, test, val;
  for (int y : ds.train_labels) ++train[y];
  for (int y : ds.test_labels) ++test[y];
  for (int y : ds.val_labels) ++val[y];
  for (int c = 0; c < 4; ++c) {
    CHECK(train[c] == ds.class_counts[c]);
    CHECK(test[c] == 5);
    CHECK(val[c] == 2);
  }
  const double ratio = static_cast<double>(ds.class_counts.front()) / static_cast<double>(ds.class_counts.back());
  CHECK(ratio == doctest::Approx(10.0).epsilon(0.1));
  CHECK(same(ds, synthesize(small_spec())));
  auto other = small_spec();
  other.seed = 10;
  CHECK_FALSE(same(ds, synthesize(other)));
}

TEST_CASE("class means sit at the configured separation") {
  SynthSpec s = small_spec();
  s.classes = 12;
  s.beta = 1;
  s.spread = 0.5;
  s.separation = 4.0;
  const auto ds = synthesize(s);
  double total = 0.0;
  int pairs = 0;
  for (int a = 0; a < 12; ++a)
    for (int b = a + 1; b < 12; ++b, ++pairs) total += (ds.true_means.row(a) - ds.true_means.row(b)).norm();
  CHECK(total / pairs == doctest::Approx(4.0 * 0.5).epsilon(1e-9));
}

TEST_CASE("empirical centroids approach the true means at rate sigma / sqrt(n)") {
  // E||mu_hat - mu||^2 = d sigma^2 / n; average over seeds and classes
  SynthSpec s;
  s.classes = 3;
  s.n_max = 400;
  s.beta = 16;
  s.dim = 4;
  s.spread = 1.5;
  s.test_per_class = 1;
  double ratio_sum = 0.0;
  int k = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    s.seed = seed;
    const auto ds = synthesize(s);
    const auto bank = CentroidBank::recompute(ds.train_inputs, ds.train_labels, 3, 0);
    for (int c = 0; c < 3; ++c, ++k) {
      const double expected = s.dim * s.spread * s.spread / static_cast<double>(ds.class_counts[c]);
      ratio_sum += (bank.get(c) - ds.true_means.row(c).transpose()).squaredNorm() / expected;
    }
  }
  CHECK(ratio_sum / k == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("split assignment") {
  const std::vector<std::size_t> counts{150, 60, 5};
  const auto s = assign_splits(counts);
  CHECK(s.many == std::vector<int>{0});
  CHECK(s.med == std::vector<int>{1});
  CHECK(s.few == std::vector<int>{2});
  const std::vector<std::size_t> edges{100, 20, 101, 19};
  const auto e = assign_splits(edges);
  CHECK(e.many == std::vector<int>{2});
  CHECK(e.med == std::vector<int>{0, 1});
  CHECK(e.few == std::vector<int>{3});
}

TEST_CASE("balanced sampler") {
  const auto ds = synthesize(small_spec());
  BalancedSampler a(ds.train_labels, 4, 3), b(ds.train_labels, 4, 3);
  std::vector<std::size_t> freq(4, 0);
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) {
    const auto i = a.next();
    CHECK(i == b.next());
    ++freq[ds.train_labels[i]];
  }
  for (auto f : freq) CHECK(std::abs(static_cast<double>(f) / draws - 0.25) / 0.25 < 0.02);

  // on a balanced dataset every sample is about equally likely
  SynthSpec bal = small_spec();
  bal.beta = 1;
  bal.n_max = 10;
  const auto dsb = synthesize(bal);
  BalancedSampler s(dsb.train_labels, 4, 5);
  std::vector<int> hits(dsb.train_size(), 0);
  for (int t = 0; t < 40000; ++t) ++hits[s.next()];
  for (int h : hits) CHECK(std::abs(h - 1000) < 150);
}

TEST_CASE("dataset file round-trip and errors") {
  const auto ds = synthesize(small_spec());
  std::ostringstream os;
  save_dataset(ds, os);
  std::istringstream is(os.str());
  CHECK(same(load_dataset(is), ds));

  const auto path = std::filesystem::temp_directory_path() / "drolt_test_dataset.txt";
  save_dataset(ds, path);
  CHECK(same(load_dataset(path), ds));
  std::filesystem::remove(path);

  const std::string text = os.str();
  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(load_dataset(truncated), ParseError);

  std::string bumped = text;
  bumped.replace(bumped.find("version 1"), 9, "version 7");
  std::istringstream future(bumped);
  CHECK_THROWS_AS(load_dataset(future), VersionError);

  std::string bad = text;
  const auto pos = bad.find("train ");
  bad.insert(bad.find('\n', pos) + 1, "0 1.0 oops 2.0\n");
  std::istringstream garbled(bad);
  try {
    load_dataset(garbled);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() > 0);
  }
}
