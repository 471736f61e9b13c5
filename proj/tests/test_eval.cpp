// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "drolt/error.hpp"
#include "drolt/eval.hpp"

using namespace drolt;

namespace {

ClassSplits splits_of(std::vector<std::size_t> counts) { return assign_splits(counts); }

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_CASE("split accuracy of perfect predictions") {
  const std::vector<std::size_t> counts{500, 50, 5};
  const std::vector<int> labels{0, 0, 1, 1, 2, 2};
  const auto acc = split_accuracy(labels, labels, splits_of(counts), 3);
  CHECK(*acc.many == 1.0);
  CHECK(*acc.med == 1.0);
  CHECK(*acc.few == 1.0);
  CHECK(acc.balanced == 1.0);
}

TEST_CASE("split accuracy is a mean of per-class accuracies") {
  const std::vector<std::size_t> counts{500, 400, 5};
  const std::vector<int> labels{0, 0, 0, 0, 1, 1, 2, 2};
  const std::vector<int> pred{0, 1, 1, 1, 1, 1, 0, 2};
  const auto acc = split_accuracy(pred, labels, splits_of(counts), 3);
  CHECK(*acc.many == doctest::Approx((0.25 + 1.0) / 2));
  CHECK(!acc.med.has_value());
  CHECK(*acc.few == doctest::Approx(0.5));
  CHECK(acc.balanced == doctest::Approx((0.25 + 1.0 + 0.5) / 3));
}

TEST_CASE("random predictions score about 1/C") {
  const int C = 10;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> u(0, C - 1);
  std::vector<int> labels, pred;
  for (int i = 0; i < 100000; ++i) {
    labels.push_back(i % C);
    pred.push_back(u(rng));
  }
  std::vector<std::size_t> counts(C, 50);
  const auto acc = split_accuracy(pred, labels, splits_of(counts), C);
  CHECK(acc.balanced == doctest::Approx(0.1).epsilon(0.05));
  CHECK(!acc.many.has_value());
  CHECK(!acc.few.has_value());
  CHECK(acc.med.has_value());
}

TEST_CASE("per-class accuracy errors") {
  const std::vector<int> a{0, 1}, b{0};
  CHECK_THROWS_AS(per_class_accuracy(a, b, 2), DimensionError);
  const std::vector<int> bad{0, 5};
  CHECK_THROWS_AS(per_class_accuracy(a, bad, 2), LookupError);
  const auto pc = per_class_accuracy(a, a, 3);
  CHECK(!pc[2].has_value());
}

TEST_CASE("nearest centroid probe at the input layer") {
  SynthSpec s;
  s.classes = 3;
  s.n_max = 40;
  s.beta = 4;
  s.dim = 4;
  s.separation = 20;
  s.test_per_class = 30;
  const auto ds = synthesize(s);
  NetworkShape shape;
  shape.input_dim = 4;
  shape.hidden_widths = {5};
  shape.embedding_dim = 3;
  shape.num_classes = 3;
  const Network net(shape, 1);
  const auto acc = nearest_centroid_probe(net, ds, 0);
  CHECK(acc.balanced > 0.99);
  const auto rows = probe_all_layers(net, ds);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].width == 4);
  CHECK(rows[1].width == 5);
  CHECK(rows[2].width == 3);
  CHECK(rows[0].accuracy.balanced == acc.balanced);
  CHECK_THROWS_AS(nearest_centroid_probe(net, ds, 3), LookupError);
  std::ostringstream os;
  write_probe_csv(os, rows);
  CHECK(first_line(os.str()) == "layer,width,acc_many,acc_med,acc_few,acc_balanced");
}

TEST_CASE("coverage estimate") {
  CHECK(estimate_coverage(5, 1.0, 3, 0.0, 1000, 1).p_hat == 0.0);
  CHECK(estimate_coverage(5, 1.0, 3, 1e9, 1000, 1).p_hat == 1.0);
  CHECK(coverage_closed_form(5, 1.0, 3, 0.0) == 0.0);

  // d = 2: the chi-square CDF is 1 - exp(-x / 2); d = 1: erf(sqrt(x / 2))
  for (double eps : {0.1, 0.3, 0.7}) {
    const double x = 4 * eps * eps / 0.25;
    CHECK(coverage_closed_form(4, 0.5, 2, eps) == doctest::Approx(1 - std::exp(-x / 2)).epsilon(1e-12));
    CHECK(coverage_closed_form(4, 0.5, 1, eps) == doctest::Approx(std::erf(std::sqrt(x / 2))).epsilon(1e-12));
    const auto est = estimate_coverage(4, 0.5, 2, eps, 20000, 3);
    CHECK(std::abs(est.p_hat - (1 - std::exp(-x / 2))) < 4 * est.std_error + 1e-9);
    CHECK(est.std_error == doctest::Approx(std::sqrt(est.p_hat * (1 - est.p_hat) / 20000)));
  }
  CHECK(estimate_coverage(4, 0.5, 2, 0.3, 5000, 9).p_hat == estimate_coverage(4, 0.5, 2, 0.3, 5000, 9).p_hat);
  CHECK_THROWS_AS(estimate_coverage(0, 1.0, 2, 0.3, 10, 1), DomainError);
  CHECK_THROWS_AS(estimate_coverage(3, 0.0, 2, 0.3, 10, 1), DomainError);
  CHECK_THROWS_AS(estimate_coverage(3, 1.0, 2, -0.3, 10, 1), DomainError);
  CHECK_THROWS_AS(estimate_coverage(3, 1.0, 2, 0.3, 0, 1), DomainError);
}

TEST_CASE("error gap report") {
  SynthSpec s;
  s.classes = 4;
  s.n_max = 80;
  s.beta = 8;
  s.dim = 5;
  s.test_per_class = 10;
  const auto ds = synthesize(s);
  NetworkShape shape;
  shape.input_dim = 5;
  shape.hidden_widths = {};
  shape.embedding_dim = 4;
  shape.num_classes = 4;
  const auto net = Network::zeros(shape);  // predicts class 0 everywhere
  const auto rows = error_gap_report(net, ds);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].cls == 0);
  CHECK(rows[0].train_error == 0.0);
  CHECK(rows[0].test_error == 0.0);
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(rows[i].count <= rows[i - 1].count);
    CHECK(rows[i].train_error == 1.0);
    CHECK(rows[i].gap() == 0.0);
  }
  std::ostringstream os;
  write_error_gap_csv(os, rows);
  CHECK(first_line(os.str()) == "class,count,train_error,test_error,gap");
}

TEST_CASE("epsilon report and rank correlation") {
  const std::vector<std::size_t> counts{500, 200, 60, 20, 5};
  const auto sq = epsilon_report(EpsilonPolicy::sqrt_n(1.0, counts), counts);
  REQUIRE(sq.spearman.has_value());
  CHECK(*sq.spearman == doctest::Approx(-1.0));
  CHECK(sq.rows[4].epsilon == doctest::Approx(1.0 / std::sqrt(5.0)));
  const auto sh = epsilon_report(EpsilonPolicy::shared(0.5, counts), counts);
  CHECK(!sh.spearman.has_value());
  std::ostringstream os;
  write_epsilon_csv(os, sh);
  CHECK(os.str().find("undefined") != std::string::npos);
  CHECK(os.str().find("class,count,epsilon\n") != std::string::npos);
  const std::vector<std::size_t> wrong{1, 2};
  CHECK_THROWS_AS(epsilon_report(EpsilonPolicy::shared(0.5, counts), wrong), DimensionError);

  const std::vector<double> a{1, 2, 3, 4}, b{10, 20, 30, 40}, c{4, 3, 2, 1}, k{1, 1, 1, 1};
  CHECK(*spearman(a, b) == doctest::Approx(1.0));
  CHECK(*spearman(a, c) == doctest::Approx(-1.0));
  CHECK(!spearman(a, k).has_value());
  // ties get average ranks: ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4)
  const std::vector<double> t{1, 2, 2, 3};
  const double r = (1 * 1 + 2.5 * 2 + 2.5 * 3 + 4 * 4 - 4 * 2.5 * 2.5) /
                   std::sqrt((1 + 6.25 + 6.25 + 16 - 25) * (1 + 4 + 9 + 16 - 25.0));
  CHECK(*spearman(t, a) == doctest::Approx(r).epsilon(1e-12));
  const std::vector<double> short_v{1};
  CHECK_THROWS_AS(spearman(a, short_v), DimensionError);
}
