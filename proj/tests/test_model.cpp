// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "drolt/centroids.hpp"
#include "drolt/error.hpp"
#include "drolt/losses.hpp"
#include "drolt/model.hpp"
#include "oracles.hpp"

using namespace drolt;

namespace {

NetworkShape small_shape(Activation act = Activation::tanh) {
  NetworkShape s;
  s.input_dim = 5;
  s.hidden_widths = {7, 6};
  s.embedding_dim = 4;
  s.num_classes = 3;
  s.activation = act;
  return s;
}

Matrix random_inputs(std::mt19937_64& rng, int n, int d) { return oracle::random_centroids(rng, n, d, 1.0); }

double act(Activation a, double x) {
  switch (a) {
    case Activation::tanh:
      return std::tanh(x);
    case Activation::relu:
      return x > 0 ? x : 0.0;
    case Activation::softplus:
      return std::log1p(std::exp(x));
    case Activation::identity:
      return x;
  }
  return x;
}

// Straight-line re-evaluation of one sample.
std::vector<double> reference_logits(const Network& net, const std::vector<double>& x) {
  const auto& p = net.parameters();
  std::vector<double> h = x;
  const int L = net.backbone_depth();
  for (int l = 0; l <= L; ++l) {
    std::vector<double> next(static_cast<std::size_t>(p.weights[l].rows()));
    for (Eigen::Index o = 0; o < p.weights[l].rows(); ++o) {
      double s = p.biases[l][o];
      for (Eigen::Index i = 0; i < p.weights[l].cols(); ++i) s += p.weights[l](o, i) * h[i];
      const bool activated = l < L && (l + 1 < L || net.shape().activate_embedding);
      next[o] = activated ? act(net.shape().activation, s) : s;
    }
    h = next;
  }
  return h;
}

// Joint objective on a fixed bank as a function of the network parameters.
double objective(const Network& net, const Matrix& x, const std::vector<int>& y, const CentroidBank& bank,
                 const std::vector<double>& eps, double lambda, std::size_t classes) {
  const auto pass = net.forward(x);
  FeatureBatch fb{pass.embedding(), y, std::vector<double>(classes, 0.5)};
  return joint_loss(cross_entropy(pass.logits, y), robust_loss(fb, bank, eps), lambda).value;
}

}  // namespace

TEST_CASE("zero network gives zero logits") {
  const auto net = Network::zeros(small_shape());
  std::mt19937_64 rng(1);
  const auto pass = net.forward(random_inputs(rng, 4, 5));
  CHECK(pass.logits.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity single layer passes the input through") {
  NetworkShape s;
  s.input_dim = 3;
  s.hidden_widths = {};
  s.embedding_dim = 3;
  s.num_classes = 2;
  s.activation = Activation::identity;
  auto net = Network::zeros(s);
  net.parameters().weights[0] = Matrix::Identity(3, 3);
  std::mt19937_64 rng(2);
  const Matrix x = random_inputs(rng, 5, 3);
  CHECK(net.embed(x) == x);
  CHECK(net.backbone_depth() == 1);
}

TEST_CASE("forward matches a straight-line re-evaluation") {
  std::mt19937_64 rng(3);
  for (auto a : {Activation::tanh, Activation::relu, Activation::softplus, Activation::identity}) {
    for (bool emb : {true, false}) {
      auto shape = small_shape(a);
      shape.activate_embedding = emb;
      const Network net(shape, 17);
      const Matrix x = random_inputs(rng, 6, 5);
      const auto logits = net.forward(x).logits;
      for (Eigen::Index i = 0; i < 6; ++i) {
        std::vector<double> xi(x.row(i).data(), x.row(i).data() + 5);
        const auto ref = reference_logits(net, xi);
        for (int k = 0; k < 3; ++k) CHECK(logits(i, k) == doctest::Approx(ref[k]).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(Network(small_shape(), 1).forward(Matrix::Zero(2, 4)), DimensionError);
}

TEST_CASE("end-to-end gradient of the joint objective matches central differences") {
  std::mt19937_64 rng(4);
  for (auto a : {Activation::tanh, Activation::softplus}) {
    auto shape = small_shape(a);
    shape.input_dim = 6;
    Network net(shape, 5);
    const Matrix x = random_inputs(rng, 12, 6);
    std::vector<int> y;
    for (int i = 0; i < 12; ++i) y.push_back(i % 3);
    const auto bank = CentroidBank::from_centroids(oracle::random_centroids(rng, 3, 4, 0.5));
    const std::vector<double> eps{0.3, 0.1, 0.6};
    const double lambda = 0.4;

    const auto pass = net.forward(x);
    FeatureBatch fb{pass.embedding(), y, std::vector<double>(3, 0.5)};
    const auto jl = joint_loss(cross_entropy(pass.logits, y), robust_loss(fb, bank, eps), lambda);
    const Parameters g = net.backward(pass, jl.grad_embeddings, jl.grad_logits);

    auto& p = net.parameters();
    int checked = 0;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r) {
        for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) {
          const double w0 = p.weights[l](r, c);
          const double fd = oracle::central_difference(
              [&](double w) {
                p.weights[l](r, c) = w;
                return objective(net, x, y, bank, eps, lambda, 3);
              },
              w0, 1e-5);
          p.weights[l](r, c) = w0;
          CHECK(oracle::rel_error(g.weights[l](r, c), fd, 1e-5) < 1e-4);
          ++checked;
        }
        const double b0 = p.biases[l][r];
        const double fd = oracle::central_difference(
            [&](double b) {
              p.biases[l][r] = b;
              return objective(net, x, y, bank, eps, lambda, 3);
            },
            b0, 1e-5);
        p.biases[l][r] = b0;
        CHECK(oracle::rel_error(g.biases[l][r], fd, 1e-5) < 1e-4);
      }
    }
    CHECK(checked == static_cast<int>(p.scalar_count() - 7 - 6 - 4 - 3));
  }
}

TEST_CASE("backward is linear in the injected gradients") {
  std::mt19937_64 rng(5);
  const Network net(small_shape(), 9);
  const Matrix x = random_inputs(rng, 4, 5);
  const auto pass = net.forward(x);
  const Matrix gz = random_inputs(rng, 4, 4), gl = random_inputs(rng, 4, 3);
  const auto zero = net.backward(pass, Matrix::Zero(4, 4), Matrix::Zero(4, 3));
  for (const auto& w : zero.weights) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  const double lam = 0.3;
  const auto both = net.backward(pass, (1 - lam) * gz, lam * gl);
  const auto a = net.backward(pass, gz, Matrix::Zero(4, 3));
  const auto b = net.backward(pass, Matrix::Zero(4, 4), gl);
  for (std::size_t l = 0; l < both.weights.size(); ++l) {
    CHECK((both.weights[l] - ((1 - lam) * a.weights[l] + lam * b.weights[l])).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(net.backward(ForwardPass{}, gz, gl), StateError);
  CHECK_THROWS_AS(net.backward(pass, Matrix::Zero(3, 4), gl), DimensionError);
}

TEST_CASE("sgd with momentum") {
  const Network base(small_shape(), 2);
  const Parameters g = [&] {
    Parameters p = base.parameters().zeros_like();
    for (auto& w : p.weights) w.setConstant(0.5);
    for (auto& b : p.biases) b.setConstant(-0.25);
    return p;
  }();

  SUBCASE("no momentum, one step") {
    Network net = base;
    SgdMomentum opt(0.0);
    opt.step(net, g, 0.1);
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      CHECK((net.parameters().weights[l] - (base.parameters().weights[l] - 0.1 * g.weights[l])).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("two steps with constant gradient") {
    Network net = base;
    SgdMomentum opt(0.9);
    opt.step(net, g, 0.1);
    opt.step(net, g, 0.1);
    const Matrix moved = base.parameters().weights[0] - net.parameters().weights[0];
    CHECK((moved.array() - 0.1 * 0.5 * 2.9).abs().maxCoeff() < 1e-14);
  }
  SUBCASE("zero learning rate") {
    Network net = base;
    SgdMomentum opt(0.9);
    opt.step(net, g, 0.0);
    CHECK(net.backbone_hash() == base.backbone_hash());
    CHECK(net.classifier_hash() == base.classifier_hash());
  }
  SUBCASE("shape mismatch") {
    Network net = base;
    SgdMomentum opt;
    Parameters bad = g;
    bad.weights.pop_back();
    CHECK_THROWS_AS(opt.step(net, bad, 0.1), DimensionError);
  }
}

TEST_CASE("frozen backbone") {
  Network net(small_shape(), 3);
  Parameters g = net.parameters().zeros_like();
  for (auto& w : g.weights) w.setConstant(1.0);
  const auto backbone = net.backbone_hash();
  const auto head = net.classifier_hash();
  SgdMomentum opt(0.9);
  net.freeze_backbone();
  for (int t = 0; t < 100; ++t) opt.step(net, g, 0.01);
  CHECK(net.backbone_hash() == backbone);
  CHECK(net.classifier_hash() != head);
  net.unfreeze_backbone();
  opt.step(net, g, 0.01);
  CHECK(net.backbone_hash() != backbone);
}

TEST_CASE("seeded initialization is deterministic") {
  const Network a(small_shape(), 42), b(small_shape(), 42), c(small_shape(), 43);
  CHECK(a.backbone_hash() == b.backbone_hash());
  CHECK(a.classifier_hash() == b.classifier_hash());
  CHECK(a.backbone_hash() != c.backbone_hash());
}

TEST_CASE("argmax ties go to the lowest class") {
  Matrix m(2, 3);
  m << 1, 3, 3, 2, 2, 2;
  CHECK(Network::argmax_rows(m) == std::vector<int>{1, 0});
}

TEST_CASE("network file round-trip") {
  const Network net(small_shape(Activation::softplus), 8);
  std::ostringstream os;
  save_network(net, os);
  std::istringstream is(os.str());
  const Network back = load_network(is);
  CHECK(back.backbone_hash() == net.backbone_hash());
  CHECK(back.classifier_hash() == net.classifier_hash());
  CHECK(back.shape().activation == Activation::softplus);

  std::string text = os.str();
  text[text.size() / 2] = text[text.size() / 2] == '1' ? '2' : '1';
  std::istringstream bad(text);
  CHECK_THROWS_AS(load_network(bad), IntegrityError);
}
