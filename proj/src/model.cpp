// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "drolt/model.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "drolt/error.hpp"
#include "serialize.hpp"
#include "textio.hpp"

namespace drolt {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::tanh:
      return "tanh";
    case Activation::relu:
      return "relu";
    case Activation::softplus:
      return "softplus";
    case Activation::identity:
      return "identity";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "softplus") return Activation::softplus;
  if (name == "identity") return Activation::identity;
  throw DomainError("unknown activation '" + std::string(name) + "' (expected tanh, relu, softplus or identity)");
}

Parameters Parameters::zeros_like() const {
  Parameters z;
  for (const auto& w : weights) z.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : biases) z.biases.push_back(Vector::Zero(b.size()));
  return z;
}

bool Parameters::same_shape(const Parameters& other) const {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols()) return false;
  }
  for (std::size_t l = 0; l < biases.size(); ++l) {
    if (biases[l].size() != other.biases[l].size()) return false;
  }
  return true;
}

std::size_t Parameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

namespace {

void apply(Activation a, const Matrix& pre, Matrix& out) {
  switch (a) {
    case Activation::tanh:
      out = pre.array().tanh().matrix();
      return;
    case Activation::relu:
      out = pre.cwiseMax(0.0);
      return;
    case Activation::softplus:
      out = pre.unaryExpr([](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); });
      return;
    case Activation::identity:
      out = pre;
      return;
  }
}

// Multiplies `grad` in place by the activation derivative at `pre` (with output `post`).
void backprop(Activation a, const Matrix& pre, const Matrix& post, Matrix& grad) {
  switch (a) {
    case Activation::tanh:
      grad.array() *= (1.0 - post.array().square());
      return;
    case Activation::relu:
      grad.array() *= (pre.array() > 0.0).cast<double>();
      return;
    case Activation::softplus:
      grad.array() *= pre.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); }).array();
      return;
    case Activation::identity:
      return;
  }
}

std::uint64_t hash_params(const Parameters& p, std::size_t first, std::size_t last) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t l = first; l < last; ++l) {
    const auto& w = p.weights[l];
    const auto& b = p.biases[l];
    h = textio::fnv1a({reinterpret_cast<const char*>(w.data()), sizeof(double) * static_cast<std::size_t>(w.size())}, h);
    h = textio::fnv1a({reinterpret_cast<const char*>(b.data()), sizeof(double) * static_cast<std::size_t>(b.size())}, h);
  }
  return h;
}

}  // namespace

Network::Network(NetworkShape shape) : shape_(std::move(shape)) {
  if (shape_.input_dim < 1 || shape_.embedding_dim < 1 || shape_.num_classes < 1) {
    throw DomainError("Network: input_dim, embedding_dim and num_classes must be positive");
  }
  std::vector<int> widths{shape_.input_dim};
  for (int w : shape_.hidden_widths) {
    if (w < 1) throw DomainError("Network: hidden widths must be positive");
    widths.push_back(w);
  }
  widths.push_back(shape_.embedding_dim);
  widths.push_back(shape_.num_classes);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    params_.weights.push_back(Matrix::Zero(widths[l + 1], widths[l]));
    params_.biases.push_back(Vector::Zero(widths[l + 1]));
  }
}

Network::Network(NetworkShape shape, std::uint64_t seed) : Network(std::move(shape)) {
  std::mt19937_64 rng(seed);
  for (auto& w : params_.weights) {
    const double bound = std::sqrt(3.0 / static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
    }
  }
}

Network Network::zeros(NetworkShape shape) { return Network(std::move(shape)); }

bool Network::activated(int layer) const {
  return layer + 1 < backbone_depth() || shape_.activate_embedding;
}

ForwardPass Network::forward(const Matrix& inputs) const {
  if (inputs.cols() != shape_.input_dim) {
    throw DimensionError("Network::forward: input dimension " + std::to_string(inputs.cols()) + ", expected " +
                         std::to_string(shape_.input_dim));
  }
  ForwardPass pass;
  const int L = backbone_depth();
  pass.activations.reserve(L + 1);
  pass.pre_activations.reserve(L);
  pass.activations.push_back(inputs);
  for (int l = 0; l < L; ++l) {
    Matrix pre = pass.activations.back() * params_.weights[l].transpose();
    pre.rowwise() += params_.biases[l].transpose();
    Matrix post;
    apply(activated(l) ? shape_.activation : Activation::identity, pre, post);
    pass.pre_activations.push_back(std::move(pre));
    pass.activations.push_back(std::move(post));
  }
  pass.logits = pass.activations.back() * params_.weights[L].transpose();
  pass.logits.rowwise() += params_.biases[L].transpose();
  return pass;
}

Parameters Network::backward(const ForwardPass& pass, const Matrix& grad_embedding, const Matrix& grad_logits) const {
  const int L = backbone_depth();
  if (pass.empty()) throw StateError("Network::backward called without a forward pass");
  if (static_cast<int>(pass.activations.size()) != L + 1) throw StateError("Network::backward: pass from another network");
  const Eigen::Index n = pass.activations.front().rows();
  if (grad_embedding.rows() != n || grad_embedding.cols() != shape_.embedding_dim) {
    throw DimensionError("Network::backward: embedding gradient has the wrong shape");
  }
  if (grad_logits.rows() != n || grad_logits.cols() != shape_.num_classes) {
    throw DimensionError("Network::backward: logit gradient has the wrong shape");
  }

  Parameters g = params_.zeros_like();
  g.weights[L] = grad_logits.transpose() * pass.activations[L];
  g.biases[L] = grad_logits.colwise().sum().transpose();

  Matrix upstream = grad_embedding + grad_logits * params_.weights[L];
  for (int l = L - 1; l >= 0; --l) {
    backprop(activated(l) ? shape_.activation : Activation::identity, pass.pre_activations[l], pass.activations[l + 1],
             upstream);
    g.weights[l] = upstream.transpose() * pass.activations[l];
    g.biases[l] = upstream.colwise().sum().transpose();
    if (l > 0) upstream = upstream * params_.weights[l];
  }
  return g;
}

std::vector<int> Network::argmax_rows(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k) {
      if (logits(i, k) > logits(i, best)) best = k;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> Network::predict(const Matrix& inputs) const { return argmax_rows(forward(inputs).logits); }

std::uint64_t Network::backbone_hash() const { return hash_params(params_, 0, backbone_depth()); }

std::uint64_t Network::classifier_hash() const {
  return hash_params(params_, backbone_depth(), params_.weights.size());
}

SgdMomentum::SgdMomentum(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("SgdMomentum: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw DomainError("SgdMomentum: weight decay must be nonnegative");
}

void SgdMomentum::step(Network& net, const Parameters& grads, double lr) {
  auto& p = net.parameters();
  if (!grads.same_shape(p)) throw DimensionError("SgdMomentum::step: gradient shape does not match parameters");
  if (!(lr >= 0.0)) throw DomainError("SgdMomentum::step: lr must be nonnegative");
  if (velocity_.weights.empty()) velocity_ = p.zeros_like();
  if (!velocity_.same_shape(p)) throw DimensionError("SgdMomentum::step: velocity belongs to another network");

  const std::size_t first = net.backbone_frozen() ? static_cast<std::size_t>(net.backbone_depth()) : 0;
  for (std::size_t l = first; l < p.weights.size(); ++l) {
    velocity_.weights[l] = momentum_ * velocity_.weights[l] + grads.weights[l];
    if (weight_decay_ > 0.0) velocity_.weights[l] += weight_decay_ * p.weights[l];
    velocity_.biases[l] = momentum_ * velocity_.biases[l] + grads.biases[l];
    p.weights[l] -= lr * velocity_.weights[l];
    p.biases[l] -= lr * velocity_.biases[l];
  }
}

void save_network(const Network& net, std::ostream& os) {
  std::ostringstream body;
  serialize::write_shape(body, net.shape());
  serialize::write_parameters(body, "params", net.parameters());
  const std::string text = body.str();
  os << "drolt-network\nversion " << kNetworkFormatVersion << '\n' << text;
  os << "checksum " << textio::hex64(textio::fnv1a(text)) << '\n';
}

Network load_network(std::istream& is) {
  const std::string text = serialize::read_checked(is, "drolt-network", kNetworkFormatVersion);
  std::istringstream body(text);
  textio::LineReader r(body);
  NetworkShape shape = serialize::read_shape(r);
  Network net = Network::zeros(shape);
  net.parameters() = serialize::read_parameters(r, "params", net.parameters());
  return net;
}

}  // namespace drolt
