// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "drolt/geometry.hpp"

namespace drolt {

enum class Activation { tanh, relu, softplus, identity };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct NetworkShape {
  int input_dim = 16;
  std::vector<int> hidden_widths{64, 64};
  int embedding_dim = 32;
  int num_classes = 10;
  Activation activation = Activation::tanh;
  bool activate_embedding = true;  // apply the nonlinearity to the embedding layer too
};

/// All weights and biases. Entry l < backbone_depth() is backbone layer l; the last entry is
/// the classifier. weights[l] is (out x in).
struct Parameters {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  Parameters zeros_like() const;
  bool same_shape(const Parameters& other) const;
  std::size_t scalar_count() const;
};

/// Everything backward() needs, produced by forward().
struct ForwardPass {
  std::vector<Matrix> activations;      // [0] = inputs, [l] = output of backbone layer l
  std::vector<Matrix> pre_activations;  // [l] = pre-activation of backbone layer l + 1
  Matrix logits;

  bool empty() const { return activations.empty(); }
  const Matrix& embedding() const { return activations.back(); }
};

/// input -> hidden... -> embedding -> linear classifier.
class Network {
 public:
  /// Fan-in scaled uniform weights, zero biases, deterministic in `seed`.
  Network(NetworkShape shape, std::uint64_t seed);
  static Network zeros(NetworkShape shape);

  const NetworkShape& shape() const { return shape_; }
  /// Number of backbone layers (hidden layers plus the embedding layer).
  int backbone_depth() const { return static_cast<int>(shape_.hidden_widths.size()) + 1; }

  ForwardPass forward(const Matrix& inputs) const;
  /// Parameter gradients given upstream gradients injected at the embedding and at the logits.
  Parameters backward(const ForwardPass& pass, const Matrix& grad_embedding, const Matrix& grad_logits) const;

  Matrix embed(const Matrix& inputs) const { return forward(inputs).embedding(); }
  std::vector<int> predict(const Matrix& inputs) const;
  /// Argmax of logits already computed (ties resolve to the lowest class id).
  static std::vector<int> argmax_rows(const Matrix& logits);

  Parameters& parameters() { return params_; }
  const Parameters& parameters() const { return params_; }

  void freeze_backbone() { frozen_ = true; }
  void unfreeze_backbone() { frozen_ = false; }
  bool backbone_frozen() const { return frozen_; }

  std::uint64_t backbone_hash() const;
  std::uint64_t classifier_hash() const;

 private:
  explicit Network(NetworkShape shape);
  bool activated(int layer) const;

  NetworkShape shape_;
  Parameters params_;
  bool frozen_ = false;
};

/// Classical momentum: v <- m v + (g + wd * W); theta <- theta - lr v.
/// Weight decay applies to weights, not biases. Backbone layers are skipped while frozen.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = 0.9, double weight_decay = 0.0);

  void step(Network& net, const Parameters& grads, double lr);

  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }
  const Parameters& velocity() const { return velocity_; }
  void set_velocity(Parameters v) { velocity_ = std::move(v); }

 private:
  double momentum_;
  double weight_decay_;
  Parameters velocity_;
};

/// Self-contained network file ("drolt-network", versioned, checksummed).
void save_network(const Network& net, std::ostream& os);
Network load_network(std::istream& is);

inline constexpr int kNetworkFormatVersion = 1;

}  // namespace drolt
