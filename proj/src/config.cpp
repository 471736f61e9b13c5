// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "drolt/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "drolt/data.hpp"
#include "drolt/epsilon.hpp"
#include "drolt/error.hpp"
#include "drolt/losses.hpp"
#include "drolt/model.hpp"
#include "textio.hpp"

namespace drolt {

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"schema", "1", "configuration schema version"},
      {"data.classes", "10", "number of classes C (>= 2)"},
      {"data.n_max", "500", "training samples of the most frequent class"},
      {"data.beta", "100", "imbalance factor n_max / n_min (>= 1)"},
      {"data.dim", "16", "input dimension"},
      {"data.spread", "1", "per-coordinate standard deviation of each class"},
      {"data.separation", "4", "mean distance between class means, in units of data.spread"},
      {"data.test_per_class", "100", "balanced test samples per class"},
      {"data.val_per_class", "0", "balanced validation samples per class (early stopping)"},
      {"data.seed", "1", "dataset generator seed"},
      {"model.widths", "64,64", "hidden layer widths, comma separated (may be empty)"},
      {"model.embedding_dim", "32", "embedding dimension d"},
      {"model.activation", "tanh", "tanh | relu | softplus | identity"},
      {"model.activate_embedding", "true", "apply the activation to the embedding layer"},
      {"epsilon.variant", "learned", "shared | sqrt_n | learned"},
      {"epsilon.value", "1", "radius for shared, numerator for sqrt_n"},
      {"epsilon.init", "1", "initial radius of every class for the learned variant"},
      {"epsilon.lr", "0.01", "learning rate of the learned radii"},
      {"loss.lambda", "0.5", "weight of cross-entropy in the joint loss, in [0, 1]"},
      {"loss.weighting", "inverse_count", "class weights of the robust loss: inverse_count | in_batch | uniform"},
      {"train.warmup_epochs", "20", "stage 1 epochs (cross-entropy only)"},
      {"train.joint_epochs", "40", "stage 2 epochs (joint loss)"},
      {"train.rebalance_epochs", "10", "stage 3 epochs (classifier only, balanced sampling)"},
      {"train.batch_size", "128", "minibatch size"},
      {"train.lr", "0.05", "base learning rate for stages 1 and 2"},
      {"train.milestones", "", "global epochs at which the learning rate is multiplied by train.gamma"},
      {"train.gamma", "0.1", "multistep decay factor"},
      {"train.momentum", "0.9", "SGD momentum"},
      {"train.weight_decay", "0.0005", "L2 penalty on weights"},
      {"train.rebalance_lr", "0.01", "learning rate of stage 3"},
      {"train.patience", "0", "early-stopping patience in epochs on validation balanced accuracy (0 = off)"},
      {"train.stages", "all", "all | warmup-only | no-rebalance"},
      {"train.seed", "1", "seed for initialization, shuffling and resampling"},
  };
  return schema;
}

namespace {

const ConfigKey* find_key(std::string_view name) {
  for (const auto& k : config_schema()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

bool is_bool(std::string_view v) { return v == "true" || v == "false" || v == "1" || v == "0"; }

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : config_schema()) values_[k.name] = k.default_value;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  if (!find_key(key)) {
    parse_problems_.push_back("unknown key '" + std::string(key) + "'");
    return;
  }
  values_[std::string(key)] = std::string(textio::trim(value));
}

bool RunConfig::has_key(std::string_view key) const { return find_key(key) != nullptr; }

const std::string& RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw LookupError("unknown configuration key '" + std::string(key) + "'");
  return it->second;
}

RunConfig RunConfig::parse(std::istream& is, std::string_view origin) {
  RunConfig cfg = read(is, origin);
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::read(std::istream& is, std::string_view origin) {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = textio::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      cfg.parse_problems_.push_back(std::string(origin) + ":" + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    cfg.set(textio::trim(s.substr(0, eq)), textio::trim(s.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError({"cannot open config file '" + path + "'"});
  return parse(is, path);
}

double RunConfig::real(std::string_view key) const {
  auto v = textio::parse_double(get(key));
  if (!v) throw ValidationError({"'" + std::string(key) + "' is not a number"});
  return *v;
}

long long RunConfig::integer(std::string_view key) const {
  auto v = textio::parse_int(get(key));
  if (!v) throw ValidationError({"'" + std::string(key) + "' is not an integer"});
  return *v;
}

std::uint64_t RunConfig::u64(std::string_view key) const {
  auto v = textio::parse_u64(get(key));
  if (!v) throw ValidationError({"'" + std::string(key) + "' is not an unsigned integer"});
  return *v;
}

bool RunConfig::boolean(std::string_view key) const {
  const auto& v = get(key);
  if (!is_bool(v)) throw ValidationError({"'" + std::string(key) + "' is not a boolean"});
  return v == "true" || v == "1";
}

std::vector<long long> RunConfig::int_list(std::string_view key) const {
  std::vector<long long> out;
  const auto& v = get(key);
  if (textio::trim(v).empty()) return out;
  for (auto part : textio::split(v, ',')) {
    auto x = textio::parse_int(part);
    if (!x) throw ValidationError({"'" + std::string(key) + "' must be a comma-separated list of integers"});
    out.push_back(*x);
  }
  return out;
}

std::vector<std::string> RunConfig::problems() const {
  std::vector<std::string> out = parse_problems_;
  auto need_int = [&](const char* key, long long lo) {
    auto v = textio::parse_int(get(key));
    if (!v) {
      out.push_back(std::string(key) + ": expected an integer, got '" + get(key) + "'");
    } else if (*v < lo) {
      out.push_back(std::string(key) + ": must be >= " + std::to_string(lo));
    }
    return v;
  };
  auto need_real = [&](const char* key, double lo, double hi, bool lo_open) {
    auto v = textio::parse_double(get(key));
    if (!v || !std::isfinite(*v)) {
      out.push_back(std::string(key) + ": expected a finite number, got '" + get(key) + "'");
      return v;
    }
    if ((lo_open ? !(*v > lo) : !(*v >= lo)) || *v > hi) {
      out.push_back(std::string(key) + ": out of range " + (lo_open ? "(" : "[") + textio::exact(lo) + ", " +
                    textio::exact(hi) + "]");
    }
    return v;
  };
  auto need_u64 = [&](const char* key) {
    if (!textio::parse_u64(get(key))) out.push_back(std::string(key) + ": expected an unsigned integer");
  };
  auto need_enum = [&](const char* key, auto parser) {
    try {
      parser(get(key));
    } catch (const DomainError& e) {
      out.push_back(std::string(key) + ": " + e.what());
    }
  };
  const double inf = std::numeric_limits<double>::infinity();

  if (auto v = textio::parse_int(get("schema")); !v || *v != kConfigSchemaVersion) {
    out.push_back("schema: unsupported configuration schema '" + get("schema") + "' (supported: " +
                  std::to_string(kConfigSchemaVersion) + ")");
  }
  auto classes = need_int("data.classes", 2);
  auto n_max = need_int("data.n_max", 1);
  auto beta = need_real("data.beta", 1.0, inf, false);
  need_int("data.dim", 1);
  need_real("data.spread", 0.0, inf, true);
  need_real("data.separation", 0.0, inf, true);
  need_int("data.test_per_class", 1);
  need_int("data.val_per_class", 0);
  need_u64("data.seed");
  if (classes && n_max && beta && *classes >= 2 && *n_max >= 1 && *beta >= 1.0) {
    try {
      long_tail_counts(static_cast<int>(*classes), static_cast<int>(*n_max), *beta);
    } catch (const DomainError& e) {
      out.push_back(std::string("data.beta: ") + e.what());
    }
  }

  for (auto part : textio::trim(get("model.widths")).empty() ? std::vector<std::string_view>{}
                                                              : textio::split(get("model.widths"), ',')) {
    auto w = textio::parse_int(part);
    if (!w || *w < 1) {
      out.push_back("model.widths: expected positive integers, got '" + get("model.widths") + "'");
      break;
    }
  }
  need_int("model.embedding_dim", 1);
  need_enum("model.activation", [](const std::string& s) { parse_activation(s); });
  if (!is_bool(get("model.activate_embedding"))) out.push_back("model.activate_embedding: expected true or false");

  need_enum("epsilon.variant", [](const std::string& s) { parse_epsilon_variant(s); });
  need_real("epsilon.value", 0.0, inf, false);
  need_real("epsilon.init", 0.0, inf, true);
  need_real("epsilon.lr", 0.0, inf, false);

  need_real("loss.lambda", 0.0, 1.0, false);
  need_enum("loss.weighting", [](const std::string& s) { parse_weight_mode(s); });

  auto warm = need_int("train.warmup_epochs", 0);
  auto joint = need_int("train.joint_epochs", 0);
  auto rebal = need_int("train.rebalance_epochs", 0);
  need_int("train.batch_size", 1);
  need_real("train.lr", 0.0, inf, false);
  const auto& ms = get("train.milestones");
  if (!textio::trim(ms).empty()) {
    long long prev = -1;
    for (auto part : textio::split(ms, ',')) {
      auto m = textio::parse_int(part);
      if (!m || *m < 0 || *m <= prev) {
        out.push_back("train.milestones: expected strictly increasing nonnegative integers, got '" + ms + "'");
        break;
      }
      prev = *m;
    }
  }
  need_real("train.gamma", 0.0, inf, true);
  need_real("train.momentum", 0.0, 1.0, false);
  if (auto m = textio::parse_double(get("train.momentum")); m && *m >= 1.0) {
    out.push_back("train.momentum: must be < 1");
  }
  need_real("train.weight_decay", 0.0, inf, false);
  need_real("train.rebalance_lr", 0.0, inf, false);
  need_int("train.patience", 0);
  const auto& stages = get("train.stages");
  if (stages != "all" && stages != "warmup-only" && stages != "no-rebalance") {
    out.push_back("train.stages: expected all, warmup-only or no-rebalance, got '" + stages + "'");
  }
  need_u64("train.seed");
  if (warm && joint && rebal && stages == "all" && *rebal > 0 && *warm + *joint == 0) {
    out.push_back("train.rebalance_epochs: stage 3 needs a trained classifier head (warmup + joint epochs > 0)");
  }
  return out;
}

void RunConfig::validate() const {
  auto p = problems();
  if (!p.empty()) throw ValidationError(std::move(p));
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
  return os.str();
}

std::string RunConfig::hash() const { return textio::hex64(textio::fnv1a(to_text())); }

}  // namespace drolt
