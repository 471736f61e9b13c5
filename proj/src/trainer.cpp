// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "drolt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "drolt/error.hpp"
#include "serialize.hpp"
#include "textio.hpp"

namespace drolt {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::warmup:
      return "warmup";
    case Stage::joint:
      return "joint";
    case Stage::rebalance:
      return "rebalance";
    case Stage::done:
      return "done";
  }
  return "unknown";
}

namespace {

Stage parse_stage(std::string_view s) {
  if (s == "warmup") return Stage::warmup;
  if (s == "joint") return Stage::joint;
  if (s == "rebalance") return Stage::rebalance;
  if (s == "done") return Stage::done;
  throw DomainError("unknown stage '" + std::string(s) + "'");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t epoch_seed(std::uint64_t seed, int global_epoch) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(global_epoch) + 1));
}

// Constant rescaling of the robust term so that, per batch, it is on the scale of a
// per-sample mean like the cross-entropy term.
double robust_scale(WeightMode mode, std::size_t n_train, int classes, std::size_t batch) {
  switch (mode) {
    case WeightMode::inverse_count:
      return static_cast<double>(n_train) / (static_cast<double>(classes) * static_cast<double>(batch));
    case WeightMode::in_batch:
      return 1.0 / static_cast<double>(classes);
    case WeightMode::uniform:
      return 1.0 / static_cast<double>(batch);
  }
  return 1.0;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

std::string opt_exact(const std::optional<double>& v) { return v ? textio::exact(*v) : "NA"; }
std::string opt_brief(const std::optional<double>& v) { return v ? textio::brief(*v) : "NA"; }

}  // namespace

StageSelection parse_stage_selection(std::string_view name) {
  if (name == "all") return StageSelection::all;
  if (name == "warmup-only") return StageSelection::warmup_only;
  if (name == "no-rebalance") return StageSelection::no_rebalance;
  throw DomainError("unknown stage selection '" + std::string(name) + "'");
}

double TrainPlan::lr_at(int global_epoch) const {
  double lr_now = lr;
  for (int m : milestones) {
    if (global_epoch >= m) lr_now *= gamma;
  }
  return lr_now;
}

void write_metrics_csv(std::ostream& os, const std::vector<EpochMetrics>& rows) {
  os << kMetricsColumns << '\n';
  for (const auto& r : rows) {
    os << r.epoch << ',' << to_string(r.stage) << ',' << textio::brief(r.loss_total) << ','
       << textio::brief(r.loss_ce) << ',' << textio::brief(r.loss_robust) << ',' << opt_brief(r.accuracy.many) << ','
       << opt_brief(r.accuracy.med) << ',' << opt_brief(r.accuracy.few) << ',' << textio::brief(r.accuracy.balanced)
       << ',' << opt_brief(r.gap_ratio) << ',' << textio::brief(r.eps_min) << ',' << textio::brief(r.eps_median)
       << ',' << textio::brief(r.eps_max) << '\n';
  }
}

TrainState initial_state(const NetworkShape& shape, const TrainPlan& plan, EpsilonPolicy epsilon) {
  return TrainState{Network(shape, splitmix64(plan.seed ^ 0x5eedULL)), SgdMomentum(plan.momentum, plan.weight_decay),
                    std::move(epsilon)};
}

Trainer::Trainer(const LongTailDataset& data, TrainPlan plan, TrainState state)
    : data_(data), plan_(std::move(plan)), state_(std::move(state)), splits_(assign_splits(data.class_counts)) {
  if (plan_.batch_size < 1) throw DomainError("Trainer: batch size must be >= 1");
  if (!(plan_.lambda >= 0.0 && plan_.lambda <= 1.0)) throw DomainError("Trainer: lambda must lie in [0, 1]");
  if (state_.net.shape().input_dim != data_.dim()) throw DimensionError("Trainer: network input does not match data");
  if (state_.net.shape().num_classes != data_.num_classes() || state_.epsilon.num_classes() != data_.num_classes()) {
    throw DimensionError("Trainer: class count mismatch between data, network and epsilon policy");
  }
}

int Trainer::stage_epochs(Stage s) const {
  switch (s) {
    case Stage::warmup:
      return plan_.warmup_epochs;
    case Stage::joint:
      return plan_.stages == StageSelection::warmup_only ? 0 : plan_.joint_epochs;
    case Stage::rebalance:
      return plan_.stages == StageSelection::all ? plan_.rebalance_epochs : 0;
    case Stage::done:
      return 0;
  }
  return 0;
}

bool Trainer::finished() const { return state_.stage == Stage::done; }

void Trainer::refresh_bank() {
  const Matrix z = state_.net.embed(data_.train_inputs);
  state_.bank = CentroidBank::recompute(z, data_.train_labels, data_.num_classes(), state_.global_epoch);
}

void Trainer::advance_stage() {
  state_.epoch_in_stage = 0;
  state_.best_val = -1.0;
  state_.since_best = 0;
  switch (state_.stage) {
    case Stage::warmup:
      if (!state_.bank) refresh_bank();
      state_.stage = Stage::joint;
      break;
    case Stage::joint:
      state_.stage = Stage::rebalance;
      break;
    case Stage::rebalance:
    case Stage::done:
      state_.stage = Stage::done;
      break;
  }
}

void Trainer::stage1_warmup() {
  if (state_.stage != Stage::warmup) throw StateError("stage 1 already completed");
  while (state_.epoch_in_stage < stage_epochs(Stage::warmup) && budget_ != 0) {
    run_epoch(Stage::warmup);
    if (early_stop(Stage::warmup)) break;
  }
  if (!state_.bank) refresh_bank();
  if (state_.epoch_in_stage >= stage_epochs(Stage::warmup) || state_.since_best < 0) advance_stage();
}

void Trainer::stage2_joint() {
  if (state_.stage == Stage::warmup) {
    if (!state_.bank) throw StateError("stage 2 needs a centroid bank; run stage 1 first");
    advance_stage();
  }
  if (state_.stage != Stage::joint) throw StateError("stage 2 already completed");
  while (state_.epoch_in_stage < stage_epochs(Stage::joint) && budget_ != 0) {
    run_epoch(Stage::joint);
    if (early_stop(Stage::joint)) break;
  }
  if (state_.epoch_in_stage >= stage_epochs(Stage::joint) || state_.since_best < 0) advance_stage();
}

void Trainer::stage3_rebalance() {
  if (state_.stage == Stage::warmup || state_.stage == Stage::joint) {
    if (state_.stage == Stage::warmup && !state_.bank) throw StateError("stage 3 needs the earlier stages to have run");
    state_.stage = Stage::rebalance;
    state_.epoch_in_stage = 0;
  }
  if (state_.stage != Stage::rebalance) throw StateError("stage 3 already completed");
  if (stage_epochs(Stage::rebalance) > 0 && !state_.head_trained) {
    throw StateError("stage 3 needs a trained classifier head; run stage 1 or 2 first");
  }
  if (state_.epoch_in_stage == 0 && stage_epochs(Stage::rebalance) > 0) {
    state_.net.freeze_backbone();
    state_.optimizer.set_velocity({});
  }
  while (state_.epoch_in_stage < stage_epochs(Stage::rebalance) && budget_ != 0) {
    run_epoch(Stage::rebalance);
    if (early_stop(Stage::rebalance)) break;
  }
  if (state_.epoch_in_stage >= stage_epochs(Stage::rebalance) || state_.since_best < 0) advance_stage();
}

void Trainer::run(int max_epochs) {
  budget_ = max_epochs;
  while (!finished() && budget_ != 0) {
    switch (state_.stage) {
      case Stage::warmup:
        stage1_warmup();
        break;
      case Stage::joint:
        stage2_joint();
        break;
      case Stage::rebalance:
        stage3_rebalance();
        break;
      case Stage::done:
        break;
    }
  }
  budget_ = -1;
}

// Returns true when the stage should end now. since_best < 0 marks a stopped stage.
bool Trainer::early_stop(Stage s) {
  if (plan_.patience <= 0 || data_.val_labels.empty()) return false;
  const auto pred = state_.net.predict(data_.val_inputs);
  const double acc = split_accuracy(pred, data_.val_labels, splits_, data_.num_classes()).balanced;
  if (acc > state_.best_val) {
    state_.best_val = acc;
    state_.since_best = 0;
  } else {
    ++state_.since_best;
  }
  if (state_.since_best >= plan_.patience && state_.epoch_in_stage < stage_epochs(s)) {
    state_.since_best = -1;
    return true;
  }
  return false;
}

void Trainer::run_epoch(Stage s) {
  refresh_bank();
  const CentroidBank& bank = *state_.bank;

  const std::size_t n = data_.train_size();
  const int C = data_.num_classes();
  const double lr = s == Stage::rebalance ? plan_.rebalance_lr : plan_.lr_at(state_.global_epoch);
  const double lambda = s == Stage::joint ? plan_.lambda : 1.0;
  const double scale = robust_scale(plan_.weighting, n, C, plan_.batch_size);

  std::vector<std::size_t> order(n);
  const std::uint64_t seed = epoch_seed(plan_.seed, state_.global_epoch);
  if (s == Stage::rebalance) {
    BalancedSampler sampler(data_.train_labels, C, seed);
    for (auto& i : order) i = sampler.next();
  } else {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  double sum_total = 0.0, sum_ce = 0.0, sum_robust = 0.0, sum_gap = 0.0;
  int batches = 0, gap_batches = 0;
  for (std::size_t start = 0; start < n; start += plan_.batch_size, ++batches) {
    const std::size_t end = std::min(n, start + plan_.batch_size);
    const auto m = static_cast<Eigen::Index>(end - start);
    Matrix x(m, data_.dim());
    std::vector<int> y(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
      x.row(i) = data_.train_inputs.row(static_cast<Eigen::Index>(order[start + i]));
      y[i] = data_.train_labels[order[start + i]];
    }

    const ForwardPass pass = state_.net.forward(x);
    const CrossEntropyResult ce = cross_entropy(pass.logits, y);
    FeatureBatch fb{pass.embedding(), y, class_weights(plan_.weighting, data_.class_counts, y)};
    LossResult robust = robust_loss(fb, bank, state_.epsilon);
    robust.value *= scale;
    robust.grad_embeddings *= scale;
    robust.grad_centroids *= scale;
    for (double& g : robust.grad_epsilon) g *= scale;
    const JointLoss jl = joint_loss(ce, robust, lambda);

    if (!std::isfinite(jl.value) || !all_finite(jl.grad_embeddings) || !all_finite(jl.grad_logits)) {
      std::ostringstream msg;
      msg << "non-finite loss in stage " << to_string(s) << ", epoch " << state_.global_epoch << ", batch " << batches
          << ": loss=" << jl.value << " ce=" << jl.ce << " robust=" << jl.robust
          << " max|grad_z|=" << max_abs(jl.grad_embeddings) << " max|grad_logits|=" << max_abs(jl.grad_logits)
          << " eps=[";
      const auto eps = state_.epsilon.epsilons();
      for (std::size_t c = 0; c < eps.size(); ++c) msg << (c ? " " : "") << eps[c];
      msg << "]";
      throw TrainingError(msg.str());
    }

    const Parameters grads = state_.net.backward(pass, jl.grad_embeddings, jl.grad_logits);
    state_.optimizer.step(state_.net, grads, lr);
    if (s == Stage::joint && state_.epsilon.is_learned() && lambda < 1.0) {
      state_.epsilon = update_learned_epsilon(state_.epsilon, jl.grad_epsilon, plan_.epsilon_lr);
    }

    if (fb.size() >= 2) {
      try {
        sum_gap += bound_gap_ratio(fb, bank, state_.epsilon);
        ++gap_batches;
      } catch (const DomainError&) {
        // degenerate batch; no ratio
      }
    }
    sum_total += jl.value;
    sum_ce += jl.ce;
    sum_robust += jl.robust;
    if (observer_) observer_(BatchEvent{s, state_.global_epoch, batches, &bank, jl.value});
  }

  if (s != Stage::rebalance) state_.head_trained = true;

  EpochMetrics row;
  row.epoch = state_.global_epoch;
  row.stage = s;
  row.loss_total = sum_total / batches;
  row.loss_ce = sum_ce / batches;
  row.loss_robust = sum_robust / batches;
  row.accuracy = test_accuracy(state_.net, data_);
  if (gap_batches > 0) row.gap_ratio = sum_gap / gap_batches;
  auto eps = state_.epsilon.epsilons();
  std::sort(eps.begin(), eps.end());
  row.eps_min = eps.front();
  row.eps_max = eps.back();
  const std::size_t k = eps.size();
  row.eps_median = k % 2 ? eps[k / 2] : 0.5 * (eps[k / 2 - 1] + eps[k / 2]);
  state_.history.push_back(row);

  ++state_.global_epoch;
  ++state_.epoch_in_stage;
  if (budget_ > 0) --budget_;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const TrainState& st, const std::string& config_text, std::ostream& os) {
  std::ostringstream b;
  const auto config_lines = std::count(config_text.begin(), config_text.end(), '\n');
  b << "config " << config_lines << '\n' << config_text;
  b << "stage " << to_string(st.stage) << '\n';
  b << "epoch_in_stage " << st.epoch_in_stage << '\n';
  b << "global_epoch " << st.global_epoch << '\n';
  b << "head_trained " << (st.head_trained ? 1 : 0) << '\n';
  b << "bank_ready " << (st.bank ? 1 : 0) << '\n';
  b << "early_stop " << textio::exact(st.best_val) << ' ' << st.since_best << '\n';
  b << "frozen " << (st.net.backbone_frozen() ? 1 : 0) << '\n';
  serialize::write_shape(b, st.net.shape());
  serialize::write_parameters(b, "params", st.net.parameters());
  const bool has_velocity = !st.optimizer.velocity().weights.empty();
  b << "optimizer " << textio::exact(st.optimizer.momentum()) << ' ' << textio::exact(st.optimizer.weight_decay())
    << ' ' << (has_velocity ? 1 : 0) << '\n';
  if (has_velocity) serialize::write_parameters(b, "velocity", st.optimizer.velocity());
  b << "epsilon " << to_string(st.epsilon.variant()) << ' ' << textio::exact(st.epsilon.shared_value()) << ' '
    << st.epsilon.num_classes();
  for (auto n : st.epsilon.class_counts()) b << ' ' << n;
  b << '\n';
  serialize::write_reals(b, "eps_params", std::vector<double>(st.epsilon.params().begin(), st.epsilon.params().end()));
  b << "history " << st.history.size() << '\n';
  for (const auto& r : st.history) {
    b << r.epoch << ' ' << to_string(r.stage) << ' ' << textio::exact(r.loss_total) << ' ' << textio::exact(r.loss_ce)
      << ' ' << textio::exact(r.loss_robust) << ' ' << opt_exact(r.accuracy.many) << ' ' << opt_exact(r.accuracy.med)
      << ' ' << opt_exact(r.accuracy.few) << ' ' << textio::exact(r.accuracy.balanced) << ' '
      << opt_exact(r.gap_ratio) << ' ' << textio::exact(r.eps_min) << ' ' << textio::exact(r.eps_median) << ' '
      << textio::exact(r.eps_max) << '\n';
  }
  const std::string body = b.str();
  os << "drolt-checkpoint\nversion " << kCheckpointFormatVersion << '\n' << body;
  os << "checksum " << textio::hex64(textio::fnv1a(body)) << '\n';
}

namespace {

long long rec_int(textio::LineReader& r, std::string_view key) {
  const auto tok = r.expect_record(key, 1)[0];
  auto v = textio::parse_int(tok);
  if (!v) r.fail("malformed integer '" + tok + "'");
  return *v;
}

double real_tok(textio::LineReader& r, const std::string& tok) {
  auto v = textio::parse_double(tok);
  if (!v) r.fail("malformed number '" + tok + "'");
  return *v;
}

std::optional<double> opt_tok(textio::LineReader& r, const std::string& tok) {
  if (tok == "NA") return std::nullopt;
  return real_tok(r, tok);
}

}  // namespace

Checkpoint load_checkpoint(std::istream& is) {
  const std::string text = serialize::read_checked(is, "drolt-checkpoint", kCheckpointFormatVersion);
  std::istringstream body(text);
  textio::LineReader r(body);

  const auto config_lines = rec_int(r, "config");
  if (config_lines < 0) r.fail("negative config line count");
  std::string config_text;
  for (long long i = 0; i < config_lines; ++i) config_text += r.expect("config line") + "\n";

  Stage stage{};
  try {
    stage = parse_stage(r.expect_record("stage", 1)[0]);
  } catch (const DomainError& e) {
    r.fail(e.what());
  }
  const auto epoch_in_stage = rec_int(r, "epoch_in_stage");
  const auto global_epoch = rec_int(r, "global_epoch");
  const bool head_trained = rec_int(r, "head_trained") != 0;
  const bool bank_ready = rec_int(r, "bank_ready") != 0;
  const auto es = r.expect_record("early_stop", 2);
  const double best_val = real_tok(r, es[0]);
  const auto since = textio::parse_int(es[1]);
  if (!since) r.fail("malformed early-stop counter");
  const bool frozen = rec_int(r, "frozen") != 0;

  Network net = Network::zeros(serialize::read_shape(r));
  net.parameters() = serialize::read_parameters(r, "params", net.parameters());
  if (frozen) net.freeze_backbone();

  const auto opt = r.expect_record("optimizer", 3);
  SgdMomentum optimizer(real_tok(r, opt[0]), real_tok(r, opt[1]));
  if (opt[2] == "1") optimizer.set_velocity(serialize::read_parameters(r, "velocity", net.parameters()));

  auto eps_toks = textio::tokens(r.expect("epsilon"));
  if (eps_toks.size() < 4 || eps_toks[0] != "epsilon") r.fail("expected record 'epsilon'");
  const auto classes = textio::parse_int(eps_toks[3]);
  if (!classes || *classes < 1 || eps_toks.size() != static_cast<std::size_t>(*classes) + 4) {
    r.fail("record 'epsilon' has the wrong length");
  }
  std::vector<std::size_t> counts;
  for (long long c = 0; c < *classes; ++c) {
    auto v = textio::parse_u64(eps_toks[c + 4]);
    if (!v) r.fail("malformed class count");
    counts.push_back(*v);
  }
  const double shared = real_tok(r, eps_toks[2]);
  std::optional<EpsilonPolicy> eps;
  try {
    switch (parse_epsilon_variant(eps_toks[1])) {
      case EpsilonVariant::shared: {
        r.expect("eps_params");
        eps = EpsilonPolicy::shared(shared, counts);
        break;
      }
      case EpsilonVariant::sqrt_n: {
        r.expect("eps_params");
        eps = EpsilonPolicy::sqrt_n(shared, counts);
        break;
      }
      case EpsilonVariant::learned: {
        auto params = serialize::read_reals(r, "eps_params", counts.size());
        eps = EpsilonPolicy::learned_from_params(counts, std::move(params));
        break;
      }
    }
  } catch (const DomainError& e) {
    r.fail(e.what());
  }

  TrainState st{std::move(net), std::move(optimizer), std::move(*eps)};
  st.stage = stage;
  st.epoch_in_stage = static_cast<int>(epoch_in_stage);
  st.global_epoch = static_cast<int>(global_epoch);
  st.head_trained = head_trained;
  st.best_val = best_val;
  st.since_best = static_cast<int>(*since);

  const auto rows = rec_int(r, "history");
  for (long long i = 0; i < rows; ++i) {
    const auto t = textio::tokens(r.expect("history row"));
    if (t.size() != 13) r.fail("history row expects 13 fields");
    EpochMetrics m;
    const auto ep = textio::parse_int(t[0]);
    if (!ep) r.fail("malformed epoch");
    m.epoch = static_cast<int>(*ep);
    try {
      m.stage = parse_stage(t[1]);
    } catch (const DomainError& e) {
      r.fail(e.what());
    }
    m.loss_total = real_tok(r, t[2]);
    m.loss_ce = real_tok(r, t[3]);
    m.loss_robust = real_tok(r, t[4]);
    m.accuracy.many = opt_tok(r, t[5]);
    m.accuracy.med = opt_tok(r, t[6]);
    m.accuracy.few = opt_tok(r, t[7]);
    m.accuracy.balanced = real_tok(r, t[8]);
    m.gap_ratio = opt_tok(r, t[9]);
    m.eps_min = real_tok(r, t[10]);
    m.eps_median = real_tok(r, t[11]);
    m.eps_max = real_tok(r, t[12]);
    st.history.push_back(m);
  }
  return Checkpoint{std::move(config_text), std::move(st), bank_ready};
}

}  // namespace drolt
