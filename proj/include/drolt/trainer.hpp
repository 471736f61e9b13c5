// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drolt/centroids.hpp"
#include "drolt/config.hpp"
#include "drolt/data.hpp"
#include "drolt/epsilon.hpp"
#include "drolt/eval.hpp"
#include "drolt/losses.hpp"
#include "drolt/model.hpp"

namespace drolt {

enum class Stage { warmup, joint, rebalance, done };
std::string_view to_string(Stage s);

enum class StageSelection { all, warmup_only, no_rebalance };
StageSelection parse_stage_selection(std::string_view name);

struct TrainPlan {
  int warmup_epochs = 20;
  int joint_epochs = 40;
  int rebalance_epochs = 10;
  double lambda = 0.5;
  double lr = 0.05;
  std::vector<int> milestones;  // global epochs (stages 1-2) at which lr *= gamma
  double gamma = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double rebalance_lr = 0.01;
  double epsilon_lr = 0.01;
  std::size_t batch_size = 128;
  WeightMode weighting = WeightMode::inverse_count;
  int patience = 0;
  StageSelection stages = StageSelection::all;
  std::uint64_t seed = 1;

  /// Multistep schedule for stages 1 and 2.
  double lr_at(int global_epoch) const;
};

/// One row of the metrics CSV.
struct EpochMetrics {
  int epoch = 0;
  Stage stage = Stage::warmup;
  double loss_total = 0.0;
  double loss_ce = 0.0;
  double loss_robust = 0.0;
  SplitAccuracy accuracy;
  std::optional<double> gap_ratio;
  double eps_min = 0.0;
  double eps_median = 0.0;
  double eps_max = 0.0;
};

/// Column order of the metrics CSV.
inline constexpr std::string_view kMetricsColumns =
    "epoch,stage,loss_total,loss_ce,loss_robust,acc_many,acc_med,acc_few,acc_balanced,gap_ratio,eps_min,eps_median,"
    "eps_max";
void write_metrics_csv(std::ostream& os, const std::vector<EpochMetrics>& rows);

/// Everything needed to continue training exactly where it stopped.
struct TrainState {
  TrainState(Network n, SgdMomentum o, EpsilonPolicy e)
      : net(std::move(n)), optimizer(std::move(o)), epsilon(std::move(e)) {}

  Network net;
  SgdMomentum optimizer;
  EpsilonPolicy epsilon;
  std::optional<CentroidBank> bank;
  Stage stage = Stage::warmup;
  int epoch_in_stage = 0;
  int global_epoch = 0;
  bool head_trained = false;
  double best_val = -1.0;
  int since_best = 0;
  std::vector<EpochMetrics> history;
};

/// Reported once per minibatch; `bank` is the bank the batch was evaluated against.
struct BatchEvent {
  Stage stage;
  int epoch;
  int batch;
  const CentroidBank* bank;
  double loss;
};

/// Three-stage schedule: cross-entropy warmup, joint CE + robust loss, then classifier
/// re-training on a frozen backbone with class-balanced sampling. The centroid bank is
/// recomputed at the start of every epoch and is read-only for the rest of it.
class Trainer {
 public:
  Trainer(const LongTailDataset& data, TrainPlan plan, TrainState state);

  /// Remaining warmup epochs (lambda forced to 1). Always leaves a valid bank behind.
  void stage1_warmup();
  /// Remaining joint epochs. Throws StateError without a bank.
  void stage2_joint();
  /// Remaining rebalancing epochs. Throws StateError unless the classifier head was trained.
  void stage3_rebalance();
  /// Runs the selected stages from the current position. Stops early (resumably) once
  /// `max_epochs` epochs have been run by this call, if nonnegative.
  void run(int max_epochs = -1);

  bool finished() const;
  const TrainState& state() const { return state_; }
  TrainState& state() { return state_; }
  const TrainPlan& plan() const { return plan_; }

  void set_batch_observer(std::function<void(const BatchEvent&)> fn) { observer_ = std::move(fn); }

 private:
  int stage_epochs(Stage s) const;
  void run_epoch(Stage s);
  void refresh_bank();
  void advance_stage();
  bool early_stop(Stage s);

  const LongTailDataset& data_;
  TrainPlan plan_;
  TrainState state_;
  ClassSplits splits_;
  std::function<void(const BatchEvent&)> observer_;
  int budget_ = -1;
};

/// Fresh state: seeded network, optimizer, epsilon policy from the plan and config.
TrainState initial_state(const NetworkShape& shape, const TrainPlan& plan, EpsilonPolicy epsilon);

/// Checkpoint file: "drolt-checkpoint", versioned, checksummed. Embeds the resolved config.
void save_checkpoint(const TrainState& state, const std::string& config_text, std::ostream& os);
struct Checkpoint {
  std::string config_text;
  TrainState state;
  bool bank_ready = false;
};
Checkpoint load_checkpoint(std::istream& is);

inline constexpr int kCheckpointFormatVersion = 1;

}  // namespace drolt
