// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drolt/config.hpp"
#include "drolt/data.hpp"
#include "drolt/epsilon.hpp"
#include "drolt/eval.hpp"
#include "drolt/model.hpp"
#include "drolt/trainer.hpp"
#include "json.hpp"

namespace drolt {

SynthSpec synth_spec_from(const RunConfig& config);
NetworkShape network_shape_from(const RunConfig& config);
TrainPlan train_plan_from(const RunConfig& config);
EpsilonPolicy epsilon_policy_from(const RunConfig& config, std::vector<std::size_t> class_counts);

/// $DROLT_RUN_ROOT, or ./runs.
std::filesystem::path default_run_root();

/// "# key = value" lines with the resolved config; prefixed to every CSV artifact.
void write_provenance(std::ostream& os, const RunConfig& config);

struct RunOptions {
  std::filesystem::path run_root = default_run_root();
  bool dry_run = false;          // validate only; no compute, no files
  bool write_artifacts = true;   // false: everything stays in memory
  std::optional<std::filesystem::path> resume_from;
  int max_epochs = -1;           // stop (resumably) after this many epochs in this call
  std::function<void(const BatchEvent&)> observer;
};

struct RunResult {
  RunConfig config;
  std::optional<LongTailDataset> data;
  std::optional<TrainState> state;
  SplitAccuracy final_accuracy;
  EpsilonReport epsilon;
  std::string metrics_csv;
  nlohmann::json report;
  std::optional<std::filesystem::path> run_dir;
  bool finished = false;
};

/// Validates, synthesizes the dataset, trains, evaluates and (optionally) writes the run
/// directory: config.txt, dataset.txt, metrics.csv, checkpoint.txt, epsilon.csv,
/// error_gap.csv, centroids.csv, report.json. With resume_from set, the config embedded in
/// the checkpoint is used and `config` must either equal it or be the default config.
RunResult run_experiment(const RunConfig& config, const RunOptions& options = {});

/// Every schema problem of a run report; empty when valid.
std::vector<std::string> validate_run_report(const nlohmann::json& report);

inline constexpr int kRunReportSchemaVersion = 1;

struct SweepPoint {
  std::string value;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  SplitAccuracy accuracy;
  std::optional<std::filesystem::path> run_dir;
};

/// One run per (value, seed); seed sets both data.seed and train.seed. Failures are
/// recorded and the sweep continues. Results are ordered by value (numerically when all
/// values parse as numbers), then seed, independent of `jobs`.
std::vector<SweepPoint> run_sweep(const RunConfig& base, const std::string& key, const std::vector<std::string>& values,
                                  const std::vector<std::uint64_t>& seeds, int jobs, const RunOptions& child_options);

void write_sweep_csv(std::ostream& os, const std::string& key, const std::vector<SweepPoint>& points);
/// Median over seeds of each accuracy column, one row per value.
void write_sweep_summary_csv(std::ostream& os, const std::string& key, const std::vector<SweepPoint>& points);

}  // namespace drolt
