// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "drolt/error.hpp"
#include "drolt/experiment.hpp"

using namespace drolt;
namespace fs = std::filesystem;

namespace {

RunConfig tiny() {
  RunConfig c;
  c.set("data.classes", "4");
  c.set("data.n_max", "60");
  c.set("data.beta", "10");
  c.set("data.dim", "6");
  c.set("data.test_per_class", "20");
  c.set("model.widths", "16");
  c.set("model.embedding_dim", "8");
  c.set("train.warmup_epochs", "2");
  c.set("train.joint_epochs", "2");
  c.set("train.rebalance_epochs", "1");
  c.set("train.batch_size", "32");
  return c;
}

fs::path fresh_root(const std::string& name) {
  const fs::path p = fs::path("experiment_scratch") / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("dry run validates without touching the disk") {
  RunOptions o;
  o.run_root = fresh_root("dry");
  o.dry_run = true;
  const auto r = run_experiment(tiny(), o);
  CHECK(!r.data.has_value());
  CHECK(!fs::exists(o.run_root));

  auto bad = tiny();
  bad.set("loss.lambda", "2");
  bad.set("train.batch_size", "0");
  try {
    run_experiment(bad, o);
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.problems().size() == 2);
  }
}

TEST_CASE("a run writes every artifact and a valid report") {
  RunOptions o;
  o.run_root = fresh_root("full");
  const auto r = run_experiment(tiny(), o);
  REQUIRE(r.run_dir.has_value());
  CHECK(r.finished);
  for (const char* f : {"config.txt", "dataset.txt", "metrics.csv", "checkpoint.txt", "epsilon.csv", "error_gap.csv",
                        "centroids.csv", "report.json"}) {
    CHECK_MESSAGE(fs::exists(*r.run_dir / f), f);
  }
  CHECK(validate_run_report(r.report).empty());
  CHECK(r.report["epochs_completed"] == 5);
  const std::string metrics = slurp(*r.run_dir / "metrics.csv");
  CHECK(metrics.rfind("# config_hash = " + tiny().hash(), 0) == 0);
  CHECK(metrics == r.metrics_csv);

  auto broken = r.report;
  broken["stage"] = "sideways";
  broken.erase("seed");
  CHECK(validate_run_report(broken).size() == 2);
  auto short_eps = r.report;
  short_eps["epsilon"].erase(0);
  CHECK(validate_run_report(short_eps) == std::vector<std::string>{"epsilon and class_counts differ in length"});

  // same config again: a second directory, the first one left alone
  const auto again = run_experiment(tiny(), o);
  CHECK(*again.run_dir != *r.run_dir);
  CHECK(slurp(*r.run_dir / "metrics.csv") == metrics);
  CHECK(again.metrics_csv == metrics);
}

TEST_CASE("in-memory runs leave no files") {
  RunOptions o;
  o.run_root = fresh_root("mem");
  o.write_artifacts = false;
  const auto r = run_experiment(tiny(), o);
  CHECK(!r.run_dir.has_value());
  CHECK(!fs::exists(o.run_root));
  CHECK(r.report["run_dir"].is_null());
}

TEST_CASE("resume reproduces an uninterrupted run") {
  RunOptions o;
  o.run_root = fresh_root("resume");
  const auto full = run_experiment(tiny(), o);

  RunOptions part = o;
  part.max_epochs = 3;
  const auto first = run_experiment(tiny(), part);
  CHECK(!first.finished);

  RunOptions cont = o;
  cont.resume_from = *first.run_dir / "checkpoint.txt";
  const auto second = run_experiment(RunConfig(), cont);
  CHECK(second.finished);
  CHECK(second.metrics_csv == full.metrics_csv);

  auto other = tiny();
  other.set("loss.lambda", "0.3");
  CHECK_THROWS_AS(run_experiment(other, cont), ValidationError);

  RunOptions missing = o;
  missing.resume_from = o.run_root / "nope.txt";
  CHECK_THROWS_AS(run_experiment(RunConfig(), missing), Error);
}

TEST_CASE("sweeps are ordered and match plain runs") {
  RunOptions o;
  o.run_root = fresh_root("sweep");
  o.write_artifacts = false;
  const auto pts = run_sweep(tiny(), "loss.lambda", {"1", "0.25", "0.5"}, {2, 1}, 2, o);
  REQUIRE(pts.size() == 6);
  CHECK(pts[0].value == "0.25");
  CHECK(pts[0].seed == 2);  // seeds keep the order they were given in
  CHECK(pts[1].seed == 1);
  CHECK(pts[4].value == "1");
  for (const auto& p : pts) CHECK(p.ok);

  auto plain = tiny();
  plain.set("loss.lambda", "0.5");
  plain.set("data.seed", "2");
  plain.set("train.seed", "2");
  const auto r = run_experiment(plain, o);
  CHECK(pts[2].accuracy.balanced == r.final_accuracy.balanced);
  CHECK(pts[2].accuracy.few == r.final_accuracy.few);

  const auto serial = run_sweep(tiny(), "loss.lambda", {"1", "0.25", "0.5"}, {2, 1}, 1, o);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(serial[i].accuracy.balanced == pts[i].accuracy.balanced);

  std::ostringstream csv, summary;
  write_sweep_csv(csv, "loss.lambda", pts);
  write_sweep_summary_csv(summary, "loss.lambda", pts);
  CHECK(csv.str().find("key,value,seed,status,acc_many,acc_med,acc_few,acc_balanced,error\n") != std::string::npos);
  CHECK(summary.str().find("key,value,runs_ok,runs_failed,median_many,median_med,median_few,median_balanced\n") !=
        std::string::npos);
}

TEST_CASE("a failing sweep point does not stop the sweep") {
  RunOptions o;
  o.write_artifacts = false;
  const auto pts = run_sweep(tiny(), "data.beta", {"10", "0.5"}, {1}, 1, o);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].value == "0.5");
  CHECK(!pts[0].ok);
  CHECK(!pts[0].error.empty());
  CHECK(pts[1].ok);
}

TEST_CASE("config mapping") {
  auto c = tiny();
  c.set("epsilon.variant", "sqrt_n");
  c.set("epsilon.value", "2");
  const std::vector<std::size_t> counts{100, 4};
  const auto eps = epsilon_policy_from(c, counts);
  CHECK(eps.epsilon_for_class(1) == doctest::Approx(1.0));
  const auto shape = network_shape_from(c);
  CHECK(shape.hidden_widths == std::vector<int>{16});
  CHECK(train_plan_from(c).joint_epochs == 2);
  CHECK(synth_spec_from(c).classes == 4);
}
