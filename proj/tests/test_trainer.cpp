// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "drolt/error.hpp"
#include "drolt/trainer.hpp"

using namespace drolt;

namespace {

SynthSpec small_spec(std::uint64_t seed = 1) {
  SynthSpec s;
  s.classes = 4;
  s.n_max = 60;
  s.beta = 10;
  s.dim = 6;
  s.test_per_class = 20;
  s.seed = seed;
  return s;
}

NetworkShape small_shape(const LongTailDataset& ds) {
  NetworkShape s;
  s.input_dim = ds.dim();
  s.hidden_widths = {16};
  s.embedding_dim = 8;
  s.num_classes = ds.num_classes();
  return s;
}

TrainPlan small_plan() {
  TrainPlan p;
  p.warmup_epochs = 3;
  p.joint_epochs = 3;
  p.rebalance_epochs = 2;
  p.batch_size = 32;
  return p;
}

Trainer make(const LongTailDataset& ds, const TrainPlan& plan, bool learned = true) {
  auto eps = learned ? EpsilonPolicy::learned(ds.class_counts) : EpsilonPolicy::shared(0.5, ds.class_counts);
  return Trainer(ds, plan, initial_state(small_shape(ds), plan, std::move(eps)));
}

std::string metrics_of(const Trainer& t) {
  std::ostringstream os;
  write_metrics_csv(os, t.state().history);
  return os.str();
}

}  // namespace

TEST_CASE("zero warmup epochs leave the network untouched and build a bank") {
  const auto ds = synthesize(small_spec());
  auto plan = small_plan();
  plan.warmup_epochs = 0;
  auto t = make(ds, plan);
  const auto before = t.state().net.backbone_hash();
  t.stage1_warmup();
  CHECK(t.state().net.backbone_hash() == before);
  REQUIRE(t.state().bank.has_value());
  CHECK(t.state().bank->num_classes() == ds.num_classes());
  CHECK(t.state().stage == Stage::joint);
  CHECK(t.state().history.empty());
}

TEST_CASE("warmup fits balanced easy data") {
  SynthSpec s = small_spec();
  s.beta = 1;
  s.separation = 8;
  const auto ds = synthesize(s);
  auto plan = small_plan();
  plan.warmup_epochs = 15;
  plan.stages = StageSelection::warmup_only;
  auto t = make(ds, plan);
  t.run();
  const auto pred = t.state().net.predict(ds.train_inputs);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == ds.train_labels[i];
  CHECK(static_cast<double>(ok) / pred.size() > 0.9);
  CHECK(t.finished());
  CHECK(t.state().history.size() == 15);
}

TEST_CASE("training is deterministic") {
  const auto ds = synthesize(small_spec());
  auto a = make(ds, small_plan());
  auto b = make(ds, small_plan());
  a.run();
  b.run();
  CHECK(metrics_of(a) == metrics_of(b));
  CHECK(a.state().net.backbone_hash() == b.state().net.backbone_hash());
  CHECK(a.state().net.classifier_hash() == b.state().net.classifier_hash());

  auto plan = small_plan();
  plan.seed = 2;
  auto c = make(ds, plan);
  c.run();
  CHECK(metrics_of(c) != metrics_of(a));
}

TEST_CASE("joint stage with lambda 1 continues plain cross-entropy training") {
  const auto ds = synthesize(small_spec());
  auto joint = small_plan();
  joint.lambda = 1.0;
  joint.warmup_epochs = 2;
  joint.joint_epochs = 3;
  joint.stages = StageSelection::no_rebalance;
  auto warm = joint;
  warm.warmup_epochs = 5;
  warm.joint_epochs = 0;
  auto a = make(ds, joint);
  auto b = make(ds, warm);
  a.run();
  b.run();
  CHECK(a.state().net.backbone_hash() == b.state().net.backbone_hash());
  CHECK(a.state().net.classifier_hash() == b.state().net.classifier_hash());
  // the learned radii are not touched when the robust term has no weight
  const auto eps = a.state().epsilon.epsilons();
  for (double e : eps) CHECK(e == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("robust loss decreases under small full-batch steps on a fixed bank") {
  const auto ds = synthesize(small_spec());
  Network net(small_shape(ds), 3);
  const auto bank = CentroidBank::recompute(net.embed(ds.train_inputs), ds.train_labels, ds.num_classes(), 0);
  const auto eps = EpsilonPolicy::shared(0.3, ds.class_counts);
  SgdMomentum opt(0.0);
  const auto w = class_weights(WeightMode::inverse_count, ds.class_counts, ds.train_labels);
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 30; ++step) {
    const auto pass = net.forward(ds.train_inputs);
    FeatureBatch fb{pass.embedding(), ds.train_labels, w};
    const auto r = robust_loss(fb, bank, eps);
    CHECK(r.value <= prev + 1e-12);
    prev = r.value;
    opt.step(net, net.backward(pass, r.grad_embeddings, Matrix::Zero(pass.logits.rows(), pass.logits.cols())), 1e-3);
  }
}

TEST_CASE("learned radii move during the joint stage only") {
  const auto ds = synthesize(small_spec());
  auto t = make(ds, small_plan());
  t.stage1_warmup();
  for (double e : t.state().epsilon.epsilons()) CHECK(e == doctest::Approx(1.0).epsilon(1e-12));
  t.stage2_joint();
  const auto after_joint = t.state().epsilon.epsilons();
  bool moved = false;
  for (double e : after_joint) moved |= std::abs(e - 1.0) > 1e-6;
  CHECK(moved);
  t.stage3_rebalance();
  CHECK(t.state().epsilon.epsilons() == after_joint);
}

TEST_CASE("rebalancing only trains the classifier") {
  const auto ds = synthesize(small_spec());
  auto t = make(ds, small_plan());
  t.stage1_warmup();
  t.stage2_joint();
  const auto backbone = t.state().net.backbone_hash();
  const auto head = t.state().net.classifier_hash();
  t.stage3_rebalance();
  CHECK(t.state().net.backbone_hash() == backbone);
  CHECK(t.state().net.classifier_hash() != head);
  CHECK(t.finished());

  auto plan = small_plan();
  plan.rebalance_epochs = 0;
  auto u = make(ds, plan);
  u.stage1_warmup();
  u.stage2_joint();
  const auto h2 = u.state().net.classifier_hash();
  u.stage3_rebalance();
  CHECK(u.state().net.classifier_hash() == h2);
}

TEST_CASE("stages out of order") {
  const auto ds = synthesize(small_spec());
  SUBCASE("joint without a bank") {
    auto t = make(ds, small_plan());
    CHECK_THROWS_AS(t.stage2_joint(), StateError);
  }
  SUBCASE("rebalance without a trained head") {
    auto plan = small_plan();
    plan.warmup_epochs = 0;
    plan.joint_epochs = 0;
    auto t = make(ds, plan);
    t.stage1_warmup();
    CHECK_THROWS_AS(t.stage3_rebalance(), StateError);
  }
  SUBCASE("warmup twice") {
    auto t = make(ds, small_plan());
    t.stage1_warmup();
    CHECK_THROWS_AS(t.stage1_warmup(), StateError);
  }
  SUBCASE("bad plan") {
    auto plan = small_plan();
    plan.lambda = 1.5;
    CHECK_THROWS_AS(make(ds, plan), DomainError);
    plan = small_plan();
    plan.batch_size = 0;
    CHECK_THROWS_AS(make(ds, plan), DomainError);
  }
}

TEST_CASE("non-finite values stop training with a diagnostic") {
  auto ds = synthesize(small_spec());
  ds.train_inputs(3, 2) = std::numeric_limits<double>::quiet_NaN();
  auto t = make(ds, small_plan());
  try {
    t.stage1_warmup();
    FAIL("expected a TrainingError");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("stage warmup") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
    CHECK(msg.find("eps=") != std::string::npos);
  } catch (const Error& e) {
    // a NaN can also surface earlier, while the bank is built
    MESSAGE("stopped with: " << e.what());
    CHECK(std::string(e.what()).size() > 0);
  }
}

TEST_CASE("every batch of an epoch sees the same bank") {
  const auto ds = synthesize(small_spec());
  auto t = make(ds, small_plan());
  std::map<int, std::set<const CentroidBank*>> banks;
  std::map<int, std::set<int>> stamps;
  t.set_batch_observer([&](const BatchEvent& e) {
    banks[e.epoch].insert(e.bank);
    stamps[e.epoch].insert(e.bank->epoch());
  });
  t.run();
  CHECK(banks.size() == 8);
  for (const auto& [epoch, s] : stamps) {
    CHECK(s.size() == 1);
    CHECK(*s.begin() == epoch);
  }
}

TEST_CASE("checkpoint round-trip resumes bit-identically") {
  const auto ds = synthesize(small_spec());
  auto full = make(ds, small_plan());
  full.run();

  auto part = make(ds, small_plan());
  part.run(4);
  CHECK(!part.finished());
  std::ostringstream os;
  save_checkpoint(part.state(), "a = 1\n", os);
  std::istringstream is(os.str());
  auto ck = load_checkpoint(is);
  CHECK(ck.config_text == "a = 1\n");
  CHECK(ck.state.global_epoch == 4);
  CHECK(ck.state.net.backbone_hash() == part.state().net.backbone_hash());
  Trainer resumed(ds, small_plan(), std::move(ck.state));
  resumed.run();
  CHECK(resumed.finished());
  CHECK(metrics_of(resumed) == metrics_of(full));
  CHECK(resumed.state().net.classifier_hash() == full.state().net.classifier_hash());

  std::string text = os.str();
  text[text.size() / 3] = text[text.size() / 3] == '3' ? '4' : '3';
  std::istringstream bad(text);
  CHECK_THROWS_AS(load_checkpoint(bad), IntegrityError);
}

TEST_CASE("learning rate schedule") {
  TrainPlan p;
  p.lr = 0.1;
  p.milestones = {5, 10};
  p.gamma = 0.5;
  CHECK(p.lr_at(0) == 0.1);
  CHECK(p.lr_at(4) == 0.1);
  CHECK(p.lr_at(5) == 0.05);
  CHECK(p.lr_at(10) == 0.025);
}

TEST_CASE("metrics csv layout") {
  EpochMetrics m;
  m.epoch = 2;
  m.stage = Stage::joint;
  m.loss_total = 1.5;
  m.accuracy.many = 0.25;
  m.accuracy.balanced = 0.5;
  std::ostringstream os;
  write_metrics_csv(os, {m});
  const std::string s = os.str();
  CHECK(s.substr(0, s.find('\n')) == kMetricsColumns);
  CHECK(s.find("2,joint,1.500000,") != std::string::npos);
  CHECK(s.find(",NA,") != std::string::npos);
}
