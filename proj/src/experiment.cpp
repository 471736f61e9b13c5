// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "drolt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "drolt/centroids.hpp"
#include "drolt/error.hpp"
#include "textio.hpp"

namespace drolt {

namespace fs = std::filesystem;
using nlohmann::json;

SynthSpec synth_spec_from(const RunConfig& c) {
  SynthSpec s;
  s.classes = static_cast<int>(c.integer("data.classes"));
  s.n_max = static_cast<int>(c.integer("data.n_max"));
  s.beta = c.real("data.beta");
  s.dim = static_cast<int>(c.integer("data.dim"));
  s.spread = c.real("data.spread");
  s.separation = c.real("data.separation");
  s.test_per_class = static_cast<int>(c.integer("data.test_per_class"));
  s.val_per_class = static_cast<int>(c.integer("data.val_per_class"));
  s.seed = c.u64("data.seed");
  return s;
}

NetworkShape network_shape_from(const RunConfig& c) {
  NetworkShape s;
  s.input_dim = static_cast<int>(c.integer("data.dim"));
  s.hidden_widths.clear();
  for (auto w : c.int_list("model.widths")) s.hidden_widths.push_back(static_cast<int>(w));
  s.embedding_dim = static_cast<int>(c.integer("model.embedding_dim"));
  s.num_classes = static_cast<int>(c.integer("data.classes"));
  s.activation = parse_activation(c.get("model.activation"));
  s.activate_embedding = c.boolean("model.activate_embedding");
  return s;
}

TrainPlan train_plan_from(const RunConfig& c) {
  TrainPlan p;
  p.warmup_epochs = static_cast<int>(c.integer("train.warmup_epochs"));
  p.joint_epochs = static_cast<int>(c.integer("train.joint_epochs"));
  p.rebalance_epochs = static_cast<int>(c.integer("train.rebalance_epochs"));
  p.lambda = c.real("loss.lambda");
  p.lr = c.real("train.lr");
  for (auto m : c.int_list("train.milestones")) p.milestones.push_back(static_cast<int>(m));
  p.gamma = c.real("train.gamma");
  p.momentum = c.real("train.momentum");
  p.weight_decay = c.real("train.weight_decay");
  p.rebalance_lr = c.real("train.rebalance_lr");
  p.epsilon_lr = c.real("epsilon.lr");
  p.batch_size = static_cast<std::size_t>(c.integer("train.batch_size"));
  p.weighting = parse_weight_mode(c.get("loss.weighting"));
  p.patience = static_cast<int>(c.integer("train.patience"));
  p.stages = parse_stage_selection(c.get("train.stages"));
  p.seed = c.u64("train.seed");
  return p;
}

EpsilonPolicy epsilon_policy_from(const RunConfig& c, std::vector<std::size_t> counts) {
  switch (parse_epsilon_variant(c.get("epsilon.variant"))) {
    case EpsilonVariant::shared:
      return EpsilonPolicy::shared(c.real("epsilon.value"), std::move(counts));
    case EpsilonVariant::sqrt_n:
      return EpsilonPolicy::sqrt_n(c.real("epsilon.value"), std::move(counts));
    case EpsilonVariant::learned:
      return EpsilonPolicy::learned(std::move(counts), c.real("epsilon.init"));
  }
  throw DomainError("unknown epsilon variant");
}

fs::path default_run_root() {
  if (const char* env = std::getenv("DROLT_RUN_ROOT"); env && *env) return env;
  return "runs";
}

void write_provenance(std::ostream& os, const RunConfig& config) {
  os << "# config_hash = " << config.hash() << '\n';
  for (const auto& [k, v] : config.values()) os << "# " << k << " = " << v << '\n';
}

namespace {

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

// Append-only: never reuses an existing directory.
fs::path make_run_dir(const fs::path& root, const std::string& hash) {
  fs::create_directories(root);
  const std::string base = hash + "-" + timestamp();
  for (int i = 0;; ++i) {
    fs::path p = root / (i == 0 ? base : base + "-" + std::to_string(i));
    if (fs::create_directory(p)) return p;
  }
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw Error("cannot write '" + p.string() + "'");
}

// Writes to a temporary then renames, so a crash never leaves a half-written checkpoint.
void write_checkpoint_file(const fs::path& p, const TrainState& st, const std::string& config_text) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    save_checkpoint(st, config_text, os);
    if (!os) throw Error("cannot write '" + tmp.string() + "'");
  }
  fs::rename(tmp, p);
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json accuracy_json(const SplitAccuracy& a) {
  return {{"many", opt_json(a.many)}, {"med", opt_json(a.med)}, {"few", opt_json(a.few)}, {"balanced", a.balanced}};
}

json build_report(const RunConfig& config, const TrainState& st, const LongTailDataset& ds, const SplitAccuracy& acc,
                  const EpsilonReport& eps, bool finished, const std::optional<fs::path>& run_dir) {
  json cfg = json::object();
  for (const auto& [k, v] : config.values()) cfg[k] = v;
  json classes = json::array();
  for (const auto& r : eps.rows) classes.push_back({{"class", r.cls}, {"count", r.count}, {"epsilon", r.epsilon}});
  json history = json::array();
  for (const auto& m : st.history) {
    history.push_back({{"epoch", m.epoch},
                       {"stage", std::string(to_string(m.stage))},
                       {"loss_total", m.loss_total},
                       {"loss_ce", m.loss_ce},
                       {"loss_robust", m.loss_robust},
                       {"accuracy", accuracy_json(m.accuracy)},
                       {"gap_ratio", opt_json(m.gap_ratio)},
                       {"eps_min", m.eps_min},
                       {"eps_median", m.eps_median},
                       {"eps_max", m.eps_max}});
  }
  std::optional<double> gap;
  if (!st.history.empty()) gap = st.history.back().gap_ratio;
  return {{"schema", kRunReportSchemaVersion},
          {"config", cfg},
          {"config_text", config.to_text()},
          {"config_hash", config.hash()},
          {"seed", config.u64("train.seed")},
          {"data_seed", config.u64("data.seed")},
          {"class_counts", ds.class_counts},
          {"finished", finished},
          {"epochs_completed", st.global_epoch},
          {"stage", std::string(to_string(st.stage))},
          {"final_accuracy", accuracy_json(acc)},
          {"epsilon", classes},
          {"spearman_count_epsilon", opt_json(eps.spearman)},
          {"gap_ratio", opt_json(gap)},
          {"history", history},
          {"run_dir", run_dir ? json(run_dir->string()) : json(nullptr)}};
}

std::string metrics_text(const RunConfig& config, const std::vector<EpochMetrics>& history) {
  std::ostringstream os;
  write_provenance(os, config);
  write_metrics_csv(os, history);
  return os.str();
}

}  // namespace

RunResult run_experiment(const RunConfig& requested, const RunOptions& options) {
  requested.validate();
  RunResult out;
  out.config = requested;

  std::optional<Checkpoint> ck;
  if (options.resume_from) {
    std::ifstream is(*options.resume_from, std::ios::binary);
    if (!is) throw Error("cannot open checkpoint '" + options.resume_from->string() + "'");
    ck = load_checkpoint(is);
    std::istringstream cfg_text(ck->config_text);
    RunConfig embedded = RunConfig::read(cfg_text, "checkpoint");
    embedded.validate();
    if (requested.to_text() != RunConfig().to_text() && requested.to_text() != embedded.to_text()) {
      throw ValidationError({"config differs from the one embedded in checkpoint '" + options.resume_from->string() +
                             "'"});
    }
    out.config = embedded;
  }
  if (options.dry_run) return out;

  const RunConfig& config = out.config;
  const std::string config_text = config.to_text();
  out.data = synthesize(synth_spec_from(config));
  const LongTailDataset& ds = *out.data;
  const TrainPlan plan = train_plan_from(config);

  TrainState state = ck ? std::move(ck->state)
                        : initial_state(network_shape_from(config), plan, epsilon_policy_from(config, ds.class_counts));
  if (ck && ck->bank_ready) {
    state.bank = CentroidBank::recompute(state.net.embed(ds.train_inputs), ds.train_labels, ds.num_classes(),
                                         std::max(0, state.global_epoch - 1));
  }

  if (options.write_artifacts) {
    out.run_dir = make_run_dir(options.run_root, config.hash());
    write_file(*out.run_dir / "config.txt", config_text);
    std::ofstream os(*out.run_dir / "dataset.txt", std::ios::binary);
    save_dataset(ds, os);
  }

  Trainer trainer(ds, plan, std::move(state));
  if (options.observer) trainer.set_batch_observer(options.observer);
  int remaining = options.max_epochs;
  while (!trainer.finished() && remaining != 0) {
    const int before = trainer.state().global_epoch;
    trainer.run(1);
    if (remaining > 0) remaining -= trainer.state().global_epoch - before;
    if (out.run_dir) write_checkpoint_file(*out.run_dir / "checkpoint.txt", trainer.state(), config_text);
  }
  if (out.run_dir && !fs::exists(*out.run_dir / "checkpoint.txt")) {
    write_checkpoint_file(*out.run_dir / "checkpoint.txt", trainer.state(), config_text);
  }

  out.finished = trainer.finished();
  out.state = std::move(trainer.state());
  const TrainState& st = *out.state;
  out.final_accuracy = test_accuracy(st.net, ds);
  out.epsilon = epsilon_report(st.epsilon, ds.class_counts);
  out.metrics_csv = metrics_text(config, st.history);
  out.report = build_report(config, st, ds, out.final_accuracy, out.epsilon, out.finished, out.run_dir);

  if (out.run_dir) {
    const fs::path& dir = *out.run_dir;
    write_file(dir / "metrics.csv", out.metrics_csv);
    std::ostringstream eps, gap, cen;
    write_provenance(eps, config);
    write_epsilon_csv(eps, out.epsilon);
    write_file(dir / "epsilon.csv", eps.str());
    write_provenance(gap, config);
    write_error_gap_csv(gap, error_gap_report(st.net, ds));
    write_file(dir / "error_gap.csv", gap.str());
    if (st.bank) {
      write_provenance(cen, config);
      st.bank->write_csv(cen);
      write_file(dir / "centroids.csv", cen.str());
    }
    write_file(dir / "report.json", out.report.dump(2) + "\n");
  }
  return out;
}

std::vector<std::string> validate_run_report(const json& r) {
  std::vector<std::string> problems;
  if (!r.is_object()) return {"report is not a JSON object"};
  auto need = [&](const char* key, auto pred, const char* what) {
    if (!r.contains(key)) {
      problems.push_back(std::string("missing field '") + key + "'");
    } else if (!pred(r.at(key))) {
      problems.push_back(std::string("field '") + key + "' must be " + what);
    }
  };
  auto is_int = [](const json& j) { return j.is_number_integer(); };
  auto is_str = [](const json& j) { return j.is_string(); };
  auto is_bool = [](const json& j) { return j.is_boolean(); };
  auto is_num_or_null = [](const json& j) { return j.is_number() || j.is_null(); };
  auto is_unit = [](const json& j) { return j.is_null() || (j.is_number() && j >= 0.0 && j <= 1.0); };
  auto is_acc = [&](const json& j) {
    return j.is_object() && j.contains("many") && j.contains("med") && j.contains("few") && j.contains("balanced") &&
           is_unit(j["many"]) && is_unit(j["med"]) && is_unit(j["few"]) && j["balanced"].is_number() &&
           is_unit(j["balanced"]);
  };

  need("schema", [&](const json& j) { return j.is_number_integer() && j == kRunReportSchemaVersion; },
       "the supported schema version");
  need("config", [](const json& j) {
    if (!j.is_object()) return false;
    for (const auto& k : config_schema()) {
      if (!j.contains(k.name) || !j[k.name].is_string()) return false;
    }
    return j.size() == config_schema().size();
  }, "an object with every configuration key as a string");
  need("config_text", is_str, "a string");
  need("config_hash", is_str, "a string");
  need("seed", is_int, "an integer");
  need("data_seed", is_int, "an integer");
  need("class_counts", [](const json& j) {
    return j.is_array() && std::all_of(j.begin(), j.end(), [](const json& x) { return x.is_number_unsigned(); });
  }, "an array of counts");
  need("finished", is_bool, "a boolean");
  need("epochs_completed", is_int, "an integer");
  need("stage", [](const json& j) {
    return j.is_string() && (j == "warmup" || j == "joint" || j == "rebalance" || j == "done");
  }, "a stage name");
  need("final_accuracy", is_acc, "a split-accuracy object");
  need("epsilon", [](const json& j) {
    return j.is_array() && std::all_of(j.begin(), j.end(), [](const json& x) {
             return x.is_object() && x.contains("class") && x.contains("count") && x.contains("epsilon") &&
                    x["epsilon"].is_number() && x["epsilon"] >= 0.0;
           });
  }, "an array of {class, count, epsilon}");
  need("spearman_count_epsilon", is_num_or_null, "a number or null");
  need("gap_ratio", is_num_or_null, "a number or null");
  need("history", [&](const json& j) {
    return j.is_array() && std::all_of(j.begin(), j.end(), [&](const json& x) {
             return x.is_object() && x.contains("epoch") && x["epoch"].is_number_integer() && x.contains("stage") &&
                    x.contains("loss_total") && x.contains("accuracy") && is_acc(x["accuracy"]) &&
                    x.contains("gap_ratio") && is_num_or_null(x["gap_ratio"]);
           });
  }, "an array of epoch rows");
  need("run_dir", [](const json& j) { return j.is_string() || j.is_null(); }, "a string or null");
  if (problems.empty()) {
    if (r["epsilon"].size() != r["class_counts"].size()) problems.push_back("epsilon and class_counts differ in length");
    if (r["history"].size() != r["epochs_completed"].get<std::size_t>()) {
      problems.push_back("history length differs from epochs_completed");
    }
    if (r["config_hash"] != textio::hex64(textio::fnv1a(r["config_text"].get<std::string>()))) {
      problems.push_back("config_hash does not match config_text");
    }
  }
  return problems;
}

namespace {

bool numeric_values(const std::vector<std::string>& values) {
  return std::all_of(values.begin(), values.end(), [](const std::string& v) { return textio::parse_double(v); });
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

std::string fmt_opt(const std::optional<double>& v) { return v ? textio::brief(*v) : "NA"; }

}  // namespace

std::vector<SweepPoint> run_sweep(const RunConfig& base, const std::string& key, const std::vector<std::string>& values,
                                  const std::vector<std::uint64_t>& seeds, int jobs, const RunOptions& child_options) {
  if (!base.has_key(key)) throw ValidationError({"sweep key '" + key + "' is not a configuration key"});
  if (values.empty()) throw ValidationError({"sweep needs at least one value"});
  if (seeds.empty()) throw ValidationError({"sweep needs at least one seed"});

  std::vector<std::string> order = values;
  if (numeric_values(order)) {
    std::stable_sort(order.begin(), order.end(), [](const std::string& a, const std::string& b) {
      return *textio::parse_double(a) < *textio::parse_double(b);
    });
  }
  std::vector<SweepPoint> points;
  for (const auto& v : order) {
    for (auto s : seeds) {
      SweepPoint p;
      p.value = v;
      p.seed = s;
      points.push_back(std::move(p));
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      SweepPoint& p = points[i];
      try {
        RunConfig cfg = base;
        cfg.set(key, p.value);
        cfg.set("data.seed", std::to_string(p.seed));
        cfg.set("train.seed", std::to_string(p.seed));
        RunOptions opts = child_options;
        opts.resume_from.reset();
        const RunResult r = run_experiment(cfg, opts);
        p.accuracy = r.final_accuracy;
        p.run_dir = r.run_dir;
        p.ok = true;
      } catch (const ValidationError& e) {
        p.error = e.what();
        for (const auto& q : e.problems()) p.error += "; " + q;
      } catch (const std::exception& e) {
        p.error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(points.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return points;
}

void write_sweep_csv(std::ostream& os, const std::string& key, const std::vector<SweepPoint>& points) {
  os << "key,value,seed,status,acc_many,acc_med,acc_few,acc_balanced,error\n";
  for (const auto& p : points) {
    std::string err = p.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << key << ',' << p.value << ',' << p.seed << ',' << (p.ok ? "ok" : "failed") << ',';
    if (p.ok) {
      os << fmt_opt(p.accuracy.many) << ',' << fmt_opt(p.accuracy.med) << ',' << fmt_opt(p.accuracy.few) << ','
         << textio::brief(p.accuracy.balanced);
    } else {
      os << "NA,NA,NA,NA";
    }
    os << ',' << err << '\n';
  }
}

void write_sweep_summary_csv(std::ostream& os, const std::string& key, const std::vector<SweepPoint>& points) {
  os << "key,value,runs_ok,runs_failed,median_many,median_med,median_few,median_balanced\n";
  std::vector<std::string> seen;
  for (const auto& p : points) {
    if (std::find(seen.begin(), seen.end(), p.value) != seen.end()) continue;
    seen.push_back(p.value);
    std::vector<double> many, med, few, bal;
    int failed = 0;
    for (const auto& q : points) {
      if (q.value != p.value) continue;
      if (!q.ok) {
        ++failed;
        continue;
      }
      if (q.accuracy.many) many.push_back(*q.accuracy.many);
      if (q.accuracy.med) med.push_back(*q.accuracy.med);
      if (q.accuracy.few) few.push_back(*q.accuracy.few);
      bal.push_back(q.accuracy.balanced);
    }
    auto m = [](const std::vector<double>& v) { return v.empty() ? std::string("NA") : textio::brief(median(v)); };
    os << key << ',' << p.value << ',' << bal.size() << ',' << failed << ',' << m(many) << ',' << m(med) << ','
       << m(few) << ',' << m(bal) << '\n';
  }
}

}  // namespace drolt
