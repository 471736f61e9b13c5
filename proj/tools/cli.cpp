// Copyright 2026 The DRO-LT Authors
// Licensed under the Apache License, Version 2.0

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "drolt/centroids.hpp"
#include "drolt/config.hpp"
#include "drolt/data.hpp"
#include "drolt/error.hpp"
#include "drolt/eval.hpp"
#include "drolt/experiment.hpp"
#include "drolt/losses.hpp"
#include "drolt/trainer.hpp"

namespace drolt::cli {

namespace {

namespace fs = std::filesystem;

// Thrown for flag combinations that CLI11 cannot check by itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed << x;
  return os.str();
}

std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : "NA"; }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& s, const std::string& flag) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError(flag + ": '" + s + "' is not a number");
}

/// `--data.beta 50` style flags, one per configuration key.
class ConfigFlags {
 public:
  void attach(CLI::App* app) {
    for (const auto& key : config_schema()) {
      app->add_option("--" + key.name, values_[key.name], key.description)->group("Configuration overrides");
      options_[key.name] = app->get_option("--" + key.name);
    }
  }

  void apply(RunConfig& config) const {
    for (const auto& [k, opt] : options_) {
      if (opt->count() > 0) config.set(k, values_.at(k));
    }
  }

  bool any() const {
    return std::any_of(options_.begin(), options_.end(), [](const auto& kv) { return kv.second->count() > 0; });
  }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, CLI::Option*> options_;
};

RunConfig read_config(const std::string& path) {
  if (path.empty()) return RunConfig();
  std::ifstream is(path);
  if (!is) throw ValidationError({"cannot open config file '" + path + "'"});
  return RunConfig::read(is, path);
}

struct Loaded {
  RunConfig config;
  std::optional<TrainState> state;
  LongTailDataset data;
};

Loaded load_context(const std::string& checkpoint, const std::string& dataset) {
  if (!fs::exists(checkpoint)) throw Error("checkpoint '" + checkpoint + "' does not exist");
  std::ifstream is(checkpoint, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint '" + checkpoint + "'");
  Checkpoint ck = load_checkpoint(is);
  std::istringstream text(ck.config_text);
  Loaded out{RunConfig::read(text, checkpoint), std::move(ck.state), {}};
  out.config.validate();
  out.data = dataset.empty() ? synthesize(synth_spec_from(out.config)) : load_dataset(fs::path(dataset));
  if (out.data.dim() != out.state->net.shape().input_dim || out.data.num_classes() != out.state->net.shape().num_classes) {
    throw DimensionError("dataset does not match the network in '" + checkpoint + "'");
  }
  return out;
}

std::ostream& open_out(const std::string& path, std::ofstream& file, std::ostream& fallback) {
  if (path.empty() || path == "-") return fallback;
  file.open(path, std::ios::binary);
  if (!file) throw Error("cannot write '" + path + "'");
  return file;
}

void print_accuracy(std::ostream& out, const SplitAccuracy& a) {
  out << "acc_many " << fmt(a.many) << "\nacc_med " << fmt(a.med) << "\nacc_few " << fmt(a.few) << "\nacc_balanced "
      << fmt(a.balanced) << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributionally robust long-tail learning on synthetic data", "drolt"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a long-tailed Gaussian dataset");
  SynthSpec ss;
  std::string synth_out = "dataset.txt";
  synth->add_option("--classes", ss.classes, "number of classes")->required();
  synth->add_option("--n-max", ss.n_max, "samples of the most frequent class")->required();
  synth->add_option("--beta", ss.beta, "imbalance factor n_max / n_min")->required();
  synth->add_option("--dim", ss.dim, "input dimension")->capture_default_str();
  synth->add_option("--spread", ss.spread, "per-coordinate standard deviation")->capture_default_str();
  synth->add_option("--separation", ss.separation, "mean distance between class means / spread")->capture_default_str();
  synth->add_option("--test-per-class", ss.test_per_class, "balanced test samples per class")->capture_default_str();
  synth->add_option("--val-per-class", ss.val_per_class, "balanced validation samples per class")->capture_default_str();
  synth->add_option("--seed", ss.seed, "generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output dataset file")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "run the three-stage training procedure");
  std::string train_config, train_resume, train_stage, train_root;
  bool train_dry = false;
  int train_max_epochs = -1;
  ConfigFlags train_flags;
  train->add_option("--config", train_config, "configuration file (key = value)");
  train->add_option("--resume", train_resume, "continue from a checkpoint");
  train->add_option("--stage", train_stage, "all | warmup-only | no-rebalance (same as --train.stages)");
  train->add_flag("--dry-run", train_dry, "validate the configuration and exit; touches no files");
  train->add_option("--run-root", train_root, "directory for run directories (default $DROLT_RUN_ROOT or ./runs)");
  train->add_option("--max-epochs", train_max_epochs, "stop after this many epochs (resumable)");
  train_flags.attach(train);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "one run per value of a configuration key");
  std::string sweep_config, sweep_key, sweep_values, sweep_seeds = "1", sweep_out = "sweep.csv", sweep_root;
  int sweep_jobs = 1;
  ConfigFlags sweep_flags;
  sweep->add_option("--config", sweep_config, "base configuration file");
  sweep->add_option("--key", sweep_key, "configuration key to sweep")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->required();
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds (data.seed and train.seed)")->capture_default_str();
  sweep->add_option("--jobs", sweep_jobs, "parallel child runs")->capture_default_str();
  sweep->add_option("--out", sweep_out, "per-run CSV; the median summary goes next to it")->capture_default_str();
  sweep->add_option("--run-root", sweep_root, "directory for child run directories");
  sweep_flags.attach(sweep);

  // probe
  auto* probe = app.add_subcommand("probe", "nearest-centroid accuracy of every backbone layer");
  std::string probe_ckpt, probe_data, probe_out;
  probe->add_option("--checkpoint", probe_ckpt, "checkpoint file")->required();
  probe->add_option("--dataset", probe_data, "dataset file (default: regenerate from the checkpoint config)");
  probe->add_option("--out", probe_out, "CSV output (default stdout)");

  // boundgap
  auto* boundgap = app.add_subcommand("boundgap", "relative gap between the upper and lower robust bounds");
  std::string gap_ckpt, gap_data, gap_out;
  std::optional<double> gap_eps;
  std::size_t gap_batch = 0;
  boundgap->add_option("--checkpoint", gap_ckpt, "checkpoint file")->required();
  boundgap->add_option("--dataset", gap_data, "dataset file (default: regenerate from the checkpoint config)");
  boundgap->add_option("--epsilon", gap_eps, "use this shared radius instead of the checkpoint's");
  boundgap->add_option("--batch-size", gap_batch, "batch size (default: train.batch_size)");
  boundgap->add_option("--out", gap_out, "per-batch CSV output (default stdout)");

  // coverage
  auto* coverage = app.add_subcommand("coverage", "Monte-Carlo probability that the radius covers the true mean");
  int cov_n = 0, cov_dim = 0;
  double cov_sigma = 1.0;
  std::string cov_eps, cov_out;
  std::size_t cov_trials = 100000;
  std::uint64_t cov_seed = 1;
  coverage->add_option("--n", cov_n, "samples per trial")->required()->check(CLI::PositiveNumber);
  coverage->add_option("--sigma", cov_sigma, "per-coordinate standard deviation")->capture_default_str();
  coverage->add_option("--dim", cov_dim, "dimension")->required()->check(CLI::PositiveNumber);
  coverage->add_option("--eps", cov_eps, "comma-separated metric radii")->required();
  coverage->add_option("--trials", cov_trials, "trials per radius")->capture_default_str()->check(CLI::PositiveNumber);
  coverage->add_option("--seed", cov_seed, "seed")->capture_default_str();
  coverage->add_option("--out", cov_out, "CSV output (default stdout)");

  // eval
  auto* eval = app.add_subcommand("eval", "test accuracy and per-class reports of a checkpoint");
  std::string eval_ckpt, eval_data, eval_gap, eval_eps;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--dataset", eval_data, "dataset file (default: regenerate from the checkpoint config)");
  eval->add_option("--error-gap", eval_gap, "write the per-class train/test error CSV here");
  eval->add_option("--epsilon", eval_eps, "write the per-class radius CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      if (ss.classes < 2) throw UsageError("--classes must be at least 2");
      if (ss.n_max < 1) throw UsageError("--n-max must be at least 1");
      if (!(ss.beta >= 1.0)) throw UsageError("--beta must be at least 1");
      std::vector<std::size_t> counts;
      try {
        counts = long_tail_counts(ss.classes, ss.n_max, ss.beta);
      } catch (const DomainError& e) {
        throw UsageError(e.what());
      }
      const LongTailDataset ds = synthesize(ss);
      save_dataset(ds, fs::path(synth_out));
      out << "class,count\n";
      for (std::size_t c = 0; c < counts.size(); ++c) out << c << ',' << counts[c] << '\n';
      const double realized = static_cast<double>(counts.front()) / static_cast<double>(counts.back());
      out << "beta requested " << fmt(ss.beta) << ", realized n_max/n_min = " << fmt(realized) << '\n';
      out << "wrote " << synth_out << " (" << ds.train_size() << " train, " << ds.test_labels.size() << " test, "
          << ds.val_labels.size() << " val)\n";
      return kExitOk;
    }

    if (train->parsed()) {
      RunConfig config = read_config(train_config);
      train_flags.apply(config);
      if (!train_stage.empty()) config.set("train.stages", train_stage);
      config.validate();
      RunOptions opts;
      opts.dry_run = train_dry;
      opts.max_epochs = train_max_epochs;
      if (!train_root.empty()) opts.run_root = train_root;
      if (!train_resume.empty()) {
        if (!fs::exists(train_resume)) throw Error("checkpoint '" + train_resume + "' does not exist");
        opts.resume_from = fs::path(train_resume);
      }
      const RunResult r = run_experiment(config, opts);
      if (train_dry) {
        out << "configuration valid (hash " << r.config.hash() << "); dry run, nothing written\n";
        return kExitOk;
      }
      out << "run_dir " << (r.run_dir ? r.run_dir->string() : std::string("-")) << '\n';
      out << "finished " << (r.finished ? "true" : "false") << '\n';
      print_accuracy(out, r.final_accuracy);
      out << "spearman_count_epsilon " << fmt(r.epsilon.spearman) << '\n';
      return kExitOk;
    }

    if (sweep->parsed()) {
      RunConfig config = read_config(sweep_config);
      sweep_flags.apply(config);
      config.validate();
      if (!config.has_key(sweep_key)) throw ValidationError({"--key: '" + sweep_key + "' is not a configuration key"});
      const auto values = split_list(sweep_values);
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split_list(sweep_seeds)) {
        try {
          std::size_t pos = 0;
          seeds.push_back(std::stoull(s, &pos));
          if (pos != s.size()) throw std::invalid_argument(s);
        } catch (const std::exception&) {
          throw UsageError("--seeds: '" + s + "' is not a seed");
        }
      }
      if (values.empty()) throw UsageError("--values is empty");
      if (seeds.empty()) throw UsageError("--seeds is empty");
      // Every child config must validate before anything runs.
      std::vector<std::string> problems;
      for (const auto& v : values) {
        RunConfig c = config;
        c.set(sweep_key, v);
        for (const auto& p : c.problems()) problems.push_back(sweep_key + "=" + v + ": " + p);
      }
      if (!problems.empty()) throw ValidationError(problems);

      RunOptions opts;
      if (!sweep_root.empty()) opts.run_root = sweep_root;
      const auto points = run_sweep(config, sweep_key, values, seeds, sweep_jobs, opts);

      std::ofstream per_run(sweep_out, std::ios::binary);
      if (!per_run) throw Error("cannot write '" + sweep_out + "'");
      write_provenance(per_run, config);
      write_sweep_csv(per_run, sweep_key, points);
      fs::path summary_path = fs::path(sweep_out);
      summary_path.replace_filename(summary_path.stem().string() + "_summary.csv");
      std::ofstream summary(summary_path, std::ios::binary);
      write_provenance(summary, config);
      write_sweep_summary_csv(summary, sweep_key, points);
      write_sweep_summary_csv(out, sweep_key, points);

      int failed = 0;
      for (const auto& p : points) {
        if (!p.ok) {
          ++failed;
          err << "failed: " << sweep_key << "=" << p.value << " seed " << p.seed << ": " << p.error << '\n';
        }
      }
      out << "runs " << points.size() << ", failed " << failed << "; wrote " << sweep_out << " and "
          << summary_path.string() << '\n';
      return failed ? kExitRuntime : kExitOk;
    }

    if (probe->parsed()) {
      const Loaded ctx = load_context(probe_ckpt, probe_data);
      std::ofstream file;
      std::ostream& os = open_out(probe_out, file, out);
      write_provenance(os, ctx.config);
      write_probe_csv(os, probe_all_layers(ctx.state->net, ctx.data));
      return kExitOk;
    }

    if (boundgap->parsed()) {
      const Loaded ctx = load_context(gap_ckpt, gap_data);
      const auto& ds = ctx.data;
      const Matrix z = ctx.state->net.embed(ds.train_inputs);
      const CentroidBank bank = CentroidBank::recompute(z, ds.train_labels, ds.num_classes(), ctx.state->global_epoch);
      const EpsilonPolicy eps =
          gap_eps ? EpsilonPolicy::shared(*gap_eps, ds.class_counts) : ctx.state->epsilon;
      const TrainPlan plan = train_plan_from(ctx.config);
      const std::size_t b = gap_batch > 0 ? gap_batch : plan.batch_size;

      std::ofstream file;
      std::ostream& os = open_out(gap_out, file, out);
      write_provenance(os, ctx.config);
      os << "batch,size,gap_ratio\n";
      double weighted = 0.0;
      std::size_t counted = 0;
      int batch = 0;
      for (std::size_t start = 0; start < ds.train_size(); start += b, ++batch) {
        const std::size_t end = std::min(ds.train_size(), start + b);
        const auto m = static_cast<Eigen::Index>(end - start);
        std::vector<int> y(ds.train_labels.begin() + static_cast<std::ptrdiff_t>(start),
                           ds.train_labels.begin() + static_cast<std::ptrdiff_t>(end));
        FeatureBatch fb{z.middleRows(static_cast<Eigen::Index>(start), m), y,
                        class_weights(plan.weighting, ds.class_counts, y)};
        std::optional<double> ratio;
        try {
          ratio = bound_gap_ratio(fb, bank, eps);
        } catch (const DomainError&) {
        }
        os << batch << ',' << m << ',' << fmt(ratio) << '\n';
        if (ratio) {
          weighted += *ratio * static_cast<double>(m);
          counted += static_cast<std::size_t>(m);
        }
      }
      if (counted == 0) throw DomainError("no batch produced a defined gap ratio");
      // on stdout the summary is a comment line so the CSV stays parseable
      const bool to_file = !gap_out.empty() && gap_out != "-";
      out << (to_file ? "" : "# ") << "|upper - lower| / robust loss, averaged over all samples: "
          << fmt(weighted / static_cast<double>(counted)) << '\n';
      return kExitOk;
    }

    if (coverage->parsed()) {
      std::vector<double> radii;
      for (const auto& s : split_list(cov_eps)) radii.push_back(to_double(s, "--eps"));
      if (radii.empty()) throw UsageError("--eps is empty");
      if (!(cov_sigma > 0.0)) throw UsageError("--sigma must be positive");
      std::ofstream file;
      std::ostream& os = open_out(cov_out, file, out);
      os << "# n = " << cov_n << "\n# sigma = " << cov_sigma << "\n# dim = " << cov_dim << "\n# trials = " << cov_trials
         << "\n# seed = " << cov_seed << '\n';
      os << "n,sigma,dim,eps,trials,p_hat,std_error,closed_form\n";
      for (double e : radii) {
        if (e < 0.0) throw UsageError("--eps values must be nonnegative");
        const auto est = estimate_coverage(cov_n, cov_sigma, cov_dim, e, cov_trials, cov_seed);
        os << cov_n << ',' << fmt(cov_sigma) << ',' << cov_dim << ',' << fmt(e) << ',' << est.trials << ','
           << fmt(est.p_hat) << ',' << fmt(est.std_error) << ',' << fmt(coverage_closed_form(cov_n, cov_sigma, cov_dim, e))
           << '\n';
      }
      return kExitOk;
    }

    if (eval->parsed()) {
      const Loaded ctx = load_context(eval_ckpt, eval_data);
      out << "config_hash " << ctx.config.hash() << '\n';
      print_accuracy(out, test_accuracy(ctx.state->net, ctx.data));
      const auto eps = epsilon_report(ctx.state->epsilon, ctx.data.class_counts);
      out << "spearman_count_epsilon " << fmt(eps.spearman) << '\n';
      if (!eval_gap.empty()) {
        std::ofstream f;
        std::ostream& os = open_out(eval_gap, f, out);
        write_provenance(os, ctx.config);
        write_error_gap_csv(os, error_gap_report(ctx.state->net, ctx.data));
      }
      if (!eval_eps.empty()) {
        std::ofstream f;
        std::ostream& os = open_out(eval_eps, f, out);
        write_provenance(os, ctx.config);
        write_epsilon_csv(os, eps);
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "invalid configuration:\n";
    for (const auto& p : e.problems()) err << "  - " << p << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace drolt::cli
