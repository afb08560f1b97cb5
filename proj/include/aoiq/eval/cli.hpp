#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "aoiq/eval/config.hpp"
#include "aoiq/eval/metrics.hpp"
#include "aoiq/eval/runs.hpp"
#include "aoiq/policy/spec.hpp"
#include "aoiq/sac/bundle.hpp"
#include "aoiq/trace/schedule.hpp"

namespace aoiq::eval {

namespace fs = std::filesystem;

namespace detail {

inline std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  return f;
}

inline void write_records(const fs::path& dir, const std::vector<MetricsRecord>& rs) {
  auto m = open_out(dir / "metrics.csv");
  write_metrics_csv(rs, m);
  auto s = open_out(dir / "scatter.csv");
  scatter_export(rs, s);
}

inline void print_summary(std::ostream& out, const std::vector<MetricsRecord>& rs) {
  if (rs.empty()) return;
  double age = 0, err = 0, rate = 0;
  for (const auto& r : rs) {
    age += r.avg_age_seconds;
    err += r.mean_error;
    rate += r.query_rate;
  }
  const double n = static_cast<double>(rs.size());
  out << rs.size() << " rows: mean age " << age / n << " s, mean error " << err / n << " m, query rate " << rate / n
      << '\n';
}

inline trace::LinkAssignment load_assignment(const std::vector<std::string>& up, const std::vector<std::string>& down) {
  if (up.size() != 2 || down.size() != 2) throw ConfigError("need two uplink and two downlink traces");
  return {{trace::parse_trace(fs::path(up[0])), trace::parse_trace(fs::path(up[1]))},
          {trace::parse_trace(fs::path(down[0])), trace::parse_trace(fs::path(down[1]))},
          "files"};
}

inline std::vector<MetricsRecord> run_sim_experiment(const std::string& name, const std::string& policy_text,
                                                     const sim::EpisodeConfig& ep, int episodes,
                                                     std::optional<double> q, int workers) {
  const auto policy = policy::make_policy(policy_text);
  const auto stats = evaluate_sim(*policy, ep, episodes, q, workers);
  std::vector<MetricsRecord> out;
  for (std::size_t e = 0; e < stats.size(); ++e)
    out.push_back(from_episode(stats[e], name + "#" + std::to_string(e), policy_text));
  return out;
}

inline std::vector<MetricsRecord> run_trace_files(const std::string& name, const std::string& policy_text,
                                                  const trace::LinkAssignment& links,
                                                  const trace::TraceExperimentConfig& cfg, std::ostream& log) {
  const auto policy = policy::make_policy(policy_text);
  const auto st = evaluate_trace(*policy, links, cfg);
  for (const auto& w : st.warnings) log << "warning: " << w << '\n';
  std::vector<MetricsRecord> out;
  for (int i = 0; i < trace::kAgents; ++i)
    out.push_back(from_trace_agent(st.agents[i], name + "#agent" + std::to_string(i), policy_text,
                                   assignment_label(links)));
  return out;
}

}  // namespace detail

/// Synthetic trace set shipped with the repository.
inline void write_synthetic_traces(const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  trace::write_trace(trace::constant_rate_trace(10'000, 1), dir / "constant_1_per_ms.trace");
  trace::write_trace(trace::periodic_trace(60'000, 500), dir / "periodic_500ms.trace");
  for (const auto& t : trace::fading_pool(trace::kHighCapacity, 4, 60'000, derive_seed(seed, 1), "fading_high"))
    trace::write_trace(t, dir / (t.name() + ".trace"));
  for (const auto& t : trace::fading_pool(trace::kLowCapacity, 4, 300'000, derive_seed(seed, 2), "fading_low"))
    trace::write_trace(t, dir / (t.name() + ".trace"));
}

/// Entry point of the command-line tool. Returns the process exit code.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Age-aware query policies: training, simulation and trace-replay evaluation"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "warm-start an estimator with q/2 Bernoulli querying");
  estimator::PretrainConfig pcfg;
  std::string pre_out;
  pre->add_option("--out", pre_out, "estimator checkpoint to write")->required();
  pre->add_option("--episodes", pcfg.episodes, "episodes")->check(CLI::PositiveNumber);
  pre->add_option("--length", pcfg.episode_length, "slots per episode")->check(CLI::PositiveNumber);
  pre->add_option("--seed", pcfg.seed, "seed");

  // train
  auto* train = app.add_subcommand("train", "train one QNet model");
  std::string range_name, train_est, train_dir;
  int train_episodes = 2000, train_length = 2000, train_width = 64;
  std::uint64_t train_seed = 1;
  double train_limit = 0.0;
  std::optional<double> train_p0, train_gamma;
  train->add_option("--range", range_name, "low, mid, high or one")->required();
  train->add_option("--estimator", train_est, "pre-trained estimator checkpoint");
  train->add_option("--episodes", train_episodes, "episodes")->check(CLI::PositiveNumber);
  train->add_option("--length", train_length, "slots per episode")->check(CLI::PositiveNumber);
  train->add_option("--width", train_width, "hidden width of actor and critic")->check(CLI::PositiveNumber);
  train->add_option("--seed", train_seed, "seed");
  train->add_option("--time-limit", train_limit, "wall-clock budget in seconds (0: none)");
  train->add_option("--initial-query-prob", train_p0, "actor query probability at initialization")
      ->check(CLI::Range(1e-6, 1.0 - 1e-6));
  train->add_option("--gamma", train_gamma, "discount factor; the critic offset follows r_s / (1 - gamma)")
      ->check(CLI::Range(0.5, 0.99999));
  train->add_option("--run-dir", train_dir, "output directory")->required();

  // train-bundle
  auto* bundle = app.add_subcommand("train-bundle", "pre-train, then train the low, mid, high and one models");
  std::string bundle_cache = "runs/bundles";
  int bundle_episodes = 2000;
  bundle->add_option("--cache", bundle_cache, "cache root; the bundle lands in <cache>/<config key>");
  bundle->add_option("--episodes", bundle_episodes, "episodes per model")->check(CLI::PositiveNumber);

  // eval-sim
  auto* esim = app.add_subcommand("eval-sim", "evaluate a policy on simulated episodes");
  std::string esim_policy, esim_config, esim_dir;
  int esim_episodes = 100, esim_workers = 1;
  std::optional<double> esim_q;
  std::uint64_t esim_seed = 1;
  esim->add_option("--policy", esim_policy, "policy spec, e.g. \"kind=threshold delta=0.5\"")->required();
  esim->add_option("--episodes", esim_episodes, "episodes")->check(CLI::PositiveNumber);
  esim->add_option("--q", esim_q, "fixed service probability (default: drawn from q_range)")
      ->check(CLI::Range(1e-9, 1.0));
  esim->add_option("--config", esim_config, "episode config JSON");
  esim->add_option("--seed", esim_seed, "base seed (overrides the config)");
  esim->add_option("--workers", esim_workers, "worker threads")->check(CLI::PositiveNumber);
  esim->add_option("--run-dir", esim_dir, "output directory")->required();

  // eval-trace
  auto* etr = app.add_subcommand("eval-trace", "evaluate a policy on trace-shaped links");
  std::string etr_policy, etr_config, etr_dir;
  std::vector<std::string> etr_up, etr_down;
  bool etr_brtt = false;
  etr->add_option("--policy", etr_policy, "policy spec for both agents")->required();
  etr->add_option("--uplink", etr_up, "two uplink trace files")->required()->expected(2);
  etr->add_option("--downlink", etr_down, "two downlink trace files")->required()->expected(2);
  etr->add_option("--config", etr_config, "trace experiment config JSON");
  etr->add_flag("--brtt", etr_brtt, "also measure and classify the baseline RTT");
  etr->add_option("--run-dir", etr_dir, "output directory")->required();

  // age-curve
  auto* curve = app.add_subcommand("age-curve", "average age against utilization for Bernoulli arrivals");
  double curve_q = 0.5;
  std::int64_t curve_slots = 100'000;
  std::uint64_t curve_seed = 1;
  std::string curve_out;
  curve->add_option("--q", curve_q, "service probability")->required()->check(CLI::Range(1e-9, 1.0));
  curve->add_option("--slots", curve_slots, "slots per grid point")->check(CLI::PositiveNumber);
  curve->add_option("--seed", curve_seed, "seed");
  curve->add_option("--out", curve_out, "CSV file (default: stdout)");

  // bin-table
  auto* bins = app.add_subcommand("bin-table", "mean and std of error per average-age bin");
  std::vector<std::string> bin_inputs;
  double bin_width = 0.05;
  std::string bin_out;
  bins->add_option("--input", bin_inputs, "metrics.csv files")->required();
  bins->add_option("--width", bin_width, "bin width in seconds")->check(CLI::PositiveNumber);
  bins->add_option("--out", bin_out, "CSV file (default: stdout)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a list of experiments from a JSON config");
  std::string sweep_config;
  sweep->add_option("--config", sweep_config, "sweep JSON")->required();

  // make-traces
  auto* mk = app.add_subcommand("make-traces", "write the synthetic trace set");
  std::string mk_out;
  std::uint64_t mk_seed = 1;
  mk->add_option("--out", mk_out, "directory")->required();
  mk->add_option("--seed", mk_seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*pre) {
      auto est = std::make_shared<estimator::EstimatorModel>();
      const auto st = estimator::pretrain(est, pcfg);
      est->save(pre_out);
      out << "pretrained on " << st.slots << " slots with " << st.updates << " updates; final loss "
          << (st.losses.empty() ? 0.0 : st.losses.back()) << '\n';
    } else if (*train) {
      sac::TrainConfig c = sac::train_config_for(sac::range_from_string(range_name));
      c.episodes = train_episodes;
      c.episode_length = train_length;
      c.hyper.hidden_width = train_width;
      c.seed = train_seed;
      c.wall_clock_limit_s = train_limit;
      if (train_p0) c.hyper.initial_query_probability = *train_p0;
      if (train_gamma) {
        c.hyper.gamma = *train_gamma;
        c.hyper.critic_value_offset = sac::RewardShape{}.scale / (1.0 - *train_gamma);
      }
      c.run_dir = train_dir;
      std::shared_ptr<const estimator::EstimatorModel> est;
      if (!train_est.empty())
        est = std::make_shared<estimator::EstimatorModel>(estimator::EstimatorModel::load(train_est));
      write_manifest(train_dir, "train",
                     {{"range", range_name}, {"estimator", train_est}, {"episodes", train_episodes},
                      {"episode_length", train_length}, {"width", train_width}, {"seed", train_seed},
                      {"batch_size", c.hyper.batch_size}, {"time_limit_s", train_limit},
                      {"initial_query_probability", c.hyper.initial_query_probability},
                      {"gamma", c.hyper.gamma}});
      const auto res = sac::train_qnet(c, est);
      if (res.budget_exhausted) err << "warning: " << res.warning << '\n';
      out << "trained " << res.episodes_run << " episodes; checkpoint in " << train_dir << '\n';
    } else if (*bundle) {
      sac::BundleConfig b = sac::desk_bundle_config();
      b.episodes = bundle_episodes;
      out << "bundle " << sac::bundle_key(b) << ": " << sac::bundle_description(b) << std::endl;
      const auto res = sac::load_or_train_bundle(b, bundle_cache, [&](const std::string& m) { out << m << std::endl; });
      for (const auto& w : res.warnings) err << "warning: " << w << '\n';
      out << "total " << res.total_seconds << " s" << std::endl;
    } else if (*esim) {
      sim::EpisodeConfig ep;
      ep.warmup_slots = 100;
      if (!esim_config.empty()) ep = episode_config_from_json(read_json_file(esim_config));
      if (esim->count("--seed")) ep.seed = esim_seed;
      const auto rs = detail::run_sim_experiment("sim", esim_policy, ep, esim_episodes, esim_q, esim_workers);
      json cfg{{"policy", esim_policy}, {"episodes", esim_episodes}, {"episode", to_json(ep)}};
      if (esim_q) cfg["q"] = *esim_q;
      write_manifest(esim_dir, "eval-sim", cfg);
      detail::write_records(esim_dir, rs);
      detail::print_summary(out, rs);
    } else if (*etr) {
      trace::TraceExperimentConfig tc;
      if (!etr_config.empty()) tc = trace_config_from_json(read_json_file(etr_config));
      const auto links = detail::load_assignment(etr_up, etr_down);
      const auto rs = detail::run_trace_files("trace", etr_policy, links, tc, err);
      json cfg{{"policy", etr_policy}, {"uplink", etr_up}, {"downlink", etr_down}, {"trace", to_json(tc)}};
      if (etr_brtt) {
        const double b = trace::measure_brtt(links, tc);
        cfg["brtt_s"] = b;
        cfg["brtt_class"] = trace::to_string(trace::classify_brtt(b));
        out << "bRTT " << b << " s (" << trace::to_string(trace::classify_brtt(b)) << ")\n";
      }
      write_manifest(etr_dir, "eval-trace", cfg);
      detail::write_records(etr_dir, rs);
      detail::print_summary(out, rs);
    } else if (*curve) {
      std::vector<double> p;
      for (int k = 1; k <= 19; ++k) p.push_back(0.05 * k * curve_q);
      const auto pts = sim::bernoulli_arrival_age_curve(curve_q, p, curve_slots, curve_seed);
      std::ofstream file;
      if (!curve_out.empty()) file = detail::open_out(curve_out);
      std::ostream& o = curve_out.empty() ? out : file;
      const Units u;
      o << "utilization,arrival_probability,average_age_slots,average_age_s\n";
      for (const auto& pt : pts)
        o << pt.utilization << ',' << pt.arrival_probability << ',' << pt.average_age << ','
          << u.to_seconds(pt.average_age) << '\n';
    } else if (*bins) {
      std::vector<MetricsRecord> rs;
      for (const auto& in : bin_inputs) {
        std::ifstream f(in);
        if (!f) throw ConfigError("cannot open " + in);
        const auto part = read_metrics_csv(f);
        rs.insert(rs.end(), part.begin(), part.end());
      }
      const auto table = bin_table(rs, bin_width);
      std::ofstream file;
      if (!bin_out.empty()) file = detail::open_out(bin_out);
      write_bin_table_csv(table, bin_out.empty() ? out : file);
    } else if (*sweep) {
      const json j = read_json_file(sweep_config);
      detail::only_keys(j, {"run_dir", "workers", "experiments"}, "sweep config");
      const fs::path dir = j.at("run_dir").get<std::string>();
      const int workers = j.value("workers", default_workers());
      const auto& exps = j.at("experiments");
      if (!exps.is_array() || exps.empty()) throw ConfigError("sweep needs a non-empty experiments list");
      std::vector<std::vector<MetricsRecord>> parts(exps.size());
      std::vector<std::string> logs(exps.size());
      parallel_for(static_cast<int>(exps.size()), workers, [&](int k) {
        const json& x = exps[static_cast<std::size_t>(k)];
        detail::only_keys(x, {"name", "kind", "policy", "episodes", "q", "episode", "uplink", "downlink", "trace"},
                          "sweep experiment");
        const std::string name = x.value("name", "exp" + std::to_string(k));
        const std::string kind = x.at("kind").get<std::string>();
        const std::string pol = x.at("policy").get<std::string>();
        if (kind == "sim") {
          sim::EpisodeConfig ep;
          ep.warmup_slots = 100;
          if (x.contains("episode")) ep = episode_config_from_json(x.at("episode"));
          std::optional<double> q;
          if (x.contains("q")) q = x.at("q").get<double>();
          parts[k] = detail::run_sim_experiment(name, pol, ep, x.value("episodes", 100), q, 1);
        } else if (kind == "trace") {
          trace::TraceExperimentConfig tc;
          if (x.contains("trace")) tc = trace_config_from_json(x.at("trace"));
          const auto links = detail::load_assignment(x.at("uplink").get<std::vector<std::string>>(),
                                                     x.at("downlink").get<std::vector<std::string>>());
          std::ostringstream log;
          parts[k] = detail::run_trace_files(name, pol, links, tc, log);
          logs[k] = log.str();
        } else {
          throw ConfigError("experiment kind must be sim or trace, got '" + kind + "'");
        }
      });
      std::vector<MetricsRecord> all;
      for (std::size_t k = 0; k < parts.size(); ++k) {
        err << logs[k];
        all.insert(all.end(), parts[k].begin(), parts[k].end());
      }
      write_manifest(dir, "sweep", j);
      detail::write_records(dir, all);
      detail::print_summary(out, all);
    } else if (*mk) {
      write_synthetic_traces(mk_out, mk_seed);
      out << "wrote synthetic traces to " << mk_out << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace aoiq::eval
