#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include "aoiq/core/random.hpp"
#include "aoiq/eval/metrics.hpp"
#include "aoiq/policy/policy.hpp"
#include "aoiq/sim/episode.hpp"
#include "aoiq/trace/experiment.hpp"

namespace aoiq::eval {

/// Runs `jobs` independent tasks on up to `workers` threads. Each task writes
/// only its own output slot.
inline void parallel_for(int jobs, int workers, const std::function<void(int)>& task) {
  workers = std::max(1, std::min(workers, jobs));
  if (workers == 1) {
    for (int j = 0; j < jobs; ++j) task(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int j = next++; j < jobs; j = next++) task(j);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
        next = jobs;
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline int default_workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

/// Episode e uses seed derive_seed(base.seed, e); q is fixed when given and
/// drawn from the configured range otherwise.
inline std::vector<sim::EpisodeStats> evaluate_sim(const policy::Policy& prototype, const sim::EpisodeConfig& base,
                                                   int episodes, std::optional<double> fixed_q = std::nullopt,
                                                   int workers = 1) {
  if (episodes < 1) throw std::invalid_argument("evaluate_sim: episodes must be >= 1");
  std::vector<sim::EpisodeStats> out(static_cast<std::size_t>(episodes));
  parallel_for(episodes, workers, [&](int e) {
    auto p = prototype.clone();
    sim::EpisodeConfig c = base;
    c.seed = derive_seed(base.seed, static_cast<std::uint64_t>(e));
    out[static_cast<std::size_t>(e)] = fixed_q ? sim::simulate_episode(*fixed_q, c, *p) : sim::run_episode(c, *p);
  });
  return out;
}

inline std::string assignment_label(const trace::LinkAssignment& a) {
  return a.uplink[0].name() + "/" + a.downlink[0].name() + "|" + a.uplink[1].name() + "/" + a.downlink[1].name();
}

/// Both agents run clones of the same policy.
inline trace::TraceExperimentStats evaluate_trace(const policy::Policy& prototype, const trace::LinkAssignment& links,
                                                  const trace::TraceExperimentConfig& cfg) {
  auto a = prototype.clone();
  auto b = prototype.clone();
  return trace::run_trace_experiment(links, {a.get(), b.get()}, cfg);
}

}  // namespace aoiq::eval
