#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "aoiq/core/random.hpp"
#include "aoiq/policy/policy.hpp"
#include "aoiq/sim/source.hpp"
#include "aoiq/trace/link.hpp"

namespace aoiq::trace {

inline constexpr int kAgents = 2;

/// Uplink and downlink schedules for both agents of one experiment.
struct LinkAssignment {
  std::array<TraceSchedule, kAgents> uplink;
  std::array<TraceSchedule, kAgents> downlink;
  std::string category;  // e.g. "stationary" or "not-stationary"
};

/// Four distinct traces from `pool`, drawn without replacement: uplink 0,
/// downlink 0, uplink 1, downlink 1.
inline LinkAssignment draw_assignment(const std::vector<TraceSchedule>& pool, Rng& rng, std::string category = {}) {
  if (pool.size() < 4) throw std::invalid_argument("draw_assignment: need at least four traces");
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < 4; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  return {{pool[idx[0]], pool[idx[2]]}, {pool[idx[1]], pool[idx[3]]}, std::move(category)};
}

struct TraceExperimentConfig {
  double duration_s = 300.0;
  Millis decision_period_ms = 100;  // one slot
  int measurement_bytes = 1024;
  int response_bytes = 1024;
  Millis base_delay_ms = 10;        // one-way, applied before the link queue
  int warmup_decisions = 100;       // decision instants excluded from averages
  sim::SourceParams source{};
  std::uint64_t seed = 1;
};

struct AgentTraceStats {
  double avg_age_slots = 0.0;
  double avg_err = 0.0;   // mean Euclidean position error (meters)
  double std_err = 0.0;   // population std of the per-decision position error
  double query_rate = 0.0;
  double mean_rtt_s = 0.0;  // over answered queries; NaN when none
  double per = 0.0;         // fraction of queries unanswered at the end; 0 when no queries
  int decisions = 0;
  int queries = 0;
  int responses = 0;
  std::vector<double> rtts_s;  // answered queries, in query order
};

struct TraceExperimentStats {
  std::array<AgentTraceStats, kAgents> agents;
  std::vector<std::string> warnings;
};

/// Edge cloud: keeps the freshest measurement of each source and answers
/// queries in arrival order with zero processing time.
class CloudResponder {
 public:
  struct Stored {
    Millis generated_at = 0;
    sim::StateVector state = sim::StateVector::Zero();
  };

  explicit CloudResponder(const std::array<Stored, kAgents>& initial) : store_(initial) {}

  void ingest(int source, Millis generated_at, const sim::StateVector& state) {
    if (generated_at > store_[source].generated_at) store_[source] = {generated_at, state};
  }

  /// Queries are answered strictly in the order they are passed here.
  const Stored& answer(int source) const { return store_[source]; }

 private:
  std::array<Stored, kAgents> store_;
};

namespace detail {

struct Uplinked {
  Millis arrive = 0;
  std::int64_t seq = 0;
  int agent = 0;
  Millis generated_at = 0;
  sim::StateVector state;
  bool query = false;
  Millis sent_at = 0;
  bool operator>(const Uplinked& o) const { return arrive != o.arrive ? arrive > o.arrive : seq > o.seq; }
};

struct Response {
  Millis deliver = 0;
  Millis generated_at = 0;
  sim::StateVector state;
  Millis query_sent_at = 0;
};

}  // namespace detail

/// Two agents, each sensing its own source and estimating the other's, on a
/// common decision grid. Every decision period each agent sends its fresh
/// measurement uplink with the query flag on it; the cloud answers a query
/// with the freshest measurement of the other source over the querier's
/// downlink. Arrivals within one millisecond update the store before any of
/// them is answered.
inline TraceExperimentStats run_trace_experiment(const LinkAssignment& links,
                                                 std::array<policy::Policy*, kAgents> policies,
                                                 const TraceExperimentConfig& cfg) {
  if (cfg.decision_period_ms < 1 || cfg.measurement_bytes < 1 || cfg.response_bytes < 1 || cfg.base_delay_ms < 0)
    throw std::invalid_argument("trace experiment: bad config");
  const auto duration_ms = static_cast<Millis>(std::llround(cfg.duration_s * 1000.0));
  const std::int64_t decisions = duration_ms / cfg.decision_period_ms;
  if (decisions <= cfg.warmup_decisions) throw std::invalid_argument("trace experiment: duration within warm-up");

  TraceExperimentStats out;
  std::array<EmulatedLink, kAgents> up{EmulatedLink(links.uplink[0]), EmulatedLink(links.uplink[1])};
  std::array<EmulatedLink, kAgents> down{EmulatedLink(links.downlink[0]), EmulatedLink(links.downlink[1])};
  for (int i = 0; i < kAgents; ++i) {
    for (const auto* s : {&links.uplink[i], &links.downlink[i]})
      if (s->period_ms() < duration_ms)
        out.warnings.push_back("trace " + s->name() + " (" + std::to_string(s->period_ms()) + " ms) is shorter than the " +
                               std::to_string(duration_ms) + " ms experiment and wraps");
  }

  Rng master(cfg.seed);
  std::array<Rng, kAgents> source_rng{master.split(1), master.split(2)};
  std::array<sim::SourceState, kAgents> source{sim::random_initial_source(source_rng[0], cfg.source),
                                               sim::random_initial_source(source_rng[1], cfg.source)};

  // Agent i tracks source 1 - i and starts with a measurement of it at time 0.
  CloudResponder cloud({CloudResponder::Stored{0, source[0].vector()}, CloudResponder::Stored{0, source[1].vector()}});
  std::array<sim::StateVector, kAgents> latest{source[1].vector(), source[0].vector()};
  std::array<Millis, kAgents> freshest{0, 0};
  std::array<std::deque<detail::Response>, kAgents> inbox;
  std::array<bool, kAgents> arrived{false, false};
  for (int i = 0; i < kAgents; ++i) {
    if (!policies[i]) throw std::invalid_argument("trace experiment: missing policy");
    policies[i]->reset(latest[i], derive_seed(cfg.seed, 10 + static_cast<std::uint64_t>(i)));
  }

  std::priority_queue<detail::Uplinked, std::vector<detail::Uplinked>, std::greater<>> uplinked;
  std::int64_t seq = 0;
  std::array<double, kAgents> age_sum{}, err_sum{}, err_sq_sum{};
  std::array<std::vector<Millis>, kAgents> counted_queries;  // send times of counted queries
  std::array<std::vector<std::pair<Millis, Millis>>, kAgents> answers;  // (query sent, delivered)

  auto process_cloud_until = [&](Millis t) {
    std::vector<detail::Uplinked> same_ms;
    while (!uplinked.empty() && uplinked.top().arrive <= t) {
      const Millis ms = uplinked.top().arrive;
      same_ms.clear();
      while (!uplinked.empty() && uplinked.top().arrive == ms) {
        same_ms.push_back(uplinked.top());
        uplinked.pop();
      }
      for (const auto& m : same_ms) cloud.ingest(m.agent, m.generated_at, m.state);
      for (const auto& m : same_ms) {
        if (!m.query) continue;
        const auto& ans = cloud.answer(1 - m.agent);
        const Millis deliver = down[m.agent].send(cfg.response_bytes, ms + cfg.base_delay_ms);
        inbox[m.agent].push_back({deliver, ans.generated_at, ans.state, m.sent_at});
      }
    }
  };

  for (std::int64_t k = 0; k < decisions; ++k) {
    const Millis t = k * cfg.decision_period_ms;
    process_cloud_until(t);
    std::array<int, kAgents> action{};
    for (int i = 0; i < kAgents; ++i) {
      auto& box = inbox[i];
      while (!box.empty() && box.front().deliver <= t) {
        const auto& r = box.front();
        answers[i].emplace_back(r.query_sent_at, r.deliver);
        if (r.generated_at > freshest[i]) {
          freshest[i] = r.generated_at;
          latest[i] = r.state;
        }
        arrived[i] = true;
        box.pop_front();
      }
      const double age_slots = static_cast<double>(t - freshest[i]) / static_cast<double>(cfg.decision_period_ms);
      const sim::StateVector truth = source[1 - i].vector();
      const policy::DecisionInput in{age_slots, latest[i], &truth, arrived[i]};
      const sim::StateVector est = policies[i]->estimate(in);
      action[i] = policies[i]->act(in);
      if (action[i] != 0 && action[i] != 1) throw std::logic_error("policy returned a non-binary action");
      arrived[i] = false;
      if (k >= cfg.warmup_decisions) {
        age_sum[i] += age_slots;
        const double e = (est - truth).head<2>().norm();
        err_sum[i] += e;
        err_sq_sum[i] += e * e;
        if (action[i]) counted_queries[i].push_back(t);
      }
    }
    for (int i = 0; i < kAgents; ++i) {
      const Millis arrive = up[i].send(cfg.measurement_bytes, t + cfg.base_delay_ms);
      uplinked.push({arrive, seq++, i, t, source[i].vector(), action[i] == 1, t});
    }
    for (int i = 0; i < kAgents; ++i) source[i] = sim::source_step(source[i], source_rng[i], cfg.source);
  }

  // Responses still travelling at the end count as lost.
  process_cloud_until(duration_ms);
  for (int i = 0; i < kAgents; ++i) {
    auto& box = inbox[i];
    while (!box.empty() && box.front().deliver <= duration_ms) {
      answers[i].emplace_back(box.front().query_sent_at, box.front().deliver);
      box.pop_front();
    }
  }

  const auto counted = static_cast<double>(decisions - cfg.warmup_decisions);
  const Millis first_counted = cfg.warmup_decisions * cfg.decision_period_ms;
  for (int i = 0; i < kAgents; ++i) {
    AgentTraceStats& s = out.agents[i];
    s.decisions = static_cast<int>(counted);
    s.avg_age_slots = age_sum[i] / counted;
    s.avg_err = err_sum[i] / counted;
    s.std_err = std::sqrt(std::max(0.0, err_sq_sum[i] / counted - s.avg_err * s.avg_err));
    s.queries = static_cast<int>(counted_queries[i].size());
    s.query_rate = s.queries / counted;
    double rtt_sum = 0.0;
    for (const auto& [sent, delivered] : answers[i]) {
      if (sent < first_counted) continue;
      s.rtts_s.push_back(static_cast<double>(delivered - sent) / 1000.0);
      rtt_sum += s.rtts_s.back();
    }
    s.responses = static_cast<int>(s.rtts_s.size());
    s.mean_rtt_s = s.responses > 0 ? rtt_sum / s.responses : std::numeric_limits<double>::quiet_NaN();
    s.per = s.queries > 0 ? 1.0 - static_cast<double>(s.responses) / s.queries : 0.0;
  }
  return out;
}

enum class BrttClass { low, high };

inline std::string to_string(BrttClass c) { return c == BrttClass::low ? "low" : "high"; }

/// Median RTT of probes sent every decision period by both agents (an
/// always-query run). Unanswered probes count as infinitely late.
inline double measure_brtt(const LinkAssignment& links, const TraceExperimentConfig& cfg) {
  struct Probe final : policy::Policy {
    void reset(const sim::StateVector& m, std::uint64_t) override { last = m; }
    sim::StateVector estimate(const policy::DecisionInput& in) override { return last = in.latest; }
    int act(const policy::DecisionInput&) override { return 1; }
    std::string name() const override { return "probe"; }
    std::unique_ptr<policy::Policy> clone() const override { return std::make_unique<Probe>(*this); }
    sim::StateVector last;
  } a, b;
  const auto st = run_trace_experiment(links, {&a, &b}, cfg);
  std::vector<double> rtts;
  for (const auto& s : st.agents) {
    rtts.insert(rtts.end(), s.rtts_s.begin(), s.rtts_s.end());
    rtts.insert(rtts.end(), static_cast<std::size_t>(s.queries - s.responses), std::numeric_limits<double>::infinity());
  }
  if (rtts.empty()) throw std::logic_error("measure_brtt: no probes were sent");
  std::sort(rtts.begin(), rtts.end());
  const std::size_t n = rtts.size();
  return n % 2 ? rtts[n / 2] : 0.5 * (rtts[n / 2 - 1] + rtts[n / 2]);
}

/// High when the median probe RTT reaches the threshold.
inline BrttClass classify_brtt(double brtt_s, double threshold_s = 0.2) {
  return brtt_s >= threshold_s ? BrttClass::high : BrttClass::low;
}

inline BrttClass classify_brtt(const LinkAssignment& links, const TraceExperimentConfig& cfg,
                               double threshold_s = 0.2) {
  return classify_brtt(measure_brtt(links, cfg), threshold_s);
}

}  // namespace aoiq::trace
