#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "aoiq/policy/baselines.hpp"
#include "aoiq/trace/experiment.hpp"
#include "support/trace_oracle.hpp"

using namespace aoiq;
using trace::EmulatedLink;
using trace::Millis;
using trace::TraceSchedule;

namespace {

TraceSchedule from_text(const std::string& text) {
  std::istringstream in(text);
  return trace::parse_trace(in, "inline");
}

trace::LinkAssignment same_links(const TraceSchedule& s) { return {{s, s}, {s, s}, "test"}; }

}  // namespace

TEST(TraceParse, RepeatsAddCapacity) {
  const auto s = from_text("5\n5\n5\n");
  EXPECT_EQ(s.capacity_at(5), 4500);
  EXPECT_EQ(s.capacity_at(4), 0);
}

TEST(TraceParse, MultiplicityMap) {
  const auto c = from_text("1\n2\n2\n10\n").capacities();
  const std::map<Millis, std::int64_t> want{{1, 1500}, {2, 3000}, {10, 1500}};
  EXPECT_EQ(c, want);
}

TEST(TraceParse, RejectsBadInput) {
  EXPECT_THROW(from_text(""), trace::TraceError);
  EXPECT_THROW(from_text("1\nx\n"), trace::TraceError);
  EXPECT_THROW(from_text("1\n2.5\n"), trace::TraceError);
  EXPECT_THROW(from_text("1\n-3\n"), trace::TraceError);
  EXPECT_THROW(from_text("1\n\n2\n"), trace::TraceError);
  EXPECT_THROW(from_text("4\n3\n"), trace::TraceError);
  EXPECT_THROW(from_text("0\n0\n"), trace::TraceError);
}

TEST(TraceParse, AcceptsCrlfAndNoFinalNewline) {
  const auto s = from_text("1\r\n2\r\n7");
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.period_ms(), 7);
}

TEST(TraceParse, RoundTripsThroughWriter) {
  const auto s = trace::fading_trace(3000, 50.0, 0.4, 9);
  std::ostringstream out;
  trace::write_trace(s, out);
  std::istringstream in(out.str());
  EXPECT_EQ(trace::parse_trace(in).opportunities(), s.opportunities());
}

TEST(TraceSchedule, OpportunityIndexWraps) {
  const auto s = from_text("2\n4\n");
  EXPECT_EQ(s.time_of(0), 2);
  EXPECT_EQ(s.time_of(1), 4);
  EXPECT_EQ(s.time_of(2), 6);
  EXPECT_EQ(s.time_of(3), 8);
  EXPECT_EQ(s.first_at_or_after(0), 0);
  EXPECT_EQ(s.first_at_or_after(3), 1);
  EXPECT_EQ(s.first_at_or_after(4), 1);
  EXPECT_EQ(s.first_at_or_after(5), 2);
  EXPECT_EQ(s.first_at_or_after(9), 4);
}

TEST(Link, PacketFitsInOpportunityAtNow) {
  EmulatedLink link(trace::constant_rate_trace(100, 1));
  EXPECT_EQ(link.send(1024, 7), 7);
}

TEST(Link, LargePayloadNeedsTwoOpportunities) {
  EmulatedLink link(trace::constant_rate_trace(100, 1));
  EXPECT_EQ(link.send(3000, 1), 2);
}

TEST(Link, SpareBytesServeTheNextPacket) {
  EmulatedLink link(from_text("0\n5\n"));
  EXPECT_EQ(link.send(1024, 0), 0);
  EXPECT_EQ(link.send(1024, 0), 5);
}

TEST(Link, IdleOpportunitiesAreNotBanked) {
  EmulatedLink link(from_text("1\n2\n3\n4\n5\n6\n7\n8\n9\n10\n"));
  // Opportunities 1..7 pass unused; 2900 bytes then need ms 8 and 9.
  EXPECT_EQ(link.send(2900, 8), 9);
  // Leftover of ms 9 is lost once ms 10 arrives.
  EXPECT_EQ(link.send(100, 10), 10);
}

TEST(Link, LeftoverOfPastOpportunityIsLost) {
  EmulatedLink link(from_text("1\n3\n"));
  EXPECT_EQ(link.send(100, 1), 1);
  // 1400 bytes were left at ms 1, but the packet arrives at ms 2.
  EXPECT_EQ(link.send(100, 2), 3);
}

TEST(Link, WrapsAtTheLastTimestamp) {
  EmulatedLink link(from_text("2\n4\n"));
  EXPECT_EQ(link.send(1500, 3), 4);
  EXPECT_FALSE(link.wrapped());
  EXPECT_EQ(link.send(1500, 5), 6);
  EXPECT_TRUE(link.wrapped());
}

TEST(Link, RejectsBadSends) {
  EmulatedLink link(from_text("2\n4\n"));
  EXPECT_THROW(link.send(0, 1), std::invalid_argument);
  link.send(10, 3);
  EXPECT_THROW(link.send(10, 2), std::invalid_argument);
}

TEST(Link, MatchesMillisecondQueueOracle) {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Millis> ms;
    const int lines = 1 + static_cast<int>(rng.index(12));
    Millis t = static_cast<Millis>(rng.index(3));
    for (int k = 0; k < lines; ++k) {
      t += static_cast<Millis>(rng.index(4));
      ms.push_back(t);
    }
    if (ms.back() == 0) ms.push_back(1);
    const TraceSchedule s(ms);
    EmulatedLink link(s);
    std::vector<oracle::SentPacket> sent;
    Millis now = 0;
    for (int p = 0; p < 30; ++p) {
      now += static_cast<Millis>(rng.index(5));
      sent.push_back({now, 1 + static_cast<int>(rng.index(4000))});
    }
    std::vector<Millis> got;
    for (const auto& p : sent) got.push_back(link.send(p.bytes, p.at_ms));
    const Millis horizon = got.back() + 1;
    const auto want = oracle::byte_queue_deliveries(oracle::unroll(ms, horizon), sent, horizon);
    ASSERT_EQ(got, want) << "trial " << trial;
  }
}

TEST(Link, FifoAndByteConservation) {
  const auto s = trace::fading_trace(5000, 300.0, 0.5, 3);
  EmulatedLink link(s);
  Rng rng(5);
  std::vector<std::pair<Millis, int>> delivered;
  Millis now = 0, last = -1;
  for (int p = 0; p < 2000; ++p) {
    now += static_cast<Millis>(rng.index(6));
    const int bytes = 200 + static_cast<int>(rng.index(1500));
    const Millis d = link.send(bytes, now);
    EXPECT_GE(d, now);
    EXPECT_GE(d, last);
    last = d;
    delivered.emplace_back(d, bytes);
  }
  // Bytes completed by time t never exceed the capacity offered up to t.
  const auto unrolled = oracle::unroll(s.opportunities(), last);
  std::int64_t done = 0;
  std::size_t j = 0;
  for (const auto& [d, bytes] : delivered) {
    done += bytes;
    while (j < unrolled.size() && unrolled[j] <= d) ++j;
    ASSERT_LE(done, static_cast<std::int64_t>(j) * trace::kOpportunityBytes);
  }
}

TEST(Cloud, KeepsFreshestPerSource) {
  trace::CloudResponder c({trace::CloudResponder::Stored{0, sim::StateVector::Zero()},
                           trace::CloudResponder::Stored{0, sim::StateVector::Ones()}});
  c.ingest(0, 300, sim::StateVector::Constant(3.0));
  c.ingest(0, 200, sim::StateVector::Constant(2.0));
  EXPECT_EQ(c.answer(0).generated_at, 300);
  EXPECT_EQ(c.answer(0).state[0], 3.0);
  EXPECT_EQ(c.answer(1).generated_at, 0);
}

TEST(TraceExperiment, UnconstrainedAlwaysQuery) {
  const auto links = same_links(trace::constant_rate_trace(60'000, 1));
  trace::TraceExperimentConfig cfg;
  cfg.duration_s = 30.0;
  policy::AlwaysQuery a, b;
  const auto st = trace::run_trace_experiment(links, {&a, &b}, cfg);
  EXPECT_TRUE(st.warnings.empty());
  for (const auto& s : st.agents) {
    EXPECT_EQ(s.query_rate, 1.0);
    EXPECT_DOUBLE_EQ(s.mean_rtt_s, 0.020);  // base delay each way, no queueing
    EXPECT_DOUBLE_EQ(s.avg_age_slots, 1.0);
    EXPECT_EQ(s.per, 0.0);
    EXPECT_EQ(s.responses, s.queries);
  }
}

TEST(TraceExperiment, NeverQueryAgesLinearly) {
  const auto links = same_links(trace::constant_rate_trace(60'000, 1));
  trace::TraceExperimentConfig cfg;
  cfg.duration_s = 20.0;
  policy::NeverQuery a, b;
  const auto st = trace::run_trace_experiment(links, {&a, &b}, cfg);
  for (const auto& s : st.agents) {
    EXPECT_EQ(s.query_rate, 0.0);
    EXPECT_EQ(s.per, 0.0);
    EXPECT_TRUE(std::isnan(s.mean_rtt_s));
    // Ages 100..199 slots after the warm-up.
    EXPECT_DOUBLE_EQ(s.avg_age_slots, 149.5);
  }
}

TEST(TraceExperiment, ConstrainedDownlinkLosesLateResponses) {
  const auto fast = trace::constant_rate_trace(60'000, 1);
  const auto slow = trace::periodic_trace(60'000, 500);
  trace::LinkAssignment links{{fast, fast}, {slow, slow}, "test"};
  trace::TraceExperimentConfig cfg;
  cfg.duration_s = 30.0;
  cfg.warmup_decisions = 0;
  policy::AlwaysQuery a, b;
  const auto st = trace::run_trace_experiment(links, {&a, &b}, cfg);
  for (const auto& s : st.agents) {
    EXPECT_GT(s.per, 0.5);
    EXPECT_GT(s.mean_rtt_s, 1.0);
  }
}

TEST(TraceExperiment, WarnsWhenTracesWrap) {
  const auto links = same_links(trace::constant_rate_trace(1000, 1));
  trace::TraceExperimentConfig cfg;
  cfg.duration_s = 15.0;
  policy::AlwaysQuery a, b;
  const auto st = trace::run_trace_experiment(links, {&a, &b}, cfg);
  EXPECT_EQ(st.warnings.size(), 4u);
  EXPECT_DOUBLE_EQ(st.agents[0].mean_rtt_s, 0.020);
}

TEST(TraceExperiment, Deterministic) {
  Rng rng(3);
  std::vector<TraceSchedule> pool;
  for (int k = 0; k < 4; ++k) pool.push_back(trace::fading_trace(20'000, 20.0, 0.5, 10 + k));
  const auto links = trace::draw_assignment(pool, rng);
  trace::TraceExperimentConfig cfg;
  cfg.duration_s = 20.0;
  auto run = [&] {
    policy::BernoulliQuery a(0.3), b(0.3);
    return trace::run_trace_experiment(links, {&a, &b}, cfg);
  };
  const auto x = run(), y = run();
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(x.agents[i].avg_err, y.agents[i].avg_err);
    EXPECT_EQ(x.agents[i].rtts_s, y.agents[i].rtts_s);
  }
}

TEST(TraceAssignment, DrawsFourDistinctTraces) {
  std::vector<TraceSchedule> pool;
  for (int k = 0; k < 6; ++k) pool.push_back(trace::periodic_trace(1000, k + 1));
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto a = trace::draw_assignment(pool, rng);
    std::set<Millis> periods{a.uplink[0].opportunities()[0], a.uplink[1].opportunities()[0],
                             a.downlink[0].opportunities()[0], a.downlink[1].opportunities()[0]};
    EXPECT_EQ(periods.size(), 4u);
  }
  pool.resize(3);
  EXPECT_THROW(trace::draw_assignment(pool, rng), std::invalid_argument);
}

TEST(Brtt, UnconstrainedIsLow) {
  trace::TraceExperimentConfig cfg;
  cfg.duration_s = 20.0;
  const auto links = same_links(trace::constant_rate_trace(60'000, 1));
  EXPECT_DOUBLE_EQ(trace::measure_brtt(links, cfg), 0.020);
  EXPECT_EQ(trace::classify_brtt(links, cfg), trace::BrttClass::low);
}

TEST(Brtt, OneOpportunityPer500msIsHigh) {
  // Each link carries 1500 bytes per 500 ms against 1024 bytes offered every
  // 100 ms, so every probe waits behind a backlog growing by ~0.7 s per second.
  trace::TraceExperimentConfig cfg;
  cfg.duration_s = 30.0;
  const auto links = same_links(trace::periodic_trace(60'000, 500));
  EXPECT_GE(trace::measure_brtt(links, cfg), 0.2);
  EXPECT_EQ(trace::classify_brtt(links, cfg), trace::BrttClass::high);
}

TEST(Brtt, BoundaryIsHigh) {
  EXPECT_EQ(trace::classify_brtt(0.2), trace::BrttClass::high);
  EXPECT_EQ(trace::classify_brtt(0.19999), trace::BrttClass::low);
}

TEST(SyntheticTraces, FadingHasRequestedMeanAndPeriod) {
  const auto s = trace::fading_trace(200'000, 100.0, 0.3, 4);
  EXPECT_EQ(s.period_ms(), 200'000);
  const double per_s = static_cast<double>(s.size()) / 200.0;
  EXPECT_GT(per_s, 60.0);
  EXPECT_LT(per_s, 180.0);
  EXPECT_EQ(trace::fading_trace(10'000, 100.0, 0.3, 4).opportunities(),
            trace::fading_trace(10'000, 100.0, 0.3, 4).opportunities());
}

TEST(SyntheticTraces, PoolNamesAndSeeds) {
  const auto a = trace::fading_pool(trace::kLowCapacity, 3, 20'000, 5, "low");
  const auto b = trace::fading_pool(trace::kLowCapacity, 3, 20'000, 5, "low");
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[2].name(), "low_2");
  EXPECT_EQ(a[1].opportunities(), b[1].opportunities());
  EXPECT_NE(a[0].opportunities(), a[1].opportunities());
  for (const auto& t : a) EXPECT_EQ(t.period_ms(), 20'000);
}
