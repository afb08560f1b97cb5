#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoiq/sim/episode.hpp"
#include "aoiq/trace/experiment.hpp"

namespace aoiq::eval {

/// Seconds per slot used for every externally reported age. The simulator
/// and the trace decision grid both count in slots.
struct Units {
  double slot_seconds = sim::kSlotSeconds;
  double to_seconds(double slots) const { return slots * slot_seconds; }
};

/// One row of an evaluation: a simulated episode or one agent of a trace
/// experiment.
struct MetricsRecord {
  std::string experiment;
  std::string policy;
  std::string scenario;  // "q=..." or the trace names
  std::string source;    // "simulated" or "trace"
  double avg_age_seconds = 0.0;
  double mean_error = 0.0;
  double std_error = 0.0;
  double query_rate = 0.0;
  double mean_rtt_s = std::nan("");
  double per = std::nan("");
};

inline MetricsRecord from_episode(const sim::EpisodeStats& s, std::string experiment, std::string policy,
                                  const Units& u = {}) {
  MetricsRecord r;
  r.experiment = std::move(experiment);
  r.policy = std::move(policy);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "q=%.6g", s.q);
  r.scenario = buf;
  r.source = "simulated";
  r.avg_age_seconds = u.to_seconds(s.avg_age_slots);
  r.mean_error = s.avg_err;
  r.std_error = s.std_err;
  r.query_rate = s.query_rate;
  return r;
}

inline MetricsRecord from_trace_agent(const trace::AgentTraceStats& s, std::string experiment, std::string policy,
                                      std::string scenario, const Units& u = {}) {
  MetricsRecord r;
  r.experiment = std::move(experiment);
  r.policy = std::move(policy);
  r.scenario = std::move(scenario);
  r.source = "trace";
  r.avg_age_seconds = u.to_seconds(s.avg_age_slots);
  r.mean_error = s.avg_err;
  r.std_error = s.std_err;
  r.query_rate = s.query_rate;
  r.mean_rtt_s = s.mean_rtt_s;
  r.per = s.per;
  return r;
}

inline std::string metrics_csv_header() {
  return "experiment,policy,scenario,source,avg_age_s,mean_error,std_error,query_rate,mean_rtt_s,per";
}

namespace detail {
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
inline std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}
}  // namespace detail

inline void write_metrics_csv(const std::vector<MetricsRecord>& rs, std::ostream& out) {
  out << metrics_csv_header() << '\n';
  for (const auto& r : rs)
    out << detail::csv_field(r.experiment) << ',' << detail::csv_field(r.policy) << ',' << detail::csv_field(r.scenario)
        << ',' << r.source << ',' << detail::num(r.avg_age_seconds) << ',' << detail::num(r.mean_error) << ','
        << detail::num(r.std_error) << ',' << detail::num(r.query_rate) << ',' << detail::num(r.mean_rtt_s) << ','
        << detail::num(r.per) << '\n';
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}
inline double parse_num(const std::string& s) { return s.empty() ? std::nan("") : std::stod(s); }
}  // namespace detail

/// Inverse of write_metrics_csv.
inline std::vector<MetricsRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header())
    throw std::runtime_error("metrics CSV must start with the header: " + metrics_csv_header());
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 10) throw std::runtime_error("metrics CSV row has " + std::to_string(f.size()) + " fields");
    MetricsRecord r;
    r.experiment = f[0];
    r.policy = f[1];
    r.scenario = f[2];
    r.source = f[3];
    r.avg_age_seconds = detail::parse_num(f[4]);
    r.mean_error = detail::parse_num(f[5]);
    r.std_error = detail::parse_num(f[6]);
    r.query_rate = detail::parse_num(f[7]);
    r.mean_rtt_s = detail::parse_num(f[8]);
    r.per = detail::parse_num(f[9]);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string scatter_csv_header() { return "avg_age_s,avg_error,source"; }

/// One row per record; header only when empty.
inline void scatter_export(const std::vector<MetricsRecord>& rs, std::ostream& out) {
  out << scatter_csv_header() << '\n';
  for (const auto& r : rs) out << detail::num(r.avg_age_seconds) << ',' << detail::num(r.mean_error) << ',' << r.source << '\n';
}

struct AgeBin {
  std::string source;
  int index = 0;  // covers [index, index + 1) * width
  double lo = 0.0, hi = 0.0;
  int count = 0;
  double mean = 0.0;
  double std = 0.0;  // population
};

/// Half-open age bins of `width` seconds starting at 0, per source label.
/// Empty bins are omitted.
class AgeBinTable {
 public:
  explicit AgeBinTable(double width = 0.05) : width_(width) {
    if (!(width > 0.0)) throw std::invalid_argument("bin width must be positive");
  }

  // Edges are decimal multiples of the width; the nudge keeps an age sitting
  // exactly on an edge in the upper bin despite binary rounding.
  int bin_of(double age_s) const { return static_cast<int>(std::floor(age_s / width_ + 1e-9)); }

  void add(const MetricsRecord& r) {
    bins_[{r.source, bin_of(r.avg_age_seconds)}].push_back(r.mean_error);
  }

  std::vector<AgeBin> rows() const {
    std::vector<AgeBin> out;
    for (const auto& [key, errs] : bins_) {
      AgeBin b;
      b.source = key.first;
      b.index = key.second;
      b.lo = key.second * width_;
      b.hi = (key.second + 1) * width_;
      b.count = static_cast<int>(errs.size());
      double sum = 0.0;
      for (double e : errs) sum += e;
      b.mean = sum / b.count;
      double ss = 0.0;
      for (double e : errs) ss += (e - b.mean) * (e - b.mean);
      b.std = std::sqrt(ss / b.count);
      out.push_back(b);
    }
    return out;
  }

  std::optional<AgeBin> find(const std::string& source, int index) const {
    for (const auto& b : rows())
      if (b.source == source && b.index == index) return b;
    return std::nullopt;
  }

  double width() const { return width_; }

 private:
  double width_;
  std::map<std::pair<std::string, int>, std::vector<double>> bins_;
};

inline AgeBinTable bin_table(const std::vector<MetricsRecord>& rs, double width = 0.05) {
  if (rs.empty()) throw std::invalid_argument("bin_table: no records");
  AgeBinTable t(width);
  for (const auto& r : rs) t.add(r);
  return t;
}

inline void write_bin_table_csv(const AgeBinTable& t, std::ostream& out) {
  out << "source,age_lo_s,age_hi_s,count,mean_error,std_error\n";
  for (const auto& b : t.rows())
    out << b.source << ',' << detail::num(b.lo) << ',' << detail::num(b.hi) << ',' << b.count << ','
        << detail::num(b.mean) << ',' << detail::num(b.std) << '\n';
}

}  // namespace aoiq::eval
