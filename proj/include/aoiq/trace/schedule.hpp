#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoiq/core/random.hpp"

namespace aoiq::trace {

using Millis = std::int64_t;

/// Bytes one delivery opportunity may carry.
inline constexpr int kOpportunityBytes = 1500;

struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Millisecond delivery opportunities, non-decreasing, repeats meaning
/// several opportunities in the same millisecond. The schedule repeats with
/// period equal to its last timestamp.
class TraceSchedule {
 public:
  TraceSchedule() = default;
  explicit TraceSchedule(std::vector<Millis> opportunities, std::string name = {})
      : ms_(std::move(opportunities)), name_(std::move(name)) {
    if (ms_.empty()) throw TraceError("trace " + name_ + " has no delivery opportunities");
    if (ms_.front() < 0) throw TraceError("trace " + name_ + " has a negative timestamp");
    if (!std::is_sorted(ms_.begin(), ms_.end())) throw TraceError("trace " + name_ + " timestamps decrease");
    if (ms_.back() <= 0) throw TraceError("trace " + name_ + " must end after millisecond 0");
  }

  const std::vector<Millis>& opportunities() const { return ms_; }
  std::size_t size() const { return ms_.size(); }
  Millis period_ms() const { return ms_.back(); }
  const std::string& name() const { return name_; }

  /// Time of the k-th opportunity counted across repetitions.
  Millis time_of(std::int64_t k) const {
    const auto n = static_cast<std::int64_t>(ms_.size());
    return ms_[static_cast<std::size_t>(k % n)] + (k / n) * period_ms();
  }

  /// Index of the first opportunity at or after `t`.
  std::int64_t first_at_or_after(Millis t) const {
    const auto n = static_cast<std::int64_t>(ms_.size());
    if (t <= ms_.front()) return 0;
    const Millis c = t / period_ms();
    for (Millis cycle = std::max<Millis>(c - 1, 0); cycle <= c; ++cycle) {
      const auto it = std::lower_bound(ms_.begin(), ms_.end(), t - cycle * period_ms());
      if (it != ms_.end()) return cycle * n + (it - ms_.begin());
    }
    return (c + 1) * n;
  }

  /// Bytes deliverable in millisecond `t` of the first repetition.
  std::int64_t capacity_at(Millis t) const {
    const auto [lo, hi] = std::equal_range(ms_.begin(), ms_.end(), t);
    return static_cast<std::int64_t>(hi - lo) * kOpportunityBytes;
  }

  /// Millisecond -> bytes for every millisecond with at least one opportunity.
  std::map<Millis, std::int64_t> capacities() const {
    std::map<Millis, std::int64_t> out;
    for (Millis t : ms_) out[t] += kOpportunityBytes;
    return out;
  }

  /// Mean capacity in bytes per second over one repetition.
  double mean_bytes_per_second() const {
    return static_cast<double>(ms_.size()) * kOpportunityBytes * 1000.0 / static_cast<double>(period_ms());
  }

 private:
  std::vector<Millis> ms_;
  std::string name_;
};

/// One non-negative integer per line. Blank lines are not allowed.
inline TraceSchedule parse_trace(std::istream& in, const std::string& name = "<stream>") {
  std::vector<Millis> ms;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool digits = !line.empty() && std::all_of(line.begin(), line.end(), [](char c) { return c >= '0' && c <= '9'; });
    long long v = 0;
    try {
      if (!digits) throw std::invalid_argument("digits");
      v = std::stoll(line);
    } catch (const std::exception&) {
      throw TraceError(name + ":" + std::to_string(lineno) + ": not a non-negative integer: '" + line + "'");
    }
    if (!ms.empty() && v < ms.back())
      throw TraceError(name + ":" + std::to_string(lineno) + ": timestamp " + std::to_string(v) + " decreases");
    ms.push_back(v);
  }
  if (ms.empty()) throw TraceError("trace " + name + " is empty");
  return TraceSchedule(std::move(ms), name);
}

inline TraceSchedule parse_trace(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw TraceError("cannot open trace " + path.string());
  return parse_trace(f, path.string());
}

inline void write_trace(const TraceSchedule& s, std::ostream& out) {
  for (Millis t : s.opportunities()) out << t << '\n';
}

inline void write_trace(const TraceSchedule& s, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw TraceError("cannot write trace " + path.string());
  write_trace(s, f);
}

// Synthetic schedules in the same format.

/// `per_ms` opportunities in every millisecond.
inline TraceSchedule constant_rate_trace(Millis duration_ms, int per_ms) {
  if (duration_ms < 1 || per_ms < 1) throw std::invalid_argument("constant_rate_trace: bad parameters");
  std::vector<Millis> ms;
  ms.reserve(static_cast<std::size_t>(duration_ms * per_ms));
  for (Millis t = 1; t <= duration_ms; ++t)
    for (int k = 0; k < per_ms; ++k) ms.push_back(t);
  return TraceSchedule(std::move(ms), "constant_" + std::to_string(per_ms) + "_per_ms");
}

/// One opportunity every `every_ms` milliseconds.
inline TraceSchedule periodic_trace(Millis duration_ms, Millis every_ms) {
  if (duration_ms < every_ms || every_ms < 1) throw std::invalid_argument("periodic_trace: bad parameters");
  std::vector<Millis> ms;
  for (Millis t = every_ms; t <= duration_ms; t += every_ms) ms.push_back(t);
  return TraceSchedule(std::move(ms), "periodic_" + std::to_string(every_ms) + "ms");
}

/// Cellular-like schedule: opportunities arrive as a Poisson process whose
/// rate follows a log-normal random walk updated every 100 ms. The rate is
/// clamped to [mean/8, 8 mean] opportunities per second. The final millisecond
/// always holds an opportunity so the period equals the duration.
inline TraceSchedule fading_trace(Millis duration_ms, double mean_per_second, double volatility, std::uint64_t seed,
                                  std::string name = "fading") {
  if (duration_ms < 1 || !(mean_per_second > 0.0) || volatility < 0.0)
    throw std::invalid_argument("fading_trace: bad parameters");
  Rng rng(seed);
  std::vector<Millis> ms;
  double log_rate = 0.0;
  for (Millis t = 1; t <= duration_ms; ++t) {
    if (t % 100 == 1) log_rate = std::clamp(0.9 * log_rate + rng.normal(volatility), -std::log(8.0), std::log(8.0));
    const double lambda = mean_per_second * std::exp(log_rate) / 1000.0;
    std::poisson_distribution<int> count(lambda);
    for (int k = count(rng.engine()); k > 0; --k) ms.push_back(t);
  }
  if (ms.empty() || ms.back() != duration_ms) ms.push_back(duration_ms);
  return TraceSchedule(std::move(ms), std::move(name));
}

struct FadingProfile {
  double mean_per_second = 0.0;
  double volatility = 0.0;
};

inline constexpr FadingProfile kHighCapacity{200.0, 0.3};
// Always-query probes see a median RTT above 0.2 s on typical draws.
inline constexpr FadingProfile kLowCapacity{12.0, 0.5};

/// `count` schedules named <prefix>_<k>, trace k seeded by derive_seed(seed, k).
inline std::vector<TraceSchedule> fading_pool(const FadingProfile& profile, int count, Millis duration_ms,
                                              std::uint64_t seed, const std::string& prefix) {
  std::vector<TraceSchedule> out;
  for (int k = 0; k < count; ++k)
    out.push_back(fading_trace(duration_ms, profile.mean_per_second, profile.volatility,
                               derive_seed(seed, static_cast<std::uint64_t>(k)), prefix + "_" + std::to_string(k)));
  return out;
}

}  // namespace aoiq::trace
