#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "aoiq/sac/bundle.hpp"
#include "aoiq/sim/episode.hpp"
#include "aoiq/trace/experiment.hpp"

#ifndef AOIQ_REVISION
#define AOIQ_REVISION "unknown"
#endif

namespace aoiq::eval {

using nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kCodeVersion = AOIQ_REVISION;

namespace detail {
inline void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + what);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}
}  // namespace detail

// Source parameters: {"max_speed", "acceleration_std", "acceleration_bound"}.
inline sim::SourceParams source_params_from_json(const json& j) {
  detail::only_keys(j, {"max_speed", "acceleration_std", "acceleration_bound"}, "source");
  sim::SourceParams p;
  detail::read(j, "max_speed", p.max_speed);
  detail::read(j, "acceleration_std", p.acceleration_std);
  detail::read(j, "acceleration_bound", p.acceleration_bound);
  if (!(p.max_speed > 0.0 && p.acceleration_std >= 0.0 && p.acceleration_bound >= 0.0))
    throw ConfigError("source parameters must be non-negative with a positive max_speed");
  return p;
}

inline json to_json(const sim::SourceParams& p) {
  return {{"max_speed", p.max_speed}, {"acceleration_std", p.acceleration_std},
          {"acceleration_bound", p.acceleration_bound}};
}

/// Episode schema: {"q_range": [low, high], "episode_length", "gamma", "seed",
/// "warmup_slots", "source": {...}}. Missing keys keep their defaults.
inline sim::EpisodeConfig episode_config_from_json(const json& j) {
  detail::only_keys(j, {"q_range", "episode_length", "gamma", "seed", "warmup_slots", "source"}, "episode config");
  sim::EpisodeConfig c;
  if (j.contains("q_range")) {
    const auto r = j.at("q_range");
    if (!r.is_array() || r.size() != 2) throw ConfigError("q_range must be [low, high]");
    c.q_low = r[0].get<double>();
    c.q_high = r[1].get<double>();
  }
  detail::read(j, "episode_length", c.episode_length);
  detail::read(j, "gamma", c.gamma);
  detail::read(j, "seed", c.seed);
  detail::read(j, "warmup_slots", c.warmup_slots);
  if (j.contains("source")) c.source = source_params_from_json(j.at("source"));
  try {
    sim::validate(c);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline json to_json(const sim::EpisodeConfig& c) {
  return {{"q_range", {c.q_low, c.q_high}}, {"episode_length", c.episode_length}, {"gamma", c.gamma},
          {"seed", c.seed}, {"warmup_slots", c.warmup_slots}, {"source", to_json(c.source)}};
}

/// Trace experiment schema: {"duration_s", "decision_period_ms",
/// "measurement_bytes", "response_bytes", "base_delay_ms", "warmup_decisions",
/// "seed", "source": {...}}.
inline trace::TraceExperimentConfig trace_config_from_json(const json& j) {
  detail::only_keys(j,
                    {"duration_s", "decision_period_ms", "measurement_bytes", "response_bytes", "base_delay_ms",
                     "warmup_decisions", "seed", "source"},
                    "trace config");
  trace::TraceExperimentConfig c;
  detail::read(j, "duration_s", c.duration_s);
  detail::read(j, "decision_period_ms", c.decision_period_ms);
  detail::read(j, "measurement_bytes", c.measurement_bytes);
  detail::read(j, "response_bytes", c.response_bytes);
  detail::read(j, "base_delay_ms", c.base_delay_ms);
  detail::read(j, "warmup_decisions", c.warmup_decisions);
  detail::read(j, "seed", c.seed);
  if (j.contains("source")) c.source = source_params_from_json(j.at("source"));
  if (!(c.duration_s > 0.0) || c.decision_period_ms < 1 || c.measurement_bytes < 1 || c.response_bytes < 1 ||
      c.base_delay_ms < 0 || c.warmup_decisions < 0)
    throw ConfigError("trace config values out of range");
  return c;
}

inline json to_json(const trace::TraceExperimentConfig& c) {
  return {{"duration_s", c.duration_s},
          {"decision_period_ms", c.decision_period_ms},
          {"measurement_bytes", c.measurement_bytes},
          {"response_bytes", c.response_bytes},
          {"base_delay_ms", c.base_delay_ms},
          {"warmup_decisions", c.warmup_decisions},
          {"seed", c.seed},
          {"source", to_json(c.source)}};
}

inline json read_json_file(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw ConfigError("cannot open " + p.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

/// Run-directory manifest: the command, its full configuration and the code
/// revision.
inline void write_manifest(const std::filesystem::path& dir, const std::string& command, const json& config) {
  std::filesystem::create_directories(dir);
  json m{{"command", command}, {"config", config}, {"code_version", kCodeVersion}};
  std::ofstream f(dir / "manifest.json");
  f << m.dump(2) << '\n';
}

}  // namespace aoiq::eval
