#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"

#include "aoiq/estimator/pretrain.hpp"
#include "aoiq/sac/trainer.hpp"

namespace aoiq::sac {

/// Everything needed to reproduce a trained model set: one pre-trained
/// estimator shared as the warm start of the three range models and the
/// full-range model.
struct BundleConfig {
  estimator::PretrainConfig pretrain{};
  int episodes = 2000;
  int episode_length = 2000;
  int hidden_width = 64;
  int batch_size = 128;
  std::uint64_t seed = 1;
  double wall_clock_limit_s = 0.0;  // per range model; 0 disables
};

/// Desk-scale set: width 64, 2000 episodes of 2000 slots per model, each
/// model capped at 3500 s of wall-clock.
inline BundleConfig desk_bundle_config() {
  BundleConfig b;
  b.wall_clock_limit_s = 3500.0;
  return b;
}

inline const std::vector<RangeId>& bundle_ranges() {
  static const std::vector<RangeId> r{RangeId::low, RangeId::mid, RangeId::high, RangeId::one};
  return r;
}

inline TrainConfig bundle_train_config(const BundleConfig& b, RangeId r) {
  TrainConfig c = train_config_for(r);
  c.episodes = b.episodes;
  c.episode_length = b.episode_length;
  c.hyper.hidden_width = b.hidden_width;
  c.hyper.batch_size = b.batch_size;
  c.seed = derive_seed(b.seed, static_cast<std::uint64_t>(r) + 1);
  c.wall_clock_limit_s = b.wall_clock_limit_s;
  return c;
}

// Bumped whenever training code changes what a given config produces.
inline constexpr int kBundleFormat = 3;

inline std::string bundle_description(const BundleConfig& b) {
  std::ostringstream s;
  s << "format=" << kBundleFormat << " pretrain_episodes=" << b.pretrain.episodes
    << " pretrain_length=" << b.pretrain.episode_length << " pretrain_seed=" << b.pretrain.seed
    << " episodes=" << b.episodes << " length=" << b.episode_length << " width=" << b.hidden_width
    << " batch=" << b.batch_size << " seed=" << b.seed << " limit=" << format_double(b.wall_clock_limit_s);
  return s.str();
}

/// 64-bit FNV-1a of the canonical description, as 16 hex digits.
inline std::string bundle_key(const BundleConfig& b) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bundle_description(b)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Bundle {
  std::map<RangeId, policy::QNetModel> models;
  std::map<std::string, double> stage_seconds;  // "pretrain" and each range name
  std::map<std::string, int> episodes_run;
  double total_seconds = 0.0;
  std::vector<std::string> warnings;

  const policy::QNetModel& at(RangeId r) const { return models.at(r); }
  std::vector<policy::QNetModel> ensemble() const {
    return {models.at(RangeId::low), models.at(RangeId::mid), models.at(RangeId::high)};
  }
};

inline std::filesystem::path bundle_manifest_path(const std::filesystem::path& dir) { return dir / "bundle.json"; }

/// Pre-trains the estimator, then trains every range model from it. Each
/// stage writes its checkpoint into `dir`; the manifest is written last so a
/// partial run is never mistaken for a complete one.
inline Bundle train_bundle(const BundleConfig& b, const std::filesystem::path& dir,
                           std::function<void(const std::string&)> progress = nullptr) {
  using Clock = std::chrono::steady_clock;
  std::filesystem::create_directories(dir);
  auto say = [&](const std::string& m) {
    if (progress) progress(m);
  };
  Bundle out;
  auto t = Clock::now();
  auto lap = [&] {
    const auto now = Clock::now();
    const double s = std::chrono::duration<double>(now - t).count();
    t = now;
    return s;
  };

  auto est = std::make_shared<estimator::EstimatorModel>();
  estimator::pretrain(est, b.pretrain);
  est->save(dir / "estimator_pretrained.ckpt");
  out.stage_seconds["pretrain"] = lap();
  say("pretrain done in " + format_double(out.stage_seconds["pretrain"]) + " s");

  for (RangeId r : bundle_ranges()) {
    TrainConfig c = bundle_train_config(b, r);
    c.run_dir = dir;
    TrainResult res = train_qnet(c, est);
    if (res.budget_exhausted) out.warnings.push_back(res.warning);
    out.episodes_run[to_string(r)] = res.episodes_run;
    out.models.emplace(r, std::move(res.model));
    out.stage_seconds[to_string(r)] = lap();
    const EpisodeLog& last = res.log.back();
    say(to_string(r) + " done in " + format_double(out.stage_seconds[to_string(r)]) + " s, alpha " +
        format_double(last.alpha) + ", entropy " + format_double(last.entropy));
  }
  for (const auto& [k, v] : out.stage_seconds) out.total_seconds += v;

  nlohmann::json m;
  m["key"] = bundle_key(b);
  m["description"] = bundle_description(b);
  m["stage_seconds"] = out.stage_seconds;
  m["episodes_run"] = out.episodes_run;
  m["total_seconds"] = out.total_seconds;
  m["warnings"] = out.warnings;
  std::ofstream f(bundle_manifest_path(dir));
  f << m.dump(2) << '\n';
  return out;
}

/// Loads a complete bundle; throws if the manifest is missing or was produced
/// by a different config.
inline Bundle load_bundle(const BundleConfig& b, const std::filesystem::path& dir) {
  std::ifstream f(bundle_manifest_path(dir));
  if (!f) throw std::runtime_error("no bundle manifest in " + dir.string());
  const nlohmann::json m = nlohmann::json::parse(f);
  if (m.at("key").get<std::string>() != bundle_key(b))
    throw std::runtime_error("bundle in " + dir.string() + " was trained with a different config");
  Bundle out;
  out.stage_seconds = m.at("stage_seconds").get<std::map<std::string, double>>();
  out.episodes_run = m.at("episodes_run").get<std::map<std::string, int>>();
  out.total_seconds = m.at("total_seconds").get<double>();
  out.warnings = m.at("warnings").get<std::vector<std::string>>();
  for (RangeId r : bundle_ranges())
    out.models.emplace(r, policy::QNetModel::load(dir / ("qnet_" + to_string(r) + ".ckpt")));
  return out;
}

/// Loads the bundle for `b` from `cache_root/<key>`, training it first if absent.
inline Bundle load_or_train_bundle(const BundleConfig& b, const std::filesystem::path& cache_root,
                                   std::function<void(const std::string&)> progress = nullptr) {
  const auto dir = cache_root / bundle_key(b);
  if (std::filesystem::exists(bundle_manifest_path(dir))) return load_bundle(b, dir);
  return train_bundle(b, dir, std::move(progress));
}

}  // namespace aoiq::sac
