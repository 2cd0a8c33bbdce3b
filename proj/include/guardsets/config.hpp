#pragma once

// Flat "key = value" run configuration. '#' starts a comment.

#include <map>
#include <string>
#include <string_view>

#include "guardsets/core.hpp"
#include "guardsets/ingest.hpp"
#include "guardsets/simkit.hpp"
#include "guardsets/synth.hpp"

namespace guardsets {

struct RunConfig {
  SimulationConfig sim;
  WorldConfig world;
  TraceConfig trace;
};

namespace detail {

template <typename T>
void set_int(std::string_view v, T& out, std::size_t line_no) {
  if (!parse_int(v, out)) throw ParseError(line_no, "expected an integer, got '" + std::string(v) + "'");
}

inline void set_num(std::string_view v, double& out, std::size_t line_no) {
  if (!parse_double(v, out)) throw ParseError(line_no, "expected a number, got '" + std::string(v) + "'");
}

inline bool parse_bool(std::string_view v, std::size_t line_no) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError(line_no, "expected a boolean, got '" + std::string(v) + "'");
}

}  // namespace detail

// Applies one key to cfg. Unknown keys are an error.
inline void apply_config_key(RunConfig& cfg, std::string_view key, std::string_view v, std::size_t line_no = 0) {
  using namespace detail;
  auto& s = cfg.sim;
  auto& w = cfg.world;
  auto& t = cfg.trace;
  try {
    if (key == "design") s.design = parse_design(v);
    else if (key == "tau_up") set_num(v, s.thresholds.tau_up, line_no);
    else if (key == "tau_down") set_num(v, s.thresholds.tau_down, line_no);
    else if (key == "n_supersets") set_int(v, s.thresholds.n_supersets, line_no);
    else if (key == "exact_packing_limit") set_int(v, s.thresholds.exact_packing_limit, line_no);
    else if (key == "clients") set_int(v, s.clients, line_no);
    else if (key == "seed") set_int(v, s.seed, line_no);
    else if (key == "strategy") s.adversary.strategy = parse_strategy(v);
    else if (key == "fraction") set_num(v, s.adversary.bandwidth_fraction, line_no);
    else if (key == "epsilon_mbps") set_num(v, s.adversary.epsilon_mbps, line_no);
    else if (key == "min_guard_mbps") set_num(v, s.adversary.min_guard_mbps, line_no);
    else if (key == "reentry_cooldown_days") set_int(v, s.adversary.reentry_cooldown_days, line_no);
    else if (key == "foresight") {
      if (v == "perfect") s.adversary.foresight = Foresight::perfect;
      else if (v == "forecast") s.adversary.foresight = Foresight::forecast;
      else throw ParseError(line_no, "foresight must be perfect or forecast");
    } else if (key == "guard_pick_policy") {
      if (v == "weighted") s.guard_pick_policy = PickPolicy::weighted;
      else if (v == "uniform") s.guard_pick_policy = PickPolicy::uniform;
      else throw ParseError(line_no, "guard_pick_policy must be weighted or uniform");
    } else if (key == "compromise_accounting") {
      if (v == "latched") s.latched = true;
      else if (v == "instantaneous") s.latched = false;
      else throw ParseError(line_no, "compromise_accounting must be latched or instantaneous");
    } else if (key == "eligibility") {
      if (v == "synthetic") s.eligibility = EligibilityMode::synthetic;
      else if (v == "consensus") s.eligibility = EligibilityMode::consensus;
      else throw ParseError(line_no, "eligibility must be synthetic or consensus");
    } else if (key == "daily_anonymity") s.daily_anonymity = parse_bool(v, line_no);
    else if (key == "world.tier1") set_int(v, w.tier1, line_no);
    else if (key == "world.tier2") set_int(v, w.tier2, line_no);
    else if (key == "world.tier3") set_int(v, w.tier3, line_no);
    else if (key == "world.stubs") set_int(v, w.stubs, line_no);
    else if (key == "world.multihome_prob") set_num(v, w.multihome_prob, line_no);
    else if (key == "world.hosting_ases") set_int(v, w.hosting_ases, line_no);
    else if (key == "world.hosting_zipf") set_num(v, w.hosting_zipf, line_no);
    else if (key == "trace.guards") set_int(v, t.guards, line_no);
    else if (key == "trace.days") set_int(v, t.days, line_no);
    else if (key == "trace.bw_median") set_num(v, t.bw_median, line_no);
    else if (key == "trace.bw_sigma") set_num(v, t.bw_sigma, line_no);
    else if (key == "trace.bw_floor") set_num(v, t.bw_floor, line_no);
    else if (key == "trace.leave_prob") set_num(v, t.leave_prob, line_no);
    else if (key == "trace.outage_prob") set_num(v, t.outage_prob, line_no);
    else if (key == "trace.noise_sigma") set_num(v, t.noise_sigma, line_no);
    else if (key == "trace.start_date") t.start_date = std::string(v);
    else throw ParseError(line_no, "unknown key '" + std::string(key) + "'");
  } catch (const std::invalid_argument& e) {
    throw ParseError(line_no, e.what());
  }
}

inline RunConfig parse_run_config(std::string_view text, RunConfig cfg = {}) {
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    line = detail::trim(line);
    if (line.empty()) return;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    apply_config_key(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), line_no);
  });
  cfg.sim.thresholds.validate();
  return cfg;
}

}  // namespace guardsets
