#pragma once

// JSON dumps of design state and CSV exports of runs.

#include <span>
#include <sstream>
#include <string>

#include <json.hpp>

#include "guardsets/adversary.hpp"
#include "guardsets/assignment.hpp"
#include "guardsets/bwsets.hpp"
#include "guardsets/hierarchy.hpp"
#include "guardsets/ingest.hpp"
#include "guardsets/simkit.hpp"

namespace guardsets {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = "0.1.0";

inline json to_json(const MergeEvent& e) {
  json r = json::array();
  for (auto a : e.replaced) r.push_back(a.value);
  return {{"popped", e.popped.value}, {"provider", e.provider.value}, {"replaced", r}};
}

inline json hierarchy_to_json(const Hierarchy& h, const GuardDirectory* dir = nullptr,
                              const std::vector<MergeEvent>* merges = nullptr) {
  json supersets = json::array();
  for (const auto& ss : h.supersets) {
    json sets = json::array();
    for (const auto& s : ss.sets) {
      json subsets = json::array();
      for (const auto& sub : s.subsets) {
        json guards = json::array();
        for (const auto& g : sub.guards) {
          if (dir) {
            const auto* r = dir->find(g);
            guards.push_back({{"fingerprint", g},
                              {"asn", r ? json(r->asn.value) : json()},
                              {"bandwidth_mbps", r ? r->bandwidth_mbps : 0.0}});
          } else {
            guards.push_back(g);
          }
        }
        subsets.push_back({{"id", std::to_string(sub.id)}, {"bandwidth_mbps", sub.bandwidth_mbps}, {"guards", guards}});
      }
      json ases = json::array();
      for (auto a : s.guard_ases) ases.push_back(a.value);
      sets.push_back({{"id", std::to_string(s.id)},
                      {"root", s.root ? json(s.root->value) : json()},
                      {"guard_ases", ases},
                      {"bandwidth_mbps", s.bandwidth_mbps},
                      {"subsets", subsets}});
    }
    json ases = json::array();
    for (auto a : ss.guard_ases) ases.push_back(a.value);
    supersets.push_back({{"id", std::to_string(ss.id)},
                         {"root", ss.root.value},
                         {"guard_ases", ases},
                         {"bandwidth_mbps", ss.bandwidth_mbps},
                         {"sets", sets}});
  }
  json out = {{"supersets", supersets}};
  if (merges) {
    json m = json::array();
    for (const auto& e : *merges) m.push_back(to_json(e));
    out["merges"] = m;
  }
  return out;
}

inline json bw_state_to_json(const BwSetState& st) {
  auto quanta = [](const std::vector<Quantum>& qs) {
    json a = json::array();
    for (const auto& q : qs) a.push_back({{"guard", q.guard}, {"bandwidth_mbps", q.bandwidth_mbps}});
    return a;
  };
  json sets = json::array();
  for (const auto& s : st.sets)
    sets.push_back({{"id", std::to_string(s.id)}, {"bandwidth_mbps", s.bandwidth_mbps}, {"quanta", quanta(s.quanta)}});
  return {{"sets", sets}, {"leftover", quanta(st.leftover)}};
}

inline json config_to_json(const SimulationConfig& c) {
  return {{"design", to_string(c.design)},
          {"tau_up", c.thresholds.tau_up},
          {"tau_down", c.thresholds.tau_down},
          {"n_supersets", c.thresholds.n_supersets},
          {"clients", c.clients},
          {"seed", c.seed},
          {"strategy", to_string(c.adversary.strategy)},
          {"fraction", c.adversary.bandwidth_fraction},
          {"epsilon_mbps", c.adversary.epsilon_mbps},
          {"foresight", c.adversary.foresight == Foresight::perfect ? "perfect" : "forecast"},
          {"guard_pick_policy", c.guard_pick_policy == PickPolicy::weighted ? "weighted" : "uniform"},
          {"compromise_accounting", c.latched ? "latched" : "instantaneous"}};
}

inline json manifest_json(const SimulationConfig& c, const json& extra = json::object()) {
  json m = {{"tool", "guardsets"}, {"version", std::string(kVersion)}, {"seed", c.seed}, {"config", config_to_json(c)}};
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  return m;
}

namespace detail {

inline std::string num(double v) { return format_double(v); }

}  // namespace detail

// Long format: day,family,metric,value. The first line names the manifest.
inline std::string metrics_csv(const MetricsSeries& m, std::string_view manifest_ref = "manifest.json") {
  std::ostringstream o;
  o << "# manifest=" << manifest_ref << " seed=" << m.config.seed << '\n';
  o << "day,family,metric,value\n";
  for (const auto& d : m.days) {
    auto row = [&](std::string_view fam, std::string_view metric, const std::string& v) {
      o << d.day << ',' << fam << ',' << metric << ',' << v << '\n';
    };
    row("counts", "guards", std::to_string(d.guards));
    row("counts", "supersets", std::to_string(d.supersets));
    row("counts", "sets", std::to_string(d.sets));
    row("counts", "subsets", std::to_string(d.subsets));
    row("counts", "guard_sets", std::to_string(d.guard_sets));
    row("repairs", "repaired", std::to_string(d.repairs));
    row("compromise", "sets_compromised", std::to_string(d.compromised_sets));
    row("compromise", "set_fraction", detail::num(d.compromised_set_fraction));
    row("compromise", "client_fraction", detail::num(d.compromised_client_fraction));
    row("compromise", "client_fraction_now", detail::num(d.compromised_client_fraction_now));
    row("anonymity", "q1", detail::num(d.anonymity.q1));
    row("anonymity", "median", detail::num(d.anonymity.median));
    row("anonymity", "q3", detail::num(d.anonymity.q3));
    row("set_bandwidth", "q1", detail::num(d.set_bandwidth.q1));
    row("set_bandwidth", "median", detail::num(d.set_bandwidth.median));
    row("set_bandwidth", "q3", detail::num(d.set_bandwidth.q3));
    row("adversary", "bandwidth", detail::num(d.adversary_bandwidth));
    row("adversary", "bandwidth_fraction", detail::num(d.adversary_bandwidth_fraction));
  }
  return o.str();
}

inline std::string attack_trace_csv(const MetricsSeries& m, std::string_view manifest_ref = "manifest.json") {
  std::ostringstream o;
  o << "# manifest=" << manifest_ref << " seed=" << m.config.seed << '\n';
  o << "day,sets_compromised,clients_compromised_fraction,adversary_bandwidth,adversary_bandwidth_fraction\n";
  for (const auto& d : m.days)
    o << d.day << ',' << d.compromised_sets << ',' << detail::num(d.compromised_client_fraction) << ','
      << detail::num(d.adversary_bandwidth) << ',' << detail::num(d.adversary_bandwidth_fraction) << '\n';
  return o.str();
}

inline std::string clients_csv(std::span<const ClientState> clients, std::string_view manifest_ref = "manifest.json") {
  std::ostringstream o;
  o << "# manifest=" << manifest_ref << '\n';
  o << "client_id,design,superset_id,set_id,subset_id,bw_set_id,guard_fingerprint,compromise_day\n";
  auto id = [](GuardSetId v) { return v ? std::to_string(v) : std::string(); };
  for (const auto& c : clients)
    o << c.client_id << ',' << to_string(c.design) << ',' << id(c.superset_id) << ',' << id(c.set_id) << ','
      << id(c.subset_id) << ',' << id(c.bw_set_id) << ',' << c.guard_fingerprint << ','
      << (c.compromise_day ? std::to_string(*c.compromise_day) : std::string()) << '\n';
  return o.str();
}

}  // namespace guardsets
