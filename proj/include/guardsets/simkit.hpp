#pragma once

// Day-stepped simulation: guards -> design update -> adversary -> client
// recovery -> compromise scan -> metrics.

#include <algorithm>
#include <functional>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "guardsets/adversary.hpp"
#include "guardsets/assignment.hpp"
#include "guardsets/bwsets.hpp"
#include "guardsets/core.hpp"
#include "guardsets/hierarchy.hpp"
#include "guardsets/ingest.hpp"

namespace guardsets {

struct SimulationConfig {
  Design design{Design::as};
  Thresholds thresholds;
  AdversaryConfig adversary;
  std::size_t clients{100000};
  std::uint64_t seed{1};
  PickPolicy guard_pick_policy{PickPolicy::weighted};
  bool latched{true};
  EligibilityMode eligibility{EligibilityMode::synthetic};
  bool daily_anonymity{true};
};

struct Quartiles {
  double q1{0}, median{0}, q3{0};
};

struct DayMetrics {
  int day{0};
  std::size_t guards{0};
  std::size_t supersets{0};
  std::size_t sets{0};
  std::size_t subsets{0};
  std::size_t repairs{0};
  std::size_t guard_sets{0};  // units clients draw from: subsets, BW sets or guards
  std::size_t compromised_sets{0};
  double compromised_set_fraction{0};
  double compromised_client_fraction{0};      // latched
  double compromised_client_fraction_now{0};  // instantaneous
  Quartiles anonymity;
  Quartiles set_bandwidth;
  double adversary_bandwidth{0};
  double adversary_bandwidth_fraction{0};
};

struct MetricsSeries {
  SimulationConfig config;
  std::vector<DayMetrics> days;
  std::vector<std::size_t> final_anonymity_sets;
  std::vector<double> final_set_bandwidths;
  std::vector<ClientState> final_clients;

  const DayMetrics& at_day(int day) const {
    for (const auto& d : days)
      if (d.day == day) return d;
    throw NotFoundError("no metrics for day " + std::to_string(day));
  }

  double mean_repairs(int from_day = 2) const {
    double t = 0;
    std::size_t n = 0;
    for (const auto& d : days)
      if (d.day >= from_day) {
        t += static_cast<double>(d.repairs);
        ++n;
      }
    return n ? t / static_cast<double>(n) : 0.0;
  }
};

// What an observer sees at the end of each simulated day. Exactly one of
// hierarchy / bw_state is set for the set designs, neither for SINGLE.
struct DayView {
  int day{0};
  const Hierarchy* hierarchy{nullptr};
  const BwSetState* bw_state{nullptr};
  const std::unordered_set<std::string>* malicious{nullptr};
  const std::set<AsNumber>* adversary_ases{nullptr};
  const std::unordered_set<GuardSetId>* compromised_units{nullptr};
};

struct SimulationInputs {
  const std::vector<NetworkSnapshot>* trace{nullptr};
  const AsGraph* graph{nullptr};
  const PrefixMap* prefixes{nullptr};
  std::function<void(const DayView&)> observer{};
};

namespace detail {

template <typename T>
Quartiles quartiles(std::vector<T> v) {
  Quartiles q;
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    double pos = p * static_cast<double>(v.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = static_cast<std::size_t>(std::ceil(pos));
    double f = pos - static_cast<double>(lo);
    return static_cast<double>(v[lo]) * (1 - f) + static_cast<double>(v[hi]) * f;
  };
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  return q;
}

}  // namespace detail

// Clients per guard set (per guard under SINGLE), nonempty sets only,
// ascending.
inline std::vector<std::size_t> anonymity_sets(std::span<const ClientState> clients) {
  std::unordered_map<std::string, std::size_t> by_fp;
  std::unordered_map<GuardSetId, std::size_t> by_id;
  for (const auto& c : clients) {
    switch (c.design) {
      case Design::as: by_id[c.subset_id]++; break;
      case Design::bw: by_id[c.bw_set_id]++; break;
      case Design::single: by_fp[c.guard_fingerprint]++; break;
    }
  }
  std::vector<std::size_t> out;
  for (const auto& [k, n] : by_id) out.push_back(n);
  for (const auto& [k, n] : by_fp) out.push_back(n);
  std::sort(out.begin(), out.end());
  return out;
}

inline double median_of(std::vector<double> v) { return detail::median(std::move(v)); }

inline double median_anonymity_set(std::span<const ClientState> clients) {
  auto sizes = anonymity_sets(clients);
  std::vector<double> v(sizes.begin(), sizes.end());
  return median_of(v);
}

inline std::vector<double> set_bandwidth_distribution(const Hierarchy& h) {
  std::vector<double> out;
  for (const auto& ss : h.supersets)
    for (const auto& s : ss.sets)
      for (const auto& sub : s.subsets) out.push_back(sub.bandwidth_mbps);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<double> set_bandwidth_distribution(const BwSetState& st) {
  std::vector<double> out;
  for (const auto& s : st.sets) out.push_back(s.bandwidth_mbps);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::size_t> repairs_per_day(const MetricsSeries& m) {
  std::vector<std::size_t> out;
  for (const auto& d : m.days) out.push_back(d.repairs);
  return out;
}

namespace detail {

inline std::vector<GuardBandwidth> to_bandwidths(std::span<const LabeledGuard> guards) {
  std::vector<GuardBandwidth> out;
  out.reserve(guards.size());
  for (const auto& g : guards) out.push_back({g.fingerprint, g.bandwidth_mbps});
  return out;
}

inline bool passive(Strategy s) {
  return s == Strategy::low_resource || s == Strategy::centralized || s == Strategy::botnet;
}

inline bool tuning(Strategy s) { return s == Strategy::bw_tuning_high || s == Strategy::bw_tuning_low; }

}  // namespace detail

// Targeted runs treat every client as a target the attacker follows.
inline MetricsSeries run_simulation(const SimulationConfig& cfg, const SimulationInputs& in) {
  if (!in.trace || in.trace->empty()) throw std::invalid_argument("empty trace");
  if (cfg.clients == 0) throw std::invalid_argument("client_count must be at least 1");
  if (cfg.design == Design::as && !in.graph) throw std::invalid_argument("AS design needs an AS graph");
  if (cfg.design == Design::as && !in.prefixes) throw std::invalid_argument("AS design needs a prefix table");
  cfg.thresholds.validate();
  const auto& thr = cfg.thresholds;
  const auto strategy = cfg.adversary.strategy;

  MetricsSeries out;
  out.config = cfg;
  auto client_rng = make_rng(cfg.seed, {0xc11e47ULL});
  auto adv_rng = make_rng(cfg.seed, {0xad7ULL});

  std::vector<ClientState> clients(cfg.clients);
  for (std::size_t i = 0; i < clients.size(); ++i) {
    clients[i].client_id = static_cast<std::uint32_t>(i);
    clients[i].design = cfg.design;
  }

  Hierarchy hierarchy;
  BwSetState bw_state;
  std::vector<LabeledGuard> passive_guards;
  std::unordered_set<std::string> malicious;
  std::set<AsNumber> adversary_ases;
  BwTuningAdversary tuner(cfg.adversary);
  TargetedAsAdversary targeted_as(cfg.adversary, cfg.seed);
  const bool targeted = strategy == Strategy::targeted;
  bool first = true;

  for (const auto& snap : *in.trace) {
    const int day = snap.day;
    auto relays = eligible_guards(snap, {}, cfg.eligibility);
    std::vector<LabeledGuard> honest;
    if (in.prefixes) {
      honest = label_guards(relays, *in.prefixes);
    } else {
      for (const auto& r : relays) honest.push_back({r.fingerprint, r.address, std::nullopt, r.bandwidth_mbps});
    }
    double honest_total = 0;
    for (const auto& g : honest) honest_total += g.bandwidth_mbps;

    if (first && detail::passive(strategy)) {
      std::vector<double> bws;
      for (const auto& g : honest) bws.push_back(g.bandwidth_mbps);
      std::vector<MaliciousGuard> injected;
      if (strategy == Strategy::low_resource) {
        if (!in.prefixes) throw std::invalid_argument("low-resource injection needs a prefix table");
        injected.push_back(inject_low_resource(bws, *in.prefixes, adv_rng));
      } else {
        std::set<AsNumber> ases;
        for (const auto& g : honest)
          if (g.asn && (!in.graph || in.graph->contains(*g.asn))) ases.insert(*g.asn);
        std::vector<AsNumber> guard_ases(ases.begin(), ases.end());
        if (guard_ases.empty()) guard_ases.push_back(AsNumber{1});
        injected = strategy == Strategy::centralized
                       ? inject_centralized(bws, guard_ases, cfg.adversary.bandwidth_fraction, adv_rng, in.prefixes)
                       : inject_botnet(bws, guard_ases, cfg.adversary.bandwidth_fraction, adv_rng, in.prefixes);
      }
      for (const auto& m : injected) {
        passive_guards.push_back({m.fingerprint, m.address, m.asn, m.offered_bandwidth_mbps});
        malicious.insert(m.fingerprint);
        adversary_ases.insert(m.asn);
      }
    }

    std::vector<LabeledGuard> today = honest;
    today.insert(today.end(), passive_guards.begin(), passive_guards.end());

    DayMetrics dm;
    dm.day = day;
    double adversary_bw = 0;
    for (const auto& g : passive_guards) adversary_bw += g.bandwidth_mbps;

    std::vector<GuardBandwidth> single_guards;
    std::unordered_set<GuardSetId> compromised_units;

    switch (cfg.design) {
      case Design::as: {
        if (targeted && !first) {
          GuardDirectory honest_dir = GuardDirectory::from_labeled(honest, *in.graph);
          std::vector<GuardSetId> subs;
          for (const auto& c : clients)
            if (!c.compromised_ever) subs.push_back(c.subset_id);
          auto extra = targeted_as.plan(hierarchy, honest_dir, subs, thr);
          for (const auto& g : extra) adversary_bw += g.bandwidth_mbps;
          today.insert(today.end(), extra.begin(), extra.end());
        }
        auto dir = GuardDirectory::from_labeled(today, *in.graph);
        auto [next, log] = full_update(std::move(hierarchy), dir, *in.graph, thr, derive_seed(cfg.seed, {0xda7ULL, static_cast<std::uint64_t>(day)}));
        hierarchy = std::move(next);
        dm.guards = dir.size();
        dm.supersets = hierarchy.supersets.size();
        dm.sets = hierarchy.set_count();
        dm.subsets = hierarchy.subset_count();
        dm.guard_sets = dm.subsets;
        dm.repairs = log.subsets_repaired;

        AsAssigner assigner(hierarchy, thr);
        for (auto& c : clients) {
          if (first) {
            auto p = assigner.assign(client_rng);
            c.superset_id = p.superset_id;
            c.set_id = p.set_id;
            c.subset_id = p.subset_id;
          } else {
            recover_client(c, assigner, client_rng);
          }
        }
        if (targeted) {
          std::vector<GuardSetId> subs;
          for (const auto& c : clients) subs.push_back(c.subset_id);
          if (!first) targeted_as.settle(hierarchy, subs);
          malicious = targeted_as.malicious();
        }
        compromised_units = compromised_subsets(hierarchy, malicious);
        if (cfg.daily_anonymity || &snap == &in.trace->back())
          dm.set_bandwidth = detail::quartiles(set_bandwidth_distribution(hierarchy));
        break;
      }
      case Design::bw: {
        auto guards = detail::to_bandwidths(today);
        std::unordered_map<std::string, double> gb;
        for (const auto& g : guards) gb[g.fingerprint] = g.bandwidth_mbps;
        BwRepairLog log;
        if (first) {
          bw_state = initial_bw_sets(guards, thr);
        } else if (detail::tuning(strategy) || targeted) {
          if (targeted) {
            std::unordered_set<GuardSetId> focus;
            for (const auto& c : clients)
              if (!c.compromised_ever) focus.insert(c.bw_set_id);
            tuner.set_focus(focus);
          }
          auto adv = tuner.guards();
          guards.insert(guards.end(), adv.begin(), adv.end());
          refresh_bw_sets(bw_state, guards, thr.tau_up);
          log = bw_attack_step(bw_state, tuner, day, honest_total, thr, gb);
          malicious = tuner.malicious();
          adversary_bw += tuner.active_bandwidth();
        } else {
          log = repair_bw_sets(bw_state, guards, thr);
        }
        dm.guards = guards.size();
        dm.sets = bw_state.sets.size();
        dm.guard_sets = dm.sets;
        dm.repairs = log.repaired;

        BwAssigner assigner(bw_state, thr.tau_down);
        for (auto& c : clients) {
          if (first) c.bw_set_id = assigner.assign(client_rng);
          else recover_client(c, assigner, client_rng);
        }
        compromised_units = compromised_bw_sets(bw_state, malicious);
        if (cfg.daily_anonymity || &snap == &in.trace->back())
          dm.set_bandwidth = detail::quartiles(set_bandwidth_distribution(bw_state));
        break;
      }
      case Design::single: {
        single_guards = detail::to_bandwidths(today);
        dm.guards = single_guards.size();
        dm.guard_sets = dm.guards;
        SingleAssigner assigner(single_guards);
        for (auto& c : clients) {
          if (first) c.guard_fingerprint = assigner.assign(client_rng);
          else recover_client(c, assigner, client_rng);
        }
        std::vector<double> bws;
        for (const auto& g : single_guards) bws.push_back(g.bandwidth_mbps);
        dm.set_bandwidth = detail::quartiles(bws);
        break;
      }
    }

    if (cfg.design == Design::single) {
      for (const auto& g : single_guards) dm.compromised_sets += malicious.count(g.fingerprint);
    } else {
      dm.compromised_sets = compromised_units.size();
    }
    dm.compromised_set_fraction =
        dm.guard_sets ? static_cast<double>(dm.compromised_sets) / static_cast<double>(dm.guard_sets) : 0.0;

    auto scan = compromise_scan(clients, compromised_units, malicious, day);
    dm.compromised_client_fraction = static_cast<double>(scan.compromised_ever) / static_cast<double>(clients.size());
    dm.compromised_client_fraction_now =
        static_cast<double>(scan.compromised_now) / static_cast<double>(clients.size());
    if (!cfg.latched) dm.compromised_client_fraction = dm.compromised_client_fraction_now;
    if (cfg.daily_anonymity || &snap == &in.trace->back()) {
      auto sizes = anonymity_sets(clients);
      dm.anonymity = detail::quartiles(sizes);
    }
    dm.adversary_bandwidth = adversary_bw;
    dm.adversary_bandwidth_fraction = honest_total > 0 ? adversary_bw / honest_total : 0.0;
    out.days.push_back(dm);
    if (in.observer) {
      DayView view{day, nullptr, nullptr, &malicious, &adversary_ases, &compromised_units};
      if (cfg.design == Design::as) view.hierarchy = &hierarchy;
      if (cfg.design == Design::bw) view.bw_state = &bw_state;
      in.observer(view);
    }
    first = false;

    if (&snap == &in.trace->back()) {
      out.final_anonymity_sets = anonymity_sets(clients);
      if (cfg.design == Design::as) out.final_set_bandwidths = set_bandwidth_distribution(hierarchy);
      else if (cfg.design == Design::bw) out.final_set_bandwidths = set_bandwidth_distribution(bw_state);
      else
        for (const auto& g : single_guards) out.final_set_bandwidths.push_back(g.bandwidth_mbps);
      out.final_clients = clients;
    }
  }
  return out;
}

// Share of clients compromised at any point in the run.
inline double targets_compromised_fraction(const MetricsSeries& m) {
  if (m.final_clients.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& c : m.final_clients) n += c.compromised_ever;
  return static_cast<double>(n) / static_cast<double>(m.final_clients.size());
}

// Relative growth of the compromised-client fraction between two days.
// A zero start with a nonzero end counts as infinite growth.
inline double relative_growth(const MetricsSeries& m, int from_day, int to_day) {
  double a = m.at_day(from_day).compromised_client_fraction;
  double b = m.at_day(to_day).compromised_client_fraction;
  if (a == 0) return b == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return (b - a) / a;
}

}  // namespace guardsets
