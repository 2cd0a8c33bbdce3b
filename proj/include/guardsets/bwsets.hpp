#pragma once

// Bandwidth-quanta guard sets: guards are cut into quanta, sets are filled
// head-first from the sorted quanta, and damaged sets are repaired from a
// window of leftover quanta.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "guardsets/core.hpp"

namespace guardsets {

struct GuardBandwidth {
  std::string fingerprint;
  double bandwidth_mbps{0.0};
};

struct Quantum {
  std::string guard;
  double bandwidth_mbps{0.0};

  bool operator==(const Quantum&) const = default;
};

struct BwSet {
  GuardSetId id{0};
  std::vector<Quantum> quanta;
  double bandwidth_mbps{0.0};

  double max_quantum() const {
    double m = 0;
    for (const auto& q : quanta) m = std::max(m, q.bandwidth_mbps);
    return m;
  }

  bool has_guard(std::string_view fp) const {
    return std::any_of(quanta.begin(), quanta.end(), [&](const Quantum& q) { return q.guard == fp; });
  }

  std::vector<std::string> guards() const {
    std::vector<std::string> out;
    for (const auto& q : quanta)
      if (std::find(out.begin(), out.end(), q.guard) == out.end()) out.push_back(q.guard);
    return out;
  }
};

struct BwSetState {
  std::vector<BwSet> sets;
  std::vector<Quantum> leftover;
  // quantum count of every guard that has quanta in a set, fixed on entry
  std::map<std::string, std::size_t> quota;
  std::uint64_t serial{0};

  const BwSet* find(GuardSetId id) const {
    for (const auto& s : sets)
      if (s.id == id) return &s;
    return nullptr;
  }

  double total_set_bandwidth() const {
    double t = 0;
    for (const auto& s : sets) t += s.bandwidth_mbps;
    return t;
  }
};

inline std::size_t quantum_count(double bandwidth, double quantum_threshold) {
  if (bandwidth < 2 * quantum_threshold) return 1;
  return static_cast<std::size_t>(std::floor(bandwidth / quantum_threshold));
}

// Descending bandwidth, ties by ascending fingerprint.
inline void sort_quanta(std::vector<Quantum>& q) {
  std::sort(q.begin(), q.end(), [](const Quantum& a, const Quantum& b) {
    if (a.bandwidth_mbps != b.bandwidth_mbps) return a.bandwidth_mbps > b.bandwidth_mbps;
    return a.guard < b.guard;
  });
}

inline std::vector<Quantum> quantize(std::span<const GuardBandwidth> guards, double quantum_threshold = 40.0) {
  std::vector<Quantum> out;
  for (const auto& g : guards) {
    if (g.bandwidth_mbps < 0) throw std::invalid_argument("negative bandwidth for " + g.fingerprint);
    if (g.bandwidth_mbps == 0) continue;
    auto n = quantum_count(g.bandwidth_mbps, quantum_threshold);
    for (std::size_t i = 0; i < n; ++i) out.push_back({g.fingerprint, g.bandwidth_mbps / static_cast<double>(n)});
  }
  sort_quanta(out);
  return out;
}

namespace detail {

inline GuardSetId bw_set_id(std::uint64_t serial, std::span<const Quantum> quanta) {
  StableHasher h;
  h.u64(static_cast<std::uint64_t>(Level::bw_set)).u64(serial);
  for (const auto& q : quanta) h.bytes(q.guard);
  return to_guard_set_id(h.digest());
}

}  // namespace detail

// Head-first filling of already sorted quanta into state. Sets close once
// they reach tau_up; a trailing partial set returns to the leftover.
inline std::vector<GuardSetId> append_bw_sets(BwSetState& state, std::vector<Quantum> quanta, double tau_up) {
  std::vector<GuardSetId> created;
  std::vector<Quantum> cur;
  double bw = 0;
  std::unordered_map<std::string, std::size_t> per_guard;
  for (const auto& q : quanta) per_guard[q.guard]++;
  for (auto& q : quanta) {
    bw += q.bandwidth_mbps;
    cur.push_back(std::move(q));
    if (bw >= tau_up) {
      BwSet s;
      s.id = detail::bw_set_id(state.serial++, cur);
      s.bandwidth_mbps = bw;
      // a guard's quanta all sit in this pool until its first commit
      for (const auto& c : cur)
        if (!state.quota.count(c.guard)) state.quota[c.guard] = per_guard[c.guard];
      s.quanta = std::move(cur);
      created.push_back(s.id);
      state.sets.push_back(std::move(s));
      cur.clear();
      bw = 0;
    }
  }
  for (auto& q : cur) state.leftover.push_back(std::move(q));
  sort_quanta(state.leftover);
  return created;
}

inline BwSetState build_bw_sets(std::vector<Quantum> quanta, double tau_up = 40.0) {
  BwSetState state;
  sort_quanta(quanta);
  append_bw_sets(state, std::move(quanta), tau_up);
  return state;
}

// Leftover quanta within [M/2, M] where M is the set's largest quantum,
// descending.
inline std::vector<Quantum> candidate_list(const BwSet& set, std::span<const Quantum> leftover) {
  if (set.quanta.empty()) throw std::invalid_argument("cannot repair an empty set");
  double m = set.max_quantum();
  std::vector<Quantum> out;
  for (const auto& q : leftover)
    if (q.bandwidth_mbps >= 0.5 * m && q.bandwidth_mbps <= m) out.push_back(q);
  sort_quanta(out);
  return out;
}

// Applies today's guard bandwidths: departed guards' quanta vanish, guards in
// sets keep their quantum count with today's size, and the leftover is
// re-quantized. Sets that lose every quantum are dropped.
inline std::size_t refresh_bw_sets(BwSetState& state, std::span<const GuardBandwidth> guards, double tau_up) {
  std::unordered_map<std::string, double> bw;
  for (const auto& g : guards)
    if (g.bandwidth_mbps > 0) bw[g.fingerprint] = g.bandwidth_mbps;

  std::unordered_map<std::string, std::size_t> committed;
  for (auto& s : state.sets) {
    std::erase_if(s.quanta, [&](const Quantum& q) { return !bw.count(q.guard); });
    s.bandwidth_mbps = 0;
    for (auto& q : s.quanta) {
      q.bandwidth_mbps = bw[q.guard] / static_cast<double>(state.quota.at(q.guard));
      s.bandwidth_mbps += q.bandwidth_mbps;
      committed[q.guard]++;
    }
  }
  auto dead = static_cast<std::size_t>(std::erase_if(state.sets, [](const BwSet& s) { return s.quanta.empty(); }));
  std::erase_if(state.quota, [&](const auto& kv) { return !committed.count(kv.first); });

  state.leftover.clear();
  for (const auto& g : guards) {
    if (g.bandwidth_mbps <= 0) continue;
    auto it = state.quota.find(g.fingerprint);
    if (it == state.quota.end()) {
      auto n = quantum_count(g.bandwidth_mbps, tau_up);
      for (std::size_t i = 0; i < n; ++i)
        state.leftover.push_back({g.fingerprint, g.bandwidth_mbps / static_cast<double>(n)});
    } else {
      auto used = committed[g.fingerprint];
      for (std::size_t i = used; i < it->second; ++i)
        state.leftover.push_back({g.fingerprint, g.bandwidth_mbps / static_cast<double>(it->second)});
    }
  }
  sort_quanta(state.leftover);
  return dead;
}

struct BwRepairLog {
  std::size_t repaired{0};
  std::size_t created{0};
  std::size_t damaged{0};
  std::size_t died{0};
  std::vector<GuardSetId> repaired_ids;
  std::vector<GuardSetId> created_ids;
};

// Index order in which damaged sets are repaired: ascending bandwidth, then id.
inline std::vector<std::size_t> bw_repair_order(const BwSetState& state, double tau_down) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < state.sets.size(); ++i)
    if (state.sets[i].bandwidth_mbps < tau_down && !state.sets[i].quanta.empty()) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = state.sets[a];
    const auto& y = state.sets[b];
    if (x.bandwidth_mbps != y.bandwidth_mbps) return x.bandwidth_mbps < y.bandwidth_mbps;
    return x.id < y.id;
  });
  return order;
}

// Repairs one damaged set from its candidate window; returns quanta taken.
inline std::vector<Quantum> repair_one_bw_set(BwSetState& state, std::size_t idx, double tau_up) {
  auto& set = state.sets[idx];
  auto cands = candidate_list(set, state.leftover);
  std::vector<Quantum> taken;
  for (const auto& q : cands) {
    if (set.bandwidth_mbps >= tau_up) break;
    set.quanta.push_back(q);
    set.bandwidth_mbps += q.bandwidth_mbps;
    taken.push_back(q);
    auto it = std::find(state.leftover.begin(), state.leftover.end(), q);
    state.leftover.erase(it);
  }
  return taken;
}

// Repair half of the daily update, after refresh_bw_sets.
// The optional hooks run before each damaged set takes candidates and
// before the leftover is cut into new sets.
inline BwRepairLog repair_step(BwSetState& state, const Thresholds& thr,
                               const std::unordered_map<std::string, double>& guard_bandwidth,
                               const std::function<void(BwSetState&, std::size_t)>& before_set = {},
                               const std::function<void(BwSetState&)>& before_build = {}) {
  BwRepairLog log;
  auto order = bw_repair_order(state, thr.tau_down);
  log.damaged = order.size();
  for (auto idx : order) {
    if (before_set) before_set(state, idx);
    auto taken = repair_one_bw_set(state, idx, thr.tau_up);
    for (const auto& q : taken) {
      if (!state.quota.count(q.guard)) {
        auto it = guard_bandwidth.find(q.guard);
        double gb = it == guard_bandwidth.end() ? q.bandwidth_mbps : it->second;
        state.quota[q.guard] = quantum_count(gb, thr.tau_up);
      }
    }
    if (!taken.empty()) {
      ++log.repaired;
      log.repaired_ids.push_back(state.sets[idx].id);
    }
  }
  if (before_build) before_build(state);
  double left = 0;
  for (const auto& q : state.leftover) left += q.bandwidth_mbps;
  if (left >= thr.tau_up) {
    auto pool = std::move(state.leftover);
    state.leftover.clear();
    log.created_ids = append_bw_sets(state, std::move(pool), thr.tau_up);
    log.created = log.created_ids.size();
  }
  return log;
}

inline BwRepairLog repair_bw_sets(BwSetState& state, std::span<const GuardBandwidth> guards, const Thresholds& thr) {
  auto died = refresh_bw_sets(state, guards, thr.tau_up);
  std::unordered_map<std::string, double> gb;
  for (const auto& g : guards) gb[g.fingerprint] = g.bandwidth_mbps;
  auto log = repair_step(state, thr, gb);
  log.died = died;
  return log;
}

// Initial state for a day's guards.
inline BwSetState initial_bw_sets(std::span<const GuardBandwidth> guards, const Thresholds& thr) {
  return build_bw_sets(quantize(guards, thr.tau_up), thr.tau_up);
}

}  // namespace guardsets
