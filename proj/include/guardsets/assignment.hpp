#pragma once

// Client placement: three-level weighted choice over the AS hierarchy, one
// weighted choice over bandwidth sets, or a single weighted guard; plus the
// recovery ladder run when a client's guard set is dismantled.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "guardsets/bwsets.hpp"
#include "guardsets/core.hpp"
#include "guardsets/hierarchy.hpp"

namespace guardsets {

enum class Design { as, bw, single };

inline std::string to_string(Design d) {
  switch (d) {
    case Design::as: return "as";
    case Design::bw: return "bw";
    case Design::single: return "single";
  }
  return "?";
}

inline Design parse_design(std::string_view s) {
  if (s == "as" || s == "AS") return Design::as;
  if (s == "bw" || s == "BW") return Design::bw;
  if (s == "single" || s == "SINGLE") return Design::single;
  throw std::invalid_argument("unknown design '" + std::string(s) + "'");
}

enum class PickPolicy { weighted, uniform };

struct ClientState {
  std::uint32_t client_id{0};
  Design design{Design::as};
  GuardSetId superset_id{0};
  GuardSetId set_id{0};
  GuardSetId subset_id{0};
  GuardSetId bw_set_id{0};
  std::string guard_fingerprint;
  bool compromised_ever{false};
  std::optional<int> compromise_day;
  bool compromised_now{false};

  bool operator==(const ClientState&) const = default;
};

template <typename Id>
struct WeightedChoice {
  std::vector<std::pair<Id, double>> items;
};

// Index of the first item whose running weight sum exceeds u * total.
inline std::size_t weighted_pick_index(std::span<const double> weights, double u) {
  double total = 0;
  for (double w : weights) {
    if (w < 0) throw std::invalid_argument("negative weight");
    total += w;
  }
  if (!(total > 0)) throw std::invalid_argument("weighted pick needs a positive total weight");
  double r = u * total;
  double run = 0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    run += weights[i];
    if (weights[i] > 0) last_positive = i;
    if (run > r) return i;
  }
  return last_positive;  // rounding left r at the very top
}

template <typename Id>
Id weighted_pick(const WeightedChoice<Id>& choice, double u) {
  std::vector<double> w;
  w.reserve(choice.items.size());
  for (const auto& it : choice.items) w.push_back(it.second);
  return choice.items[weighted_pick_index(w, u)].first;
}

namespace detail {

// Prefix sums for repeated draws; same selection rule as weighted_pick_index.
class Cumulative {
 public:
  Cumulative() = default;
  explicit Cumulative(std::span<const double> weights) {
    double run = 0;
    prefix_.reserve(weights.size());
    for (double w : weights) {
      run += w;
      prefix_.push_back(run);
    }
  }

  double total() const { return prefix_.empty() ? 0.0 : prefix_.back(); }
  bool drawable() const { return total() > 0; }

  std::size_t pick(double u) const {
    if (!drawable()) throw std::invalid_argument("weighted pick needs a positive total weight");
    double r = u * total();
    auto it = std::upper_bound(prefix_.begin(), prefix_.end(), r);
    if (it == prefix_.end()) --it;
    return static_cast<std::size_t>(it - prefix_.begin());
  }

 private:
  std::vector<double> prefix_;
};

}  // namespace detail

struct AsPick {
  GuardSetId superset_id{0};
  GuardSetId set_id{0};
  GuardSetId subset_id{0};
};

// Read-only draw index over one day's hierarchy. Supersets below tau_down are
// orphaned: kept in the hierarchy, never offered to clients.
class AsAssigner {
 public:
  AsAssigner(const Hierarchy& h, const Thresholds& thr) : h_(&h), tau_down_(thr.tau_down) {
    std::vector<double> ssw;
    for (std::size_t i = 0; i < h.supersets.size(); ++i) {
      const auto& ss = h.supersets[i];
      superset_at_[ss.id] = i;
      bool eligible = ss.bandwidth_mbps >= tau_down_;
      ssw.push_back(eligible ? ss.bandwidth_mbps : 0.0);
      std::vector<double> sw;
      std::vector<detail::Cumulative> sub_cums;
      for (std::size_t j = 0; j < ss.sets.size(); ++j) {
        const auto& set = ss.sets[j];
        set_at_[set.id] = {i, j};
        sw.push_back(set.bandwidth_mbps);
        std::vector<double> bw;
        for (std::size_t k = 0; k < set.subsets.size(); ++k) {
          subset_at_[set.subsets[k].id] = {i, j, k};
          bw.push_back(set.subsets[k].bandwidth_mbps);
        }
        sub_cums.emplace_back(bw);
      }
      set_cum_.emplace_back(sw);
      subset_cum_.push_back(std::move(sub_cums));
    }
    superset_cum_ = detail::Cumulative(ssw);
  }

  bool any_eligible() const { return superset_cum_.drawable(); }

  bool eligible(std::size_t superset_idx) const {
    const auto& ss = h_->supersets[superset_idx];
    return ss.bandwidth_mbps >= tau_down_ && set_cum_[superset_idx].drawable();
  }

  AsPick assign(Rng& rng) const {
    if (!any_eligible()) throw std::runtime_error("no eligible superset to assign");
    for (int attempt = 0; attempt < 64; ++attempt) {
      auto i = superset_cum_.pick(uniform01(rng));
      if (auto p = within_superset(i, rng)) return *p;
    }
    throw std::runtime_error("no drawable subset under any eligible superset");
  }

  std::optional<AsPick> within_superset(std::size_t i, Rng& rng) const {
    if (!set_cum_[i].drawable()) return std::nullopt;
    auto j = set_cum_[i].pick(uniform01(rng));
    return within_set(i, j, rng);
  }

  std::optional<AsPick> within_set(std::size_t i, std::size_t j, Rng& rng) const {
    const auto& cum = subset_cum_[i][j];
    if (!cum.drawable()) return std::nullopt;
    auto k = cum.pick(uniform01(rng));
    return make_pick(i, j, k);
  }

  AsPick make_pick(std::size_t i, std::size_t j, std::size_t k) const {
    const auto& ss = h_->supersets[i];
    return {ss.id, ss.sets[j].id, ss.sets[j].subsets[k].id};
  }

  std::optional<std::size_t> superset_index(GuardSetId id) const {
    auto it = superset_at_.find(id);
    if (it == superset_at_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::pair<std::size_t, std::size_t>> set_index(GuardSetId id) const {
    auto it = set_at_.find(id);
    if (it == set_at_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::tuple<std::size_t, std::size_t, std::size_t>> subset_index(GuardSetId id) const {
    auto it = subset_at_.find(id);
    if (it == subset_at_.end()) return std::nullopt;
    return it->second;
  }

  const Hierarchy& hierarchy() const { return *h_; }

 private:
  const Hierarchy* h_;
  double tau_down_;
  detail::Cumulative superset_cum_;
  std::vector<detail::Cumulative> set_cum_;
  std::vector<std::vector<detail::Cumulative>> subset_cum_;
  std::unordered_map<GuardSetId, std::size_t> superset_at_;
  std::unordered_map<GuardSetId, std::pair<std::size_t, std::size_t>> set_at_;
  std::unordered_map<GuardSetId, std::tuple<std::size_t, std::size_t, std::size_t>> subset_at_;
};

class BwAssigner {
 public:
  // Sets below serve_floor are broken: they keep their guards but hold no
  // clients. If every set is broken, all of them serve.
  explicit BwAssigner(const BwSetState& state, double serve_floor = 0.0) : state_(&state) {
    bool any = std::any_of(state.sets.begin(), state.sets.end(),
                           [&](const BwSet& s) { return s.bandwidth_mbps >= serve_floor && s.bandwidth_mbps > 0; });
    if (!any) serve_floor = 0.0;
    std::vector<double> w;
    for (std::size_t i = 0; i < state.sets.size(); ++i) {
      bool serving = state.sets[i].bandwidth_mbps >= serve_floor;
      if (serving) at_[state.sets[i].id] = i;
      w.push_back(serving ? state.sets[i].bandwidth_mbps : 0.0);
    }
    cum_ = detail::Cumulative(w);
  }

  GuardSetId assign(Rng& rng) const {
    if (!cum_.drawable()) throw std::runtime_error("no bandwidth set to assign");
    return state_->sets[cum_.pick(uniform01(rng))].id;
  }

  bool alive(GuardSetId id) const { return at_.count(id) != 0; }

 private:
  const BwSetState* state_;
  detail::Cumulative cum_;
  std::unordered_map<GuardSetId, std::size_t> at_;
};

class SingleAssigner {
 public:
  explicit SingleAssigner(std::span<const GuardBandwidth> guards) {
    std::vector<double> w;
    for (const auto& g : guards) {
      fps_.push_back(g.fingerprint);
      present_.insert(g.fingerprint);
      w.push_back(g.bandwidth_mbps);
    }
    cum_ = detail::Cumulative(w);
  }

  const std::string& assign(Rng& rng) const {
    if (!cum_.drawable()) throw std::runtime_error("no guard to assign");
    return fps_[cum_.pick(uniform01(rng))];
  }

  bool alive(const std::string& fp) const { return present_.count(fp) != 0; }

 private:
  std::vector<std::string> fps_;
  std::unordered_set<std::string> present_;
  detail::Cumulative cum_;
};

inline AsPick assign_client_as(const Hierarchy& h, const Thresholds& thr, Rng& rng) {
  return AsAssigner(h, thr).assign(rng);
}

inline std::string assign_client_single(std::span<const GuardBandwidth> guards, Rng& rng) {
  if (guards.empty()) throw std::invalid_argument("no guards to choose from");
  return SingleAssigner(guards).assign(rng);
}

// Walks the recovery ladder; a client whose subset is alive is only
// re-pointed at its subset's current parents. Returns true if anything
// changed.
inline bool recover_client(ClientState& c, const AsAssigner& a, Rng& rng) {
  auto place = [&](const AsPick& p) {
    bool changed = c.superset_id != p.superset_id || c.set_id != p.set_id || c.subset_id != p.subset_id;
    c.superset_id = p.superset_id;
    c.set_id = p.set_id;
    c.subset_id = p.subset_id;
    return changed;
  };

  if (auto at = a.subset_index(c.subset_id)) {
    auto [i, j, k] = *at;
    if (a.eligible(i)) return place(a.make_pick(i, j, k));
    return place(a.assign(rng));
  }
  if (auto at = a.set_index(c.set_id)) {
    auto [i, j] = *at;
    if (a.eligible(i))
      if (auto p = a.within_set(i, j, rng)) return place(*p);
  }
  if (auto at = a.superset_index(c.superset_id)) {
    if (a.eligible(*at))
      if (auto p = a.within_superset(*at, rng)) return place(*p);
  }
  return place(a.assign(rng));
}

inline bool recover_client(ClientState& c, const BwAssigner& a, Rng& rng) {
  if (a.alive(c.bw_set_id)) return false;
  c.bw_set_id = a.assign(rng);
  return true;
}

inline bool recover_client(ClientState& c, const SingleAssigner& a, Rng& rng) {
  if (a.alive(c.guard_fingerprint)) return false;
  c.guard_fingerprint = a.assign(rng);
  return true;
}

inline std::string pick_guard(std::span<const GuardBandwidth> guards, PickPolicy policy, Rng& rng) {
  if (guards.empty()) throw std::invalid_argument("no guards to pick from");
  if (policy == PickPolicy::uniform) return guards[uniform_index(rng, guards.size())].fingerprint;
  std::vector<double> w;
  for (const auto& g : guards) w.push_back(g.bandwidth_mbps);
  return guards[weighted_pick_index(w, uniform01(rng))].fingerprint;
}

}  // namespace guardsets
