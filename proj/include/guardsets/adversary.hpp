#pragma once

// Attacker models: passive guard injection (single guard, one AS, many ASes),
// bandwidth tuning against the quanta design, and the targeted attack on a
// known client's guard set.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "guardsets/assignment.hpp"
#include "guardsets/bwsets.hpp"
#include "guardsets/core.hpp"
#include "guardsets/hierarchy.hpp"
#include "guardsets/ingest.hpp"

namespace guardsets {

enum class Strategy { none, bw_tuning_high, bw_tuning_low, low_resource, centralized, botnet, targeted };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::none: return "none";
    case Strategy::bw_tuning_high: return "bw-tuning-high";
    case Strategy::bw_tuning_low: return "bw-tuning-low";
    case Strategy::low_resource: return "low-resource";
    case Strategy::centralized: return "centralized";
    case Strategy::botnet: return "botnet";
    case Strategy::targeted: return "targeted";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view s) {
  for (auto v : {Strategy::none, Strategy::bw_tuning_high, Strategy::bw_tuning_low, Strategy::low_resource,
                 Strategy::centralized, Strategy::botnet, Strategy::targeted})
    if (s == to_string(v)) return v;
  throw std::invalid_argument("unknown strategy '" + std::string(s) + "'");
}

enum class Foresight { perfect, forecast };

struct AdversaryConfig {
  Strategy strategy{Strategy::none};
  double bandwidth_fraction{0.01};
  double epsilon_mbps{0.1};
  double main_provider_fraction{0.9};
  double min_guard_mbps{2.0};
  int reentry_cooldown_days{7};
  Foresight foresight{Foresight::perfect};
  double forecast_margin_mbps{2.0};
};

struct MaliciousGuard {
  std::string fingerprint;
  AsNumber asn;
  Ipv4 address{0};
  double offered_bandwidth_mbps{0.0};
  bool active{true};
};

inline std::string malicious_fingerprint(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ADV%013llu", static_cast<unsigned long long>(n));
  return buf;
}

inline bool is_malicious_fingerprint(std::string_view fp) { return fp.substr(0, 3) == "ADV"; }

// --- passive injection -----------------------------------------------------

namespace detail {

inline Ipv4 address_in(const PrefixMap& map, AsNumber asn, Rng& rng) {
  auto prefixes = map.prefixes_of(asn);
  if (prefixes.empty()) return 0;
  for (int attempt = 0; attempt < 16; ++attempt) {
    const auto& p = prefixes[uniform_index(rng, prefixes.size())];
    auto host = static_cast<Ipv4>(uniform_index(rng, static_cast<std::size_t>(p.span())));
    Ipv4 ip = p.network | host;
    if (map.lookup(ip) == asn) return ip;
  }
  return prefixes.front().network;
}

inline std::function<double()> empirical_sampler(std::span<const double> bandwidths, Rng& rng) {
  if (bandwidths.empty()) throw std::invalid_argument("empty bandwidth distribution");
  std::vector<double> pool(bandwidths.begin(), bandwidths.end());
  return [pool = std::move(pool), &rng] { return pool[uniform_index(rng, pool.size())]; };
}

}  // namespace detail

inline MaliciousGuard inject_low_resource(std::span<const double> guard_bandwidths, const PrefixMap& prefixes, Rng& rng,
                                          std::uint64_t serial = 0) {
  auto ases = prefixes.ases();
  if (ases.empty()) throw std::invalid_argument("empty prefix map");
  auto sample = detail::empirical_sampler(guard_bandwidths, rng);
  AsNumber asn = ases[uniform_index(rng, ases.size())];
  Ipv4 ip = detail::address_in(prefixes, asn, rng);
  return {malicious_fingerprint(serial), asn, ip, sample(), true};
}

// Guards are drawn until their cumulative bandwidth reaches fraction * total;
// pick_as chooses each guard's AS.
inline std::vector<MaliciousGuard> inject_until(double total, double fraction, const std::function<double()>& sample,
                                                const std::function<AsNumber()>& pick_as, const PrefixMap* prefixes,
                                                Rng& rng, std::uint64_t first_serial = 0) {
  std::vector<MaliciousGuard> out;
  double target = fraction * total;
  double acc = 0;
  while (acc < target) {
    double bw = sample();
    if (!(bw > 0)) continue;
    AsNumber asn = pick_as();
    Ipv4 ip = prefixes ? detail::address_in(*prefixes, asn, rng) : 0;
    out.push_back({malicious_fingerprint(first_serial + out.size()), asn, ip, bw, true});
    acc += bw;
  }
  return out;
}

inline std::vector<MaliciousGuard> inject_centralized(std::span<const double> guard_bandwidths,
                                                      std::span<const AsNumber> guard_ases, double fraction, Rng& rng,
                                                      const PrefixMap* prefixes = nullptr) {
  if (fraction <= 0) return {};
  if (guard_ases.empty()) throw std::invalid_argument("no guard ASes");
  double total = 0;
  for (double b : guard_bandwidths) total += b;
  AsNumber home = guard_ases[uniform_index(rng, guard_ases.size())];
  auto sample = detail::empirical_sampler(guard_bandwidths, rng);
  return inject_until(total, fraction, sample, [home] { return home; }, prefixes, rng);
}

inline std::vector<MaliciousGuard> inject_botnet(std::span<const double> guard_bandwidths,
                                                 std::span<const AsNumber> guard_ases, double fraction, Rng& rng,
                                                 const PrefixMap* prefixes = nullptr) {
  if (fraction <= 0) return {};
  if (guard_ases.empty()) throw std::invalid_argument("no guard ASes");
  double total = 0;
  for (double b : guard_bandwidths) total += b;
  auto sample = detail::empirical_sampler(guard_bandwidths, rng);
  std::vector<AsNumber> ases(guard_ases.begin(), guard_ases.end());
  return inject_until(
      total, fraction, sample, [&] { return ases[uniform_index(rng, ases.size())]; }, prefixes, rng);
}

// --- compromise accounting -------------------------------------------------

inline std::unordered_set<GuardSetId> compromised_subsets(const Hierarchy& h,
                                                          const std::unordered_set<std::string>& malicious) {
  std::unordered_set<GuardSetId> out;
  for (const auto& ss : h.supersets)
    for (const auto& set : ss.sets)
      for (const auto& sub : set.subsets)
        for (const auto& g : sub.guards)
          if (malicious.count(g)) {
            out.insert(sub.id);
            break;
          }
  return out;
}

inline std::unordered_set<GuardSetId> compromised_bw_sets(const BwSetState& st,
                                                          const std::unordered_set<std::string>& malicious) {
  std::unordered_set<GuardSetId> out;
  for (const auto& s : st.sets)
    for (const auto& q : s.quanta)
      if (malicious.count(q.guard)) {
        out.insert(s.id);
        break;
      }
  return out;
}

struct ScanResult {
  std::size_t compromised_now{0};
  std::size_t compromised_ever{0};
};

// Latches compromised_ever/compromise_day and refreshes compromised_now.
// compromised holds subset ids (AS), bw set ids (BW) or is ignored (SINGLE,
// where malicious guard fingerprints are checked directly).
inline ScanResult compromise_scan(std::span<ClientState> clients, const std::unordered_set<GuardSetId>& compromised,
                                  const std::unordered_set<std::string>& malicious, int day) {
  ScanResult r;
  for (auto& c : clients) {
    bool hit = false;
    switch (c.design) {
      case Design::as: hit = compromised.count(c.subset_id) != 0; break;
      case Design::bw: hit = compromised.count(c.bw_set_id) != 0; break;
      case Design::single: hit = malicious.count(c.guard_fingerprint) != 0; break;
    }
    c.compromised_now = hit;
    if (hit && !c.compromised_ever) {
      c.compromised_ever = true;
      c.compromise_day = day;
    }
    r.compromised_now += hit;
    r.compromised_ever += c.compromised_ever;
  }
  return r;
}

// True if every compromised subset sits in a set whose guard ASes include
// one of the adversary's ASes.
inline bool confined_to_adversary_ases(const Hierarchy& h, const std::unordered_set<std::string>& malicious,
                                       const std::set<AsNumber>& adversary_ases) {
  for (const auto& ss : h.supersets)
    for (const auto& set : ss.sets) {
      bool has_adv_as = std::any_of(set.guard_ases.begin(), set.guard_ases.end(),
                                    [&](AsNumber a) { return adversary_ases.count(a) != 0; });
      for (const auto& sub : set.subsets)
        for (const auto& g : sub.guards)
          if (malicious.count(g) && !has_adv_as) return false;
    }
  return true;
}

// --- bandwidth tuning against the quanta design ----------------------------

struct BwAttackLog {
  std::size_t joined{0};
  std::size_t forced{0};
  std::size_t withdrawn{0};
  std::size_t held{0};
};

// Keeps its guards' offered bandwidths and reacts to the daily repair.
// Call order per day: refresh_bw_sets with honest guards plus guards(),
// before_repair, repair_step with repair_hook()/build_hook, end_day.
class BwTuningAdversary {
 public:
  BwTuningAdversary(AdversaryConfig cfg, std::uint64_t serial_base = 0) : cfg_(cfg), serial_(serial_base) {}

  // Restrict joins and hold-alive to these sets (targeted attack).
  void set_focus(std::optional<std::unordered_set<GuardSetId>> focus) { focus_ = std::move(focus); }

  bool low_variant() const { return cfg_.strategy == Strategy::bw_tuning_low; }

  std::vector<GuardBandwidth> guards() const {
    std::vector<GuardBandwidth> out;
    for (const auto& [fp, bw] : offer_) out.push_back({fp, bw});
    return out;
  }

  const std::unordered_set<std::string>& malicious() const { return all_; }

  double active_bandwidth() const {
    double t = 0;
    for (const auto& [fp, bw] : offer_) t += bw;
    return t;
  }

  double budget() const { return cfg_.bandwidth_fraction * honest_total_; }

  const BwAttackLog& log() const { return log_; }

  // Hold-alive, decay, LOW withdrawal and one-guard-per-set relocation on
  // the refreshed state, before any repair.
  void before_repair(BwSetState& st, int day, double honest_total, const Thresholds& thr) {
    day_ = day;
    watch_line_ = thr.tau_down + cfg_.forecast_margin_mbps;
    honest_total_ = honest_total;
    log_ = {};
    std::unordered_set<std::string> in_sets;
    std::vector<std::string> to_withdraw;

    for (auto& set : st.sets) {
      std::vector<std::size_t> mine;
      for (std::size_t i = 0; i < set.quanta.size(); ++i)
        if (offer_.count(set.quanta[i].guard)) mine.push_back(i);
      if (mine.empty()) continue;
      for (auto i : mine) in_sets.insert(set.quanta[i].guard);
      for (std::size_t k = 1; k < mine.size(); ++k) to_withdraw.push_back(set.quanta[mine[k]].guard);
      auto& q = set.quanta[mine.front()];
      double others = set.bandwidth_mbps;
      for (auto i : mine) others -= set.quanta[i].bandwidth_mbps;

      if (low_variant() && set.bandwidth_mbps > 0 &&
          q.bandwidth_mbps > cfg_.main_provider_fraction * set.bandwidth_mbps) {
        to_withdraw.push_back(q.guard);
        cooldown_[set.id] = day;
        continue;
      }
      if (focus_ && !focus_->count(set.id)) continue;
      // raise to keep the set above tau_down, or decay toward the floor
      double want = std::max(cfg_.min_guard_mbps, thr.tau_down + cfg_.epsilon_mbps - others);
      double extra = want - q.bandwidth_mbps;
      if (extra > 0 && active_bandwidth() + extra > budget()) want = q.bandwidth_mbps + std::max(0.0, budget() - active_bandwidth());
      if (want > q.bandwidth_mbps) ++log_.held;
      set.bandwidth_mbps += want - q.bandwidth_mbps;
      q.bandwidth_mbps = want;
      offer_[q.guard] = want;
    }
    // guards in no set are idle: they leave the consensus and free budget
    for (auto it = offer_.begin(); it != offer_.end();)
      if (!in_sets.count(it->first)) it = offer_.erase(it);
      else ++it;
    for (const auto& fp : to_withdraw) withdraw(st, fp);
    std::erase_if(st.leftover, [&](const Quantum& q) { return all_.count(q.guard) && !offer_.count(q.guard); });
  }

  // Called before damaged set idx takes candidates from the leftover.
  void before_set_repair(BwSetState& st, std::size_t idx, const Thresholds& thr) {
    const auto& set = st.sets[idx];
    if (set.quanta.empty()) return;
    if (focus_ && !focus_->count(set.id)) return;
    if (cfg_.foresight == Foresight::forecast && !watch_.count(set.id)) return;
    if (std::any_of(set.quanta.begin(), set.quanta.end(), [&](const Quantum& q) { return all_.count(q.guard); }))
      return;
    if (low_variant()) {
      auto cd = cooldown_.find(set.id);
      if (cd != cooldown_.end() && day_ - cd->second < cfg_.reentry_cooldown_days) return;
    }
    double m = set.max_quantum();
    double lo = std::max(0.5 * m, cfg_.min_guard_mbps);
    if (lo > m) return;

    // replay the honest repair to find the quantum that would complete it
    auto cands = candidate_list(set, st.leftover);
    double acc = set.bandwidth_mbps;
    std::optional<double> last;
    for (const auto& q : cands) {
      acc += q.bandwidth_mbps;
      if (acc >= thr.tau_up) {
        last = q.bandwidth_mbps;
        break;
      }
    }
    double bid = last ? std::min(*last + cfg_.epsilon_mbps, m) : m;
    bid = std::max(bid, lo);
    if (active_bandwidth() + bid > budget()) return;
    auto fp = fresh_guard(bid);
    st.leftover.push_back({fp, bid});
    sort_quanta(st.leftover);
    pending_.insert(fp);
    ++log_.joined;
  }

  // Called when the leftover is about to be cut into new sets (or not).
  void before_build(BwSetState& st, const Thresholds& thr) {
    if (focus_) return;
    double left = 0;
    for (const auto& q : st.leftover) left += q.bandwidth_mbps;
    // sum of the trailing partial set the honest leftover would leave
    double partial = 0;
    for (const auto& q : st.leftover) {
      partial += q.bandwidth_mbps;
      if (partial >= thr.tau_up) partial = 0;
    }
    double bid = std::max(cfg_.min_guard_mbps, thr.tau_up - partial);
    double smallest = st.leftover.empty() ? bid : st.leftover.back().bandwidth_mbps;
    if (partial > 0 && bid > smallest) return;  // would not sort into the trailing set
    if (partial == 0 && left > 0) return;
    if (active_bandwidth() + bid > budget()) return;
    auto fp = fresh_guard(bid);
    st.leftover.push_back({fp, bid});
    sort_quanta(st.leftover);
    pending_.insert(fp);
    ++log_.forced;
  }

  // Drops guards that were offered today but landed in no set.
  void end_day(BwSetState& st) {
    std::unordered_set<std::string> placed;
    for (const auto& s : st.sets)
      for (const auto& q : s.quanta)
        if (pending_.count(q.guard)) placed.insert(q.guard);
    for (const auto& fp : pending_)
      if (!placed.count(fp)) offer_.erase(fp);
    std::erase_if(st.leftover, [&](const Quantum& q) { return pending_.count(q.guard) && !placed.count(q.guard); });
    pending_.clear();
    // forecast mode only reacts to sets that looked close to breaking today
    watch_.clear();
    for (const auto& s : st.sets)
      if (s.bandwidth_mbps <= watch_line_) watch_.insert(s.id);
  }

  std::function<void(BwSetState&, std::size_t)> repair_hook(const Thresholds& thr) {
    return [this, thr](BwSetState& st, std::size_t idx) { before_set_repair(st, idx, thr); };
  }

  std::function<void(BwSetState&)> build_hook(const Thresholds& thr) {
    return [this, thr](BwSetState& st) { before_build(st, thr); };
  }

 private:
  std::string fresh_guard(double bw) {
    auto fp = malicious_fingerprint(serial_++);
    offer_[fp] = bw;
    all_.insert(fp);
    return fp;
  }

  void withdraw(BwSetState& st, const std::string& fp) {
    if (!offer_.erase(fp)) return;
    for (auto& s : st.sets) {
      auto before = s.quanta.size();
      std::erase_if(s.quanta, [&](const Quantum& q) { return q.guard == fp; });
      if (s.quanta.size() != before) {
        s.bandwidth_mbps = 0;
        for (const auto& q : s.quanta) s.bandwidth_mbps += q.bandwidth_mbps;
      }
    }
    std::erase_if(st.sets, [](const BwSet& s) { return s.quanta.empty(); });
    st.quota.erase(fp);
    ++log_.withdrawn;
  }

  AdversaryConfig cfg_;
  std::uint64_t serial_;
  std::map<std::string, double> offer_;  // active guards and their bandwidth
  std::unordered_set<std::string> all_;  // every guard ever run
  std::unordered_set<std::string> pending_;
  std::map<GuardSetId, int> cooldown_;
  std::optional<std::unordered_set<GuardSetId>> focus_;
  std::unordered_set<GuardSetId> watch_;
  double watch_line_{0};
  double honest_total_{0};
  int day_{0};
  BwAttackLog log_;
};

// One planned bandwidth-design step on a state already refreshed with today's
// honest guards and adv.guards(). Returns the repair log.
inline BwRepairLog bw_attack_step(BwSetState& st, BwTuningAdversary& adv, int day, double honest_total,
                                  const Thresholds& thr, const std::unordered_map<std::string, double>& guard_bw) {
  adv.before_repair(st, day, honest_total, thr);
  auto log = repair_step(st, thr, guard_bw, adv.repair_hook(thr), adv.build_hook(thr));
  adv.end_day(st);
  return log;
}

// --- targeted attack on the AS design --------------------------------------

struct TargetedAsStep {
  std::vector<LabeledGuard> injected;
  std::size_t broken_subsets{0};
};

// Watches one target subset per target. When a target's subset is about to
// fall below tau_down, the attacker picks one of its guard ASes and injects
// one guard from that AS per broken subset of the same set that contains the
// AS, each sized to that subset's deficit to tau_up. Guards that did not reach
// a target subset are withdrawn the next day; those that did are kept and,
// with their subset, held above tau_down.
class TargetedAsAdversary {
 public:
  TargetedAsAdversary(AdversaryConfig cfg, std::uint64_t seed, std::uint64_t serial_base = 0)
      : cfg_(cfg), rng_(make_rng(seed, {0x7a46e7ULL})), serial_(serial_base) {}

  // Plans today's guards against yesterday's hierarchy and today's honest
  // directory. targets holds each target's subset id.
  std::vector<LabeledGuard> plan(const Hierarchy& yesterday, const GuardDirectory& honest,
                                 std::span<const GuardSetId> target_subsets, const Thresholds& thr) {
    std::vector<LabeledGuard> out;
    double honest_total = 0;
    for (const auto& [fp, g] : honest.guards()) honest_total += g.bandwidth_mbps;
    budget_ = cfg_.bandwidth_fraction * honest_total;

    auto bw_today = [&](const std::string& fp) -> double {
      auto it = kept_.find(fp);
      if (it != kept_.end()) return it->second.bandwidth_mbps;
      return honest.bandwidth(fp);
    };

    std::unordered_set<GuardSetId> targets(target_subsets.begin(), target_subsets.end());
    for (const auto& ss : yesterday.supersets)
      for (const auto& set : ss.sets) {
        std::vector<std::pair<const Subset*, double>> broken;
        for (const auto& sub : set.subsets) {
          double bw = 0;
          for (const auto& g : sub.guards) bw += bw_today(g);
          if (bw < thr.tau_down) broken.push_back({&sub, bw});
        }
        for (const auto& sub : set.subsets) {
          if (!targets.count(sub.id)) continue;
          double bw = 0;
          const std::string* mine = nullptr;
          for (const auto& g : sub.guards) {
            bw += bw_today(g);
            if (kept_.count(g)) mine = &g;
          }
          if (mine) {
            // hold the compromised target subset at tau_down
            if (bw < thr.tau_down) {
              double extra = thr.tau_down + cfg_.epsilon_mbps - bw;
              if (active_bandwidth() + extra <= budget_) kept_[*mine].bandwidth_mbps += extra;
            }
            continue;
          }
          if (bw >= thr.tau_down) continue;
          std::vector<AsNumber> ases;
          for (const auto& g : sub.guards)
            if (const auto* r = honest.find(g)) ases.push_back(r->asn);
          std::sort(ases.begin(), ases.end());
          ases.erase(std::unique(ases.begin(), ases.end()), ases.end());
          if (ases.empty()) continue;
          AsNumber pick = ases[uniform_index(rng_, ases.size())];
          for (const auto& [b, bbw] : broken) {
            bool has = std::any_of(b->guards.begin(), b->guards.end(), [&](const std::string& g) {
              const auto* r = honest.find(g);
              return r && r->asn == pick;
            });
            if (!has) continue;
            double need = std::max(cfg_.min_guard_mbps, thr.tau_up - bbw);
            if (active_bandwidth() + pending_bandwidth(out) + need > budget_) break;
            out.push_back({malicious_fingerprint(serial_++), 0, pick, need});
            all_.insert(out.back().fingerprint);
          }
        }
      }
    for (const auto& [fp, g] : kept_) out.push_back(g);
    planned_ = out;
    return out;
  }

  // After today's update: guards inside a target subset are kept.
  void settle(const Hierarchy& today, std::span<const GuardSetId> target_subsets) {
    std::unordered_set<GuardSetId> targets(target_subsets.begin(), target_subsets.end());
    std::unordered_set<std::string> in_target;
    for (const auto& ss : today.supersets)
      for (const auto& set : ss.sets)
        for (const auto& sub : set.subsets)
          if (targets.count(sub.id))
            for (const auto& g : sub.guards)
              if (all_.count(g)) in_target.insert(g);
    kept_.clear();
    for (const auto& g : planned_)
      if (in_target.count(g.fingerprint)) kept_[g.fingerprint] = g;
    planned_.clear();
  }

  const std::unordered_set<std::string>& malicious() const { return all_; }

  double active_bandwidth() const {
    double t = 0;
    for (const auto& [fp, g] : kept_) t += g.bandwidth_mbps;
    return t;
  }

 private:
  static double pending_bandwidth(const std::vector<LabeledGuard>& v) {
    double t = 0;
    for (const auto& g : v) t += g.bandwidth_mbps;
    return t;
  }

  AdversaryConfig cfg_;
  Rng rng_;
  std::uint64_t serial_;
  double budget_{0};
  std::map<std::string, LabeledGuard> kept_;
  std::vector<LabeledGuard> planned_;
  std::unordered_set<std::string> all_;
};

}  // namespace guardsets
