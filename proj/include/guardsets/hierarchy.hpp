#pragma once

// AS-design guard sets: supersets merged from customer cones, sets packed from
// independent interior cones, subsets filled to the bandwidth threshold, and
// the daily update/repair procedures that keep guards inside their region of
// the AS hierarchy.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "guardsets/asgraph.hpp"
#include "guardsets/core.hpp"
#include "guardsets/ingest.hpp"

namespace guardsets {

struct GuardRecord {
  std::string fingerprint;
  AsNumber asn;
  double bandwidth_mbps{0.0};
};

struct GuardAs {
  AsNumber asn;
  std::vector<std::string> guards;  // ascending fingerprint
  double bandwidth_mbps{0.0};
};

// Today's AS-labeled guards, indexed by fingerprint and by AS.
class GuardDirectory {
 public:
  GuardDirectory() = default;

  explicit GuardDirectory(std::span<const GuardRecord> guards) {
    for (const auto& g : guards) add(g);
  }

  // Drops guards without an AS label or whose AS the graph does not know.
  static GuardDirectory from_labeled(std::span<const LabeledGuard> guards, const AsGraph& graph,
                                     std::size_t* excluded = nullptr) {
    GuardDirectory dir;
    std::size_t dropped = 0;
    for (const auto& g : guards) {
      if (!g.asn || !graph.contains(*g.asn)) {
        ++dropped;
        continue;
      }
      dir.add(GuardRecord{g.fingerprint, *g.asn, g.bandwidth_mbps});
    }
    if (excluded) *excluded = dropped;
    return dir;
  }

  void add(const GuardRecord& g) {
    if (!guards_.emplace(g.fingerprint, g).second) throw std::invalid_argument("duplicate guard " + g.fingerprint);
    auto& as = ases_[g.asn];
    as.asn = g.asn;
    as.guards.insert(std::lower_bound(as.guards.begin(), as.guards.end(), g.fingerprint), g.fingerprint);
    as.bandwidth_mbps += g.bandwidth_mbps;
  }

  const GuardRecord* find(std::string_view fp) const {
    auto it = guards_.find(std::string(fp));
    return it == guards_.end() ? nullptr : &it->second;
  }

  const GuardAs* find_as(AsNumber a) const {
    auto it = ases_.find(a);
    return it == ases_.end() ? nullptr : &it->second;
  }

  double bandwidth(const std::string& fp) const {
    auto it = guards_.find(fp);
    return it == guards_.end() ? 0.0 : it->second.bandwidth_mbps;
  }

  double as_bandwidth(AsNumber a) const {
    auto it = ases_.find(a);
    return it == ases_.end() ? 0.0 : it->second.bandwidth_mbps;
  }

  const std::map<AsNumber, GuardAs>& ases() const { return ases_; }
  const std::unordered_map<std::string, GuardRecord>& guards() const { return guards_; }
  std::size_t size() const { return guards_.size(); }

  std::vector<GuardAs> guard_as_list() const {
    std::vector<GuardAs> out;
    for (const auto& [a, g] : ases_) out.push_back(g);
    return out;
  }

 private:
  std::unordered_map<std::string, GuardRecord> guards_;
  std::map<AsNumber, GuardAs> ases_;
};

struct Subset {
  GuardSetId id{0};
  std::vector<std::string> guards;
  double bandwidth_mbps{0.0};
};

struct Set {
  GuardSetId id{0};
  std::optional<AsNumber> root;  // nullopt marks the residual set
  std::vector<AsNumber> guard_ases;
  std::vector<Subset> subsets;
  double bandwidth_mbps{0.0};

  bool residual() const { return !root.has_value(); }
};

struct Superset {
  GuardSetId id{0};
  AsNumber root;
  std::vector<AsNumber> guard_ases;
  std::vector<Set> sets;
  double bandwidth_mbps{0.0};
};

struct Hierarchy {
  std::vector<Superset> supersets;

  std::size_t set_count() const {
    std::size_t n = 0;
    for (const auto& s : supersets) n += s.sets.size();
    return n;
  }

  std::size_t subset_count() const {
    std::size_t n = 0;
    for (const auto& s : supersets)
      for (const auto& t : s.sets) n += t.subsets.size();
    return n;
  }
};

// --- identifiers -----------------------------------------------------------

inline GuardSetId superset_id_for(AsNumber root) {
  return to_guard_set_id(StableHasher{}.u64(static_cast<std::uint64_t>(Level::superset)).u64(root.value).digest());
}

inline GuardSetId set_id_for(AsNumber superset_root, AsNumber set_root) {
  return to_guard_set_id(StableHasher{}
                             .u64(static_cast<std::uint64_t>(Level::set))
                             .u64(superset_root.value)
                             .u64(set_root.value)
                             .digest());
}

inline GuardSetId residual_set_id_for(AsNumber superset_root) {
  return to_guard_set_id(
      StableHasher{}.u64(static_cast<std::uint64_t>(Level::set)).bytes("residual").u64(superset_root.value).digest());
}

inline GuardSetId subset_id_for(std::span<const std::string> members) {
  StableHasher h;
  h.u64(static_cast<std::uint64_t>(Level::subset));
  for (const auto& m : members) h.bytes(m);
  return to_guard_set_id(h.digest());
}

// --- supersets -------------------------------------------------------------

struct MergeEvent {
  AsNumber popped;
  AsNumber provider;
  std::vector<AsNumber> replaced;  // ascending, includes popped

  bool operator==(const MergeEvent&) const = default;
};

struct SupersetLog {
  std::vector<MergeEvent> merges;
  std::vector<AsNumber> finalized;
};

namespace detail {

struct SupersetDraft {
  AsNumber root;
  std::vector<AsNumber> members;
  double bandwidth{0.0};
  std::vector<Set> sets;
  GuardSetId id{0};
};

inline std::vector<AsNumber> sorted_union(const std::vector<AsNumber>& a, const std::vector<AsNumber>& b) {
  std::vector<AsNumber> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Iterative cone merging. Each round pops the listed superset with the
// smallest cone and merges it into its smallest-cone provider whose cone also
// holds another listed superset; every listed superset inside that provider's
// cone is replaced by the provider. Equal cone sizes are ordered by the size
// of that tightest merge, then AS number. A popped superset without such a
// provider is finalized. Rounds stop once fewer than n_supersets remain or
// every superset carries at least tau_up.
inline std::vector<SupersetDraft> merge_supersets(std::vector<SupersetDraft> drafts, const AsGraph& graph,
                                                  const Thresholds& thr, bool force_first_round, SupersetLog* log) {
  std::vector<SupersetDraft> finalized;
  std::unordered_map<AsNumber, int> listed_below;  // AS -> listed roots in its cone

  auto touch = [&](AsNumber root, int delta) {
    listed_below[root] += delta;
    for (auto a : graph.ancestors(root)) listed_below[a] += delta;
  };
  for (const auto& d : drafts) touch(d.root, +1);

  // Smallest-cone qualifying provider of root, or nullopt.
  auto best_provider = [&](AsNumber root) -> std::optional<AsNumber> {
    std::optional<AsNumber> best;
    std::size_t best_size = 0;
    for (auto a : graph.ancestors(root)) {
      auto it = listed_below.find(a);
      if (it == listed_below.end() || it->second < 2) continue;  // root itself counts once
      auto sz = graph.cone_size(a);
      if (!best || sz < best_size || (sz == best_size && a < *best)) {
        best = a;
        best_size = sz;
      }
    }
    return best;
  };

  auto should_stop = [&] {
    if (drafts.empty()) return true;
    if (drafts.size() + finalized.size() < thr.n_supersets) return true;
    auto high = [&](const SupersetDraft& d) { return d.bandwidth >= thr.tau_up; };
    return std::all_of(drafts.begin(), drafts.end(), high) && std::all_of(finalized.begin(), finalized.end(), high);
  };

  bool first = force_first_round;
  while (!drafts.empty()) {
    if (!first && should_stop()) break;
    first = false;

    std::size_t pick = 0;
    std::tuple<std::size_t, std::size_t, AsNumber> pick_key{};
    std::optional<AsNumber> pick_provider;
    for (std::size_t i = 0; i < drafts.size(); ++i) {
      auto prov = best_provider(drafts[i].root);
      std::tuple<std::size_t, std::size_t, AsNumber> key{
          graph.cone_size(drafts[i].root), prov ? graph.cone_size(*prov) : std::numeric_limits<std::size_t>::max(),
          drafts[i].root};
      if (i == 0 || key < pick_key) {
        pick = i;
        pick_key = key;
        pick_provider = prov;
      }
    }

    SupersetDraft popped = std::move(drafts[pick]);
    drafts.erase(drafts.begin() + static_cast<std::ptrdiff_t>(pick));
    touch(popped.root, -1);

    if (!pick_provider) {
      if (log) log->finalized.push_back(popped.root);
      finalized.push_back(std::move(popped));
      continue;
    }

    AsNumber provider = *pick_provider;
    SupersetDraft merged{provider, popped.members, popped.bandwidth, std::move(popped.sets), superset_id_for(provider)};
    MergeEvent ev{popped.root, provider, {popped.root}};
    std::vector<SupersetDraft> keep;
    for (auto& d : drafts) {
      if (graph.in_cone(provider, d.root)) {
        touch(d.root, -1);
        ev.replaced.push_back(d.root);
        merged.members = sorted_union(merged.members, d.members);
        merged.bandwidth += d.bandwidth;
        for (auto& s : d.sets) merged.sets.push_back(std::move(s));
      } else {
        keep.push_back(std::move(d));
      }
    }
    drafts = std::move(keep);
    std::sort(ev.replaced.begin(), ev.replaced.end());
    if (log) log->merges.push_back(ev);
    touch(provider, +1);
    drafts.push_back(std::move(merged));
  }

  for (auto& f : finalized) drafts.push_back(std::move(f));
  std::sort(drafts.begin(), drafts.end(), [](const auto& a, const auto& b) { return a.root < b.root; });
  return drafts;
}

inline Superset to_superset(detail::SupersetDraft d) {
  Superset s;
  s.id = d.id ? d.id : superset_id_for(d.root);
  s.root = d.root;
  s.guard_ases = std::move(d.members);
  s.sets = std::move(d.sets);
  s.bandwidth_mbps = d.bandwidth;
  return s;
}

}  // namespace detail

inline std::vector<Superset> build_supersets(std::span<const GuardAs> guard_ases, const AsGraph& graph,
                                             const Thresholds& thr, SupersetLog* log = nullptr) {
  std::vector<detail::SupersetDraft> drafts;
  for (const auto& g : guard_ases) {
    if (!graph.contains(g.asn)) throw NotFoundError("guard AS" + to_string(g.asn) + " not in graph");
    drafts.push_back({g.asn, {g.asn}, g.bandwidth_mbps, {}, superset_id_for(g.asn)});
  }
  auto merged = detail::merge_supersets(std::move(drafts), graph, thr, true, log);
  std::vector<Superset> out;
  for (auto& d : merged) out.push_back(detail::to_superset(std::move(d)));
  return out;
}

// New guard ASes join the smallest existing superset cone that holds them;
// the rest start as singleton supersets, then merging resumes (only while its
// stopping rule is unmet, so an unchanged input is a fixed point).
inline std::vector<Superset> update_supersets(std::vector<Superset> existing, std::span<const GuardAs> new_guard_ases,
                                              const AsGraph& graph, const Thresholds& thr,
                                              SupersetLog* log = nullptr) {
  std::vector<detail::SupersetDraft> drafts;
  for (auto& s : existing) drafts.push_back({s.root, std::move(s.guard_ases), s.bandwidth_mbps, std::move(s.sets), s.id});

  for (const auto& g : new_guard_ases) {
    if (!graph.contains(g.asn)) throw NotFoundError("guard AS" + to_string(g.asn) + " not in graph");
    detail::SupersetDraft* home = nullptr;
    for (auto& d : drafts) {
      if (!graph.in_cone(d.root, g.asn)) continue;
      if (!home || graph.cone_size(d.root) < graph.cone_size(home->root) ||
          (graph.cone_size(d.root) == graph.cone_size(home->root) && d.root < home->root))
        home = &d;
    }
    if (home) {
      if (!std::binary_search(home->members.begin(), home->members.end(), g.asn)) {
        home->members.insert(std::lower_bound(home->members.begin(), home->members.end(), g.asn), g.asn);
        home->bandwidth += g.bandwidth_mbps;
      }
    } else {
      drafts.push_back({g.asn, {g.asn}, g.bandwidth_mbps, {}, superset_id_for(g.asn)});
    }
  }

  auto merged = detail::merge_supersets(std::move(drafts), graph, thr, false, log);
  std::vector<Superset> out;
  for (auto& d : merged) out.push_back(detail::to_superset(std::move(d)));
  return out;
}

// --- sets ------------------------------------------------------------------

struct CandidateCone {
  AsNumber root;
  std::size_t cone_size{0};
  std::vector<AsNumber> guard_ases;  // guard ASes of the pool inside this cone
  double bandwidth_mbps{0.0};

  bool operator==(const CandidateCone&) const = default;
};

namespace detail {

inline std::vector<CandidateCone> candidate_cones_over(AsNumber superset_root, std::span<const AsNumber> pool,
                                                       const AsGraph& graph,
                                                       const std::function<double(AsNumber)>& as_bandwidth,
                                                       double tau_up, const std::set<AsNumber>& excluded_roots) {
  std::map<AsNumber, CandidateCone> acc;
  for (auto g : pool) {
    double bw = as_bandwidth(g);
    auto credit = [&](AsNumber a) {
      if (a == superset_root || excluded_roots.count(a)) return;
      if (!graph.in_cone(superset_root, a)) return;
      auto& c = acc[a];
      c.root = a;
      c.guard_ases.push_back(g);
      c.bandwidth_mbps += bw;
    };
    credit(g);
    for (auto a : graph.ancestors(g)) credit(a);
  }
  std::vector<CandidateCone> out;
  for (auto& [a, c] : acc) {
    if (c.bandwidth_mbps < tau_up) continue;
    std::sort(c.guard_ases.begin(), c.guard_ases.end());
    c.cone_size = graph.cone_size(a);
    out.push_back(std::move(c));
  }
  return out;
}

inline bool footprints_overlap(const CandidateCone& a, const CandidateCone& b) {
  auto i = a.guard_ases.begin();
  auto j = b.guard_ases.begin();
  while (i != a.guard_ases.end() && j != b.guard_ases.end()) {
    if (*i == *j) return true;
    if (*i < *j) ++i;
    else ++j;
  }
  return false;
}

}  // namespace detail

// Cones rooted strictly inside the superset's cone whose guard bandwidth
// reaches tau_up. Ascending by root.
inline std::vector<CandidateCone> candidate_cones(const Superset& superset, const AsGraph& graph,
                                                  const GuardDirectory& dir, double tau_up) {
  return detail::candidate_cones_over(
      superset.root, superset.guard_ases, graph, [&](AsNumber a) { return dir.as_bandwidth(a); }, tau_up, {});
}

// Maximum-cardinality family of cones with pairwise-disjoint guard ASes.
// Ties prefer the smaller total cone size, then the lexicographically
// smaller root list. Exact search up to exact_limit candidates, greedy above.
inline std::vector<CandidateCone> pack_independent_cones(std::span<const CandidateCone> candidates,
                                                         std::size_t exact_limit = 20) {
  std::vector<CandidateCone> cands(candidates.begin(), candidates.end());
  std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.root < b.root; });
  const std::size_t n = cands.size();
  std::vector<CandidateCone> out;
  if (n == 0) return out;

  if (n <= exact_limit && n <= 63) {
    std::vector<std::uint64_t> conflict(n, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (detail::footprints_overlap(cands[i], cands[j])) {
          conflict[i] |= std::uint64_t{1} << j;
          conflict[j] |= std::uint64_t{1} << i;
        }

    struct Best {
      std::size_t count = 0;
      std::size_t total = 0;
      std::uint64_t mask = 0;
      bool set = false;
    } best;

    auto roots_of = [&](std::uint64_t mask) {
      std::vector<AsNumber> r;
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1) r.push_back(cands[i].root);
      return r;
    };
    auto better = [&](std::size_t count, std::size_t total, std::uint64_t mask) {
      if (!best.set) return true;
      if (count != best.count) return count > best.count;
      if (total != best.total) return total < best.total;
      return roots_of(mask) < roots_of(best.mask);
    };

    // allowed: candidates at index >= i not conflicting with the chosen ones
    auto search = [&](auto&& self, std::size_t i, std::uint64_t chosen, std::uint64_t allowed, std::size_t count,
                      std::size_t total) -> void {
      std::uint64_t rest = allowed & (i >= 64 ? 0 : ~std::uint64_t{0} << i);
      if (best.set && count + static_cast<std::size_t>(std::popcount(rest)) < best.count) return;
      if (rest == 0) {
        if (better(count, total, chosen)) best = {count, total, chosen, true};
        return;
      }
      auto next = static_cast<std::size_t>(std::countr_zero(rest));
      self(self, next + 1, chosen | (std::uint64_t{1} << next), allowed & ~conflict[next], count + 1,
           total + cands[next].cone_size);
      self(self, next + 1, chosen, allowed & ~(std::uint64_t{1} << next), count, total);
    };
    std::uint64_t all = n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
    search(search, 0, 0, all, 0, 0);
    for (std::size_t i = 0; i < n; ++i)
      if (best.mask >> i & 1) out.push_back(cands[i]);
    return out;
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = cands[a];
    const auto& y = cands[b];
    return std::make_tuple(x.guard_ases.size(), x.cone_size, x.root) < std::make_tuple(y.guard_ases.size(), y.cone_size, y.root);
  });
  for (auto i : order) {
    bool ok = std::none_of(out.begin(), out.end(), [&](const auto& c) { return detail::footprints_overlap(c, cands[i]); });
    if (ok) out.push_back(cands[i]);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.root < b.root; });
  return out;
}

namespace detail {

inline double sum_as_bandwidth(std::span<const AsNumber> ases, const GuardDirectory& dir) {
  double bw = 0;
  for (auto a : ases) bw += dir.as_bandwidth(a);
  return bw;
}

// Packs the pool into cone sets; whatever is left over is returned.
inline std::vector<Set> pack_pool_into_sets(const Superset& superset, std::vector<AsNumber> pool, const AsGraph& graph,
                                            const GuardDirectory& dir, const Thresholds& thr,
                                            const std::set<AsNumber>& taken_roots,
                                            std::vector<AsNumber>& leftover) {
  std::sort(pool.begin(), pool.end());
  auto cands = candidate_cones_over(
      superset.root, pool, graph, [&](AsNumber a) { return dir.as_bandwidth(a); }, thr.tau_up, taken_roots);
  auto packed = pack_independent_cones(cands, thr.exact_packing_limit);
  std::vector<Set> out;
  std::set<AsNumber> covered;
  for (auto& c : packed) {
    Set s;
    s.id = set_id_for(superset.root, c.root);
    s.root = c.root;
    s.guard_ases = c.guard_ases;
    s.bandwidth_mbps = c.bandwidth_mbps;
    covered.insert(c.guard_ases.begin(), c.guard_ases.end());
    out.push_back(std::move(s));
  }
  leftover.clear();
  for (auto a : pool)
    if (!covered.count(a)) leftover.push_back(a);
  return out;
}

}  // namespace detail

// One set per packed cone plus a residual set for uncovered guard ASes.
// Subsets are left empty.
inline std::vector<Set> build_sets(const Superset& superset, const AsGraph& graph, const GuardDirectory& dir,
                                   const Thresholds& thr) {
  std::vector<AsNumber> leftover;
  auto sets = detail::pack_pool_into_sets(superset, superset.guard_ases, graph, dir, thr, {}, leftover);
  if (!leftover.empty()) {
    Set r;
    r.id = residual_set_id_for(superset.root);
    r.guard_ases = leftover;
    r.bandwidth_mbps = detail::sum_as_bandwidth(leftover, dir);
    sets.push_back(std::move(r));
  }
  return sets;
}

struct SetUpdate {
  std::vector<Set> sets;
  std::vector<GuardSetId> created;
  std::vector<GuardSetId> dismantled;
};

// New guard ASes join the smallest surviving cone set that holds them. Sets
// below tau_down are dismantled and their guard ASes pooled with the unplaced
// new ones for a fresh packing; what remains joins the residual set. A set
// re-formed under its old identifier keeps its subsets.
inline SetUpdate update_sets(const Superset& superset, std::span<const AsNumber> new_guard_ases, const AsGraph& graph,
                             const GuardDirectory& dir, const Thresholds& thr) {
  SetUpdate out;
  std::vector<Set> sets = superset.sets;
  for (auto& s : sets) s.bandwidth_mbps = detail::sum_as_bandwidth(s.guard_ases, dir);

  std::vector<AsNumber> unplaced;
  for (auto g : new_guard_ases) {
    Set* home = nullptr;
    for (auto& s : sets) {
      if (s.residual() || !graph.in_cone(*s.root, g)) continue;
      if (!home || graph.cone_size(*s.root) < graph.cone_size(*home->root) ||
          (graph.cone_size(*s.root) == graph.cone_size(*home->root) && *s.root < *home->root))
        home = &s;
    }
    if (home) {
      home->guard_ases.insert(std::lower_bound(home->guard_ases.begin(), home->guard_ases.end(), g), g);
      home->bandwidth_mbps += dir.as_bandwidth(g);
    } else {
      unplaced.push_back(g);
    }
  }

  std::vector<Set> surviving;
  std::map<GuardSetId, Set> dismantled;
  std::vector<AsNumber> pool = unplaced;
  for (auto& s : sets) {
    if (s.guard_ases.empty() || s.bandwidth_mbps < thr.tau_down) {
      pool.insert(pool.end(), s.guard_ases.begin(), s.guard_ases.end());
      dismantled.emplace(s.id, std::move(s));
    } else {
      surviving.push_back(std::move(s));
    }
  }

  std::vector<Set> formed;
  if (!pool.empty()) {
    std::set<AsNumber> taken;
    for (const auto& s : surviving)
      if (s.root) taken.insert(*s.root);
    std::vector<AsNumber> leftover;
    formed = detail::pack_pool_into_sets(superset, pool, graph, dir, thr, taken, leftover);
    if (!leftover.empty()) {
      auto residual = std::find_if(surviving.begin(), surviving.end(), [](const Set& s) { return s.residual(); });
      if (residual != surviving.end()) {
        residual->guard_ases = detail::sorted_union(residual->guard_ases, leftover);
        residual->bandwidth_mbps = detail::sum_as_bandwidth(residual->guard_ases, dir);
      } else {
        Set r;
        r.id = residual_set_id_for(superset.root);
        r.guard_ases = leftover;
        r.bandwidth_mbps = detail::sum_as_bandwidth(leftover, dir);
        formed.push_back(std::move(r));
      }
    }
  }

  for (auto& s : formed) {
    auto old = dismantled.find(s.id);
    if (old != dismantled.end()) {
      // same identifier re-formed: keep subsets of guards that remain members
      s.subsets = std::move(old->second.subsets);
      dismantled.erase(old);
    } else {
      out.created.push_back(s.id);
    }
    surviving.push_back(std::move(s));
  }
  for (const auto& [id, s] : dismantled) out.dismantled.push_back(id);
  std::sort(surviving.begin(), surviving.end(), [](const Set& a, const Set& b) { return a.id < b.id; });
  out.sets = std::move(surviving);
  return out;
}

// --- subsets ---------------------------------------------------------------

// Fills subsets by visiting guard ASes in the given order and each AS's guards
// in ascending fingerprint order, closing a subset once it reaches tau_up. A
// trailing subset below tau_down is folded into the last closed one.
inline std::vector<Subset> fill_subsets(std::span<const AsNumber> as_order,
                                        const std::function<std::vector<std::string>(AsNumber)>& guards_of,
                                        const GuardDirectory& dir, const Thresholds& thr) {
  std::vector<Subset> out;
  Subset cur;
  for (auto a : as_order) {
    for (const auto& fp : guards_of(a)) {
      cur.guards.push_back(fp);
      cur.bandwidth_mbps += dir.bandwidth(fp);
      if (cur.bandwidth_mbps >= thr.tau_up) {
        out.push_back(std::move(cur));
        cur = Subset{};
      }
    }
  }
  if (!cur.guards.empty()) {
    if (cur.bandwidth_mbps < thr.tau_down && !out.empty()) {
      auto& last = out.back();
      last.guards.insert(last.guards.end(), cur.guards.begin(), cur.guards.end());
      last.bandwidth_mbps += cur.bandwidth_mbps;
    } else {
      out.push_back(std::move(cur));
    }
  }
  for (auto& s : out) s.id = subset_id_for(s.guards);
  return out;
}

namespace detail {

inline std::vector<Subset> build_subsets_over(std::vector<AsNumber> ases,
                                              const std::function<std::vector<std::string>(AsNumber)>& guards_of,
                                              const GuardDirectory& dir, const Thresholds& thr, Rng& rng) {
  std::sort(ases.begin(), ases.end());
  stable_shuffle(ases.begin(), ases.end(), rng);
  return fill_subsets(ases, guards_of, dir, thr);
}

}  // namespace detail

// Subsets for a fresh set: guard ASes in seeded-shuffle order, guards never split.
inline std::vector<Subset> build_subsets(const Set& set, const GuardDirectory& dir, const Thresholds& thr,
                                         std::uint64_t seed) {
  auto rng = make_rng(seed, {set.id});
  auto guards_of = [&](AsNumber a) {
    const auto* g = dir.find_as(a);
    return g ? g->guards : std::vector<std::string>{};
  };
  return detail::build_subsets_over(set.guard_ases, guards_of, dir, thr, rng);
}

struct SubsetRepair {
  std::vector<Subset> subsets;
  std::size_t repaired{0};
  std::size_t created{0};
  std::vector<GuardSetId> deficient;  // still below tau_down afterwards
};

// Subsets below tau_down take today's new guards of the set, those from the
// subset's own ASes first, until they reach tau_up. Unused new guards form
// new subsets. Departed guards must already be removed.
inline SubsetRepair repair_subsets(const Set& set, std::span<const std::string> new_guards, const GuardDirectory& dir,
                                   const Thresholds& thr, std::uint64_t seed) {
  SubsetRepair out;
  out.subsets = set.subsets;
  for (auto& s : out.subsets) {
    s.bandwidth_mbps = 0;
    for (const auto& g : s.guards) s.bandwidth_mbps += dir.bandwidth(g);
  }
  auto rng = make_rng(seed, {set.id});

  std::vector<std::string> pool(new_guards.begin(), new_guards.end());
  std::sort(pool.begin(), pool.end());
  stable_shuffle(pool.begin(), pool.end(), rng);
  std::vector<char> used(pool.size(), 0);

  std::vector<std::size_t> damaged;
  for (std::size_t i = 0; i < out.subsets.size(); ++i)
    if (out.subsets[i].bandwidth_mbps < thr.tau_down) damaged.push_back(i);
  std::sort(damaged.begin(), damaged.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = out.subsets[a];
    const auto& y = out.subsets[b];
    return std::tie(x.bandwidth_mbps, x.id) < std::tie(y.bandwidth_mbps, y.id);
  });

  for (auto i : damaged) {
    auto& sub = out.subsets[i];
    std::set<AsNumber> own;
    for (const auto& g : sub.guards)
      if (const auto* r = dir.find(g)) own.insert(r->asn);
    bool took = false;
    for (int tier = 0; tier < 2 && sub.bandwidth_mbps < thr.tau_up; ++tier) {
      for (std::size_t k = 0; k < pool.size() && sub.bandwidth_mbps < thr.tau_up; ++k) {
        if (used[k]) continue;
        const auto* r = dir.find(pool[k]);
        if (!r) continue;
        bool same_as = own.count(r->asn) != 0;
        if ((tier == 0) != same_as) continue;
        sub.guards.push_back(pool[k]);
        sub.bandwidth_mbps += r->bandwidth_mbps;
        used[k] = 1;
        took = true;
      }
    }
    if (took) ++out.repaired;
  }

  std::map<AsNumber, std::vector<std::string>> rest;
  for (std::size_t k = 0; k < pool.size(); ++k)
    if (!used[k])
      if (const auto* r = dir.find(pool[k])) rest[r->asn].push_back(pool[k]);
  if (!rest.empty()) {
    std::vector<AsNumber> ases;
    for (auto& [a, gs] : rest) {
      std::sort(gs.begin(), gs.end());
      ases.push_back(a);
    }
    auto fresh = detail::build_subsets_over(
        ases, [&](AsNumber a) { return rest.at(a); }, dir, thr, rng);
    out.created = fresh.size();
    for (auto& s : fresh) out.subsets.push_back(std::move(s));
  }
  for (const auto& s : out.subsets)
    if (s.bandwidth_mbps < thr.tau_down) out.deficient.push_back(s.id);
  return out;
}

// --- daily update ----------------------------------------------------------

struct ChangeLog {
  std::size_t supersets_created{0};
  std::size_t supersets_dismantled{0};
  std::size_t sets_created{0};
  std::size_t sets_dismantled{0};
  std::size_t subsets_created{0};
  std::size_t subsets_dismantled{0};
  std::size_t subsets_repaired{0};
  std::vector<MergeEvent> merges;

  bool empty() const {
    return supersets_created == 0 && supersets_dismantled == 0 && sets_created == 0 && sets_dismantled == 0 &&
           subsets_created == 0 && subsets_dismantled == 0 && subsets_repaired == 0 && merges.empty();
  }
};

namespace detail {

// A subset formed from guards that once founded a still-living subset would
// hash to that subset's id; salt until the id is free.
inline void claim_subset_id(Subset& s, std::unordered_set<GuardSetId>& taken) {
  for (std::uint64_t salt = 1; !taken.insert(s.id).second; ++salt)
    s.id = to_guard_set_id(
        StableHasher{}.u64(static_cast<std::uint64_t>(Level::subset)).u64(s.id).u64(salt).digest());
}

inline void refresh_bandwidths(Hierarchy& h, const GuardDirectory& dir) {
  for (auto& ss : h.supersets) {
    ss.bandwidth_mbps = 0;
    for (auto& set : ss.sets) {
      set.bandwidth_mbps = 0;
      for (auto& sub : set.subsets) {
        sub.bandwidth_mbps = 0;
        for (const auto& g : sub.guards) sub.bandwidth_mbps += dir.bandwidth(g);
        set.bandwidth_mbps += sub.bandwidth_mbps;
      }
      ss.bandwidth_mbps += set.bandwidth_mbps;
    }
  }
}

}  // namespace detail

// Applies one day's guards to the hierarchy: departures are dropped, then
// supersets, sets and subsets are updated in that order. Deterministic given
// the inputs and day_seed.
inline std::pair<Hierarchy, ChangeLog> full_update(Hierarchy h, const GuardDirectory& dir, const AsGraph& graph,
                                                   const Thresholds& thr, std::uint64_t day_seed) {
  ChangeLog log;

  // 1. drop departed guards and guard ASes
  for (auto& ss : h.supersets) {
    std::erase_if(ss.guard_ases, [&](AsNumber a) { return dir.find_as(a) == nullptr; });
    for (auto& set : ss.sets) {
      std::erase_if(set.guard_ases, [&](AsNumber a) { return dir.find_as(a) == nullptr; });
      for (auto& sub : set.subsets) {
        std::erase_if(sub.guards, [&](const std::string& g) {
          const auto* r = dir.find(g);
          return !r || !std::binary_search(set.guard_ases.begin(), set.guard_ases.end(), r->asn);
        });
      }
      log.subsets_dismantled += static_cast<std::size_t>(
          std::erase_if(set.subsets, [](const Subset& s) { return s.guards.empty(); }));
    }
    log.sets_dismantled +=
        static_cast<std::size_t>(std::erase_if(ss.sets, [](const Set& s) { return s.guard_ases.empty(); }));
  }
  log.supersets_dismantled += static_cast<std::size_t>(
      std::erase_if(h.supersets, [](const Superset& s) { return s.guard_ases.empty(); }));

  // 2. supersets
  std::set<AsNumber> placed;
  for (const auto& ss : h.supersets) placed.insert(ss.guard_ases.begin(), ss.guard_ases.end());
  std::vector<GuardAs> fresh_ases;
  for (const auto& [a, g] : dir.ases())
    if (!placed.count(a)) fresh_ases.push_back(g);

  std::set<GuardSetId> old_ss;
  for (const auto& ss : h.supersets) old_ss.insert(ss.id);
  for (auto& ss : h.supersets) ss.bandwidth_mbps = detail::sum_as_bandwidth(ss.guard_ases, dir);

  SupersetLog slog;
  if (h.supersets.empty()) {
    if (!fresh_ases.empty()) h.supersets = build_supersets(fresh_ases, graph, thr, &slog);
  } else {
    h.supersets = update_supersets(std::move(h.supersets), fresh_ases, graph, thr, &slog);
  }
  log.merges = std::move(slog.merges);
  std::set<GuardSetId> new_ss;
  for (const auto& ss : h.supersets) new_ss.insert(ss.id);
  for (auto id : new_ss)
    if (!old_ss.count(id)) ++log.supersets_created;
  for (auto id : old_ss)
    if (!new_ss.count(id)) ++log.supersets_dismantled;

  // ids of surviving subsets; new subsets must not reuse one
  std::unordered_set<GuardSetId> taken;
  for (const auto& ss : h.supersets)
    for (const auto& s : ss.sets)
      for (const auto& sub : s.subsets) taken.insert(sub.id);

  // 3. sets and 4. subsets
  for (auto& ss : h.supersets) {
    std::set<AsNumber> in_sets;
    for (const auto& s : ss.sets) in_sets.insert(s.guard_ases.begin(), s.guard_ases.end());
    std::vector<AsNumber> unplaced;
    for (auto a : ss.guard_ases)
      if (!in_sets.count(a)) unplaced.push_back(a);

    if (ss.sets.empty()) {
      ss.sets = build_sets(ss, graph, dir, thr);
      log.sets_created += ss.sets.size();
    } else if (!unplaced.empty() ||
               std::any_of(ss.sets.begin(), ss.sets.end(), [&](const Set& s) {
                 return detail::sum_as_bandwidth(s.guard_ases, dir) < thr.tau_down;
               })) {
      auto upd = update_sets(ss, unplaced, graph, dir, thr);
      ss.sets = std::move(upd.sets);
      log.sets_created += upd.created.size();
      log.sets_dismantled += upd.dismantled.size();
    }

    for (auto& set : ss.sets) {
      // guards of member ASes not already held by one of the set's subsets
      std::unordered_set<std::string> held;
      for (auto& sub : set.subsets) {
        std::erase_if(sub.guards, [&](const std::string& g) {
          const auto* r = dir.find(g);
          return !r || !std::binary_search(set.guard_ases.begin(), set.guard_ases.end(), r->asn);
        });
        held.insert(sub.guards.begin(), sub.guards.end());
      }
      log.subsets_dismantled += static_cast<std::size_t>(
          std::erase_if(set.subsets, [](const Subset& s) { return s.guards.empty(); }));
      std::vector<std::string> fresh;
      for (auto a : set.guard_ases)
        if (const auto* g = dir.find_as(a))
          for (const auto& fp : g->guards)
            if (!held.count(fp)) fresh.push_back(fp);

      if (set.subsets.empty()) {
        Set tmp = set;
        tmp.guard_ases.clear();
        std::set<AsNumber> fresh_as;
        for (const auto& fp : fresh) fresh_as.insert(dir.find(fp)->asn);
        tmp.guard_ases.assign(fresh_as.begin(), fresh_as.end());
        set.subsets = build_subsets(tmp, dir, thr, day_seed);
        for (auto& sub : set.subsets) detail::claim_subset_id(sub, taken);
        log.subsets_created += set.subsets.size();
      } else if (!fresh.empty() || std::any_of(set.subsets.begin(), set.subsets.end(), [&](const Subset& s) {
                   double bw = 0;
                   for (const auto& g : s.guards) bw += dir.bandwidth(g);
                   return bw < thr.tau_down;
                 })) {
        auto kept = set.subsets.size();
        auto rep = repair_subsets(set, fresh, dir, thr, day_seed);
        set.subsets = std::move(rep.subsets);
        for (std::size_t i = kept; i < set.subsets.size(); ++i) detail::claim_subset_id(set.subsets[i], taken);
        log.subsets_repaired += rep.repaired;
        log.subsets_created += rep.created;
      }
    }
  }

  // guards of a dismantled set that joined no new set are already in the
  // residual set's fresh pool; drop any sets left without subsets
  for (auto& ss : h.supersets)
    log.sets_dismantled +=
        static_cast<std::size_t>(std::erase_if(ss.sets, [](const Set& s) { return s.subsets.empty(); }));
  detail::refresh_bandwidths(h, dir);
  return {std::move(h), std::move(log)};
}

inline Hierarchy build_hierarchy(const GuardDirectory& dir, const AsGraph& graph, const Thresholds& thr,
                                 std::uint64_t seed) {
  return full_update(Hierarchy{}, dir, graph, thr, seed).first;
}

// Throws InvariantError if the containment chain or disjointness is broken.
inline void check_hierarchy(const Hierarchy& h, const GuardDirectory& dir, const AsGraph& graph) {
  std::unordered_set<std::string> seen_guards;
  std::set<AsNumber> seen_ases;
  std::set<GuardSetId> ids;
  auto fail = [](const std::string& what) { throw InvariantError(what); };
  for (const auto& ss : h.supersets) {
    if (!is_valid_guard_set_id(ss.id) || !ids.insert(ss.id).second) fail("bad superset id");
    std::set<AsNumber> ss_members(ss.guard_ases.begin(), ss.guard_ases.end());
    std::set<AsNumber> covered;
    for (auto a : ss.guard_ases)
      if (!graph.in_cone(ss.root, a)) fail("guard AS" + to_string(a) + " outside superset cone");
    for (const auto& set : ss.sets) {
      if (!is_valid_guard_set_id(set.id) || !ids.insert(set.id).second) fail("bad set id");
      for (auto a : set.guard_ases) {
        if (!ss_members.count(a)) fail("set member outside superset");
        if (!covered.insert(a).second) fail("guard AS in two sets");
        if (set.root && !graph.in_cone(*set.root, a)) fail("set member outside set cone");
      }
      for (const auto& sub : set.subsets) {
        if (!is_valid_guard_set_id(sub.id) || !ids.insert(sub.id).second) fail("bad subset id");
        for (const auto& g : sub.guards) {
          const auto* r = dir.find(g);
          if (!r) fail("departed guard " + g + " still placed");
          if (!std::binary_search(set.guard_ases.begin(), set.guard_ases.end(), r->asn))
            fail("guard " + g + " outside its set's ASes");
          if (!seen_guards.insert(g).second) fail("guard " + g + " in two subsets");
        }
      }
    }
    if (covered != ss_members) fail("sets do not cover superset");
    for (auto a : ss.guard_ases)
      if (!seen_ases.insert(a).second) fail("guard AS in two supersets");
  }
  for (const auto& [fp, r] : dir.guards())
    if (!seen_guards.count(fp)) fail("guard " + fp + " not placed");
}

}  // namespace guardsets
