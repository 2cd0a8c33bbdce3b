#pragma once

// AS-level stream vulnerability over a supplied AS path table, and the
// suspect-AS filter on guard sets and exits.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "guardsets/asgraph.hpp"
#include "guardsets/assignment.hpp"
#include "guardsets/core.hpp"
#include "guardsets/hierarchy.hpp"
#include "guardsets/ingest.hpp"

namespace guardsets {

using AsPath = std::vector<AsNumber>;

// Directed (src, dst) -> path table. Each direction is looked up on its own.
class AsPathOracle {
 public:
  void add(AsNumber src, AsNumber dst, AsPath path) {
    if (path.empty() || path.front() != src || path.back() != dst)
      throw std::invalid_argument("path for " + to_string(src) + "->" + to_string(dst) + " must run src..dst");
    paths_[key(src, dst)] = std::move(path);
  }

  const AsPath* find(AsNumber src, AsNumber dst) const {
    auto it = paths_.find(key(src, dst));
    return it == paths_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return paths_.size(); }

 private:
  static std::uint64_t key(AsNumber a, AsNumber b) { return std::uint64_t{a.value} << 32 | b.value; }
  std::unordered_map<std::uint64_t, AsPath> paths_;
};

// "src_asn,dst_asn,path" with the path as space-separated AS numbers.
inline AsPathOracle parse_path_oracle(std::string_view text) {
  AsPathOracle oracle;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') return;
    auto f = detail::split(line, ',');
    if (f.size() != 3) throw ParseError(line_no, "expected src_asn,dst_asn,path");
    std::uint32_t s = 0, d = 0;
    if (!detail::parse_int(f[0], s) || !detail::parse_int(f[1], d)) {
      if (line_no == 1) return;  // header
      throw ParseError(line_no, "bad AS number");
    }
    AsPath path;
    for (auto tok : detail::split_ws(f[2])) {
      std::uint32_t a = 0;
      if (!detail::parse_int(tok, a)) throw ParseError(line_no, "bad AS in path '" + std::string(tok) + "'");
      path.push_back(AsNumber{a});
    }
    try {
      oracle.add(AsNumber{s}, AsNumber{d}, std::move(path));
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
  });
  return oracle;
}

enum class Aggregator { max, sum };

struct SuspectConfig {
  std::set<AsNumber> entry_suspects{AsNumber{1299}, AsNumber{3356}};
  std::set<AsNumber> exit_suspects{AsNumber{1299}, AsNumber{3356}, AsNumber{6939}, AsNumber{174},
                                   AsNumber{2914}, AsNumber{3257}, AsNumber{9002}, AsNumber{6453}};
  double threshold{0.1};
  Aggregator aggregator{Aggregator::max};
  bool miss_drops_set{true};
};

// Rows are exit ASes, columns suspect ASes, cells the probability that the
// suspect appears on that exit's paths.
class ExitProbabilityTable {
 public:
  ExitProbabilityTable() = default;
  explicit ExitProbabilityTable(std::vector<AsNumber> columns) : columns_(std::move(columns)) {}

  void set_row(AsNumber exit, std::vector<double> p) {
    if (p.size() != columns_.size()) throw std::invalid_argument("row width does not match columns");
    for (double v : p)
      if (v < 0 || v > 1) throw std::invalid_argument("probability outside [0,1]");
    rows_[exit] = std::move(p);
  }

  const std::vector<AsNumber>& columns() const { return columns_; }

  const std::vector<double>& row(AsNumber exit) const {
    auto it = rows_.find(exit);
    if (it == rows_.end()) throw NotFoundError("exit AS" + to_string(exit) + " not in probability table");
    return it->second;
  }

  bool has_row(AsNumber exit) const { return rows_.count(exit) != 0; }

 private:
  std::vector<AsNumber> columns_;
  std::map<AsNumber, std::vector<double>> rows_;
};

// Header "exit_asn,<suspect>,<suspect>,...", then one row per exit AS.
inline ExitProbabilityTable parse_exit_table(std::string_view text) {
  ExitProbabilityTable table;
  bool have_header = false;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') return;
    auto f = detail::split(line, ',');
    if (!have_header) {
      std::vector<AsNumber> cols;
      for (std::size_t i = 1; i < f.size(); ++i) {
        std::uint32_t a = 0;
        if (!detail::parse_int(f[i], a)) throw ParseError(line_no, "bad suspect AS in header");
        cols.push_back(AsNumber{a});
      }
      table = ExitProbabilityTable(std::move(cols));
      have_header = true;
      return;
    }
    std::uint32_t e = 0;
    if (!detail::parse_int(f[0], e)) throw ParseError(line_no, "bad exit AS");
    std::vector<double> p;
    for (std::size_t i = 1; i < f.size(); ++i) {
      double v = 0;
      if (!detail::parse_double(f[i], v)) throw ParseError(line_no, "bad probability");
      p.push_back(v);
    }
    try {
      table.set_row(AsNumber{e}, std::move(p));
    } catch (const std::invalid_argument& ex) {
      throw ParseError(line_no, ex.what());
    }
  });
  return table;
}

namespace detail {

// ASes on the a<->b paths in either direction; nullopt if both are missing.
inline std::optional<std::set<AsNumber>> both_directions(const AsPathOracle& oracle, AsNumber a, AsNumber b) {
  const auto* fwd = oracle.find(a, b);
  const auto* rev = oracle.find(b, a);
  if (!fwd && !rev) return std::nullopt;
  std::set<AsNumber> out;
  if (fwd) out.insert(fwd->begin(), fwd->end());
  if (rev) out.insert(rev->begin(), rev->end());
  return out;
}

}  // namespace detail

// nullopt when a side has no path in either direction (stream skipped).
// Endpoint ASes count as on-path, so a client AS seen on the exit side makes
// the stream vulnerable.
inline std::optional<bool> stream_vulnerable(AsNumber client, AsNumber guard, AsNumber exit, AsNumber dest,
                                             const AsPathOracle& oracle) {
  auto entry = detail::both_directions(oracle, client, guard);
  auto out = detail::both_directions(oracle, exit, dest);
  if (!entry || !out) return std::nullopt;
  return std::any_of(entry->begin(), entry->end(), [&](AsNumber a) { return out->count(a) != 0; });
}

inline bool denasa_guardset_ok(AsNumber client, std::span<const AsNumber> guard_ases, const AsPathOracle& oracle,
                               const SuspectConfig& cfg) {
  for (auto g : guard_ases) {
    auto on_path = detail::both_directions(oracle, client, g);
    if (!on_path) {
      if (cfg.miss_drops_set) return false;
      continue;
    }
    for (auto a : *on_path)
      if (cfg.entry_suspects.count(a)) return false;
  }
  return true;
}

inline bool denasa_exit_ok(const ExitProbabilityTable& table, AsNumber exit, const SuspectConfig& cfg) {
  const auto& row = table.row(exit);
  double agg = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (!cfg.exit_suspects.count(table.columns()[j])) continue;
    agg = cfg.aggregator == Aggregator::max ? std::max(agg, row[j]) : agg + row[j];
  }
  return agg < cfg.threshold;
}

struct WeightedAs {
  AsNumber asn;
  double weight{0.0};
};

// One guard set as a client would draw it: its selection weight and its
// guards' ASes with per-stream pick weights.
struct GuardSetOption {
  GuardSetId id{0};
  double weight{0.0};
  std::vector<WeightedAs> guards;
};

struct PathsecClient {
  AsNumber asn;
  std::vector<AsNumber> destinations;  // one stream per entry
};

struct PathsecConfig {
  bool denasa{false};
  SuspectConfig suspects;
  const ExitProbabilityTable* exit_table{nullptr};
};

struct ClientRate {
  double rate{0.0};
  std::size_t skipped_streams{0};
};

namespace detail {

inline std::vector<double> normalized(std::vector<double> w) {
  double t = 0;
  for (double v : w) t += v;
  if (t > 0)
    for (auto& v : w) v /= t;
  return w;
}

inline std::vector<double> set_weights(const PathsecClient& c, std::span<const GuardSetOption> sets,
                                       const AsPathOracle& oracle, const PathsecConfig& cfg) {
  std::vector<double> w;
  for (const auto& s : sets) w.push_back(s.weight);
  if (!cfg.denasa) return normalized(w);
  std::vector<double> kept = w;
  bool any = false;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    std::vector<AsNumber> ases;
    for (const auto& g : sets[i].guards) ases.push_back(g.asn);
    if (!denasa_guardset_ok(c.asn, ases, oracle, cfg.suspects)) kept[i] = 0;
    any = any || kept[i] > 0;
  }
  return normalized(any ? kept : w);  // nothing passes: fall back to the plain draw
}

inline std::vector<double> exit_weights(std::span<const WeightedAs> exits, const PathsecConfig& cfg) {
  std::vector<double> w;
  for (const auto& e : exits) w.push_back(e.weight);
  if (!cfg.denasa || !cfg.exit_table) return normalized(w);
  std::vector<double> kept = w;
  bool any = false;
  for (std::size_t i = 0; i < exits.size(); ++i) {
    if (!denasa_exit_ok(*cfg.exit_table, exits[i].asn, cfg.suspects)) kept[i] = 0;
    any = any || kept[i] > 0;
  }
  return normalized(any ? kept : w);
}

}  // namespace detail

// Expected vulnerable fraction of each client's streams: the guard set is
// drawn by weight (filtered and renormalized under the suspect filter), then
// per stream a guard of the set and an exit. Streams with an unknown side are
// left out of the average.
inline std::vector<ClientRate> vulnerable_stream_rate(std::span<const PathsecClient> clients,
                                                      std::span<const GuardSetOption> sets,
                                                      std::span<const WeightedAs> exits, const AsPathOracle& oracle,
                                                      const PathsecConfig& cfg) {
  std::vector<ClientRate> out;
  auto pe = detail::exit_weights(exits, cfg);
  for (const auto& c : clients) {
    auto ps = detail::set_weights(c, sets, oracle, cfg);
    double total = 0;
    std::size_t counted = 0;
    ClientRate r;
    for (auto dest : c.destinations) {
      double vuln = 0, known = 0;
      for (std::size_t s = 0; s < sets.size(); ++s) {
        if (ps[s] == 0) continue;
        std::vector<double> gw;
        for (const auto& g : sets[s].guards) gw.push_back(g.weight);
        gw = detail::normalized(gw);
        for (std::size_t g = 0; g < gw.size(); ++g) {
          if (gw[g] == 0) continue;
          for (std::size_t e = 0; e < exits.size(); ++e) {
            if (pe[e] == 0) continue;
            auto v = stream_vulnerable(c.asn, sets[s].guards[g].asn, exits[e].asn, dest, oracle);
            if (!v) continue;
            double p = ps[s] * gw[g] * pe[e];
            known += p;
            if (*v) vuln += p;
          }
        }
      }
      if (known > 0) {
        total += vuln / known;
        ++counted;
      } else {
        ++r.skipped_streams;
      }
    }
    r.rate = counted ? total / static_cast<double>(counted) : 0.0;
    out.push_back(r);
  }
  return out;
}

// Monte-Carlo variant: one guard set per client, then a guard and an exit
// per stream.
inline std::vector<ClientRate> sample_stream_rate(std::span<const PathsecClient> clients,
                                                  std::span<const GuardSetOption> sets,
                                                  std::span<const WeightedAs> exits, const AsPathOracle& oracle,
                                                  const PathsecConfig& cfg, Rng& rng) {
  std::vector<ClientRate> out;
  auto pe = detail::exit_weights(exits, cfg);
  detail::Cumulative exit_cum(pe);
  for (const auto& c : clients) {
    auto ps = detail::set_weights(c, sets, oracle, cfg);
    detail::Cumulative set_cum(ps);
    const auto& s = sets[set_cum.pick(uniform01(rng))];
    std::vector<double> gw;
    for (const auto& g : s.guards) gw.push_back(g.weight);
    detail::Cumulative guard_cum(gw);
    ClientRate r;
    std::size_t vuln = 0, counted = 0;
    for (auto dest : c.destinations) {
      auto g = s.guards[guard_cum.pick(uniform01(rng))].asn;
      auto e = exits[exit_cum.pick(uniform01(rng))].asn;
      auto v = stream_vulnerable(c.asn, g, e, dest, oracle);
      if (!v) {
        ++r.skipped_streams;
        continue;
      }
      ++counted;
      vuln += *v;
    }
    r.rate = counted ? static_cast<double>(vuln) / static_cast<double>(counted) : 0.0;
    out.push_back(r);
  }
  return out;
}

// Guard-set options for an AS hierarchy: each subset weighted by the product
// of its superset, set and subset selection probabilities.
inline std::vector<GuardSetOption> guard_set_options(const Hierarchy& h, const GuardDirectory& dir,
                                                     const Thresholds& thr) {
  std::vector<GuardSetOption> out;
  double ss_total = 0;
  for (const auto& ss : h.supersets)
    if (ss.bandwidth_mbps >= thr.tau_down) ss_total += ss.bandwidth_mbps;
  if (ss_total <= 0) return out;
  for (const auto& ss : h.supersets) {
    if (ss.bandwidth_mbps < thr.tau_down) continue;
    double set_total = 0;
    for (const auto& s : ss.sets) set_total += s.bandwidth_mbps;
    for (const auto& s : ss.sets) {
      double sub_total = 0;
      for (const auto& sub : s.subsets) sub_total += sub.bandwidth_mbps;
      for (const auto& sub : s.subsets) {
        if (set_total <= 0 || sub_total <= 0) continue;
        GuardSetOption o;
        o.id = sub.id;
        o.weight = ss.bandwidth_mbps / ss_total * s.bandwidth_mbps / set_total * sub.bandwidth_mbps / sub_total;
        for (const auto& g : sub.guards)
          if (const auto* r = dir.find(g)) o.guards.push_back({r->asn, r->bandwidth_mbps});
        out.push_back(std::move(o));
      }
    }
  }
  return out;
}

}  // namespace guardsets
