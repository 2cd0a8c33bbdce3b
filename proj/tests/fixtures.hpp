#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "guardsets.hpp"

namespace fixtures {

using namespace guardsets;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::string data_path(const std::string& rel) { return std::string(GUARDSETS_TEST_DATA) + "/" + rel; }

inline AsNumber as(std::uint32_t v) { return AsNumber{v}; }

inline std::vector<AsNumber> ases(std::initializer_list<std::uint32_t> v) {
  std::vector<AsNumber> out;
  for (auto a : v) out.push_back(AsNumber{a});
  return out;
}

// Seven-level toy topology: 1 -> {2,3,4}; 2 -> {5,6,7}; 3 -> {8,9};
// 4 -> {10,11,12}; 8 -> {13,14}.
inline AsGraph toy_graph() { return parse_as_rel(read_file(data_path("toy/as_rel.txt"))); }

// Guards of the toy snapshot that map to a known AS (ten guards on the nine leaves).
inline GuardDirectory toy_directory() {
  auto prefixes = parse_prefix_table(read_file(data_path("toy/prefixes.txt")));
  auto snap = parse_snapshot_csv(read_file(data_path("toy/snapshot.csv")));
  return GuardDirectory::from_labeled(label_guards(eligible_guards(snap), prefixes), toy_graph());
}

inline std::vector<AsNumber> toy_leaves() { return ases({5, 6, 7, 9, 10, 11, 12, 13, 14}); }

// Seven candidate cones under a super-root. Each overlap pair shares one
// multihomed guard AS (25 MBps); each cone also has one private guard AS
// (20 MBps).
struct ConeOverlapFixture {
  AsGraph graph;
  GuardDirectory dir;
  Superset superset;
  std::vector<std::pair<int, int>> overlaps;

  static constexpr std::uint32_t kRoot = 100;
  static AsNumber cone_root(int i) { return AsNumber{static_cast<std::uint32_t>(kRoot + i)}; }
  static int cone_index(AsNumber a) { return static_cast<int>(a.value - kRoot); }
};

inline ConeOverlapFixture cone_overlap_fixture() {
  ConeOverlapFixture f;
  f.overlaps = {{1, 2}, {1, 4}, {1, 5}, {2, 3}, {2, 5}, {2, 6}, {3, 6}, {3, 7}};
  AsNumber p{ConeOverlapFixture::kRoot};
  std::vector<AsNumber> guard_ases;
  int n = 0;
  auto add_guard_as = [&](AsNumber a, double bw) {
    char fp[41];
    std::snprintf(fp, sizeof fp, "%040d", ++n);
    f.dir.add({fp, a, bw});
    guard_ases.push_back(a);
  };
  for (int i = 1; i <= 7; ++i) {
    f.graph.add_p2c(p, ConeOverlapFixture::cone_root(i));
    AsNumber priv{static_cast<std::uint32_t>(300 + i)};
    f.graph.add_p2c(ConeOverlapFixture::cone_root(i), priv);
    add_guard_as(priv, 20);
  }
  std::uint32_t k = 200;
  for (auto [a, b] : f.overlaps) {
    AsNumber shared{++k};
    f.graph.add_p2c(ConeOverlapFixture::cone_root(a), shared);
    f.graph.add_p2c(ConeOverlapFixture::cone_root(b), shared);
    add_guard_as(shared, 25);
  }
  std::sort(guard_ases.begin(), guard_ases.end());
  f.superset.id = superset_id_for(p);
  f.superset.root = p;
  f.superset.guard_ases = guard_ases;
  for (auto a : guard_ases) f.superset.bandwidth_mbps += f.dir.as_bandwidth(a);
  return f;
}

inline std::string fingerprint(int n) {
  char fp[41];
  std::snprintf(fp, sizeof fp, "%040d", n);
  return fp;
}

// Synthetic world and trace small enough for unit tests.
struct SmallWorld {
  World world;
  std::vector<NetworkSnapshot> trace;
};

inline SmallWorld small_world(std::uint64_t seed, int days, std::size_t guards = 600) {
  WorldConfig wc;
  wc.stubs = 400;
  wc.hosting_ases = 150;
  SmallWorld s;
  s.world = generate_world(wc, seed);
  TraceConfig tc;
  tc.days = days;
  tc.guards = guards;
  s.trace = generate_trace(tc, s.world, seed);
  return s;
}

// Four clients, two guard sets, three exits. Only the suspects 1299 and 3356
// ever sit on both sides of a stream. Weights are small integers so the brute
// force below works in exact integer arithmetic.
//   A = {201 w1, 202 w1} weight 1, B = {203 w2} weight 3
//   exits 301 w1 (1299 toward 401), 302 w3 (3356 both ways), 303 w4 (clean)
//   101: A via 1299, B clean      102: A clean, B via 3356
//   103: all clean, 203 reverse only   104: 201 via 1299, no path to 202
struct PathsecFixture {
  std::vector<PathsecClient> clients;
  std::vector<GuardSetOption> sets;
  std::vector<WeightedAs> exits;
  AsPathOracle oracle;
  ExitProbabilityTable exit_table{{AsNumber{1299}, AsNumber{3356}}};
};

inline PathsecFixture pathsec_fixture() {
  PathsecFixture f;
  auto path = [&](std::initializer_list<std::uint32_t> v) {
    AsPath p;
    for (auto a : v) p.push_back(AsNumber{a});
    f.oracle.add(p.front(), p.back(), p);
  };
  for (std::uint32_t c = 101; c <= 104; ++c) f.clients.push_back({AsNumber{c}, ases({401, 402, 401, 402})});
  f.sets.push_back({1000000000000001ULL, 1, {{AsNumber{201}, 1}, {AsNumber{202}, 1}}});
  f.sets.push_back({1000000000000002ULL, 3, {{AsNumber{203}, 2}}});
  f.exits = {{AsNumber{301}, 1}, {AsNumber{302}, 3}, {AsNumber{303}, 4}};

  path({101, 1299, 201});
  path({101, 7, 202});
  path({101, 8, 203});
  path({102, 5, 201});
  path({102, 6, 202});
  path({102, 3356, 203});
  path({103, 9, 201});
  path({103, 9, 202});
  path({203, 9, 103});
  path({104, 1299, 201});
  path({104, 10, 203});

  path({301, 1299, 401});
  path({301, 20, 402});
  path({302, 3356, 401});
  path({402, 3356, 302});
  path({303, 21, 401});
  path({303, 22, 402});

  f.exit_table.set_row(AsNumber{301}, {0.5, 0});
  f.exit_table.set_row(AsNumber{302}, {0, 0.5});
  f.exit_table.set_row(AsNumber{303}, {0, 0});
  return f;
}

// Enumerates every (set, guard, exit) combination with integer weights.
inline std::vector<double> pathsec_brute_force(const PathsecFixture& f, bool filtered) {
  auto on_path = [&](AsNumber a, AsNumber b) {
    std::set<AsNumber> out;
    bool any = false;
    for (auto [x, y] : {std::pair{a, b}, std::pair{b, a}})
      if (const auto* p = f.oracle.find(x, y)) {
        out.insert(p->begin(), p->end());
        any = true;
      }
    return std::pair{any, out};
  };
  auto suspect = [](AsNumber a) { return a.value == 1299 || a.value == 3356; };

  std::vector<bool> exit_ok;
  bool any_exit = false;
  for (const auto& e : f.exits) {
    const auto& row = f.exit_table.row(e.asn);
    bool ok = !filtered || *std::max_element(row.begin(), row.end()) < 0.1;
    exit_ok.push_back(ok);
    any_exit = any_exit || ok;
  }
  if (!any_exit) exit_ok.assign(f.exits.size(), true);

  std::vector<double> rates;
  for (const auto& c : f.clients) {
    std::vector<bool> set_ok;
    bool any_set = false;
    for (const auto& s : f.sets) {
      bool ok = true;
      if (filtered)
        for (const auto& g : s.guards) {
          auto [known, ases] = on_path(c.asn, g.asn);
          if (!known || std::any_of(ases.begin(), ases.end(), suspect)) ok = false;
        }
      set_ok.push_back(ok);
      any_set = any_set || ok;
    }
    if (!any_set) set_ok.assign(f.sets.size(), true);

    double sum = 0;
    int counted = 0;
    for (auto d : c.destinations) {
      long long vuln = 0, known = 0;
      for (std::size_t s = 0; s < f.sets.size(); ++s) {
        if (!set_ok[s]) continue;
        long long guard_total = 0;
        for (const auto& g : f.sets[s].guards) guard_total += static_cast<long long>(g.weight);
        // scale to a common denominator: set weight times the other sets' guard totals
        long long other = 1;
        for (std::size_t t = 0; t < f.sets.size(); ++t) {
          if (t == s || !set_ok[t]) continue;
          long long gt = 0;
          for (const auto& g : f.sets[t].guards) gt += static_cast<long long>(g.weight);
          other *= gt;
        }
        for (const auto& g : f.sets[s].guards)
          for (std::size_t e = 0; e < f.exits.size(); ++e) {
            if (!exit_ok[e]) continue;
            auto [k1, entry] = on_path(c.asn, g.asn);
            auto [k2, out] = on_path(f.exits[e].asn, d);
            if (!k1 || !k2) continue;
            long long w = static_cast<long long>(f.sets[s].weight) * other * static_cast<long long>(g.weight) *
                          static_cast<long long>(f.exits[e].weight);
            known += w;
            bool hit = false;
            for (auto a : entry) hit = hit || out.count(a);
            if (hit) vuln += w;
          }
      }
      if (known > 0) {
        sum += static_cast<double>(vuln) / static_cast<double>(known);
        ++counted;
      }
    }
    rates.push_back(counted ? sum / counted : 0.0);
  }
  return rates;
}

}  // namespace fixtures
