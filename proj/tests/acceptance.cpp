// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// fails. GUARDSETS_ACCEPTANCE_SEEDS lowers the seed count for quick local runs.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "fixtures.hpp"

using namespace guardsets;
using fixtures::as;
using fixtures::ases;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& what, const std::string& detail) {
  std::cout << "criterion " << n << ": " << (ok ? "PASS" : "FAIL") << "  " << what << "  [" << detail << "]"
            << std::endl;
  if (!ok) ++failures;
}

// Runs one check; an exception counts as a failure.
void check(int n, const std::string& what, const std::function<bool(std::ostringstream&)>& body) {
  std::ostringstream detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail << "exception: " << e.what();
  }
  report(n, ok, what, detail.str());
}

double median(std::vector<double> v) { return median_of(std::move(v)); }

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

bool within_4_sigma(std::size_t count, std::size_t n, double p) {
  double mean = static_cast<double>(n) * p;
  double sigma = std::sqrt(static_cast<double>(n) * p * (1 - p));
  return std::abs(static_cast<double>(count) - mean) <= 4 * sigma;
}

// --- 1-4: exact structural examples ----------------------------------------

bool quantization(std::ostringstream& d) {
  std::vector<GuardBandwidth> g{{"a", 10}, {"b", 70}, {"c", 90}};
  auto q = quantize(g);
  std::vector<double> got;
  for (const auto& x : q) got.push_back(x.bandwidth_mbps);
  for (double v : got) d << v << ' ';
  return got == std::vector<double>{70, 45, 45, 10};
}

bool cones(std::ostringstream& d) {
  auto g = fixtures::toy_graph();
  auto c8 = g.cone(as(8)).members;
  auto c1 = g.cone(as(1)).members;
  std::vector<AsNumber> all = g.nodes();
  std::sort(c8.begin(), c8.end());
  std::sort(c1.begin(), c1.end());
  std::sort(all.begin(), all.end());
  d << "cone(8) size " << c8.size() << ", cone(1) size " << c1.size() << " of " << all.size();
  return c8 == ases({8, 13, 14}) && c1 == all;
}

bool packing(std::ostringstream& d) {
  auto f = fixtures::cone_overlap_fixture();
  auto cands = candidate_cones(f.superset, f.graph, f.dir, 40);
  auto packed = pack_independent_cones(cands, 20);
  std::vector<int> got;
  for (const auto& c : packed) got.push_back(fixtures::ConeOverlapFixture::cone_index(c.root));
  std::sort(got.begin(), got.end());

  // every subfamily, overlap judged from the graph's cones
  std::set<AsNumber> guard_set(f.superset.guard_ases.begin(), f.superset.guard_ases.end());
  std::vector<std::set<AsNumber>> foot;
  for (const auto& c : cands) {
    std::set<AsNumber> s;
    for (auto m : f.graph.cone(c.root).members)
      if (guard_set.count(m)) s.insert(m);
    foot.push_back(s);
  }
  std::size_t best = 0, best_count = 0;
  std::uint32_t best_mask = 0;
  for (std::uint32_t mask = 0; mask < (1u << cands.size()); ++mask) {
    bool ok = true;
    for (std::size_t i = 0; i < cands.size() && ok; ++i)
      for (std::size_t j = i + 1; j < cands.size() && ok; ++j)
        if ((mask >> i & 1) && (mask >> j & 1))
          for (auto a : foot[i])
            if (foot[j].count(a)) ok = false;
    if (!ok) continue;
    auto n = static_cast<std::size_t>(__builtin_popcount(mask));
    if (n > best) {
      best = n;
      best_count = 0;
      best_mask = mask;
    }
    if (n == best) ++best_count;
  }
  std::vector<int> oracle;
  for (std::size_t i = 0; i < cands.size(); ++i)
    if (best_mask >> i & 1) oracle.push_back(fixtures::ConeOverlapFixture::cone_index(cands[i].root));
  d << cands.size() << " candidates, selected";
  for (int i : got) d << ' ' << i;
  d << ", oracle max " << best << " (" << best_count << " maximum families)";
  return got == std::vector<int>{4, 5, 6, 7} && oracle == got && best_count == 1;
}

bool first_merge(std::ostringstream& d) {
  auto g = fixtures::toy_graph();
  auto dir = fixtures::toy_directory();
  Thresholds thr;
  thr.n_supersets = 3;
  SupersetLog log;
  build_supersets(dir.guard_as_list(), g, thr, &log);
  if (log.merges.empty()) return false;
  const auto& m = log.merges.front();
  d << "popped AS" << m.popped.value << ", provider AS" << m.provider.value << ", replaced";
  for (auto a : m.replaced) d << " AS" << a.value;
  return m == MergeEvent{as(13), as(8), ases({13, 14})};
}

// --- 5-9: year-long runs over 50 seeds --------------------------------------

struct SeedResults {
  // 5
  double tuning_low_day2{0}, tuning_low_day120{0}, tuning_high_day120{0};
  double bw_break_share{0};
  // 6
  bool confined{true};
  std::size_t confined_days{0}, compromised_subset_days{0};
  // 7
  double growth_as_central{0}, growth_bw_central{0}, growth_as_botnet{0}, growth_bw_botnet{0};
  // 8
  double bw_tau30{0}, bw_tau60{0}, as_tau30{0}, as_tau60{0};
  // 9
  std::size_t targets{0}, targets_as{0}, targets_bw{0};
};

// Share of day-1 honest BW sets that fall below tau_down at least once.
double bw_break_share(const std::vector<NetworkSnapshot>& trace, const Thresholds& thr) {
  BwSetState st;
  std::set<GuardSetId> original, broke;
  for (const auto& snap : trace) {
    std::vector<GuardBandwidth> g;
    for (const auto& r : eligible_guards(snap, {}, EligibilityMode::synthetic)) g.push_back({r.fingerprint, r.bandwidth_mbps});
    if (original.empty()) {
      st = initial_bw_sets(g, thr);
      for (const auto& s : st.sets) original.insert(s.id);
      continue;
    }
    std::set<GuardSetId> alive;
    refresh_bw_sets(st, g, thr.tau_up);
    for (const auto& s : st.sets) {
      alive.insert(s.id);
      if (original.count(s.id) && s.bandwidth_mbps < thr.tau_down) broke.insert(s.id);
    }
    for (auto id : original)
      if (!alive.count(id)) broke.insert(id);
    std::unordered_map<std::string, double> gb;
    for (const auto& x : g) gb[x.fingerprint] = x.bandwidth_mbps;
    repair_step(st, thr, gb);
  }
  return original.empty() ? 0.0 : static_cast<double>(broke.size()) / static_cast<double>(original.size());
}

SeedResults run_seed(std::uint64_t seed) {
  SeedResults r;
  auto world = generate_world({}, seed);
  auto trace = generate_trace({}, world, seed);
  SimulationInputs in{&trace, &world.graph, &world.prefixes, {}};

  auto base = [&](Design d, Strategy s, double fraction) {
    SimulationConfig c;
    c.design = d;
    c.clients = 10000;
    c.seed = seed;
    c.daily_anonymity = false;
    c.adversary.strategy = s;
    c.adversary.bandwidth_fraction = fraction;
    return c;
  };

  // 5
  r.bw_break_share = bw_break_share(trace, Thresholds{});
  auto low = run_simulation(base(Design::bw, Strategy::bw_tuning_high, 0.01), in);
  auto high = run_simulation(base(Design::bw, Strategy::bw_tuning_high, 0.25), in);
  r.tuning_low_day2 = low.at_day(2).compromised_set_fraction;
  r.tuning_low_day120 = low.at_day(120).compromised_set_fraction;
  r.tuning_high_day120 = high.at_day(120).compromised_set_fraction;

  // 6 and 7
  SimulationInputs watched = in;
  watched.observer = [&](const DayView& v) {
    bool ok = confined_to_adversary_ases(*v.hierarchy, *v.malicious, *v.adversary_ases);
    r.confined = r.confined && ok;
    ++r.confined_days;
    if (!compromised_subsets(*v.hierarchy, *v.malicious).empty()) ++r.compromised_subset_days;
  };
  auto as_central = run_simulation(base(Design::as, Strategy::centralized, 0.05), watched);
  auto bw_central = run_simulation(base(Design::bw, Strategy::centralized, 0.05), in);
  auto as_botnet = run_simulation(base(Design::as, Strategy::botnet, 0.05), in);
  auto bw_botnet = run_simulation(base(Design::bw, Strategy::botnet, 0.05), in);
  r.growth_as_central = relative_growth(as_central, 2, 365);
  r.growth_bw_central = relative_growth(bw_central, 2, 365);
  r.growth_as_botnet = relative_growth(as_botnet, 2, 365);
  r.growth_bw_botnet = relative_growth(bw_botnet, 2, 365);

  // 8
  auto swept = [&](Design d, double tau) {
    auto c = base(d, Strategy::centralized, 0.05);
    c.thresholds.tau_up = tau;
    c.thresholds.tau_down = tau / 2;
    return run_simulation(c, in).days.back().compromised_client_fraction;
  };
  r.bw_tau30 = swept(Design::bw, 30);
  r.bw_tau60 = swept(Design::bw, 60);
  r.as_tau30 = swept(Design::as, 30);
  r.as_tau60 = swept(Design::as, 60);

  // 9: ten concurrent targets per network
  auto targeted = [&](Design d) {
    auto c = base(d, Strategy::targeted, 0.01);
    c.clients = 10;
    auto m = run_simulation(c, in);
    std::size_t n = 0;
    for (const auto& cl : m.final_clients) n += cl.compromised_ever;
    return n;
  };
  r.targets = 10;
  r.targets_as = targeted(Design::as);
  r.targets_bw = targeted(Design::bw);
  return r;
}

// --- 10-14 ---------------------------------------------------------------------

bool anonymity(std::ostringstream& d) {
  auto world = generate_world({}, 1);
  TraceConfig tc;
  tc.days = 1;
  auto trace = generate_trace(tc, world, 1);
  std::map<Design, double> med;
  for (auto design : {Design::as, Design::bw, Design::single}) {
    SimulationConfig c;
    c.design = design;
    c.clients = 100000;
    c.seed = 1;
    auto m = run_simulation(c, {&trace, &world.graph, &world.prefixes});
    med[design] = median_anonymity_set(m.final_clients);
  }
  double as_ = med[Design::as], bw = med[Design::bw], single = med[Design::single];
  d << "median AS " << as_ << ", BW " << bw << ", SINGLE " << single << "; AS/SINGLE " << fmt(as_ / single)
    << ", AS/BW " << fmt(as_ / bw);
  return as_ >= 5 * single && std::abs(as_ / bw - 1) <= 0.3;
}

bool selection(std::ostringstream& d) {
  const std::size_t n = 10000;
  auto rng = make_rng(11);
  std::vector<double> w{10, 30};
  std::size_t a = 0;
  for (std::size_t i = 0; i < n; ++i) a += weighted_pick_index(w, uniform01(rng)) == 0;
  bool pair_ok = within_4_sigma(a, n, 0.25) && within_4_sigma(n - a, n, 0.75);
  d << "(10,30): " << a << "/" << n - a;

  auto sw = fixtures::small_world(12, 1, 600);
  auto relays = eligible_guards(sw.trace.front(), {}, EligibilityMode::synthetic);
  auto dir = GuardDirectory::from_labeled(label_guards(relays, sw.world.prefixes), sw.world.graph);
  Thresholds thr;
  auto h = build_hierarchy(dir, sw.world.graph, thr, 12);
  AsAssigner assigner(h, thr);
  std::map<GuardSetId, double> expected;
  double total = 0;
  for (const auto& ss : h.supersets)
    if (ss.bandwidth_mbps >= thr.tau_down) total += ss.bandwidth_mbps;
  for (const auto& ss : h.supersets) {
    if (ss.bandwidth_mbps < thr.tau_down) continue;
    double st = 0;
    for (const auto& s : ss.sets) st += s.bandwidth_mbps;
    for (const auto& s : ss.sets) {
      double bt = 0;
      for (const auto& x : s.subsets) bt += x.bandwidth_mbps;
      for (const auto& x : s.subsets) expected[x.id] = ss.bandwidth_mbps / total * (s.bandwidth_mbps / st) * (x.bandwidth_mbps / bt);
    }
  }
  std::map<GuardSetId, std::size_t> seen;
  for (std::size_t i = 0; i < n; ++i) ++seen[assigner.assign(rng).subset_id];
  std::size_t bad = 0;
  for (const auto& [id, p] : expected)
    if (!within_4_sigma(seen[id], n, p)) ++bad;
  for (const auto& [id, k] : seen)
    if (!expected.count(id)) ++bad;
  d << "; three-level: " << expected.size() << " subsets, " << bad << " outside 4 sigma";
  return pair_ok && bad == 0;
}

bool pathsec(std::ostringstream& d) {
  auto f = fixtures::pathsec_fixture();
  PathsecConfig plain, filtered;
  filtered.denasa = true;
  filtered.exit_table = &f.exit_table;
  auto a = vulnerable_stream_rate(f.clients, f.sets, f.exits, f.oracle, plain);
  auto b = vulnerable_stream_rate(f.clients, f.sets, f.exits, f.oracle, filtered);
  auto oa = fixtures::pathsec_brute_force(f, false);
  auto ob = fixtures::pathsec_brute_force(f, true);
  bool ok = a.size() == 4 && b.size() == 4;
  double worst = 0;
  for (std::size_t i = 0; ok && i < a.size(); ++i) {
    worst = std::max({worst, std::abs(a[i].rate - oa[i]), std::abs(b[i].rate - ob[i])});
    ok = ok && b[i].rate <= a[i].rate;
  }
  d << "unfiltered";
  for (const auto& r : a) d << ' ' << fmt(r.rate);
  d << "; filtered";
  for (const auto& r : b) d << ' ' << fmt(r.rate);
  d << "; max |exact - brute force| " << worst;
  return ok && worst <= 1e-12;
}

bool glines(std::ostringstream& d) {
  GuardSetLine g{1111111111111111ULL, 2222222222222222ULL, 3333333333333333ULL};
  auto line = format_g_line(g);
  bool ok = line.size() == 53 && parse_g_line(line) == g;

  auto world = generate_world({}, 13);
  GuardDirectory dir;
  auto rng = make_rng(13);
  for (int i = 0; i < 1500; ++i) {
    auto asn = world.hosting[uniform_index(rng, world.hosting.size())];
    dir.add({fixtures::fingerprint(i + 1), asn, 1.0 + 30.0 * uniform01(rng)});
  }
  Thresholds thr;
  auto h = build_hierarchy(dir, world.graph, thr, 13);
  auto text = emit_g_lines(h);
  auto parsed = parse_g_lines(text);
  auto want = guard_set_lines(h);
  bool round = parsed.size() == want.size();
  for (std::size_t i = 0; round && i < parsed.size(); ++i) round = parsed[i] == want[i].second;
  std::string again;
  for (const auto& p : parsed) again += format_g_line(p);
  round = round && again == text;
  double kb = static_cast<double>(text.size()) / 1000.0;
  d << "line " << line.size() << " bytes; " << dir.size() << " guards -> " << text.size() << " bytes (" << kb
    << " KB); round trip " << (round ? "exact" : "differs");
  return ok && round && text.size() == 53 * dir.size() && kb >= 75 && kb <= 85;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(GUARDSETS_CLI) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

bool determinism(std::ostringstream& d) {
  namespace fs = std::filesystem;
  auto root = fs::temp_directory_path() / ("guardsets_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "run.cfg");
    cfg << "trace.days = 40\ntrace.guards = 500\nworld.stubs = 300\nworld.hosting_ases = 120\nclients = 2000\n";
  }
  std::string cfg = "--config " + (root / "run.cfg").string() + " --seed 17";
  std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "simulate " + cfg + " --design bw --strategy bw-tuning-high --fraction 0.05 --write-clients"},
      {"simulate-as", "simulate " + cfg + " --design as --strategy botnet --fraction 0.05 --write-clients"},
      {"attack", "attack " + cfg + " --design as --strategy centralized --fraction 0.05 --seeds 3"},
      {"gen-trace", "gen-trace " + cfg}};
  std::size_t compared = 0;
  bool ok = true;
  for (const auto& [name, args] : commands) {
    for (const char* run : {"a", "b"})
      if (run_cli(args + " --out-dir " + (root / run / name).string()) != 0) {
        d << name << " failed; ";
        ok = false;
      }
    for (const auto& e : fs::directory_iterator(root / "a" / name)) {
      auto other = root / "b" / name / e.path().filename();
      if (e.path().extension() != ".csv") continue;
      ++compared;
      if (!fs::exists(other) || fixtures::read_file(e.path().string()) != fixtures::read_file(other.string())) {
        d << name << "/" << e.path().filename().string() << " differs; ";
        ok = false;
      }
    }
  }
  fs::remove_all(root);
  d << compared << " CSV files compared across " << commands.size() << " commands";
  return ok && compared >= 8;
}

}  // namespace

int main() {
  auto t0 = std::chrono::steady_clock::now();
  check(1, "quantization {10,70,90} -> [70,45,45,10]", quantization);
  check(2, "toy cones: cone(AS8) = {8,13,14}, cone(AS1) = all", cones);
  check(3, "cone packing selects {4,5,6,7}, exhaustive oracle agrees", packing);
  check(4, "first merge on toy leaves replaces {AS13,AS14} with AS8", first_merge);

  int seeds = 50;
  if (const char* e = std::getenv("GUARDSETS_ACCEPTANCE_SEEDS")) seeds = std::max(1, std::atoi(e));
  std::vector<SeedResults> rs;
  for (int s = 1; s <= seeds; ++s) {
    rs.push_back(run_seed(static_cast<std::uint64_t>(s)));
    std::cerr << "seed " << s << "/" << seeds << " done" << std::endl;
  }
  auto col = [&](double SeedResults::*f) {
    std::vector<double> v;
    for (const auto& r : rs) v.push_back(r.*f);
    return v;
  };

  check(5, "BW tuning: day-120 >= 4x day-2 at 1%, 25% >= 3x 1% at day 120", [&](std::ostringstream& d) {
    auto breaks = col(&SeedResults::bw_break_share);
    double d2 = median(col(&SeedResults::tuning_low_day2));
    double d120 = median(col(&SeedResults::tuning_low_day120));
    double h120 = median(col(&SeedResults::tuning_high_day120));
    double min_break = *std::min_element(breaks.begin(), breaks.end());
    d << seeds << " seeds; BW sets broken per year min " << fmt(min_break) << " median " << fmt(median(breaks))
      << "; compromised set fraction 1%: day2 " << fmt(d2) << " day120 " << fmt(d120) << "; 25% day120 "
      << fmt(h120);
    return min_break >= 0.15 && d120 > 0 && d120 >= 4 * d2 && h120 >= 3 * d120;
  });

  check(6, "centralized vs AS: compromised subsets confined to sets holding the adversary AS",
        [&](std::ostringstream& d) {
          std::size_t bad = 0, days = 0, hit = 0;
          for (const auto& r : rs) {
            bad += !r.confined;
            days += r.confined_days;
            hit += r.compromised_subset_days;
          }
          d << seeds << " seeds, " << days << " seed-days checked, " << hit << " with compromised subsets, " << bad
            << " seeds violating";
          return bad == 0 && hit > 0;
        });

  check(7, "5% adversary: growth(AS) < growth(BW) in >= 45/50 seeds, centralized and botnet",
        [&](std::ostringstream& d) {
          int central = 0, botnet = 0;
          for (const auto& r : rs) {
            central += r.growth_as_central < r.growth_bw_central;
            botnet += r.growth_as_botnet < r.growth_bw_botnet;
          }
          d << "centralized " << central << "/" << seeds << ", botnet " << botnet << "/" << seeds
            << "; median growth AS/BW centralized " << fmt(median(col(&SeedResults::growth_as_central))) << "/"
            << fmt(median(col(&SeedResults::growth_bw_central))) << ", botnet "
            << fmt(median(col(&SeedResults::growth_as_botnet))) << "/"
            << fmt(median(col(&SeedResults::growth_bw_botnet)));
          int need = (45 * seeds + 49) / 50;
          return central >= need && botnet >= need;
        });

  check(8, "tau_up 30 -> 60: BW final compromise +25% or more, AS within 15%", [&](std::ostringstream& d) {
    double b30 = median(col(&SeedResults::bw_tau30)), b60 = median(col(&SeedResults::bw_tau60));
    double a30 = median(col(&SeedResults::as_tau30)), a60 = median(col(&SeedResults::as_tau60));
    double bw_rel = (b60 - b30) / b30, as_rel = (a60 - a30) / a30;
    d << "BW " << fmt(b30) << " -> " << fmt(b60) << " (" << fmt(100 * bw_rel, 3) << "%), AS " << fmt(a30) << " -> "
      << fmt(a60) << " (" << fmt(100 * as_rel, 3) << "%)";
    return b30 > 0 && a30 > 0 && bw_rel >= 0.25 && std::abs(as_rel) <= 0.15;
  });

  check(9, "targeted attack: BW compromises >= 1.5x the AS targets", [&](std::ostringstream& d) {
    std::size_t n = 0, a = 0, b = 0;
    for (const auto& r : rs) {
      n += r.targets;
      a += r.targets_as;
      b += r.targets_bw;
    }
    double fa = static_cast<double>(a) / static_cast<double>(n), fb = static_cast<double>(b) / static_cast<double>(n);
    d << n << " targets; AS " << a << " (" << fmt(fa) << "), BW " << b << " (" << fmt(fb) << ")";
    return fb > fa && fb >= 1.5 * fa;
  });

  check(10, "100k clients: AS median anonymity set >= 5x SINGLE, within 30% of BW", anonymity);
  check(11, "weighted selection within 4 sigma (pair and three-level)", selection);
  check(12, "stream rate equals brute force; filtered <= unfiltered per client", pathsec);
  check(13, "g lines: round trip, 53 bytes per guard, 1,500 guards in [75,85] KB", glines);
  check(14, "same seed gives byte-identical CSV outputs", determinism);

  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << "(" << 14 - failures << "/14 criteria, " << fmt(secs, 4)
            << " s)" << std::endl;
  return failures ? 1 : 0;
}
