// guardsets command line: build, simulate, attack, pathsec, gen-trace, report.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "guardsets.hpp"

namespace fs = std::filesystem;
using namespace guardsets;

namespace {

using detail::format_double;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Flags shared by the simulation-style commands.
struct Common {
  std::string as_rel, prefixes, trace, config;
  std::string design;
  std::optional<double> tau_up, tau_down, fraction;
  std::optional<std::size_t> n_supersets, clients;
  std::optional<std::uint64_t> seed;
  std::string strategy;
  std::string out_dir = ".";
  unsigned jobs = 1;
};

void add_common(CLI::App* app, Common& c, bool with_design = true) {
  app->add_option("--as-rel", c.as_rel, "AS relationship file (a|b|rel)");
  app->add_option("--prefixes", c.prefixes, "prefix table (<ip>/<len> <asn>)");
  app->add_option("--trace", c.trace, "trace CSV (day,fingerprint,ip,bandwidth_mbps,flags,uptime_days,wfu)");
  app->add_option("--config", c.config, "key = value run configuration");
  if (with_design) app->add_option("--design", c.design, "as, bw or single")->check(CLI::IsMember({"as", "bw", "single"}));
  app->add_option("--tau-up", c.tau_up, "formation threshold, MBps");
  app->add_option("--tau-down", c.tau_down, "damage threshold, MBps");
  app->add_option("--n-supersets", c.n_supersets, "target number of supersets");
  app->add_option("--clients", c.clients, "number of simulated clients");
  app->add_option("--seed", c.seed, "seed for every random choice");
  app->add_option("--strategy", c.strategy, "adversary strategy");
  app->add_option("--fraction", c.fraction, "adversary share of guard bandwidth");
  app->add_option("--out-dir", c.out_dir, "output directory");
  app->add_option("--jobs", c.jobs, "parallel runs")->check(CLI::PositiveNumber);
}

RunConfig resolve_config(const Common& c) {
  RunConfig rc;
  if (!c.config.empty()) rc = parse_run_config(read_text(c.config));
  auto& s = rc.sim;
  if (c.seed) s.seed = *c.seed;
  if (!c.design.empty()) s.design = parse_design(c.design);
  if (c.tau_up) s.thresholds.tau_up = *c.tau_up;
  if (c.tau_down) s.thresholds.tau_down = *c.tau_down;
  if (c.n_supersets) s.thresholds.n_supersets = *c.n_supersets;
  if (c.clients) s.clients = *c.clients;
  if (!c.strategy.empty()) s.adversary.strategy = parse_strategy(c.strategy);
  if (c.fraction) s.adversary.bandwidth_fraction = *c.fraction;
  s.thresholds.validate();
  return rc;
}

// Either all three network inputs are given or none (synthetic world).
struct Network {
  AsGraph graph;
  PrefixMap prefixes;
  std::vector<NetworkSnapshot> trace;
  bool synthetic{false};
};

Network load_network(const Common& c, const RunConfig& rc, std::uint64_t seed) {
  Network n;
  bool any = !c.as_rel.empty() || !c.prefixes.empty() || !c.trace.empty();
  if (!any) {
    auto world = generate_world(rc.world, seed);
    n.trace = generate_trace(rc.trace, world, seed);
    n.graph = std::move(world.graph);
    n.prefixes = std::move(world.prefixes);
    n.synthetic = true;
    return n;
  }
  if (c.trace.empty()) throw UsageError("--trace is required with --as-rel/--prefixes");
  if (c.prefixes.empty() && rc.sim.design != Design::single) throw UsageError("--prefixes is required");
  if (c.as_rel.empty() && rc.sim.design == Design::as) throw UsageError("--as-rel is required for the AS design");
  if (!c.as_rel.empty()) n.graph = parse_as_rel(read_text(c.as_rel));
  if (!c.prefixes.empty()) n.prefixes = parse_prefix_table(read_text(c.prefixes));
  n.trace = parse_trace_csv(read_text(c.trace));
  return n;
}

MetricsSeries simulate_one(const RunConfig& rc, const Network& n) {
  SimulationInputs in{&n.trace, &n.graph, n.prefixes.entries().empty() ? nullptr : &n.prefixes, {}};
  return run_simulation(rc.sim, in);
}

json trace_params(const RunConfig& rc) {
  json t = {{"guards", rc.trace.guards},
            {"days", rc.trace.days},
            {"bw_median", rc.trace.bw_median},
            {"bw_sigma", rc.trace.bw_sigma},
            {"bw_floor", rc.trace.bw_floor},
            {"leave_prob", rc.trace.leave_prob},
            {"outage_prob", rc.trace.outage_prob},
            {"noise_sigma", rc.trace.noise_sigma},
            {"start_date", rc.trace.start_date}};
  json w = {{"tier1", rc.world.tier1},
            {"tier2", rc.world.tier2},
            {"tier3", rc.world.tier3},
            {"stubs", rc.world.stubs},
            {"hosting_ases", rc.world.hosting_ases}};
  return {{"trace", t}, {"world", w}};
}

json input_manifest(const Common& c, const Network& n, const RunConfig& rc) {
  if (n.synthetic) return {{"inputs", "synthetic"}, {"generator", trace_params(rc)}};
  return {{"inputs", {{"as_rel", c.as_rel}, {"prefixes", c.prefixes}, {"trace", c.trace}}}};
}

// --- build ---------------------------------------------------------------

struct BuildArgs {
  Common c;
  std::string snapshot;
  int day = 0;
  std::string eligibility = "consensus";
};

int cmd_build(const BuildArgs& a) {
  if (a.c.as_rel.empty() || a.c.prefixes.empty()) throw UsageError("build needs --as-rel and --prefixes");
  if (a.snapshot.empty() == a.c.trace.empty()) throw UsageError("build needs exactly one of --snapshot or --trace");
  auto rc = resolve_config(a.c);
  auto graph = parse_as_rel(read_text(a.c.as_rel));
  auto prefixes = parse_prefix_table(read_text(a.c.prefixes));
  NetworkSnapshot snap;
  if (!a.snapshot.empty()) {
    snap = parse_snapshot_csv(read_text(a.snapshot));
  } else {
    auto trace = parse_trace_csv(read_text(a.c.trace));
    if (trace.empty()) throw UsageError("empty trace");
    auto it = std::find_if(trace.begin(), trace.end(), [&](const NetworkSnapshot& s) { return s.day == a.day; });
    if (a.day == 0) it = trace.begin();
    if (it == trace.end()) throw UsageError("day " + std::to_string(a.day) + " not in trace");
    snap = *it;
  }
  auto mode = a.eligibility == "synthetic" ? EligibilityMode::synthetic : EligibilityMode::consensus;
  auto guards = label_guards(eligible_guards(snap, {}, mode), prefixes);
  auto dir = GuardDirectory::from_labeled(guards, graph);
  auto [h, log] = full_update(Hierarchy{}, dir, graph, rc.sim.thresholds, derive_seed(rc.sim.seed, {0xb111dULL}));
  check_hierarchy(h, dir, graph);

  auto doc = hierarchy_to_json(h, &dir, &log.merges);
  doc["manifest"] = "manifest.json";
  fs::path out(a.c.out_dir);
  write_text(out / "hierarchy.json", doc.dump(2) + "\n");
  write_text(out / "glines.txt", "# manifest=manifest.json\n" + emit_router_g_lines(h));
  json extra = {{"command", "build"},
                {"inputs", {{"as_rel", a.c.as_rel}, {"prefixes", a.c.prefixes}, {"snapshot", a.snapshot}, {"trace", a.c.trace}}}};
  write_text(out / "manifest.json", manifest_json(rc.sim, extra).dump(2) + "\n");
  std::cout << "supersets " << h.supersets.size() << ", sets " << h.set_count() << ", subsets " << h.subset_count()
            << ", guards " << dir.size() << "\n";
  return 0;
}

// --- simulate --------------------------------------------------------------

int cmd_simulate(const Common& c, bool write_clients) {
  auto rc = resolve_config(c);
  auto net = load_network(c, rc, rc.sim.seed);
  auto m = simulate_one(rc, net);
  fs::path out(c.out_dir);
  write_text(out / "metrics.csv", metrics_csv(m));
  write_text(out / "attack_trace.csv", attack_trace_csv(m));
  if (write_clients) write_text(out / "clients.csv", clients_csv(m.final_clients));
  json extra = input_manifest(c, net, rc);
  extra["command"] = "simulate";
  write_text(out / "manifest.json", manifest_json(rc.sim, extra).dump(2) + "\n");
  const auto& last = m.days.back();
  std::cout << "days " << m.days.size() << ", guard sets " << last.guard_sets << ", compromised clients "
            << format_double(last.compromised_client_fraction) << "\n";
  return 0;
}

// --- attack ----------------------------------------------------------------

struct AttackArgs {
  Common c;
  int seeds = 1;
};

int cmd_attack(const AttackArgs& a) {
  auto rc = resolve_config(a.c);
  if (rc.sim.adversary.strategy == Strategy::none) throw UsageError("attack needs --strategy");
  if (a.seeds < 1) throw UsageError("--seeds must be at least 1");
  bool shared = !a.c.trace.empty();
  std::optional<Network> shared_net;
  if (shared) shared_net = load_network(a.c, rc, rc.sim.seed);

  std::vector<MetricsSeries> results(static_cast<std::size_t>(a.seeds));
  std::atomic<int> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&] {
    for (int i; (i = next++) < a.seeds;) {
      try {
        RunConfig r = rc;
        r.sim.seed = derive_seed(rc.sim.seed, {static_cast<std::uint64_t>(i)});
        if (shared) {
          results[static_cast<std::size_t>(i)] = simulate_one(r, *shared_net);
        } else {
          auto net = load_network(a.c, r, r.sim.seed);
          results[static_cast<std::size_t>(i)] = simulate_one(r, net);
        }
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < std::max(1u, a.c.jobs); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);

  fs::path out(a.c.out_dir);
  std::ostringstream summary;
  summary << "# manifest=manifest.json\n";
  summary << "run,seed,design,strategy,fraction,day,sets_compromised,set_fraction,client_fraction,adversary_bandwidth_fraction\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& m = results[i];
    write_text(out / ("attack_run" + std::to_string(i) + ".csv"), attack_trace_csv(m));
    for (int day : {2, 30, 120, 365}) {
      auto it = std::find_if(m.days.begin(), m.days.end(), [&](const DayMetrics& d) { return d.day == day; });
      if (it == m.days.end()) continue;
      summary << i << ',' << m.config.seed << ',' << to_string(m.config.design) << ','
              << to_string(m.config.adversary.strategy) << ',' << format_double(m.config.adversary.bandwidth_fraction)
              << ',' << day << ',' << it->compromised_sets << ',' << format_double(it->compromised_set_fraction) << ','
              << format_double(it->compromised_client_fraction) << ','
              << format_double(it->adversary_bandwidth_fraction) << '\n';
    }
  }
  write_text(out / "attack_summary.csv", summary.str());
  json extra = {{"command", "attack"}, {"runs", a.seeds}};
  if (shared) extra["inputs"] = {{"as_rel", a.c.as_rel}, {"prefixes", a.c.prefixes}, {"trace", a.c.trace}};
  else extra["generator"] = trace_params(rc);
  write_text(out / "manifest.json", manifest_json(rc.sim, extra).dump(2) + "\n");
  std::vector<double> finals;
  for (const auto& m : results) finals.push_back(m.days.back().compromised_client_fraction);
  std::cout << "runs " << results.size() << ", median final compromised clients " << format_double(median_of(finals))
            << "\n";
  return 0;
}

// --- pathsec ---------------------------------------------------------------

struct PathsecArgs {
  Common c;
  std::string snapshot, paths, exits, clients, exit_table;
  bool denasa = false;
  std::size_t samples = 0;
};

// "asn,weight" lines; a header line is skipped.
std::vector<WeightedAs> parse_exits(std::string_view text) {
  std::vector<WeightedAs> out;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') return;
    auto f = detail::split(line, ',');
    std::uint32_t a = 0;
    double w = 0;
    if (f.size() != 2 || !detail::parse_int(f[0], a) || !detail::parse_double(f[1], w)) {
      if (line_no == 1) return;
      throw ParseError(line_no, "expected asn,weight");
    }
    out.push_back({AsNumber{a}, w});
  });
  return out;
}

// "client_asn,dest dest dest" lines; a header line is skipped.
std::vector<PathsecClient> parse_clients(std::string_view text) {
  std::vector<PathsecClient> out;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') return;
    auto f = detail::split(line, ',');
    std::uint32_t a = 0;
    if (f.size() != 2 || !detail::parse_int(f[0], a)) {
      if (line_no == 1) return;
      throw ParseError(line_no, "expected client_asn,destinations");
    }
    PathsecClient c{AsNumber{a}, {}};
    for (auto tok : detail::split_ws(f[1])) {
      std::uint32_t d = 0;
      if (!detail::parse_int(tok, d)) throw ParseError(line_no, "bad destination AS");
      c.destinations.push_back(AsNumber{d});
    }
    out.push_back(std::move(c));
  });
  return out;
}

int cmd_pathsec(const PathsecArgs& a) {
  if (a.c.as_rel.empty() || a.c.prefixes.empty() || a.snapshot.empty() || a.paths.empty() || a.exits.empty() ||
      a.clients.empty())
    throw UsageError("pathsec needs --as-rel, --prefixes, --snapshot, --paths, --exits and --client-file");
  auto rc = resolve_config(a.c);
  auto graph = parse_as_rel(read_text(a.c.as_rel));
  auto prefixes = parse_prefix_table(read_text(a.c.prefixes));
  auto snap = parse_snapshot_csv(read_text(a.snapshot));
  auto guards = label_guards(eligible_guards(snap), prefixes);
  auto dir = GuardDirectory::from_labeled(guards, graph);
  auto h = build_hierarchy(dir, graph, rc.sim.thresholds, derive_seed(rc.sim.seed, {0xb111dULL}));
  auto options = guard_set_options(h, dir, rc.sim.thresholds);
  auto oracle = parse_path_oracle(read_text(a.paths));
  auto exits = parse_exits(read_text(a.exits));
  auto clients = parse_clients(read_text(a.clients));
  std::optional<ExitProbabilityTable> table;
  if (!a.exit_table.empty()) table = parse_exit_table(read_text(a.exit_table));
  if (a.denasa && !table) throw UsageError("--denasa needs --exit-table");

  PathsecConfig cfg;
  cfg.denasa = a.denasa;
  cfg.exit_table = table ? &*table : nullptr;
  std::vector<ClientRate> rates;
  if (a.samples == 0) {
    rates = vulnerable_stream_rate(clients, options, exits, oracle, cfg);
  } else {
    auto rng = make_rng(rc.sim.seed, {0x9a7ULL});
    for (const auto& c : clients) {
      PathsecClient rep = c;
      rep.destinations.clear();
      for (std::size_t k = 0; k < a.samples; ++k) rep.destinations.insert(rep.destinations.end(), c.destinations.begin(), c.destinations.end());
      rates.push_back(sample_stream_rate(std::span(&rep, 1), options, exits, oracle, cfg, rng).front());
    }
  }
  std::ostringstream o;
  o << "# manifest=manifest.json\n";
  o << "client,client_asn,vulnerable_rate,skipped_streams\n";
  std::vector<double> all;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    o << i << ',' << clients[i].asn.value << ',' << format_double(rates[i].rate) << ',' << rates[i].skipped_streams
      << '\n';
    all.push_back(rates[i].rate);
  }
  fs::path out(a.c.out_dir);
  write_text(out / "pathsec.csv", o.str());
  json extra = {{"command", "pathsec"}, {"denasa", a.denasa}, {"samples", a.samples}};
  write_text(out / "manifest.json", manifest_json(rc.sim, extra).dump(2) + "\n");
  std::cout << "clients " << rates.size() << ", median vulnerable rate " << format_double(median_of(all)) << "\n";
  return 0;
}

// --- gen-trace -------------------------------------------------------------

int cmd_gen_trace(const Common& c) {
  auto rc = resolve_config(c);
  auto world = generate_world(rc.world, rc.sim.seed);
  auto trace = generate_trace(rc.trace, world, rc.sim.seed);
  fs::path out(c.out_dir);
  write_text(out / "as_rel.txt", "# manifest=manifest.json\n" + world.graph.serialize());
  write_text(out / "prefixes.txt", "# manifest=manifest.json\n" + world.prefixes.serialize());
  write_text(out / "trace.csv", write_trace_csv(trace));
  json extra = {{"command", "gen-trace"}, {"generator", trace_params(rc)}};
  write_text(out / "manifest.json", manifest_json(rc.sim, extra).dump(2) + "\n");
  std::cout << "days " << trace.size() << ", guards on day 1 " << trace.front().relays.size() << "\n";
  return 0;
}

// --- report ----------------------------------------------------------------

struct Acc {
  double first{0}, last{0}, min{0}, max{0}, sum{0};
  std::size_t n{0};
};

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir) {
  if (inputs.empty()) throw UsageError("report needs at least one metrics CSV");
  // family/metric -> per-input accumulators
  std::map<std::pair<std::string, std::string>, std::vector<Acc>> table;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto text = read_text(inputs[k]);
    bool header = false;
    detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
      auto line = detail::trim(raw);
      if (line.empty() || line.front() == '#') return;
      if (!header) {
        if (line != "day,family,metric,value") throw ParseError(line_no, inputs[k] + ": not a metrics CSV");
        header = true;
        return;
      }
      auto f = detail::split(line, ',');
      double v = 0;
      if (f.size() != 4 || !detail::parse_double(f[3], v)) throw ParseError(line_no, inputs[k] + ": bad row");
      auto& accs = table[{std::string(f[1]), std::string(f[2])}];
      accs.resize(inputs.size());
      auto& a = accs[k];
      if (a.n == 0) a.first = a.min = a.max = v;
      a.last = v;
      a.min = std::min(a.min, v);
      a.max = std::max(a.max, v);
      a.sum += v;
      ++a.n;
    });
  }
  std::ostringstream o;
  o << "# manifest=manifest.json\n";
  o << "family,metric,runs,median_first,median_last,min,max,mean\n";
  for (const auto& [key, accs] : table) {
    std::vector<double> firsts, lasts;
    double mn = std::numeric_limits<double>::infinity(), mx = -mn, sum = 0;
    std::size_t n = 0;
    for (const auto& a : accs) {
      if (a.n == 0) continue;
      firsts.push_back(a.first);
      lasts.push_back(a.last);
      mn = std::min(mn, a.min);
      mx = std::max(mx, a.max);
      sum += a.sum;
      n += a.n;
    }
    o << key.first << ',' << key.second << ',' << firsts.size() << ',' << format_double(median_of(firsts)) << ','
      << format_double(median_of(lasts)) << ',' << format_double(mn) << ',' << format_double(mx) << ','
      << format_double(sum / static_cast<double>(n)) << '\n';
  }
  fs::path out(out_dir);
  write_text(out / "report.csv", o.str());
  json m = {{"tool", "guardsets"}, {"version", std::string(kVersion)}, {"command", "report"}, {"inputs", inputs}};
  write_text(out / "manifest.json", m.dump(2) + "\n");
  std::cout << o.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Location-based guard sets: build, simulate and attack"};
  app.require_subcommand(1);

  BuildArgs build;
  auto* b = app.add_subcommand("build", "build a hierarchy from one snapshot; writes hierarchy.json and glines.txt");
  add_common(b, build.c, false);
  b->add_option("--snapshot", build.snapshot, "snapshot CSV (fingerprint,ip,bandwidth_mbps,flags,uptime_days,wfu)");
  b->add_option("--day", build.day, "day to take from --trace (default: first)");
  b->add_option("--eligibility", build.eligibility, "consensus (Guard flag) or synthetic (computed rules)")
      ->check(CLI::IsMember({"consensus", "synthetic"}));

  Common sim;
  bool sim_clients = false;
  auto* s = app.add_subcommand("simulate", "run one simulation; writes metrics.csv, attack_trace.csv");
  add_common(s, sim);
  s->add_flag("--write-clients", sim_clients, "also write clients.csv");

  AttackArgs attack;
  auto* at = app.add_subcommand("attack", "run an adversary scenario over several seeds");
  add_common(at, attack.c);
  at->add_option("--seeds", attack.seeds, "number of seeded runs");

  PathsecArgs ps;
  auto* p = app.add_subcommand("pathsec", "vulnerable-stream rates over supplied AS paths");
  add_common(p, ps.c, false);
  p->add_option("--snapshot", ps.snapshot, "snapshot CSV");
  p->add_option("--paths", ps.paths, "AS path CSV (src_asn,dst_asn,path)");
  p->add_option("--exits", ps.exits, "exit CSV (asn,weight)");
  p->add_option("--client-file", ps.clients, "client CSV (client_asn,destinations)");
  p->add_option("--exit-table", ps.exit_table, "exit suspect probability table");
  p->add_flag("--denasa", ps.denasa, "apply the suspect-AS filter");
  p->add_option("--samples", ps.samples, "Monte-Carlo repetitions per destination (0: exact)");

  Common gen;
  auto* g = app.add_subcommand("gen-trace", "write a synthetic world and trace");
  add_common(g, gen, false);

  std::vector<std::string> report_inputs;
  std::string report_out = ".";
  auto* r = app.add_subcommand("report", "summarize metrics CSVs");
  r->add_option("inputs", report_inputs, "metrics CSV files");
  r->add_option("--out-dir", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*b) return cmd_build(build);
    if (*s) return cmd_simulate(sim, sim_clients);
    if (*at) return cmd_attack(attack);
    if (*p) return cmd_pathsec(ps);
    if (*g) return cmd_gen_trace(gen);
    if (*r) return cmd_report(report_inputs, report_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
