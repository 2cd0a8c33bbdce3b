#pragma once

// Synthetic inputs for desk-scale runs: a tiered AS topology with prefixes,
// and a day-by-day guard trace with joins, departures, outages, bandwidth
// noise and optional bandwidth shocks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "guardsets/asgraph.hpp"
#include "guardsets/assignment.hpp"
#include "guardsets/core.hpp"
#include "guardsets/ingest.hpp"

namespace guardsets {

struct WorldConfig {
  std::size_t tier1{8};
  std::size_t tier2{40};
  std::size_t tier3{200};
  std::size_t stubs{1200};
  double multihome_prob{0.35};
  double tier2_peering_prob{0.1};
  double more_specific_prob{0.15};
  std::size_t hosting_ases{500};
  double hosting_zipf{1.0};
};

struct World {
  AsGraph graph;
  PrefixMap prefixes;
  std::vector<AsNumber> hosting;        // ASes that host relays
  std::vector<double> hosting_weight;   // relative popularity
};

namespace detail {

inline Prefix slash16(std::size_t index) {
  auto hi = static_cast<Ipv4>(16 + index / 256);
  auto mid = static_cast<Ipv4>(index % 256);
  return {hi << 24 | mid << 16, 16};
}

}  // namespace detail

// Tier-1 clique, tier-2 and tier-3 transit, stub edge. ASNs are
// 100+i (tier 1), 1000+i (tier 2), 10000+i (tier 3) and 20000+i (stubs).
inline World generate_world(const WorldConfig& cfg, std::uint64_t seed) {
  World w;
  auto rng = make_rng(seed, {0x301dULL});
  std::vector<AsNumber> t1, t2, t3, stub;
  for (std::size_t i = 0; i < cfg.tier1; ++i) t1.emplace_back(static_cast<std::uint32_t>(100 + i));
  for (std::size_t i = 0; i < cfg.tier2; ++i) t2.emplace_back(static_cast<std::uint32_t>(1000 + i));
  for (std::size_t i = 0; i < cfg.tier3; ++i) t3.emplace_back(static_cast<std::uint32_t>(10000 + i));
  for (std::size_t i = 0; i < cfg.stubs; ++i) stub.emplace_back(static_cast<std::uint32_t>(20000 + i));
  for (auto a : t1) w.graph.add_node(a);

  for (std::size_t i = 0; i < t1.size(); ++i)
    for (std::size_t j = i + 1; j < t1.size(); ++j) w.graph.add_p2p(t1[i], t1[j]);

  auto attach = [&](AsNumber child, const std::vector<AsNumber>& uppers) {
    auto first = uppers[uniform_index(rng, uppers.size())];
    w.graph.add_p2c(first, child);
    while (uppers.size() > 1 && uniform01(rng) < cfg.multihome_prob) {
      auto more = uppers[uniform_index(rng, uppers.size())];
      if (more != first) w.graph.add_p2c(more, child);
      if (uniform01(rng) < 0.5) break;
    }
  };
  for (auto a : t2) attach(a, t1);
  for (std::size_t i = 0; i < t2.size(); ++i)
    for (std::size_t j = i + 1; j < t2.size(); ++j)
      if (uniform01(rng) < cfg.tier2_peering_prob) w.graph.add_p2p(t2[i], t2[j]);
  for (auto a : t3) attach(a, t2);
  std::vector<AsNumber> transit = t3;
  transit.insert(transit.end(), t2.begin(), t2.end());
  for (auto a : stub) attach(a, uniform01(rng) < 0.8 ? t3 : transit);

  std::vector<AsNumber> all;
  for (const auto* tier : {&t1, &t2, &t3, &stub}) all.insert(all.end(), tier->begin(), tier->end());
  for (std::size_t i = 0; i < all.size(); ++i) w.prefixes.add(detail::slash16(i), all[i]);
  // some customers also originate a /24 carved out of a provider's /16
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto provs = w.graph.providers(all[i]);
    if (provs.empty() || uniform01(rng) >= cfg.more_specific_prob) continue;
    auto p = provs[uniform_index(rng, provs.size())];
    auto pidx = static_cast<std::size_t>(std::find(all.begin(), all.end(), p) - all.begin());
    auto base = detail::slash16(pidx);
    Ipv4 net = base.network | static_cast<Ipv4>(1 + uniform_index(rng, 254)) << 8;
    w.prefixes.add({net, 24}, all[i]);
  }

  // relays live mostly in stubs and regional transit
  std::vector<AsNumber> pool = stub;
  pool.insert(pool.end(), t3.begin(), t3.end());
  std::sort(pool.begin(), pool.end());
  stable_shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(cfg.hosting_ases, pool.size()));
  for (std::size_t r = 0; r < pool.size(); ++r) {
    w.hosting.push_back(pool[r]);
    w.hosting_weight.push_back(1.0 / std::pow(static_cast<double>(r + 1), cfg.hosting_zipf));
  }
  return w;
}

struct BandwidthShock {
  int day{0};
  double fraction{0.3};  // share of guards affected
  double factor{0.3};    // bandwidth multiplier while the shock lasts
  int duration{30};
};

struct TraceConfig {
  std::size_t guards{2000};
  int days{365};
  double bw_median{5.0};
  double bw_sigma{1.0};
  double bw_floor{2.0};
  double leave_prob{0.004};       // permanent departure, per guard per day
  double outage_prob{0.01};       // temporary outage start, per guard per day
  double outage_mean_days{2.0};
  double noise_sigma{0.08};       // daily log-bandwidth innovation
  double noise_persistence{0.9};
  bool outage_resets_uptime{true};
  std::vector<BandwidthShock> shocks;
  std::string start_date{"2015-01-01"};
};

namespace detail {

struct SynthRelay {
  std::string fingerprint;
  Ipv4 address{0};
  double base_bw{0};
  double log_noise{0};
  int joined{0};
  int up_since{0};
  int down_until{-1};
  double wfu{1.0};
  bool gone{false};
};

inline std::string synth_fingerprint(std::uint64_t seed, std::uint64_t serial) {
  char buf[48];
  auto a = derive_seed(seed, {serial, 1});
  auto b = derive_seed(seed, {serial, 2});
  auto c = derive_seed(seed, {serial, 3});
  std::snprintf(buf, sizeof buf, "%016llX%016llX%08llX", static_cast<unsigned long long>(a),
                static_cast<unsigned long long>(b), static_cast<unsigned long long>(c >> 32));
  return buf;
}

inline std::string add_days(const std::string& start, int days) {
  int y = 0, m = 0, d = 0;
  if (std::sscanf(start.c_str(), "%d-%d-%d", &y, &m, &d) != 3) return start;
  // days-from-civil and back
  auto to_days = [](int y, int m, int d) {
    y -= m <= 2;
    int era = (y >= 0 ? y : y - 399) / 400;
    int yoe = y - era * 400;
    int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
  };
  int z = to_days(y, m, d) + days + 719468;
  int era = (z >= 0 ? z : z - 146096) / 146097;
  int doe = z - era * 146097;
  int yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  int yy = yoe + era * 400;
  int doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  int mp = (5 * doy + 2) / 153;
  int dd = doy - (153 * mp + 2) / 5 + 1;
  int mm = mp + (mp < 10 ? 3 : -9);
  yy += mm <= 2;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", yy, mm, dd);
  return buf;
}

}  // namespace detail

// Days are numbered from 1. The guard population is held near cfg.guards:
// each departure is matched on average by one arrival. Bandwidth is
// log-normal, resampled below the floor, with persistent daily noise.
inline std::vector<NetworkSnapshot> generate_trace(const TraceConfig& cfg, const World& world, std::uint64_t seed) {
  if (world.hosting.empty()) throw std::invalid_argument("world has no hosting ASes");
  auto rng = make_rng(seed, {0x7ace0ULL});
  std::lognormal_distribution<double> bw_dist(std::log(cfg.bw_median), cfg.bw_sigma);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
  detail::Cumulative hosting(world.hosting_weight);
  std::vector<std::vector<Prefix>> host_prefixes;
  for (auto a : world.hosting) host_prefixes.push_back(world.prefixes.prefixes_of(a));

  std::uint64_t serial = 0;
  auto sample_bw = [&] {
    for (int i = 0; i < 64; ++i) {
      double b = bw_dist(rng);
      if (b >= cfg.bw_floor) return b;
    }
    return cfg.bw_floor;
  };
  auto new_relay = [&](int day, int age) {
    detail::SynthRelay r;
    r.fingerprint = detail::synth_fingerprint(seed, serial++);
    auto h = hosting.pick(uniform01(rng));
    const auto& ps = host_prefixes[h];
    for (int attempt = 0; attempt < 16; ++attempt) {
      const auto& p = ps[uniform_index(rng, ps.size())];
      r.address = p.network | static_cast<Ipv4>(1 + uniform_index(rng, static_cast<std::size_t>(p.span() - 2)));
      if (world.prefixes.lookup(r.address) == world.hosting[h]) break;
    }
    r.base_bw = sample_bw();
    r.joined = day - age;
    r.up_since = day - age;
    r.wfu = 0.985 + 0.015 * uniform01(rng);
    return r;
  };

  std::vector<detail::SynthRelay> relays;
  for (std::size_t i = 0; i < cfg.guards; ++i) relays.push_back(new_relay(1, 8 + static_cast<int>(uniform_index(rng, 400))));

  // which relays each shock touches is fixed when it starts
  std::vector<std::set<std::string>> shocked(cfg.shocks.size());

  std::vector<NetworkSnapshot> out;
  for (int day = 1; day <= cfg.days; ++day) {
    if (day > 1) {
      std::size_t departed = 0;
      for (auto& r : relays) {
        if (r.gone) continue;
        if (uniform01(rng) < cfg.leave_prob) {
          r.gone = true;
          ++departed;
          continue;
        }
        if (r.down_until < day && uniform01(rng) < cfg.outage_prob) {
          std::geometric_distribution<int> len(1.0 / std::max(1.0, cfg.outage_mean_days));
          r.down_until = day + len(rng);
        }
        if (r.down_until == day && cfg.outage_resets_uptime) r.up_since = day;
        r.log_noise = cfg.noise_persistence * r.log_noise + noise(rng);
      }
      std::poisson_distribution<int> arrivals(cfg.leave_prob * static_cast<double>(cfg.guards));
      int n = arrivals(rng);
      for (int i = 0; i < n; ++i) relays.push_back(new_relay(day, 0));
      std::erase_if(relays, [](const detail::SynthRelay& r) { return r.gone; });
    }
    for (std::size_t s = 0; s < cfg.shocks.size(); ++s)
      if (cfg.shocks[s].day == day)
        for (const auto& r : relays)
          if (uniform01(rng) < cfg.shocks[s].fraction) shocked[s].insert(r.fingerprint);

    NetworkSnapshot snap;
    snap.day = day;
    snap.date = detail::add_days(cfg.start_date, day - 1);
    for (const auto& r : relays) {
      if (r.down_until >= day) continue;
      double bw = r.base_bw * std::exp(r.log_noise);
      for (std::size_t s = 0; s < cfg.shocks.size(); ++s) {
        const auto& sh = cfg.shocks[s];
        if (day >= sh.day && day < sh.day + sh.duration && shocked[s].count(r.fingerprint)) bw *= sh.factor;
      }
      bw = std::max(bw, cfg.bw_floor + 0.05);
      Relay rel;
      rel.fingerprint = r.fingerprint;
      rel.address = r.address;
      rel.bandwidth_mbps = std::round(bw * 1000.0) / 1000.0;
      rel.flags = RelayFlags{RelayFlag::Guard, RelayFlag::Running, RelayFlag::Stable, RelayFlag::Fast,
                             RelayFlag::Valid};
      rel.uptime_days = static_cast<double>(day - r.up_since);
      rel.wfu = std::round(r.wfu * 10000.0) / 10000.0;
      snap.relays.push_back(std::move(rel));
    }
    out.push_back(std::move(snap));
  }
  return out;
}

}  // namespace guardsets
