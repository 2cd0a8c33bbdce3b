#pragma once

// Daily relay snapshots: consensus and CSV parsers, prefix-to-AS labeling and
// guard eligibility.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <cstdlib>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "guardsets/asgraph.hpp"
#include "guardsets/core.hpp"

namespace guardsets {

using Ipv4 = std::uint32_t;

inline std::optional<Ipv4> parse_ipv4(std::string_view s) {
  auto parts = detail::split(detail::trim(s), '.');
  if (parts.size() != 4) return std::nullopt;
  Ipv4 out = 0;
  for (auto p : parts) {
    unsigned octet = 0;
    if (p.empty() || p.size() > 3 || !detail::parse_int(p, octet) || octet > 255) return std::nullopt;
    out = (out << 8) | octet;
  }
  return out;
}

inline std::string format_ipv4(Ipv4 ip) {
  return std::to_string(ip >> 24) + '.' + std::to_string((ip >> 16) & 0xff) + '.' + std::to_string((ip >> 8) & 0xff) +
         '.' + std::to_string(ip & 0xff);
}

enum class RelayFlag : std::uint16_t {
  Authority = 1 << 0,
  BadExit = 1 << 1,
  Exit = 1 << 2,
  Fast = 1 << 3,
  Guard = 1 << 4,
  HSDir = 1 << 5,
  Running = 1 << 6,
  Stable = 1 << 7,
  V2Dir = 1 << 8,
  Valid = 1 << 9,
};

class RelayFlags {
 public:
  RelayFlags() = default;
  RelayFlags(std::initializer_list<RelayFlag> flags) {
    for (auto f : flags) set(f);
  }

  void set(RelayFlag f) { bits_ |= static_cast<std::uint16_t>(f); }
  void clear(RelayFlag f) { bits_ &= static_cast<std::uint16_t>(~static_cast<std::uint16_t>(f)); }
  bool has(RelayFlag f) const { return (bits_ & static_cast<std::uint16_t>(f)) != 0; }
  bool operator==(const RelayFlags&) const = default;

  // Unknown names are ignored, matching how clients treat new consensus flags.
  bool set_by_name(std::string_view name) {
    for (const auto& [n, f] : table()) {
      if (n == name) {
        set(f);
        return true;
      }
    }
    return false;
  }

  std::string to_string(char sep = '|') const {
    std::string out;
    for (const auto& [n, f] : table()) {
      if (!has(f)) continue;
      if (!out.empty()) out += sep;
      out += n;
    }
    return out;
  }

 private:
  static const std::vector<std::pair<std::string_view, RelayFlag>>& table() {
    static const std::vector<std::pair<std::string_view, RelayFlag>> t = {
        {"Authority", RelayFlag::Authority}, {"BadExit", RelayFlag::BadExit}, {"Exit", RelayFlag::Exit},
        {"Fast", RelayFlag::Fast},           {"Guard", RelayFlag::Guard},     {"HSDir", RelayFlag::HSDir},
        {"Running", RelayFlag::Running},     {"Stable", RelayFlag::Stable},   {"V2Dir", RelayFlag::V2Dir},
        {"Valid", RelayFlag::Valid},
    };
    return t;
  }

  std::uint16_t bits_{0};
};

struct Relay {
  std::string fingerprint;
  Ipv4 address{0};
  double bandwidth_mbps{0.0};
  RelayFlags flags;
  double uptime_days{0.0};
  double wfu{0.0};
};

struct NetworkSnapshot {
  int day{0};
  std::string date;  // from valid-after when parsed from a consensus
  std::vector<Relay> relays;
  std::size_t skipped_entries{0};

  const Relay* find(std::string_view fingerprint) const {
    for (const auto& r : relays)
      if (r.fingerprint == fingerprint) return &r;
    return nullptr;
  }
};

// Subset of the directory consensus grammar: "r", "s" and "w Bandwidth=" lines.
// Bandwidth values are KBps and converted to MBps. Router entries missing one
// of the three lines are skipped and counted.
inline NetworkSnapshot parse_consensus(std::string_view text) {
  NetworkSnapshot snap;
  bool header_seen = false;
  bool any_line = false;

  struct Pending {
    std::optional<Relay> relay;
    bool has_s = false;
    bool has_w = false;
  } cur;
  std::unordered_set<std::string> seen;

  auto flush = [&] {
    if (!cur.relay) return;
    if (cur.has_s && cur.has_w && seen.insert(cur.relay->fingerprint).second)
      snap.relays.push_back(std::move(*cur.relay));
    else
      ++snap.skipped_entries;
    cur = Pending{};
  };

  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    auto line = detail::trim(raw);
    if (line.empty()) return;
    if (!any_line) {
      any_line = true;
      if (line.rfind("network-status-version", 0) != 0) throw ParseError(line_no, "missing network-status-version header");
      header_seen = true;
      return;
    }
    auto tok = detail::split_ws(line);
    const auto& key = tok.front();
    if (key == "valid-after" && tok.size() >= 2) {
      snap.date = std::string(tok[1]);
    } else if (key == "r") {
      flush();
      if (tok.size() < 6) throw ParseError(line_no, "truncated router line");
      auto ip = parse_ipv4(tok[tok.size() - 3]);
      if (!ip) throw ParseError(line_no, "bad router address '" + std::string(tok[tok.size() - 3]) + "'");
      Relay r;
      r.fingerprint = std::string(tok[2]);
      r.address = *ip;
      cur.relay = std::move(r);
    } else if (key == "s" && cur.relay) {
      for (std::size_t i = 1; i < tok.size(); ++i) cur.relay->flags.set_by_name(tok[i]);
      cur.has_s = true;
    } else if (key == "w" && cur.relay) {
      for (std::size_t i = 1; i < tok.size(); ++i) {
        if (tok[i].rfind("Bandwidth=", 0) != 0) continue;
        std::uint64_t kbps = 0;
        if (!detail::parse_int(tok[i].substr(10), kbps)) throw ParseError(line_no, "bad bandwidth value");
        cur.relay->bandwidth_mbps = static_cast<double>(kbps) / 1000.0;
        cur.has_w = true;
      }
    } else if (key == "directory-footer") {
      flush();
    }
  });
  if (!header_seen) throw ParseError(0, "empty consensus document");
  flush();
  return snap;
}

namespace detail {

inline constexpr std::string_view kSnapshotHeader = "fingerprint,ip,bandwidth_mbps,flags,uptime_days,wfu";

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size() && std::isfinite(out);
}

inline Relay parse_relay_fields(std::size_t line_no, std::span<const std::string_view> f) {
  Relay r;
  r.fingerprint = std::string(trim(f[0]));
  if (r.fingerprint.empty()) throw ParseError(line_no, "empty fingerprint");
  auto ip = parse_ipv4(f[1]);
  if (!ip) throw ParseError(line_no, "bad ip '" + std::string(f[1]) + "'");
  r.address = *ip;
  if (!parse_double(f[2], r.bandwidth_mbps) || r.bandwidth_mbps < 0) throw ParseError(line_no, "bad bandwidth");
  auto flags = trim(f[3]);
  if (!flags.empty())
    for (auto name : split(flags, '|')) r.flags.set_by_name(trim(name));
  if (!parse_double(f[4], r.uptime_days) || r.uptime_days < 0) throw ParseError(line_no, "bad uptime");
  if (!parse_double(f[5], r.wfu) || r.wfu < 0 || r.wfu > 1) throw ParseError(line_no, "bad wfu");
  return r;
}

inline std::string format_double(double v) {
  std::ostringstream out;
  out.precision(10);
  out << v;
  return out.str();
}

}  // namespace detail

inline NetworkSnapshot parse_snapshot_csv(std::string_view text) {
  NetworkSnapshot snap;
  bool header = false;
  std::unordered_set<std::string> seen;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    auto line = detail::trim(raw);
    if (line.empty()) return;
    if (!header) {
      if (line != detail::kSnapshotHeader) throw ParseError(line_no, "expected header '" + std::string(detail::kSnapshotHeader) + "'");
      header = true;
      return;
    }
    auto f = detail::split(line, ',');
    if (f.size() != 6) throw ParseError(line_no, "expected 6 fields");
    auto r = detail::parse_relay_fields(line_no, f);
    if (!seen.insert(r.fingerprint).second) throw ParseError(line_no, "duplicate fingerprint " + r.fingerprint);
    snap.relays.push_back(std::move(r));
  });
  if (!header) throw ParseError(0, "empty snapshot");
  return snap;
}

inline std::string write_snapshot_csv(const NetworkSnapshot& snap) {
  std::ostringstream out;
  out << detail::kSnapshotHeader << '\n';
  for (const auto& r : snap.relays)
    out << r.fingerprint << ',' << format_ipv4(r.address) << ',' << detail::format_double(r.bandwidth_mbps) << ','
        << r.flags.to_string() << ',' << detail::format_double(r.uptime_days) << ',' << detail::format_double(r.wfu)
        << '\n';
  return out.str();
}

// Multi-day trace: the snapshot CSV with a leading "day" column. Rows must be
// grouped by strictly increasing day.
inline std::vector<NetworkSnapshot> parse_trace_csv(std::string_view text) {
  std::vector<NetworkSnapshot> days;
  bool header = false;
  std::unordered_set<std::string> seen;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    auto line = detail::trim(raw);
    if (line.empty()) return;
    if (!header) {
      if (line != "day," + std::string(detail::kSnapshotHeader)) throw ParseError(line_no, "bad trace header");
      header = true;
      return;
    }
    auto f = detail::split(line, ',');
    if (f.size() != 7) throw ParseError(line_no, "expected 7 fields");
    int day = 0;
    if (!detail::parse_int(f[0], day)) throw ParseError(line_no, "bad day");
    if (days.empty() || days.back().day != day) {
      if (!days.empty() && day <= days.back().day) throw ParseError(line_no, "days must strictly increase");
      days.push_back(NetworkSnapshot{day, {}, {}, 0});
      seen.clear();
    }
    auto r = detail::parse_relay_fields(line_no, std::span(f).subspan(1));
    if (!seen.insert(r.fingerprint).second) throw ParseError(line_no, "duplicate fingerprint " + r.fingerprint);
    days.back().relays.push_back(std::move(r));
  });
  if (!header) throw ParseError(0, "empty trace");
  return days;
}

inline std::string write_trace_csv(const std::vector<NetworkSnapshot>& days) {
  std::ostringstream out;
  out << "day," << detail::kSnapshotHeader << '\n';
  for (const auto& snap : days)
    for (const auto& r : snap.relays)
      out << snap.day << ',' << r.fingerprint << ',' << format_ipv4(r.address) << ','
          << detail::format_double(r.bandwidth_mbps) << ',' << r.flags.to_string() << ','
          << detail::format_double(r.uptime_days) << ',' << detail::format_double(r.wfu) << '\n';
  return out.str();
}

struct Prefix {
  Ipv4 network{0};
  int length{0};

  bool contains(Ipv4 ip) const { return length == 0 || (ip & mask()) == network; }
  Ipv4 mask() const { return length == 0 ? 0 : ~Ipv4{0} << (32 - length); }
  std::uint64_t span() const { return std::uint64_t{1} << (32 - length); }
  bool operator==(const Prefix&) const = default;
};

// Longest-prefix-match table from IPv4 prefixes to origin ASes. Overlapping
// prefixes are allowed; re-adding an identical prefix replaces its AS.
class PrefixMap {
 public:
  void add(Prefix p, AsNumber asn) {
    if (p.length < 0 || p.length > 32) throw std::invalid_argument("mask length out of range");
    p.network &= p.mask();
    auto [it, inserted] = by_length_[p.length].insert_or_assign(p.network, asn);
    (void)it;
    if (inserted) entries_.push_back({p, asn});
    else
      for (auto& e : entries_)
        if (e.first == p) e.second = asn;
  }

  std::optional<AsNumber> lookup(Ipv4 ip) const {
    for (int len = 32; len >= 0; --len) {
      const auto& table = by_length_[len];
      if (table.empty()) continue;
      Ipv4 key = len == 0 ? 0 : ip & (~Ipv4{0} << (32 - len));
      auto it = table.find(key);
      if (it != table.end()) return it->second;
    }
    return std::nullopt;
  }

  const std::vector<std::pair<Prefix, AsNumber>>& entries() const { return entries_; }

  std::vector<AsNumber> ases() const {
    std::vector<AsNumber> out;
    for (const auto& [p, a] : entries_) out.push_back(a);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<Prefix> prefixes_of(AsNumber asn) const {
    std::vector<Prefix> out;
    for (const auto& [p, a] : entries_)
      if (a == asn) out.push_back(p);
    return out;
  }

  std::string serialize() const {
    std::ostringstream out;
    for (const auto& [p, a] : entries_) out << format_ipv4(p.network) << '/' << p.length << ' ' << a.value << '\n';
    return out.str();
  }

 private:
  std::vector<std::unordered_map<Ipv4, AsNumber>> by_length_ = std::vector<std::unordered_map<Ipv4, AsNumber>>(33);
  std::vector<std::pair<Prefix, AsNumber>> entries_;
};

// Lines "<ip>/<masklen> <asn>", '#' comments.
inline PrefixMap parse_prefix_table(std::string_view text) {
  PrefixMap map;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') return;
    auto tok = detail::split_ws(line);
    if (tok.size() != 2) throw ParseError(line_no, "expected '<ip>/<len> <asn>'");
    auto slash = tok[0].find('/');
    if (slash == std::string_view::npos) throw ParseError(line_no, "missing mask length");
    auto ip = parse_ipv4(tok[0].substr(0, slash));
    int len = -1;
    if (!ip || !detail::parse_int(tok[0].substr(slash + 1), len) || len < 0 || len > 32)
      throw ParseError(line_no, "bad prefix '" + std::string(tok[0]) + "'");
    std::uint32_t asn = 0;
    if (!detail::parse_int(tok[1], asn) || asn == 0) throw ParseError(line_no, "bad AS number");
    map.add(Prefix{*ip, len}, AsNumber{asn});
  });
  return map;
}

inline std::optional<AsNumber> ip_to_as(const PrefixMap& map, Ipv4 ip) { return map.lookup(ip); }

// --- guard eligibility -----------------------------------------------------

enum class EligibilityMode { consensus, synthetic };

struct RelayHistory {
  double uptime_days{0.0};
  double wfu{0.0};
};

// Population statistics the guard-flag rules compare against.
struct GuardCriteria {
  double median_bandwidth_mbps{0.0};
  double median_wfu{0.0};
  double top_uptime_cutoff_days{0.0};  // uptime beating 87.5% of relays

  static constexpr double kUptimeFloorDays = 8.0;
  static constexpr double kBandwidthFloorMbps = 2.0;
  static constexpr double kWfuFloor = 0.98;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline GuardCriteria compute_guard_criteria(std::span<const Relay> relays) {
  GuardCriteria c;
  std::vector<double> bw, wfu, up;
  for (const auto& r : relays) {
    bw.push_back(r.bandwidth_mbps);
    wfu.push_back(r.wfu);
    up.push_back(r.uptime_days);
  }
  c.median_bandwidth_mbps = detail::median(bw);
  c.median_wfu = detail::median(wfu);
  if (!up.empty()) {
    std::sort(up.begin(), up.end());
    // smallest uptime u such that at least 87.5% of relays have uptime < u
    auto need = static_cast<std::size_t>(std::ceil(0.875 * static_cast<double>(up.size())));
    c.top_uptime_cutoff_days = need == 0 ? 0.0 : std::nextafter(up[need - 1], INFINITY);
  }
  return c;
}

// Each rule passes on the easier of its two bars.
inline bool meets_guard_criteria(const Relay& r, const GuardCriteria& c) {
  bool uptime_ok = r.uptime_days >= GuardCriteria::kUptimeFloorDays || r.uptime_days >= c.top_uptime_cutoff_days;
  bool bw_ok = r.bandwidth_mbps > std::min(c.median_bandwidth_mbps, GuardCriteria::kBandwidthFloorMbps);
  bool wfu_ok = r.wfu > std::min(c.median_wfu, GuardCriteria::kWfuFloor);
  return uptime_ok && bw_ok && wfu_ok;
}

inline std::vector<Relay> eligible_guards(const NetworkSnapshot& snap,
                                          const std::unordered_map<std::string, RelayHistory>& history = {},
                                          EligibilityMode mode = EligibilityMode::consensus) {
  std::vector<Relay> out;
  if (mode == EligibilityMode::consensus) {
    for (const auto& r : snap.relays)
      if (r.flags.has(RelayFlag::Guard)) out.push_back(r);
    return out;
  }
  std::vector<Relay> relays = snap.relays;
  for (auto& r : relays) {
    auto it = history.find(r.fingerprint);
    if (it != history.end()) {
      r.uptime_days = it->second.uptime_days;
      r.wfu = it->second.wfu;
    }
  }
  auto criteria = compute_guard_criteria(relays);
  for (auto& r : relays)
    if (meets_guard_criteria(r, criteria)) out.push_back(std::move(r));
  return out;
}

// A guard with its AS label. Unlabeled guards keep asn == nullopt and are
// excluded from the AS design only.
struct LabeledGuard {
  std::string fingerprint;
  Ipv4 address{0};
  std::optional<AsNumber> asn;
  double bandwidth_mbps{0.0};
};

inline std::vector<LabeledGuard> label_guards(std::span<const Relay> guards, const PrefixMap& prefixes) {
  std::vector<LabeledGuard> out;
  out.reserve(guards.size());
  for (const auto& r : guards) out.push_back({r.fingerprint, r.address, prefixes.lookup(r.address), r.bandwidth_mbps});
  return out;
}

}  // namespace guardsets
