#pragma once

// Consensus extension line "g SUPERSET-ID SET-ID SUBSET-ID" carried in each
// guard's router entry.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "guardsets/asgraph.hpp"
#include "guardsets/core.hpp"
#include "guardsets/hierarchy.hpp"

namespace guardsets {

struct GuardSetLine {
  GuardSetId superset_id{0};
  GuardSetId set_id{0};
  GuardSetId subset_id{0};

  bool operator==(const GuardSetLine&) const = default;
};

// "g" SP 16 digits SP 16 digits SP 16 digits NL
inline constexpr std::size_t kGLineBytes = 1 + 1 + 16 + 1 + 16 + 1 + 16 + 1;

inline std::string format_g_line(const GuardSetLine& g) {
  for (auto id : {g.superset_id, g.set_id, g.subset_id})
    if (!is_valid_guard_set_id(id)) throw InvariantError("guard-set id " + std::to_string(id) + " is not 16 digits");
  char buf[kGLineBytes + 1];
  std::snprintf(buf, sizeof buf, "g %llu %llu %llu\n", static_cast<unsigned long long>(g.superset_id),
                static_cast<unsigned long long>(g.set_id), static_cast<unsigned long long>(g.subset_id));
  return std::string(buf, kGLineBytes);
}

inline GuardSetLine parse_g_line(std::string_view line, std::size_t line_no = 1) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (line.size() != kGLineBytes - 1 || line.substr(0, 2) != "g ")
    throw ParseError(line_no, "malformed g line");
  GuardSetId ids[3]{};
  for (int i = 0; i < 3; ++i) {
    auto field = line.substr(2 + 17 * static_cast<std::size_t>(i), 16);
    if (i < 2 && line[2 + 17 * static_cast<std::size_t>(i) + 16] != ' ') throw ParseError(line_no, "malformed g line");
    if (!std::all_of(field.begin(), field.end(), [](char c) { return c >= '0' && c <= '9'; }) || field[0] == '0')
      throw ParseError(line_no, "guard-set id must be 16 digits");
    if (!detail::parse_int(field, ids[i])) throw ParseError(line_no, "bad guard-set id");
  }
  return {ids[0], ids[1], ids[2]};
}

// Each guard's line, ascending fingerprint.
inline std::vector<std::pair<std::string, GuardSetLine>> guard_set_lines(const Hierarchy& h) {
  std::vector<std::pair<std::string, GuardSetLine>> out;
  for (const auto& ss : h.supersets)
    for (const auto& s : ss.sets)
      for (const auto& sub : s.subsets)
        for (const auto& g : sub.guards) out.push_back({g, {ss.id, s.id, sub.id}});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

inline std::string emit_g_lines(const Hierarchy& h) {
  std::string out;
  for (const auto& [fp, line] : guard_set_lines(h)) out += format_g_line(line);
  return out;
}

inline std::vector<GuardSetLine> parse_g_lines(std::string_view text) {
  std::vector<GuardSetLine> out;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.empty() || line.front() == '#') return;
    out.push_back(parse_g_line(line, line_no));
  });
  return out;
}

// Router-entry view: "r FINGERPRINT" followed by that guard's g line.
inline std::string emit_router_g_lines(const Hierarchy& h) {
  std::string out;
  for (const auto& [fp, line] : guard_set_lines(h)) out += "r " + fp + "\n" + format_g_line(line);
  return out;
}

inline std::vector<std::pair<std::string, GuardSetLine>> parse_router_g_lines(std::string_view text) {
  std::vector<std::pair<std::string, GuardSetLine>> out;
  std::optional<std::string> fp;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.empty() || line.front() == '#') return;
    if (line.substr(0, 2) == "r ") {
      if (fp) throw ParseError(line_no, "router entry without g line");
      fp = std::string(detail::trim(line.substr(2)));
      return;
    }
    if (!fp) throw ParseError(line_no, "g line outside a router entry");
    out.push_back({*fp, parse_g_line(line, line_no)});
    fp.reset();
  });
  if (fp) throw ParseError(0, "router entry without g line");
  return out;
}

}  // namespace guardsets
