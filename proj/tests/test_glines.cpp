#include <gtest/gtest.h>

#include <map>

#include "fixtures.hpp"

using namespace guardsets;

TEST(GLine, ExampleLine) {
  GuardSetLine g{1111111111111111ULL, 2222222222222222ULL, 3333333333333333ULL};
  auto s = format_g_line(g);
  EXPECT_EQ(s, "g 1111111111111111 2222222222222222 3333333333333333\n");
  EXPECT_EQ(s.size(), 53u);
  EXPECT_EQ(kGLineBytes, 53u);
  EXPECT_EQ(parse_g_line(s), g);
  EXPECT_EQ(parse_g_line("g 1111111111111111 2222222222222222 3333333333333333"), g);
}

TEST(GLine, RejectsMalformed) {
  EXPECT_THROW(format_g_line({123, 2222222222222222ULL, 3333333333333333ULL}), InvariantError);
  EXPECT_THROW(parse_g_line("g 111111111111111 2222222222222222 3333333333333333\n"), ParseError);
  EXPECT_THROW(parse_g_line("x 1111111111111111 2222222222222222 3333333333333333\n"), ParseError);
  EXPECT_THROW(parse_g_line("g 1111111111111111,2222222222222222 3333333333333333\n"), ParseError);
  EXPECT_THROW(parse_g_line("g 0111111111111111 2222222222222222 3333333333333333\n"), ParseError);
  EXPECT_THROW(parse_g_line("g 11111111111111a1 2222222222222222 3333333333333333\n"), ParseError);
}

TEST(GLine, HierarchyRoundTrip) {
  auto g = fixtures::toy_graph();
  auto dir = fixtures::toy_directory();
  Thresholds thr;
  thr.n_supersets = 3;
  auto h = build_hierarchy(dir, g, thr, 1);
  auto text = emit_g_lines(h);
  EXPECT_EQ(text.size(), dir.size() * kGLineBytes);
  auto lines = parse_g_lines(text);
  auto expected = guard_set_lines(h);
  ASSERT_EQ(lines.size(), expected.size());
  for (std::size_t i = 0; i < lines.size(); ++i) EXPECT_EQ(lines[i], expected[i].second);

  auto routers = parse_router_g_lines(emit_router_g_lines(h));
  EXPECT_EQ(routers, expected);
  // every guard's line names the subset that holds it
  std::map<std::string, GuardSetId> holder;
  for (const auto& ss : h.supersets)
    for (const auto& s : ss.sets)
      for (const auto& sub : s.subsets)
        for (const auto& fp : sub.guards) holder[fp] = sub.id;
  for (const auto& [fp, line] : routers) EXPECT_EQ(line.subset_id, holder.at(fp));
}

TEST(GLine, RouterParseErrors) {
  EXPECT_THROW(parse_router_g_lines("r AAAA\nr BBBB\n"), ParseError);
  EXPECT_THROW(parse_router_g_lines("g 1111111111111111 2222222222222222 3333333333333333\n"), ParseError);
  EXPECT_THROW(parse_router_g_lines("r AAAA\n"), ParseError);
}

TEST(GLine, OverheadScalesPerGuard) {
  auto w = fixtures::small_world(3, 1, 1500);
  auto relays = eligible_guards(w.trace.front(), {}, EligibilityMode::synthetic);
  GuardDirectory dir = GuardDirectory::from_labeled(label_guards(relays, w.world.prefixes), w.world.graph);
  Thresholds thr;
  auto h = build_hierarchy(dir, w.world.graph, thr, 2);
  EXPECT_EQ(emit_g_lines(h).size(), dir.size() * 53);
}
