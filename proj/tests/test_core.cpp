#include <gtest/gtest.h>

#include <set>

#include "guardsets/core.hpp"

using namespace guardsets;

TEST(Core, GuardSetIdsAreSixteenDigits) {
  for (std::uint64_t h : {0ULL, 1ULL, 0xffffffffffffffffULL, 123456789ULL}) {
    auto id = to_guard_set_id(h);
    EXPECT_TRUE(is_valid_guard_set_id(id));
    EXPECT_EQ(std::to_string(id).size(), 16u);
  }
  EXPECT_FALSE(is_valid_guard_set_id(999'999'999'999'999ULL));
  EXPECT_FALSE(is_valid_guard_set_id(10'000'000'000'000'000ULL));
}

TEST(Core, HasherSeparatesFields) {
  auto a = StableHasher{}.bytes("ab").bytes("c").digest();
  auto b = StableHasher{}.bytes("a").bytes("bc").digest();
  EXPECT_NE(a, b);
  EXPECT_EQ(StableHasher{}.u64(7).digest(), StableHasher{}.u64(7).digest());
}

TEST(Core, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {}), derive_seed(2, {}));
  auto r1 = make_rng(5, {1});
  auto r2 = make_rng(5, {1});
  for (int i = 0; i < 10; ++i) EXPECT_EQ(r1(), r2());
}

TEST(Core, UniformHelpersStayInRange) {
  auto rng = make_rng(9);
  for (int i = 0; i < 1000; ++i) {
    double u = uniform01(rng);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(uniform_index(rng, 7), 7u);
  }
}

TEST(Core, StableShuffleIsAPermutation) {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto rng = make_rng(3);
  auto w = v;
  stable_shuffle(w.begin(), w.end(), rng);
  EXPECT_NE(w, v);
  EXPECT_EQ(std::set<int>(w.begin(), w.end()).size(), 50u);
  auto rng2 = make_rng(3);
  auto x = v;
  stable_shuffle(x.begin(), x.end(), rng2);
  EXPECT_EQ(w, x);
}

TEST(Core, ThresholdsValidate) {
  Thresholds t;
  EXPECT_NO_THROW(t.validate());
  t.tau_down = 40;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t.tau_down = 0;
  EXPECT_THROW(t.validate(), std::invalid_argument);
}

TEST(Core, ParseErrorCarriesLine) {
  ParseError e(12, "bad");
  EXPECT_EQ(e.line(), 12u);
  EXPECT_STREQ(e.what(), "line 12: bad");
}
