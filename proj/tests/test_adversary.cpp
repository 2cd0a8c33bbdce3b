#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"

using namespace guardsets;

namespace {

GuardSetId gid(int n) { return 1000000000000000ULL + static_cast<GuardSetId>(n); }

// Damaged set {A 12, B 6} = 18 with leftover C 12, D 11, E 5.
BwSetState damaged_state() {
  BwSetState st;
  st.sets.push_back(BwSet{gid(1), {{"A", 12}, {"B", 6}}, 18});
  st.quota = {{"A", 1}, {"B", 1}};
  st.leftover = {{"C", 12}, {"D", 11}, {"E", 5}};
  return st;
}

AdversaryConfig tuning(Strategy s, double fraction = 0.01) {
  AdversaryConfig c;
  c.strategy = s;
  c.bandwidth_fraction = fraction;
  return c;
}

std::unordered_map<std::string, double> honest_bw() { return {{"A", 12}, {"B", 6}, {"C", 12}, {"D", 11}, {"E", 5}}; }

// Day 1 of the tuning example: the adversary's quantum completes the repair.
BwSetState day_one(BwTuningAdversary& adv) {
  auto st = damaged_state();
  adv.before_repair(st, 1, 10000, Thresholds{});
  repair_step(st, Thresholds{}, honest_bw(), adv.repair_hook(Thresholds{}), adv.build_hook(Thresholds{}));
  adv.end_day(st);
  return st;
}

std::vector<GuardBandwidth> with_adversary(std::vector<GuardBandwidth> honest, const BwTuningAdversary& adv) {
  for (const auto& g : adv.guards()) honest.push_back(g);
  return honest;
}

}  // namespace

TEST(Injection, ZeroFractionInjectsNothing) {
  std::vector<double> bws{10, 20};
  auto ases = fixtures::ases({1, 2});
  auto rng = make_rng(1);
  EXPECT_TRUE(inject_centralized(bws, ases, 0.0, rng).empty());
  EXPECT_TRUE(inject_botnet(bws, ases, 0.0, rng).empty());
}

TEST(Injection, StopsOnceTargetReached) {
  auto rng = make_rng(2);
  auto out = inject_until(100, 0.1, [] { return 3.0; }, [] { return AsNumber{7}; }, nullptr, rng);
  ASSERT_EQ(out.size(), 4u);
  for (const auto& g : out) {
    EXPECT_EQ(g.asn, AsNumber{7});
    EXPECT_TRUE(is_malicious_fingerprint(g.fingerprint));
  }
  std::set<std::string> fps;
  for (const auto& g : out) fps.insert(g.fingerprint);
  EXPECT_EQ(fps.size(), 4u);
}

TEST(Injection, CentralizedUsesOneAsBotnetMany) {
  std::vector<double> bws(200, 5.0);
  auto ases = fixtures::ases({10, 20, 30, 40, 50});
  auto rng = make_rng(3);
  auto central = inject_centralized(bws, ases, 0.2, rng);
  std::set<AsNumber> c_ases;
  double total = 0;
  for (const auto& g : central) {
    c_ases.insert(g.asn);
    total += g.offered_bandwidth_mbps;
  }
  EXPECT_EQ(c_ases.size(), 1u);
  EXPECT_GE(total, 200.0);
  EXPECT_LT(total - 5.0, 200.0);
  auto botnet = inject_botnet(bws, ases, 0.2, rng);
  std::set<AsNumber> b_ases;
  for (const auto& g : botnet) {
    b_ases.insert(g.asn);
    EXPECT_TRUE(std::find(ases.begin(), ases.end(), g.asn) != ases.end());
  }
  EXPECT_GT(b_ases.size(), 1u);
}

TEST(Injection, LowResourceAddressMapsToItsAs) {
  PrefixMap map;
  map.add(Prefix{*parse_ipv4("10.0.0.0"), 8}, AsNumber{64500});
  map.add(Prefix{*parse_ipv4("10.1.0.0"), 16}, AsNumber{64501});
  std::vector<double> bws{4, 8};
  auto rng = make_rng(4);
  for (int i = 0; i < 50; ++i) {
    auto g = inject_low_resource(bws, map, rng, static_cast<std::uint64_t>(i));
    EXPECT_EQ(map.lookup(g.address), g.asn);
    EXPECT_TRUE(g.offered_bandwidth_mbps == 4 || g.offered_bandwidth_mbps == 8);
  }
  EXPECT_THROW(inject_low_resource(bws, PrefixMap{}, rng), std::invalid_argument);
}

TEST(Compromise, SubsetsAndSets) {
  Hierarchy h;
  Superset ss;
  ss.id = gid(100);
  Set s;
  s.id = gid(110);
  s.guard_ases = fixtures::ases({5, 6});
  s.subsets = {Subset{gid(111), {"g1", "ADV1"}, 30}, Subset{gid(112), {"g2"}, 30}};
  ss.sets.push_back(s);
  h.supersets.push_back(ss);
  std::unordered_set<std::string> mal{"ADV1"};
  EXPECT_EQ(compromised_subsets(h, mal), (std::unordered_set<GuardSetId>{gid(111)}));
  EXPECT_TRUE(compromised_subsets(h, {}).empty());
  EXPECT_TRUE(confined_to_adversary_ases(h, mal, {AsNumber{6}}));
  EXPECT_FALSE(confined_to_adversary_ases(h, mal, {AsNumber{9}}));

  BwSetState st;
  st.sets.push_back(BwSet{gid(1), {{"x", 10}, {"ADV1", 5}}, 15});
  st.sets.push_back(BwSet{gid(2), {{"y", 10}}, 10});
  EXPECT_EQ(compromised_bw_sets(st, mal), (std::unordered_set<GuardSetId>{gid(1)}));
}

TEST(Compromise, ScanLatchesFirstDay) {
  std::vector<ClientState> cs(3);
  cs[0].design = Design::as;
  cs[0].subset_id = gid(1);
  cs[1].design = Design::bw;
  cs[1].bw_set_id = gid(2);
  cs[2].design = Design::single;
  cs[2].guard_fingerprint = "ADV1";
  auto r = compromise_scan(cs, {gid(1)}, {"ADV1"}, 4);
  EXPECT_EQ(r.compromised_now, 2u);
  EXPECT_EQ(cs[0].compromise_day, 4);
  EXPECT_FALSE(cs[1].compromised_ever);
  r = compromise_scan(cs, {gid(2)}, {}, 5);
  EXPECT_EQ(r.compromised_now, 1u);
  EXPECT_EQ(r.compromised_ever, 3u);
  EXPECT_EQ(cs[0].compromise_day, 4);
  EXPECT_FALSE(cs[0].compromised_now);
}

TEST(Tuning, BidsJustAboveLastCompletingCandidate) {
  BwTuningAdversary adv(tuning(Strategy::bw_tuning_high));
  auto st = day_one(adv);
  ASSERT_EQ(st.sets.size(), 1u);
  const auto& s = st.sets[0];
  std::string adv_fp;
  for (const auto& q : s.quanta)
    if (is_malicious_fingerprint(q.guard)) {
      adv_fp = q.guard;
      EXPECT_NEAR(q.bandwidth_mbps, 11.1, 1e-9);
    }
  ASSERT_FALSE(adv_fp.empty());
  EXPECT_TRUE(s.has_guard("C"));
  EXPECT_FALSE(s.has_guard("D"));
  EXPECT_NEAR(s.bandwidth_mbps, 41.1, 1e-9);
  EXPECT_EQ(adv.log().joined, 1u);
  EXPECT_TRUE(adv.malicious().count(adv_fp));
}

TEST(Tuning, DecaysInHealthySetAndHoldsBreakingSet) {
  Thresholds thr;
  BwTuningAdversary adv(tuning(Strategy::bw_tuning_high));
  auto st = day_one(adv);
  auto healthy = st;
  std::vector<GuardBandwidth> all{{"A", 12}, {"B", 6}, {"C", 12}, {"D", 11}, {"E", 5}};
  refresh_bw_sets(healthy, with_adversary(all, adv), thr.tau_up);
  BwTuningAdversary keep = adv;
  adv.before_repair(healthy, 2, 10000, thr);
  EXPECT_NEAR(adv.active_bandwidth(), 2.0, 1e-9);

  std::vector<GuardBandwidth> few{{"B", 6}, {"D", 11}, {"E", 5}};
  refresh_bw_sets(st, with_adversary(few, keep), thr.tau_up);
  ASSERT_NEAR(st.sets[0].bandwidth_mbps, 17.1, 1e-9);
  keep.before_repair(st, 2, 10000, thr);
  EXPECT_EQ(keep.log().held, 1u);
  EXPECT_NEAR(st.sets[0].bandwidth_mbps, thr.tau_down + 0.1, 1e-9);
  EXPECT_NEAR(keep.active_bandwidth(), 14.1, 1e-9);
}

TEST(Tuning, LowVariantWithdrawsWhenMainProvider) {
  Thresholds thr;
  BwTuningAdversary adv(tuning(Strategy::bw_tuning_low));
  auto st = day_one(adv);
  std::vector<GuardBandwidth> few{{"B", 1}, {"D", 11}, {"E", 5}};
  refresh_bw_sets(st, with_adversary(few, adv), thr.tau_up);
  adv.before_repair(st, 2, 10000, thr);
  EXPECT_EQ(adv.log().withdrawn, 1u);
  ASSERT_EQ(st.sets.size(), 1u);
  EXPECT_EQ(st.sets[0].quanta.size(), 1u);
  EXPECT_NEAR(st.sets[0].bandwidth_mbps, 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(adv.active_bandwidth(), 0.0);
}

TEST(Tuning, NoBudgetNoJoin) {
  BwTuningAdversary adv(tuning(Strategy::bw_tuning_high, 0.0));
  auto st = day_one(adv);
  EXPECT_TRUE(adv.malicious().empty());
  EXPECT_DOUBLE_EQ(st.sets[0].bandwidth_mbps, 41);
}

TEST(Tuning, ActiveBandwidthStaysWithinBudget) {
  auto w = fixtures::small_world(21, 60, 600);
  Thresholds thr;
  for (auto strategy : {Strategy::bw_tuning_high, Strategy::bw_tuning_low}) {
    BwTuningAdversary adv(tuning(strategy, 0.05));
    BwSetState st;
    bool first = true;
    std::size_t joined = 0;
    for (const auto& snap : w.trace) {
      std::vector<GuardBandwidth> g;
      std::unordered_map<std::string, double> gb;
      double total = 0;
      for (const auto& r : eligible_guards(snap, {}, EligibilityMode::synthetic)) {
        g.push_back({r.fingerprint, r.bandwidth_mbps});
        gb[r.fingerprint] = r.bandwidth_mbps;
        total += r.bandwidth_mbps;
      }
      if (first) {
        st = initial_bw_sets(g, thr);
        first = false;
        continue;
      }
      refresh_bw_sets(st, with_adversary(g, adv), thr.tau_up);
      bw_attack_step(st, adv, snap.day, total, thr, gb);
      joined += adv.log().joined;
      EXPECT_LE(adv.active_bandwidth(), adv.budget() + 1e-6) << "day " << snap.day;
      for (const auto& s : st.sets) {
        int mine = 0;
        for (const auto& q : s.quanta) mine += adv.malicious().count(q.guard) ? 1 : 0;
        EXPECT_LE(mine, 1);
      }
    }
    EXPECT_GT(joined, 0u) << to_string(strategy);
  }
}

TEST(Strategy, ParseAndPrint) {
  for (auto s : {Strategy::none, Strategy::bw_tuning_high, Strategy::bw_tuning_low, Strategy::low_resource,
                 Strategy::centralized, Strategy::botnet, Strategy::targeted})
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  EXPECT_THROW(parse_strategy("nope"), std::invalid_argument);
}
