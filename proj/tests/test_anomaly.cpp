#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <map>

#include "txgen/anomaly.hpp"

using namespace txgen;

namespace {

IllicitCluster two_hop_chain() {
  IllicitCluster c;
  c.id = "test_chain";
  c.nodes = {{0, 0, 10, 0, 1e6}, {1, 0, 10, 0, 1e6}, {2, 0, 10, 0, 1e6}};
  c.edges = {{0, 1, 100.0, 0}, {1, 2, 100.0, 36'000}};
  return c;
}

EditBudget loose_budget() { return {100, 100}; }

double external_amount(const IllicitCluster& c, int a, int b) {
  double total = 0.0;
  for (const auto& e : c.edges) {
    const bool internal = (e.from_role == a || e.from_role == b) &&
                          (e.to_role == a || e.to_role == b);
    if (!internal) total += e.amount;
  }
  return total;
}

}  // namespace

TEST_CASE("check_sanity catches the three violation families") {
  IllicitCluster ok = two_hop_chain();
  CHECK(check_sanity(ok).empty());

  IllicitCluster late = ok;
  late.edges = {{0, 1, 100.0, 10}, {1, 2, 100.0, 5}};  // B sends before funds land
  auto v = check_sanity(late);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == SanityKind::TimeOrderViolation);
  CHECK(v[0].role_id == 1);

  IllicitCluster negative = ok;
  negative.edges[0].amount = -50.0;
  v = check_sanity(negative);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == SanityKind::NegativeAmount);

  IllicitCluster dangling = ok;
  dangling.edges.push_back({0, 99, 10.0, 50'000});
  v = check_sanity(dangling);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == SanityKind::DanglingEndpoint);

  IllicitCluster dup = ok;
  dup.nodes.push_back({0, 0, 1, 0, 1});
  v = check_sanity(dup);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == SanityKind::DuplicateRoleId);

  // Sources are exempt from the time-order rule.
  IllicitCluster source_first = ok;
  source_first.edges = {{0, 1, 10.0, 0}, {1, 2, 10.0, 10}};
  CHECK(check_sanity(source_first).empty());
}

TEST_CASE("intermediary injection: conservation, ordering, node accounting") {
  RngStream rng(1);
  IllicitCluster c = two_hop_chain();
  auto edited = apply_intermediary_injection(c, 0, 1, loose_budget(), rng);
  REQUIRE(edited.has_value());
  CHECK(edited->nodes.size() == 4);
  CHECK(edited->edges.size() == 3);
  // The replaced u->v flow appears as u->m->v with equal amounts and
  // strictly increasing times after the original edge time.
  const int mule = edited->max_role_id();
  int64_t t1 = -1, t2 = -1;
  for (const auto& e : edited->edges) {
    if (e.from_role == 0 && e.to_role == mule) {
      CHECK(e.amount == doctest::Approx(100.0));
      t1 = e.rel_time;
    }
    if (e.from_role == mule && e.to_role == 1) {
      CHECK(e.amount == doctest::Approx(100.0));
      t2 = e.rel_time;
    }
  }
  REQUIRE(t1 >= 0);
  REQUIRE(t2 >= 0);
  CHECK(t1 > 0);
  CHECK(t1 < t2);
  CHECK(edited->budget_used == 1);
  CHECK(check_sanity(*edited).empty());

  auto three = apply_intermediary_injection(c, 1, 3, loose_budget(), rng);
  REQUIRE(three.has_value());
  CHECK(three->nodes.size() == c.nodes.size() + 3);
  CHECK(three->edges.size() == c.edges.size() - 1 + 4);  // path length hops+1
}

TEST_CASE("intermediary injection respects budget and missing edges") {
  RngStream rng(2);
  IllicitCluster c = two_hop_chain();
  EditBudget no_nodes{10, 0};
  CHECK_FALSE(apply_intermediary_injection(c, 0, 1, no_nodes, rng).has_value());
  EditBudget no_edits{0, 10};
  CHECK_FALSE(apply_intermediary_injection(c, 0, 1, no_edits, rng).has_value());
  CHECK_FALSE(apply_intermediary_injection(c, 9, 1, loose_budget(), rng).has_value());
}

TEST_CASE("injection preserves sanity across random applications") {
  RngStream rng(3);
  int applied = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    IllicitCluster c = two_hop_chain();
    // Grow a random sane cluster by a few random injections first.
    for (int step = 0; step < 3; ++step) {
      const int edge = static_cast<int>(
          rng.uniform_int(0, static_cast<int64_t>(c.edges.size()) - 1));
      const int hops = static_cast<int>(rng.uniform_int(1, 3));
      auto edited = apply_intermediary_injection(c, edge, hops, loose_budget(), rng);
      if (edited.has_value()) {
        c = std::move(*edited);
        ++applied;
        REQUIRE(check_sanity(c).empty());
      }
    }
  }
  CHECK(applied > 1500);  // sparse rejections only
}

TEST_CASE("account merging semantics") {
  IllicitCluster c;
  c.id = "merge_test";
  c.nodes = {{0, 0, 5, 0, 100}, {1, 2, 8, 50, 500}, {2, 0, 9, 0, 900},
             {3, 0, 9, 0, 900}};
  c.edges = {{0, 2, 40.0, 0}, {1, 3, 60.0, 10}};

  // Merging two leaves keeps edges, drops a node, unions ranges.
  auto merged = apply_account_merging(c, 2, 3, loose_budget());
  REQUIRE(merged.has_value());
  CHECK(merged->nodes.size() == 3);
  CHECK(merged->edges.size() == 2);
  CHECK(check_sanity(*merged).empty());

  auto merged_sources = apply_account_merging(c, 0, 1, loose_budget());
  REQUIRE(merged_sources.has_value());
  const RoleNode* u = merged_sources->find_role(0);
  REQUIRE(u != nullptr);
  CHECK(u->activity_min == doctest::Approx(0.0));
  CHECK(u->activity_max == doctest::Approx(8.0));
  CHECK(u->amount_scale_max == doctest::Approx(500.0));

  // Merging endpoints of an edge removes that edge.
  IllicitCluster pair = two_hop_chain();
  auto collapsed = apply_account_merging(pair, 0, 1, loose_budget());
  REQUIRE(collapsed.has_value());
  CHECK(collapsed->edges.size() == 1);

  // External amounts survive merges.
  CHECK(external_amount(*merged, 2, 3) == doctest::Approx(100.0));
  CHECK_FALSE(apply_account_merging(c, 0, 0, loose_budget()).has_value());
  CHECK_FALSE(apply_account_merging(c, 0, 42, loose_budget()).has_value());
}

TEST_CASE("account splitting conserves amounts exactly") {
  RngStream rng(4);
  IllicitCluster c;
  c.id = "split_test";
  c.nodes = {{0, 0, 5, 0, 1e5}, {1, 0, 5, 0, 1e5}, {2, 0, 5, 0, 1e5}};
  c.edges = {{0, 1, 100.0, 0}, {0, 2, 55.55, 100}};

  auto split = apply_account_splitting(c, 0, 2, loose_budget(), rng);
  REQUIRE(split.has_value());
  CHECK(split->nodes.size() == 5);  // +k recipients
  CHECK(split->edges.size() == 4);  // each out-edge fans to k
  double total = 0.0;
  for (const auto& e : split->edges) {
    CHECK(e.from_role == 0);
    CHECK(e.amount > 0.0);
    total += e.amount;
  }
  CHECK(total == doctest::Approx(155.55).epsilon(1e-12));

  auto five = apply_account_splitting(c, 0, 5, loose_budget(), rng);
  REQUIRE(five.has_value());
  CHECK(five->nodes.size() == c.nodes.size() + 5);
  int outdeg = 0;
  for (const auto& e : five->edges) {
    if (e.from_role == 0) ++outdeg;
  }
  CHECK(outdeg == 10);  // two flows, five recipients each

  CHECK_FALSE(apply_account_splitting(c, 1, 2, loose_budget(), rng).has_value());
  EditBudget tight{100, 1};
  CHECK_FALSE(apply_account_splitting(c, 0, 2, tight, rng).has_value());
}

TEST_CASE("splitting holds conservation and sanity over 1000 random trials") {
  RngStream rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    IllicitCluster c;
    c.id = "s";
    const int fan = static_cast<int>(rng.uniform_int(1, 4));
    c.nodes.push_back({0, 0, 9, 0, 1e6});
    double total_out = 0.0;
    for (int i = 1; i <= fan; ++i) {
      c.nodes.push_back({i, 0, 9, 0, 1e6});
      const double amount = round_cents(rng.uniform(1.0, 2'000.0));
      total_out += amount;
      c.edges.push_back({0, i, amount, i * 60});
    }
    const int k = static_cast<int>(rng.uniform_int(2, 4));
    auto split = apply_account_splitting(c, 0, k, loose_budget(), rng);
    if (!split.has_value()) continue;
    REQUIRE(check_sanity(*split).empty());
    double total = 0.0;
    for (const auto& e : split->edges) total += e.amount;
    CHECK(total == doctest::Approx(total_out).epsilon(1e-12));
  }
}

TEST_CASE("transaction adjustment identity, rejection, and feasibility") {
  IllicitCluster c = two_hop_chain();
  auto same = apply_transaction_adjustment(c, 0, 0.0, 0, loose_budget());
  REQUIRE(same.has_value());
  CHECK(same->edges == c.edges);
  CHECK(same->budget_used == c.budget_used + 1);

  CHECK_FALSE(apply_transaction_adjustment(c, 0, -101.0, 0, loose_budget()).has_value());
  // Pushing the first hop after the second breaks time order downstream.
  CHECK_FALSE(apply_transaction_adjustment(c, 0, 0.0, 72'000, loose_budget()).has_value());

  auto shifted = apply_transaction_adjustment(c, 1, 25.0, 3600, loose_budget());
  REQUIRE(shifted.has_value());
  CHECK(shifted->edges[1].amount == doctest::Approx(125.0));
  CHECK(shifted->edges[1].rel_time == 36'000 + 3600);
}

TEST_CASE("random feasible adjustments preserve sanity") {
  RngStream rng(6);
  IllicitCluster c = two_hop_chain();
  for (int trial = 0; trial < 1000; ++trial) {
    const int edge = static_cast<int>(
        rng.uniform_int(0, static_cast<int64_t>(c.edges.size()) - 1));
    const double damount = rng.uniform(-30.0, 30.0);
    const int64_t dtime = rng.uniform_int(-7200, 7200);
    auto edited = apply_transaction_adjustment(c, edge, damount, dtime, loose_budget());
    if (edited.has_value()) {
      REQUIRE(check_sanity(*edited).empty());
      c = std::move(*edited);
    }
  }
}

TEST_CASE("apply_action closure, budget monotonicity, rejection identity") {
  RngStream rng(7);
  EditBudget budget{12, 9};
  IllicitCluster c = builtin_seed_clusters()[1];  // fan-in
  int last_budget = 0;
  for (int step = 0; step < 50; ++step) {
    EditAction a;
    const int pick = static_cast<int>(rng.uniform_int(0, 3));
    a.kind = static_cast<EditKind>(pick);
    a.edge_index = static_cast<int>(
        rng.uniform_int(0, static_cast<int64_t>(c.edges.size()) - 1));
    a.hops = static_cast<int>(rng.uniform_int(1, 3));
    a.split_k = static_cast<int>(rng.uniform_int(2, 4));
    a.role = c.nodes[static_cast<std::size_t>(rng.uniform_int(
                         0, static_cast<int64_t>(c.nodes.size()) - 1))]
                 .role_id;
    auto pairs = merge_candidates(c, 3);
    if (!pairs.empty()) {
      a.role_a = pairs[0].first;
      a.role_b = pairs[0].second;
    }
    a.amount_delta = round_cents(rng.uniform(-50.0, 50.0));
    a.time_delta = rng.uniform_int(-3600, 3600);

    IllicitCluster before = c;
    ApplyResult result = apply_action(c, a, budget, rng);
    if (result.applied) {
      CHECK(check_sanity(result.cluster).empty());
      CHECK(result.cluster.budget_used == before.budget_used + 1);
      CHECK(result.cluster.budget_used <= budget.max_edits);
      CHECK(result.cluster.nodes_added <= budget.max_new_nodes);
      CHECK(result.cluster.budget_used >= last_budget);
      last_budget = result.cluster.budget_used;
      c = std::move(result.cluster);
    } else {
      CHECK(result.cluster == before);  // rejection is identity
    }
  }
  CHECK(c.budget_used <= budget.max_edits);

  // Budget 0 rejects injections outright.
  EditAction inject;
  inject.kind = EditKind::intermediary_injection;
  inject.edge_index = 0;
  inject.hops = 1;
  EditBudget zero{0, 0};
  ApplyResult r = apply_action(builtin_seed_clusters()[0], inject, zero, rng);
  CHECK_FALSE(r.applied);
  CHECK(r.cluster == builtin_seed_clusters()[0]);
}

TEST_CASE("merge_candidates ranks by range overlap, deterministic") {
  IllicitCluster c;
  c.nodes = {{0, 0, 10, 0, 100}, {1, 0, 10, 0, 100}, {2, 50, 60, 5'000, 9'000}};
  c.edges = {{0, 1, 10, 0}, {1, 2, 10, 10}};
  auto pairs = merge_candidates(c, 3);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0] == std::make_pair(0, 1));  // identical ranges rank first
  CHECK(merge_candidates(c, 3) == pairs);
}

TEST_CASE("builtin seeds pass sanity and cluster file round-trips") {
  auto seeds = builtin_seed_clusters();
  REQUIRE(seeds.size() >= 4);
  for (const auto& c : seeds) {
    CAPTURE(c.id);
    CHECK(check_sanity(c).empty());
    CHECK(c.edges.size() >= 3);
  }
  const std::string path = "clusters_roundtrip_test.txt";
  save_clusters(seeds, path);
  auto loaded = load_clusters(path);
  REQUIRE(loaded.size() == seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    CHECK(loaded[i].id == seeds[i].id);
    CHECK(loaded[i].nodes == seeds[i].nodes);
    CHECK(loaded[i].edges == seeds[i].edges);
  }
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_clusters("does_not_exist.txt"), IoError);
}
