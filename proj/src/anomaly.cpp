#include "txgen/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace txgen {

const RoleNode* IllicitCluster::find_role(int role_id) const {
  for (const auto& n : nodes) {
    if (n.role_id == role_id) return &n;
  }
  return nullptr;
}

int IllicitCluster::max_role_id() const {
  int m = -1;
  for (const auto& n : nodes) m = std::max(m, n.role_id);
  return m;
}

std::string_view to_string(EditKind k) {
  switch (k) {
    case EditKind::intermediary_injection: return "intermediary_injection";
    case EditKind::account_merging: return "account_merging";
    case EditKind::account_splitting: return "account_splitting";
    case EditKind::transaction_adjustment: return "transaction_adjustment";
  }
  return "unknown";
}

std::vector<SanityViolation> check_sanity(const IllicitCluster& cluster) {
  std::vector<SanityViolation> out;
  std::set<int> roles;
  for (const auto& n : cluster.nodes) {
    if (!roles.insert(n.role_id).second) {
      out.push_back({SanityKind::DuplicateRoleId, n.role_id, -1});
    }
  }
  std::map<int, int64_t> earliest_in;
  for (std::size_t i = 0; i < cluster.edges.size(); ++i) {
    const ClusterEdge& e = cluster.edges[i];
    if (!roles.count(e.from_role) || !roles.count(e.to_role)) {
      out.push_back({SanityKind::DanglingEndpoint, -1, static_cast<int>(i)});
    }
    if (e.amount < 0.0) {
      out.push_back({SanityKind::NegativeAmount, -1, static_cast<int>(i)});
    }
    auto it = earliest_in.find(e.to_role);
    if (it == earliest_in.end()) {
      earliest_in.emplace(e.to_role, e.rel_time);
    } else {
      it->second = std::min(it->second, e.rel_time);
    }
  }
  for (std::size_t i = 0; i < cluster.edges.size(); ++i) {
    const ClusterEdge& e = cluster.edges[i];
    auto it = earliest_in.find(e.from_role);
    if (it != earliest_in.end() && e.rel_time < it->second) {
      out.push_back({SanityKind::TimeOrderViolation, e.from_role,
                     static_cast<int>(i)});
    }
  }
  return out;
}

namespace {

bool sane(const IllicitCluster& c) { return check_sanity(c).empty(); }

}  // namespace

std::optional<IllicitCluster> apply_intermediary_injection(
    const IllicitCluster& cluster, int edge_index, int hops,
    const EditBudget& budget, RngStream& rng, const EditConfig& cfg) {
  if (hops < 1) return std::nullopt;
  if (edge_index < 0 ||
      edge_index >= static_cast<int>(cluster.edges.size())) {
    return std::nullopt;
  }
  if (cluster.budget_used + 1 > budget.max_edits) return std::nullopt;
  if (cluster.nodes_added + hops > budget.max_new_nodes) return std::nullopt;

  const ClusterEdge original = cluster.edges[edge_index];

  // Chain times live strictly after the replaced edge. Cap the last hop so a
  // downstream role never ends up sending before its (possibly new) earliest
  // inflow.
  int64_t upper = original.rel_time + cfg.injection_window;
  int64_t other_in = std::numeric_limits<int64_t>::max();
  int64_t min_out = std::numeric_limits<int64_t>::max();
  for (int i = 0; i < static_cast<int>(cluster.edges.size()); ++i) {
    const ClusterEdge& e = cluster.edges[i];
    if (i != edge_index && e.to_role == original.to_role) {
      other_in = std::min(other_in, e.rel_time);
    }
    if (e.from_role == original.to_role) min_out = std::min(min_out, e.rel_time);
  }
  if (min_out != std::numeric_limits<int64_t>::max() &&
      other_in > original.rel_time) {
    upper = std::min(upper, min_out);
  }
  const int64_t span = upper - original.rel_time;
  if (span < hops + 1) return std::nullopt;

  // hops+1 strictly increasing offsets in (rel_time, upper].
  std::set<int64_t> offsets;
  int guard = 0;
  while (static_cast<int>(offsets.size()) < hops + 1 && guard < 20 * (hops + 2)) {
    offsets.insert(rng.uniform_int(1, span));
    ++guard;
  }
  if (static_cast<int>(offsets.size()) < hops + 1) return std::nullopt;

  IllicitCluster edited = cluster;
  const int base_id = edited.max_role_id();
  std::vector<int> chain;
  chain.push_back(original.from_role);
  const RoleNode* from_role = cluster.find_role(original.from_role);
  for (int h = 1; h <= hops; ++h) {
    RoleNode mule = from_role ? *from_role : RoleNode{};
    mule.role_id = base_id + h;
    edited.nodes.push_back(mule);
    chain.push_back(mule.role_id);
  }
  chain.push_back(original.to_role);

  edited.edges.erase(edited.edges.begin() + edge_index);
  auto off_it = offsets.begin();
  double amount = original.amount;
  for (std::size_t leg = 0; leg + 1 < chain.size(); ++leg, ++off_it) {
    if (leg > 0 && cfg.injection_fee > 0.0) {
      amount = round_cents(amount * (1.0 - cfg.injection_fee));
    }
    edited.edges.push_back(
        {chain[leg], chain[leg + 1], amount, original.rel_time + *off_it});
  }
  edited.budget_used += 1;
  edited.nodes_added += hops;
  if (!sane(edited)) return std::nullopt;
  return edited;
}

std::optional<IllicitCluster> apply_account_merging(const IllicitCluster& cluster,
                                                    int role_a, int role_b,
                                                    const EditBudget& budget) {
  if (role_a == role_b) return std::nullopt;
  if (cluster.budget_used + 1 > budget.max_edits) return std::nullopt;
  const RoleNode* a = cluster.find_role(role_a);
  const RoleNode* b = cluster.find_role(role_b);
  if (a == nullptr || b == nullptr) return std::nullopt;

  const int keep = std::min(role_a, role_b);
  const int drop = std::max(role_a, role_b);
  IllicitCluster edited = cluster;
  RoleNode merged = (keep == role_a) ? *a : *b;
  merged.role_id = keep;
  merged.activity_min = std::min(a->activity_min, b->activity_min);
  merged.activity_max = std::max(a->activity_max, b->activity_max);
  merged.amount_scale_min = std::min(a->amount_scale_min, b->amount_scale_min);
  merged.amount_scale_max = std::max(a->amount_scale_max, b->amount_scale_max);
  std::erase_if(edited.nodes, [&](const RoleNode& n) {
    return n.role_id == role_a || n.role_id == role_b;
  });
  edited.nodes.push_back(merged);

  std::vector<ClusterEdge> kept;
  kept.reserve(edited.edges.size());
  for (ClusterEdge e : edited.edges) {
    const bool from_pair = e.from_role == role_a || e.from_role == role_b;
    const bool to_pair = e.to_role == role_a || e.to_role == role_b;
    if (from_pair && to_pair) continue;  // internal edges dropped
    if (from_pair) e.from_role = keep;
    if (to_pair) e.to_role = keep;
    kept.push_back(e);
  }
  edited.edges = std::move(kept);
  if (edited.edges.empty()) return std::nullopt;  // a cluster must keep flow
  edited.budget_used += 1;
  (void)drop;
  if (!sane(edited)) return std::nullopt;
  return edited;
}

std::optional<IllicitCluster> apply_account_splitting(
    const IllicitCluster& cluster, int role, int k, const EditBudget& budget,
    RngStream& rng, const EditConfig& cfg) {
  if (k < 2) return std::nullopt;
  if (cluster.budget_used + 1 > budget.max_edits) return std::nullopt;
  if (cluster.nodes_added + k > budget.max_new_nodes) return std::nullopt;
  const RoleNode* src = cluster.find_role(role);
  if (src == nullptr) return std::nullopt;
  std::vector<int> out_edges;
  for (int i = 0; i < static_cast<int>(cluster.edges.size()); ++i) {
    if (cluster.edges[i].from_role == role) out_edges.push_back(i);
  }
  if (out_edges.empty()) return std::nullopt;

  IllicitCluster edited = cluster;
  const int base_id = edited.max_role_id();
  std::vector<int> recipients;
  for (int i = 1; i <= k; ++i) {
    RoleNode r = *src;
    r.role_id = base_id + i;
    edited.nodes.push_back(r);
    recipients.push_back(r.role_id);
  }

  // Replace each out-edge by k edges; random simplex in cents with an exact
  // residual so amounts conserve exactly.
  std::vector<ClusterEdge> next;
  next.reserve(edited.edges.size() + out_edges.size() * (k - 1));
  for (int i = 0; i < static_cast<int>(edited.edges.size()); ++i) {
    const ClusterEdge& e = edited.edges[i];
    if (e.from_role != role) {
      next.push_back(e);
      continue;
    }
    const int64_t cents = static_cast<int64_t>(std::llround(e.amount * 100.0));
    const int64_t min_cents = static_cast<int64_t>(cfg.min_split_cents);
    if (cents < min_cents * k) return std::nullopt;
    std::vector<double> cuts(k);
    for (auto& c : cuts) c = rng.next_double();
    double cut_total = std::accumulate(cuts.begin(), cuts.end(), 0.0);
    int64_t assigned = 0;
    for (int j = 0; j < k; ++j) {
      int64_t share;
      if (j + 1 == k) {
        share = cents - assigned;
      } else {
        share = static_cast<int64_t>(
            std::floor(cuts[j] / cut_total * static_cast<double>(cents)));
        share = std::clamp(share, min_cents,
                           cents - assigned - min_cents * (k - 1 - j));
      }
      assigned += share;
      next.push_back({role, recipients[j], static_cast<double>(share) / 100.0,
                      e.rel_time});
    }
  }
  edited.edges = std::move(next);
  edited.budget_used += 1;
  edited.nodes_added += k;
  if (!sane(edited)) return std::nullopt;
  return edited;
}

std::optional<IllicitCluster> apply_transaction_adjustment(
    const IllicitCluster& cluster, int edge_index, double amount_delta,
    int64_t time_delta, const EditBudget& budget) {
  if (edge_index < 0 ||
      edge_index >= static_cast<int>(cluster.edges.size())) {
    return std::nullopt;
  }
  if (cluster.budget_used + 1 > budget.max_edits) return std::nullopt;
  IllicitCluster edited = cluster;
  ClusterEdge& e = edited.edges[edge_index];
  const double new_amount = round_cents(e.amount + amount_delta);
  if (new_amount < 0.0) return std::nullopt;
  e.amount = new_amount;
  e.rel_time += time_delta;
  edited.budget_used += 1;
  if (!sane(edited)) return std::nullopt;
  return edited;
}

ApplyResult apply_action(const IllicitCluster& cluster, const EditAction& action,
                         const EditBudget& budget, RngStream& rng,
                         const EditConfig& cfg) {
  std::optional<IllicitCluster> edited;
  switch (action.kind) {
    case EditKind::intermediary_injection:
      edited = apply_intermediary_injection(cluster, action.edge_index,
                                            action.hops, budget, rng, cfg);
      break;
    case EditKind::account_merging:
      edited = apply_account_merging(cluster, action.role_a, action.role_b, budget);
      break;
    case EditKind::account_splitting:
      edited = apply_account_splitting(cluster, action.role, action.split_k,
                                       budget, rng, cfg);
      break;
    case EditKind::transaction_adjustment:
      edited = apply_transaction_adjustment(cluster, action.edge_index,
                                            action.amount_delta,
                                            action.time_delta, budget);
      break;
  }
  if (!edited.has_value()) return {cluster, false};
  return {std::move(*edited), true};
}

std::vector<std::pair<int, int>> merge_candidates(const IllicitCluster& cluster,
                                                  std::size_t limit) {
  auto overlap = [](double lo1, double hi1, double lo2, double hi2) {
    const double inter = std::min(hi1, hi2) - std::max(lo1, lo2);
    const double uni = std::max(hi1, hi2) - std::min(lo1, lo2);
    if (uni <= 0.0) return 1.0;
    return std::max(inter, 0.0) / uni;
  };
  struct Scored {
    double score;
    int a, b;
  };
  std::vector<Scored> scored;
  for (std::size_t i = 0; i < cluster.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < cluster.nodes.size(); ++j) {
      const RoleNode& a = cluster.nodes[i];
      const RoleNode& b = cluster.nodes[j];
      const double s =
          overlap(a.activity_min, a.activity_max, b.activity_min, b.activity_max) +
          overlap(a.amount_scale_min, a.amount_scale_max, b.amount_scale_min,
                  b.amount_scale_max);
      scored.push_back({s, std::min(a.role_id, b.role_id),
                        std::max(a.role_id, b.role_id)});
    }
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  std::vector<std::pair<int, int>> out;
  for (const auto& s : scored) {
    if (out.size() >= limit) break;
    out.emplace_back(s.a, s.b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seed library and file format
// ---------------------------------------------------------------------------

namespace {

RoleNode mule_role(int id) { return {id, 0.0, 12.0, 10.0, 80'000.0}; }

}  // namespace

std::vector<IllicitCluster> builtin_seed_clusters() {
  std::vector<IllicitCluster> seeds;
  const int64_t h = 3600;

  {
    IllicitCluster c;
    c.id = "chain4";
    for (int i = 0; i < 4; ++i) c.nodes.push_back(mule_role(i));
    c.edges = {{0, 1, 9'800.00, 0},
               {1, 2, 9'750.00, 7 * h},
               {2, 3, 9'700.00, 16 * h}};
    seeds.push_back(c);
  }
  {
    IllicitCluster c;
    c.id = "fanin5";
    for (int i = 0; i < 6; ++i) c.nodes.push_back(mule_role(i));
    c.edges = {{0, 4, 2'450.00, 0},
               {1, 4, 2'500.00, 2 * h},
               {2, 4, 2'400.00, 3 * h},
               {3, 4, 2'550.00, 5 * h},
               {4, 5, 9'800.00, 9 * h}};
    seeds.push_back(c);
  }
  {
    IllicitCluster c;
    c.id = "fanout5";
    for (int i = 0; i < 6; ++i) c.nodes.push_back(mule_role(i));
    c.edges = {{0, 1, 3'200.00, 0},
               {0, 2, 2'900.00, 1 * h},
               {0, 3, 3'100.00, 2 * h},
               {0, 4, 2'800.00, 4 * h},
               {0, 5, 3'000.00, 6 * h}};
    seeds.push_back(c);
  }
  {
    // Source-fed cycle: funds enter at role 1 and loop 1->2->3->1. A pure
    // cycle cannot satisfy the no-outflow-before-inflow rule.
    IllicitCluster c;
    c.id = "cycle3";
    for (int i = 0; i < 4; ++i) c.nodes.push_back(mule_role(i));
    c.edges = {{0, 1, 5'100.00, 0},
               {1, 2, 5'000.00, 6 * h},
               {2, 3, 4'900.00, 14 * h},
               {3, 1, 4'800.00, 26 * h}};
    seeds.push_back(c);
  }
  {
    IllicitCluster c;
    c.id = "chain6";
    for (int i = 0; i < 6; ++i) c.nodes.push_back(mule_role(i));
    c.edges = {{0, 1, 2'900.00, 0},
               {1, 2, 2'900.00, 5 * h},
               {2, 3, 2'900.00, 11 * h},
               {3, 4, 2'900.00, 18 * h},
               {4, 5, 2'900.00, 26 * h}};
    seeds.push_back(c);
  }
  {
    IllicitCluster c;
    c.id = "layered8";
    for (int i = 0; i < 8; ++i) c.nodes.push_back(mule_role(i));
    c.edges = {{0, 2, 4'100.00, 0},
               {1, 2, 3'900.00, 1 * h},
               {0, 3, 4'000.00, 2 * h},
               {1, 3, 4'200.00, 2 * h},
               {2, 4, 8'000.00, 6 * h},
               {3, 5, 8'200.00, 7 * h},
               {4, 6, 7'900.00, 12 * h},
               {5, 6, 8'100.00, 14 * h},
               {6, 7, 16'000.00, 22 * h}};
    seeds.push_back(c);
  }
  return seeds;
}

std::vector<IllicitCluster> load_clusters(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_clusters: cannot open " + path);
  std::vector<IllicitCluster> out;
  std::optional<IllicitCluster> current;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string op;
    if (!(ss >> op) || op[0] == '#') continue;
    auto fail = [&](const std::string& msg) {
      throw IoError("load_clusters: line " + std::to_string(line_no) + ": " + msg);
    };
    if (op == "cluster") {
      if (current.has_value()) fail("nested cluster");
      current.emplace();
      if (!(ss >> current->id)) fail("cluster requires an id");
    } else if (op == "role") {
      if (!current.has_value()) fail("role outside cluster");
      RoleNode r;
      if (!(ss >> r.role_id >> r.activity_min >> r.activity_max >>
            r.amount_scale_min >> r.amount_scale_max)) {
        fail("role requires: id act_min act_max amt_min amt_max");
      }
      current->nodes.push_back(r);
    } else if (op == "edge") {
      if (!current.has_value()) fail("edge outside cluster");
      ClusterEdge e;
      if (!(ss >> e.from_role >> e.to_role >> e.amount >> e.rel_time)) {
        fail("edge requires: from to amount rel_time");
      }
      current->edges.push_back(e);
    } else if (op == "end") {
      if (!current.has_value()) fail("end outside cluster");
      auto violations = check_sanity(*current);
      if (!violations.empty()) fail("cluster " + current->id + " fails sanity");
      out.push_back(std::move(*current));
      current.reset();
    } else {
      fail("unknown directive " + op);
    }
  }
  if (current.has_value()) throw IoError("load_clusters: missing trailing end");
  return out;
}

void save_clusters(const std::vector<IllicitCluster>& clusters,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_clusters: cannot open " + path);
  char buf[64];
  for (const auto& c : clusters) {
    out << "cluster " << c.id << "\n";
    for (const auto& n : c.nodes) {
      std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g", n.activity_min,
                    n.activity_max, n.amount_scale_min, n.amount_scale_max);
      out << "role " << n.role_id << " " << buf << "\n";
    }
    for (const auto& e : c.edges) {
      std::snprintf(buf, sizeof(buf), "%.2f", e.amount);
      out << "edge " << e.from_role << " " << e.to_role << " " << buf << " "
          << e.rel_time << "\n";
    }
    out << "end\n";
  }
}

}  // namespace txgen
