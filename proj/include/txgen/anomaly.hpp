// Illicit clusters and the four interpretable edit families, with sanity
// checks, budget enforcement, and the seed library the edit engine
// diversifies. Rejection is a value: invalid edits return the original
// cluster unchanged.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "txgen/model.hpp"

namespace txgen {

struct RoleNode {
  int role_id = 0;
  double activity_min = 0.0;  // required events/day at the host
  double activity_max = 1e9;
  double amount_scale_min = 0.0;  // required typical-amount range
  double amount_scale_max = 1e12;
  bool operator==(const RoleNode&) const = default;
};

struct ClusterEdge {
  int from_role = 0;
  int to_role = 0;
  double amount = 0.0;
  int64_t rel_time = 0;  // seconds since the cluster anchor
  bool operator==(const ClusterEdge&) const = default;
};

struct IllicitCluster {
  std::string id;
  std::vector<RoleNode> nodes;
  std::vector<ClusterEdge> edges;
  int budget_used = 0;
  int nodes_added = 0;

  bool operator==(const IllicitCluster&) const = default;
  const RoleNode* find_role(int role_id) const;
  int max_role_id() const;
};

enum class SanityKind : uint8_t {
  DanglingEndpoint,
  NegativeAmount,
  TimeOrderViolation,
  DuplicateRoleId,
};
struct SanityViolation {
  SanityKind kind;
  int role_id = -1;     // offending role, when applicable
  int edge_index = -1;  // offending edge, when applicable
};

// Time order: a role with any incoming edge may not send before its earliest
// inflow; sources are exempt.
std::vector<SanityViolation> check_sanity(const IllicitCluster& cluster);

struct EditBudget {
  int max_edits = 12;
  int max_new_nodes = 9;
};

struct EditConfig {
  double injection_fee = 0.0;          // per-hop skim; 0 = exact conservation
  int64_t injection_window = 48 * 3600;  // max chain stretch past the old time
  double min_split_cents = 1.0;        // every split share >= 1 cent
};

enum class EditKind : uint8_t {
  intermediary_injection,
  account_merging,
  account_splitting,
  transaction_adjustment,
};
std::string_view to_string(EditKind k);

struct EditAction {
  EditKind kind = EditKind::transaction_adjustment;
  int edge_index = -1;     // injection / adjustment target
  int hops = 0;            // injection
  int role_a = -1;         // merging
  int role_b = -1;
  int role = -1;           // splitting
  int split_k = 0;
  double amount_delta = 0.0;  // adjustment
  int64_t time_delta = 0;
};

// Family operations. Each returns the edited cluster, or nullopt when the
// edit is infeasible (budget, missing target, or a sanity-violating result).
std::optional<IllicitCluster> apply_intermediary_injection(
    const IllicitCluster& cluster, int edge_index, int hops,
    const EditBudget& budget, RngStream& rng, const EditConfig& cfg = {});
std::optional<IllicitCluster> apply_account_merging(const IllicitCluster& cluster,
                                                    int role_a, int role_b,
                                                    const EditBudget& budget);
std::optional<IllicitCluster> apply_account_splitting(
    const IllicitCluster& cluster, int role, int k, const EditBudget& budget,
    RngStream& rng, const EditConfig& cfg = {});
std::optional<IllicitCluster> apply_transaction_adjustment(
    const IllicitCluster& cluster, int edge_index, double amount_delta,
    int64_t time_delta, const EditBudget& budget);

struct ApplyResult {
  IllicitCluster cluster;
  bool applied = false;
};

// Dispatch with closure guarantees: never returns an applied=true cluster
// failing check_sanity; rejection returns the input untouched.
ApplyResult apply_action(const IllicitCluster& cluster, const EditAction& action,
                         const EditBudget& budget, RngStream& rng,
                         const EditConfig& cfg = {});

// Similarity used to propose merge candidates: overlap of the two roles'
// activity and amount ranges. Returns role-id pairs, most similar first.
std::vector<std::pair<int, int>> merge_candidates(const IllicitCluster& cluster,
                                                  std::size_t limit);

// Built-in seed library: chains, fan-in, fan-out, and a timed cycle.
std::vector<IllicitCluster> builtin_seed_clusters();

// Line-oriented seed file: `cluster <id>`, `role <id> <act_min> <act_max>
// <amt_min> <amt_max>`, `edge <from> <to> <amount> <rel_time>`, `end`.
std::vector<IllicitCluster> load_clusters(const std::string& path);
void save_clusters(const std::vector<IllicitCluster>& clusters,
                   const std::string& path);

}  // namespace txgen
