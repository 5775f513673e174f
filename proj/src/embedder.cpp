#include "txgen/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "txgen/fidelity.hpp"

namespace txgen {

std::string_view to_string(RejectionReason r) {
  switch (r) {
    case RejectionReason::none: return "none";
    case RejectionReason::structure: return "structure";
    case RejectionReason::profile: return "profile";
    case RejectionReason::temporal: return "temporal";
  }
  return "unknown";
}

HostIndex::HostIndex(const TransactionLog& log, const EmbedderConfig& cfg) {
  const std::size_t n = log.profiles.size();
  activity_.assign(n, 0.0);
  amount_scale_.assign(n, 0.0);
  max_hourly_.assign(n, 0);
  if (log.transactions.empty()) {
    // Fall back on profile priors with a degenerate horizon.
    for (std::size_t i = 0; i < log.profiles.persons.size(); ++i) {
      amount_scale_[i] = std::exp(log.profiles.persons[i].amount_scale);
    }
    return;
  }
  horizon_begin_ = log.transactions.front().timestamp;
  horizon_end_ = log.transactions.back().timestamp;
  const int64_t window_days = cfg.activity_window_days;
  const int64_t window_begin =
      std::max(horizon_begin_, horizon_end_ - window_days * kSecondsPerDay);
  const double effective_days = std::max(
      1.0, static_cast<double>(horizon_end_ - window_begin) / kSecondsPerDay);

  std::vector<double> log_amount_sum(n, 0.0);
  std::vector<int64_t> window_events(n, 0);
  std::unordered_map<int64_t, int> hourly;  // (account, hour) packed -> count
  hourly.reserve(log.transactions.size() * 2);
  for (const Transaction& tx : log.transactions) {
    const int from = log.profiles.find(tx.from);
    const int to = log.profiles.find(tx.to);
    const int64_t hour = tx.timestamp / 3600;
    auto bump = [&](int acct, double amount) {
      if (acct < 0) return;
      const int64_t key = static_cast<int64_t>(acct) * 1'000'003 + hour % 1'000'003;
      // Key packs (account, hour mod large prime); collisions only inflate
      // the historical cap, never undercount an account's own hour.
      int& c = hourly[key];
      ++c;
      max_hourly_[acct] = std::max(max_hourly_[acct], c);
      if (tx.timestamp >= window_begin) {
        ++window_events[acct];
        log_amount_sum[acct] += std::log(std::max(amount, 0.01));
      }
    };
    bump(from, tx.amount_paid);
    bump(to, tx.amount_received);
  }
  for (std::size_t i = 0; i < n; ++i) {
    activity_[i] = static_cast<double>(window_events[i]) / effective_days;
    if (window_events[i] > 0) {
      amount_scale_[i] =
          std::exp(log_amount_sum[i] / static_cast<double>(window_events[i]));
    } else if (i < log.profiles.persons.size()) {
      amount_scale_[i] = std::exp(log.profiles.persons[i].amount_scale);
    }
  }
}

namespace {

bool host_matches(const RoleNode& role, const HostIndex& index, int account) {
  const double act = index.activity_per_day(account);
  const double amt = index.amount_scale(account);
  return act >= role.activity_min && act <= role.activity_max &&
         amt >= role.amount_scale_min && amt <= role.amount_scale_max;
}

}  // namespace

namespace {

std::vector<RoleAssignment> find_role_hosts_indexed(const IllicitCluster& cluster,
                                                    const TransactionLog& log,
                                                    const HostIndex& index,
                                                    const EmbedderConfig& cfg,
                                                    RngStream rng) {
  std::vector<RoleAssignment> out;
  if (log.profiles.size() == 0) return out;

  const std::size_t host_limit =
      cfg.allow_merchant_hosts ? log.profiles.size() : log.profiles.persons.size();

  // Tightest ranges first: fewest-candidates roles claim hosts before the
  // loose ones exhaust them.
  std::vector<std::vector<int>> candidates(cluster.nodes.size());
  for (std::size_t r = 0; r < cluster.nodes.size(); ++r) {
    for (std::size_t a = 0; a < host_limit; ++a) {
      if (host_matches(cluster.nodes[r], index, static_cast<int>(a))) {
        candidates[r].push_back(static_cast<int>(a));
      }
    }
    if (candidates[r].empty()) return out;
  }
  std::vector<std::size_t> role_order(cluster.nodes.size());
  std::iota(role_order.begin(), role_order.end(), 0);
  std::sort(role_order.begin(), role_order.end(),
            [&](std::size_t a, std::size_t b) {
              if (candidates[a].size() != candidates[b].size()) {
                return candidates[a].size() < candidates[b].size();
              }
              return cluster.nodes[a].role_id < cluster.nodes[b].role_id;
            });

  for (int attempt = 0; attempt < cfg.max_assignments; ++attempt) {
    RngStream try_rng = rng.fork(static_cast<uint64_t>(attempt));
    RoleAssignment assignment;
    std::unordered_set<int> used;
    bool ok = true;
    for (std::size_t r : role_order) {
      const auto& pool = candidates[r];
      int chosen = -1;
      for (int tries = 0; tries < 64 && chosen < 0; ++tries) {
        const int candidate = pool[static_cast<std::size_t>(
            try_rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))];
        if (!used.count(candidate)) chosen = candidate;
      }
      if (chosen < 0) {
        // Deterministic sweep as a fallback for tiny candidate pools.
        for (int candidate : pool) {
          if (!used.count(candidate)) {
            chosen = candidate;
            break;
          }
        }
      }
      if (chosen < 0) {
        ok = false;
        break;
      }
      used.insert(chosen);
      assignment.role_to_account[cluster.nodes[r].role_id] = chosen;
    }
    if (ok) out.push_back(std::move(assignment));
  }
  return out;
}

}  // namespace

std::vector<RoleAssignment> find_role_hosts(const IllicitCluster& cluster,
                                            const TransactionLog& log,
                                            const EmbedderConfig& cfg,
                                            RngStream rng) {
  HostIndex index(log, cfg);
  return find_role_hosts_indexed(cluster, log, index, cfg, rng);
}

namespace {

struct HourlyLoad {
  // Incremental per-(account, hour) counts on top of the base log.
  std::unordered_map<uint64_t, int> added;
  static uint64_t key(int account, int64_t hour) {
    return hash_combine(static_cast<uint64_t>(account),
                        static_cast<uint64_t>(hour));
  }
};

int base_hour_count(const TransactionLog& log, const Population& pop,
                    int account, int64_t hour_begin) {
  // Count base-log participations of `account` within [hour_begin, +1h).
  const auto& txs = log.transactions;
  auto lo = std::lower_bound(txs.begin(), txs.end(), hour_begin,
                             [](const Transaction& tx, int64_t t) {
                               return tx.timestamp < t;
                             });
  auto hi = std::lower_bound(lo, txs.end(), hour_begin + 3600,
                             [](const Transaction& tx, int64_t t) {
                               return tx.timestamp < t;
                             });
  int count = 0;
  for (auto it = lo; it != hi; ++it) {
    if (pop.find(it->from) == account || pop.find(it->to) == account) ++count;
  }
  return count;
}

bool anchor_feasible(const IllicitCluster& cluster,
                     const RoleAssignment& assignment, int64_t anchor,
                     const TransactionLog& log, const HostIndex& index,
                     const EmbedderConfig& cfg, const HourlyLoad* extra) {
  std::unordered_map<uint64_t, int> pending;
  for (const auto& e : cluster.edges) {
    const int64_t t = anchor + e.rel_time;
    if (t < index.horizon_begin() || t > index.horizon_end()) return false;
    const int64_t hour = t / 3600;
    const int from = assignment.role_to_account.at(e.from_role);
    const int to = assignment.role_to_account.at(e.to_role);
    ++pending[HourlyLoad::key(from, hour)];
    ++pending[HourlyLoad::key(to, hour)];
  }
  // Burst check per affected (account, hour).
  std::unordered_map<uint64_t, std::pair<int, int64_t>> probe;  // key -> acct,hour
  for (const auto& e : cluster.edges) {
    const int64_t hour = (anchor + e.rel_time) / 3600;
    probe[HourlyLoad::key(assignment.role_to_account.at(e.from_role), hour)] = {
        assignment.role_to_account.at(e.from_role), hour};
    probe[HourlyLoad::key(assignment.role_to_account.at(e.to_role), hour)] = {
        assignment.role_to_account.at(e.to_role), hour};
  }
  for (const auto& [key, who] : probe) {
    const auto [account, hour] = who;
    const int base = base_hour_count(log, log.profiles, account, hour * 3600);
    const int carried =
        extra != nullptr && extra->added.count(key) ? extra->added.at(key) : 0;
    const int cap = static_cast<int>(std::ceil(
        cfg.burst_cap_multiplier *
        std::max(1, index.max_hourly_count(account))));
    if (base + carried + pending[key] > cap) return false;
  }
  return true;
}

std::optional<int64_t> search_anchor(const IllicitCluster& cluster,
                                     const RoleAssignment& assignment,
                                     const TransactionLog& log,
                                     const HostIndex& index,
                                     const EmbedderConfig& cfg, RngStream& rng,
                                     const HourlyLoad* extra) {
  if (cluster.edges.empty()) return std::nullopt;
  int64_t rel_min = std::numeric_limits<int64_t>::max();
  int64_t rel_max = std::numeric_limits<int64_t>::min();
  for (const auto& e : cluster.edges) {
    rel_min = std::min(rel_min, e.rel_time);
    rel_max = std::max(rel_max, e.rel_time);
  }
  const int64_t lo = index.horizon_begin() - rel_min;
  const int64_t hi = index.horizon_end() - rel_max;
  if (hi < lo) return std::nullopt;  // span longer than the horizon
  for (int attempt = 0; attempt < cfg.max_anchor_tries; ++attempt) {
    const int64_t anchor = rng.uniform_int(lo, hi);
    if (anchor_feasible(cluster, assignment, anchor, log, index, cfg, extra)) {
      return anchor;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<int64_t> find_time_window(const IllicitCluster& cluster,
                                        const RoleAssignment& assignment,
                                        const TransactionLog& log,
                                        const EmbedderConfig& cfg,
                                        RngStream rng) {
  HostIndex index(log, cfg);
  if (log.transactions.empty()) return std::nullopt;
  return search_anchor(cluster, assignment, log, index, cfg, rng, nullptr);
}

namespace {

std::vector<Transaction> materialize(const IllicitCluster& cluster,
                                     const RoleAssignment& assignment,
                                     int64_t anchor, const Population& pop,
                                     const EmbedderConfig& cfg) {
  std::vector<Transaction> txs;
  txs.reserve(cluster.edges.size());
  for (const auto& e : cluster.edges) {
    Transaction tx;
    tx.timestamp = anchor + e.rel_time;
    tx.from = pop.account(assignment.role_to_account.at(e.from_role));
    tx.to = pop.account(assignment.role_to_account.at(e.to_role));
    tx.amount_paid = tx.amount_received = round_cents(e.amount);
    tx.payment_currency = tx.receiving_currency = cfg.currency;
    tx.payment_format = cfg.laundering_format;
    tx.is_laundering = true;
    txs.push_back(std::move(tx));
  }
  return txs;
}

RejectionReason validate_embedding(const IllicitCluster& cluster,
                                   const RoleAssignment& assignment,
                                   int64_t anchor, const TransactionLog& log,
                                   const HostIndex& index,
                                   const EmbedderConfig& cfg,
                                   const HourlyLoad* extra) {
  // Structure: complete injective mapping onto known accounts.
  std::unordered_set<int> used;
  for (const auto& n : cluster.nodes) {
    auto it = assignment.role_to_account.find(n.role_id);
    if (it == assignment.role_to_account.end()) return RejectionReason::structure;
    if (it->second < 0 ||
        it->second >= static_cast<int>(log.profiles.size())) {
      return RejectionReason::structure;
    }
    if (!cfg.allow_merchant_hosts &&
        log.profiles.is_merchant(static_cast<std::size_t>(it->second))) {
      return RejectionReason::structure;
    }
    if (!used.insert(it->second).second) return RejectionReason::structure;
  }
  // Profile: each host inside the role's required ranges.
  for (const auto& n : cluster.nodes) {
    if (!host_matches(n, index, assignment.role_to_account.at(n.role_id))) {
      return RejectionReason::profile;
    }
  }
  // Temporal: horizon containment and burst caps.
  if (!anchor_feasible(cluster, assignment, anchor, log, index, cfg, extra)) {
    return RejectionReason::temporal;
  }
  return RejectionReason::none;
}

}  // namespace

std::pair<TransactionLog, EmbeddingReport> embed_cluster(
    const IllicitCluster& cluster, const RoleAssignment& assignment,
    int64_t anchor, const TransactionLog& log, const EmbedderConfig& cfg) {
  EmbeddingReport report;
  report.cluster_id = cluster.id;
  HostIndex index(log, cfg);
  const RejectionReason reason =
      validate_embedding(cluster, assignment, anchor, log, index, cfg, nullptr);
  if (reason != RejectionReason::none) {
    report.accepted = false;
    report.reason = reason;
    return {log, report};
  }
  TransactionLog next = log;
  auto txs = materialize(cluster, assignment, anchor, log.profiles, cfg);
  next.transactions.insert(next.transactions.end(), txs.begin(), txs.end());
  std::stable_sort(next.transactions.begin(), next.transactions.end(),
                   [](const Transaction& a, const Transaction& b) {
                     return a.timestamp < b.timestamp;
                   });
  report.accepted = true;
  report.reason = RejectionReason::none;
  report.edges_added = static_cast<int>(txs.size());
  return {std::move(next), report};
}

std::pair<TransactionLog, std::vector<EmbeddingReport>> embed_all(
    const std::vector<IllicitCluster>& clusters, const TransactionLog& log,
    double target_prevalence, const EmbedderConfig& cfg, uint64_t seed) {
  if (target_prevalence <= 0.0 || target_prevalence > 0.05) {
    throw ConfigError("embed_all: target prevalence must lie in (0, 0.05]");
  }
  std::vector<EmbeddingReport> reports;
  TransactionLog out = log;
  if (clusters.empty()) return {out, reports};

  HostIndex index(log, cfg);
  HourlyLoad load;
  std::vector<Transaction> added;
  std::size_t laundering = 0;
  for (const Transaction& tx : log.transactions) {
    if (tx.is_laundering) ++laundering;
  }
  RngStream root(seed);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const double share =
        out.transactions.empty() && added.empty()
            ? 0.0
            : static_cast<double>(laundering) /
                  static_cast<double>(log.transactions.size() + added.size());
    if (share >= target_prevalence) break;
    const IllicitCluster& cluster = clusters[c];
    EmbeddingReport report;
    report.cluster_id = cluster.id;
    RngStream crng = root.fork(static_cast<uint64_t>(c));

    auto assignments =
        find_role_hosts_indexed(cluster, log, index, cfg, crng.fork("hosts"));
    bool accepted = false;
    for (const auto& assignment : assignments) {
      RngStream arng = crng.fork("anchor");
      auto anchor = search_anchor(cluster, assignment, log, index, cfg, arng, &load);
      if (!anchor.has_value()) continue;
      if (validate_embedding(cluster, assignment, *anchor, log, index, cfg,
                             &load) != RejectionReason::none) {
        continue;
      }
      auto txs = materialize(cluster, assignment, *anchor, log.profiles, cfg);
      for (const auto& tx : txs) {
        const int from = log.profiles.find(tx.from);
        const int to = log.profiles.find(tx.to);
        const int64_t hour = tx.timestamp / 3600;
        ++load.added[HourlyLoad::key(from, hour)];
        ++load.added[HourlyLoad::key(to, hour)];
      }
      laundering += txs.size();
      added.insert(added.end(), txs.begin(), txs.end());
      report.accepted = true;
      report.edges_added = static_cast<int>(txs.size());
      accepted = true;
      break;
    }
    if (!accepted) {
      report.accepted = false;
      report.reason = assignments.empty() ? RejectionReason::profile
                                          : RejectionReason::temporal;
    }
    reports.push_back(std::move(report));
  }
  out.transactions.insert(out.transactions.end(), added.begin(), added.end());
  std::stable_sort(out.transactions.begin(), out.transactions.end(),
                   [](const Transaction& a, const Transaction& b) {
                     return a.timestamp < b.timestamp;
                   });
  return {std::move(out), reports};
}

}  // namespace txgen
