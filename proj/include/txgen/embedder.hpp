// Inserts hardened clusters into the backbone as intact subgraphs. An
// embedding is accepted only when the role mapping is injective, every host
// satisfies the role's activity/amount ranges, and the anchored times fit
// the horizon without breaching per-host burst caps; otherwise the log is
// returned untouched.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "txgen/anomaly.hpp"
#include "txgen/model.hpp"

namespace txgen {

struct RoleAssignment {
  std::map<int, int> role_to_account;  // role id -> population index, injective
  int64_t time_anchor = 0;
};

enum class RejectionReason : uint8_t { none, structure, profile, temporal };
std::string_view to_string(RejectionReason r);

struct EmbeddingReport {
  std::string cluster_id;
  bool accepted = false;
  RejectionReason reason = RejectionReason::none;
  int edges_added = 0;
};

struct EmbedderConfig {
  double burst_cap_multiplier = 3.0;
  int activity_window_days = 30;
  int max_assignments = 8;
  int max_anchor_tries = 64;
  PaymentFormat laundering_format = PaymentFormat::transfer;
  bool allow_merchant_hosts = false;
  std::string currency = "USD";
};

// Observed activity regime per account over the trailing window of the log:
// events/day (both directions) and typical amount (exp of mean log amount).
// Accounts with no window activity fall back to the profile prior.
class HostIndex {
 public:
  HostIndex(const TransactionLog& log, const EmbedderConfig& cfg);
  double activity_per_day(int account) const { return activity_[account]; }
  double amount_scale(int account) const { return amount_scale_[account]; }
  int max_hourly_count(int account) const { return max_hourly_[account]; }
  int64_t horizon_begin() const { return horizon_begin_; }
  int64_t horizon_end() const { return horizon_end_; }

 private:
  std::vector<double> activity_;
  std::vector<double> amount_scale_;
  std::vector<int> max_hourly_;
  int64_t horizon_begin_ = 0;
  int64_t horizon_end_ = 0;
};

// Up to cfg.max_assignments injective role->host mappings, built greedily
// tightest-range-first with random tie-breaking among eligible hosts.
std::vector<RoleAssignment> find_role_hosts(const IllicitCluster& cluster,
                                            const TransactionLog& log,
                                            const EmbedderConfig& cfg,
                                            RngStream rng);

// Anchor such that all mapped times fall inside the horizon and no host
// exceeds burst_cap_multiplier x its historical max hourly count.
std::optional<int64_t> find_time_window(const IllicitCluster& cluster,
                                        const RoleAssignment& assignment,
                                        const TransactionLog& log,
                                        const EmbedderConfig& cfg, RngStream rng);

// Re-validates all three constraints, then appends one laundering-labeled
// transaction per cluster edge and re-sorts; on violation returns the input
// log unchanged with the failing constraint.
std::pair<TransactionLog, EmbeddingReport> embed_cluster(
    const IllicitCluster& cluster, const RoleAssignment& assignment,
    int64_t anchor, const TransactionLog& log, const EmbedderConfig& cfg);

// Embeds clusters in order until the laundering share reaches
// target_prevalence or the supply is exhausted; deterministic under seed.
std::pair<TransactionLog, std::vector<EmbeddingReport>> embed_all(
    const std::vector<IllicitCluster>& clusters, const TransactionLog& log,
    double target_prevalence, const EmbedderConfig& cfg, uint64_t seed);

}  // namespace txgen
