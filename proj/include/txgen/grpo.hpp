// Group-relative policy optimization over the discrete edit grid. Advantages
// are standardized within each group of sampled trajectories; no value
// function is trained. The monitor's composite score on a fixed evaluation
// context supplies the reward signal.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "txgen/anomaly.hpp"
#include "txgen/model.hpp"
#include "txgen/monitor.hpp"

namespace txgen {

// One policy-selectable cell of the edit grid. Concrete targets (edge, role)
// are drawn uniformly from feasible candidates at application time.
struct GridAction {
  EditKind kind = EditKind::transaction_adjustment;
  int hops = 0;          // injection
  int split_k = 0;       // splitting
  double amount_pct = 0.0;  // adjustment: +-1%, 5%, 20% of edge amount
  int64_t time_delta = 0;   // adjustment: +-1h, 6h, 24h
  int merge_rank = -1;      // merging: index into merge_candidates
  std::string label() const;
};

// hops {1,2,3}; split k {2,3,4}; amount +-{1,5,20}%; time +-{1,6,24}h;
// merge ranks {0,1,2}. 21 actions total.
std::vector<GridAction> default_action_grid();

struct GrpoConfig {
  int group_size = 8;  // K
  int t_max = 12;
  double lambda_mon = 1.0;
  double epsilon = 1e-8;
  double learning_rate = 0.05;
  int iterations = 50;
  double invalid_penalty = -1.0;
  int invalid_termination_count = 3;
  double temperature = 1.0;
  EditBudget budget;
  EditConfig edit;
  void validate() const;  // throws ConfigError
};

// Cluster digest fed to the policy: bias, node count, edge count, log total
// amount, time-respecting depth, max fan-in/out, budget remaining fraction.
inline constexpr int kPolicyFeatureDim = 8;
std::vector<double> cluster_features(const IllicitCluster& cluster,
                                     const EditBudget& budget);

struct Policy {
  std::vector<GridAction> grid;
  std::vector<std::vector<double>> theta;  // [actions][kPolicyFeatureDim]
  double temperature = 1.0;

  static Policy init(std::vector<GridAction> grid, double temperature = 1.0);
  std::vector<double> logits(std::span<const double> features) const;
  std::vector<double> probs(std::span<const double> features) const;
  double log_prob(std::span<const double> features, int action) const;
};

void save_policy(const Policy& policy, const std::string& path);
Policy load_policy(const std::string& path);

// Overlays a cluster on a fixed benign context and scores the combined edge
// set with the monitor. Context scores are precomputed once; synthetic role
// accounts never collide with context accounts, so only cluster-edge
// features vary between evaluations.
class ClusterScorer {
 public:
  ClusterScorer(const MonitorModel& model, const TransactionLog& context,
                CompositeWeights weights = {});
  MetricsReport score(const IllicitCluster& cluster) const;
  double composite(const IllicitCluster& cluster) const;
  int64_t anchor() const { return anchor_; }

 private:
  MonitorModel model_;  // owned copy; callers may pass temporaries
  CompositeWeights weights_;
  std::vector<double> context_scores_;
  int64_t anchor_ = 0;
  std::string currency_;
};

// R_t = R_validity + lambda * (S_pre - S_post); invalid edits earn the
// penalty with no score delta.
double step_reward(double s_pre, double s_post, bool valid, const GrpoConfig& cfg);

struct TrajectoryStep {
  std::vector<double> state_features;
  int action_index = -1;
  EditAction action;
  double reward = 0.0;
  bool applied = false;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double total_return = 0.0;
  double final_composite = 0.0;
};

// Tracks the best (lowest composite) sane variant seen, seeded with the
// unedited cluster so the hardened result never scores above the seed.
struct BestVariant {
  IllicitCluster cluster;
  double composite = 0.0;
};

std::vector<Trajectory> sample_trajectories(const Policy& policy,
                                            const IllicitCluster& cluster,
                                            const ClusterScorer& scorer,
                                            const GrpoConfig& cfg, RngStream rng,
                                            BestVariant* best = nullptr);

// Population mean/std standardization: A_i = (G_i - mu) / (sigma + eps).
std::vector<double> group_advantages(std::span<const double> returns, double epsilon);

// One gradient step on L = -(1/K) sum_i A_i sum_t log pi(a_t | s_t).
Policy policy_update(const Policy& policy,
                     const std::vector<Trajectory>& trajectories,
                     std::span<const double> advantages, const GrpoConfig& cfg);

// Analytic gradient of L, exposed for verification against finite
// differences. Layout matches Policy::theta.
std::vector<std::vector<double>> policy_loss_gradient(
    const Policy& policy, const std::vector<Trajectory>& trajectories,
    std::span<const double> advantages);
double policy_loss(const Policy& policy,
                   const std::vector<Trajectory>& trajectories,
                   std::span<const double> advantages);

struct GrpoTrainingRow {
  int iteration = 0;
  double mean_return = 0.0;
  double mean_composite = 0.0;
};

struct GrpoResult {
  Policy policy;
  std::vector<IllicitCluster> hardened;  // one per seed, lowest-S variant
  std::vector<double> hardened_composite;
  std::vector<double> seed_composite;
  std::vector<GrpoTrainingRow> training_log;
};

GrpoResult run_grpo(const std::vector<IllicitCluster>& seeds,
                    const ClusterScorer& scorer, const GrpoConfig& cfg,
                    uint64_t seed);

// Rollout of the (trained) policy used to diversify seed clusters before
// embedding; returns the final sane state after up to `steps` sampled edits.
IllicitCluster policy_rollout(const Policy& policy, const IllicitCluster& cluster,
                              const GrpoConfig& cfg, int steps, RngStream rng);

}  // namespace txgen
