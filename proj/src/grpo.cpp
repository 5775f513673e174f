#include "txgen/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

namespace txgen {

std::string GridAction::label() const {
  char buf[64];
  switch (kind) {
    case EditKind::intermediary_injection:
      std::snprintf(buf, sizeof(buf), "inject_h%d", hops);
      break;
    case EditKind::account_splitting:
      std::snprintf(buf, sizeof(buf), "split_k%d", split_k);
      break;
    case EditKind::account_merging:
      std::snprintf(buf, sizeof(buf), "merge_r%d", merge_rank);
      break;
    case EditKind::transaction_adjustment:
      if (time_delta != 0) {
        std::snprintf(buf, sizeof(buf), "time_%+ldh", static_cast<long>(time_delta / 3600));
      } else {
        std::snprintf(buf, sizeof(buf), "amount_%+g%%", amount_pct * 100.0);
      }
      break;
  }
  return buf;
}

std::vector<GridAction> default_action_grid() {
  std::vector<GridAction> grid;
  for (int h : {1, 2, 3}) {
    GridAction a;
    a.kind = EditKind::intermediary_injection;
    a.hops = h;
    grid.push_back(a);
  }
  for (int k : {2, 3, 4}) {
    GridAction a;
    a.kind = EditKind::account_splitting;
    a.split_k = k;
    grid.push_back(a);
  }
  for (double pct : {0.01, 0.05, 0.20}) {
    for (double sign : {1.0, -1.0}) {
      GridAction a;
      a.kind = EditKind::transaction_adjustment;
      a.amount_pct = sign * pct;
      grid.push_back(a);
    }
  }
  for (int64_t hrs : {1, 6, 24}) {
    for (int64_t sign : {1, -1}) {
      GridAction a;
      a.kind = EditKind::transaction_adjustment;
      a.time_delta = sign * hrs * 3600;
      grid.push_back(a);
    }
  }
  for (int r : {0, 1, 2}) {
    GridAction a;
    a.kind = EditKind::account_merging;
    a.merge_rank = r;
    grid.push_back(a);
  }
  return grid;
}

void GrpoConfig::validate() const {
  if (group_size < 2) throw ConfigError("grpo: group_size must be >= 2");
  if (t_max < 0) throw ConfigError("grpo: t_max must be >= 0");
  if (lambda_mon < 0.0) throw ConfigError("grpo: lambda_mon must be >= 0");
  if (epsilon <= 0.0) throw ConfigError("grpo: epsilon must be > 0");
  if (learning_rate <= 0.0) throw ConfigError("grpo: learning_rate must be > 0");
  if (iterations < 0) throw ConfigError("grpo: iterations must be >= 0");
  if (temperature <= 0.0) throw ConfigError("grpo: temperature must be > 0");
}

std::vector<double> cluster_features(const IllicitCluster& cluster,
                                     const EditBudget& budget) {
  std::vector<double> f(kPolicyFeatureDim, 0.0);
  f[0] = 1.0;
  f[1] = static_cast<double>(cluster.nodes.size()) / 10.0;
  f[2] = static_cast<double>(cluster.edges.size()) / 10.0;
  double total = 0.0;
  std::map<int, int> fan_in, fan_out;
  for (const auto& e : cluster.edges) {
    total += e.amount;
    ++fan_out[e.from_role];
    ++fan_in[e.to_role];
  }
  f[3] = std::log1p(total) / 10.0;

  // Longest time-respecting path, DP over edges sorted by rel_time.
  std::vector<std::size_t> order(cluster.edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cluster.edges[a].rel_time < cluster.edges[b].rel_time;
  });
  std::vector<int> depth(cluster.edges.size(), 1);
  int max_depth = cluster.edges.empty() ? 0 : 1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& e = cluster.edges[order[i]];
    for (std::size_t j = 0; j < i; ++j) {
      const auto& prev = cluster.edges[order[j]];
      if (prev.to_role == e.from_role && prev.rel_time <= e.rel_time) {
        depth[order[i]] = std::max(depth[order[i]], depth[order[j]] + 1);
      }
    }
    max_depth = std::max(max_depth, depth[order[i]]);
  }
  f[4] = static_cast<double>(max_depth) / 5.0;
  int max_in = 0, max_out = 0;
  for (const auto& [role, c] : fan_in) max_in = std::max(max_in, c);
  for (const auto& [role, c] : fan_out) max_out = std::max(max_out, c);
  f[5] = static_cast<double>(max_in) / 5.0;
  f[6] = static_cast<double>(max_out) / 5.0;
  f[7] = budget.max_edits > 0
             ? static_cast<double>(budget.max_edits - cluster.budget_used) /
                   static_cast<double>(budget.max_edits)
             : 0.0;
  return f;
}

Policy Policy::init(std::vector<GridAction> grid, double temperature) {
  Policy p;
  p.grid = std::move(grid);
  p.theta.assign(p.grid.size(), std::vector<double>(kPolicyFeatureDim, 0.0));
  p.temperature = temperature;
  return p;
}

std::vector<double> Policy::logits(std::span<const double> features) const {
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t a = 0; a < grid.size(); ++a) {
    double z = 0.0;
    for (int j = 0; j < kPolicyFeatureDim; ++j) z += theta[a][j] * features[j];
    out[a] = z / temperature;
  }
  return out;
}

std::vector<double> Policy::probs(std::span<const double> features) const {
  std::vector<double> z = logits(features);
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (auto& v : z) {
    v = std::exp(v - zmax);
    total += v;
  }
  for (auto& v : z) v /= total;
  return z;
}

double Policy::log_prob(std::span<const double> features, int action) const {
  std::vector<double> z = logits(features);
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - zmax);
  return z[action] - zmax - std::log(total);
}

void save_policy(const Policy& policy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_policy: cannot open " + path);
  out << "policy v1\n";
  out << "actions " << policy.grid.size() << "\n";
  out << "features " << kPolicyFeatureDim << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", policy.temperature);
  out << "temperature " << buf << "\n";
  for (std::size_t a = 0; a < policy.grid.size(); ++a) {
    const GridAction& g = policy.grid[a];
    out << "action " << static_cast<int>(g.kind) << " " << g.hops << " "
        << g.split_k << " ";
    std::snprintf(buf, sizeof(buf), "%.17g", g.amount_pct);
    out << buf << " " << g.time_delta << " " << g.merge_rank << "\n";
    out << "theta";
    for (double v : policy.theta[a]) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      out << buf;
    }
    out << "\n";
  }
}

Policy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_policy: cannot open " + path);
  std::string word, version;
  in >> word >> version;
  if (word != "policy" || version != "v1") throw IoError("load_policy: bad header");
  std::size_t actions = 0;
  int features = 0;
  in >> word >> actions;
  if (word != "actions") throw IoError("load_policy: expected actions");
  in >> word >> features;
  if (word != "features" || features != kPolicyFeatureDim) {
    throw IoError("load_policy: feature dim mismatch");
  }
  Policy p;
  in >> word >> p.temperature;
  if (word != "temperature") throw IoError("load_policy: expected temperature");
  p.grid.resize(actions);
  p.theta.assign(actions, std::vector<double>(kPolicyFeatureDim, 0.0));
  for (std::size_t a = 0; a < actions; ++a) {
    int kind = 0;
    in >> word;
    if (word != "action") throw IoError("load_policy: expected action");
    GridAction& g = p.grid[a];
    in >> kind >> g.hops >> g.split_k >> g.amount_pct >> g.time_delta >>
        g.merge_rank;
    g.kind = static_cast<EditKind>(kind);
    in >> word;
    if (word != "theta") throw IoError("load_policy: expected theta");
    for (auto& v : p.theta[a]) in >> v;
  }
  if (!in) throw IoError("load_policy: truncated file");
  return p;
}

// ---------------------------------------------------------------------------
// Scoring overlay
// ---------------------------------------------------------------------------

ClusterScorer::ClusterScorer(const MonitorModel& model,
                             const TransactionLog& context,
                             CompositeWeights weights)
    : model_(model), weights_(weights) {
  if (context.transactions.empty()) {
    throw MetricsError("ClusterScorer: empty context");
  }
  currency_ = context.transactions.front().payment_currency;
  FeatureExtractor extractor(context);
  context_scores_.reserve(context.transactions.size());
  for (std::size_t i = 0; i < context.transactions.size(); ++i) {
    if (context.transactions[i].is_laundering) {
      throw MetricsError("ClusterScorer: context must be benign");
    }
    context_scores_.push_back(model_.score(extractor.extract(i)));
  }
  const int64_t first = context.transactions.front().timestamp;
  const int64_t last = context.transactions.back().timestamp;
  anchor_ = first + (last - first) / 2;
}

MetricsReport ClusterScorer::score(const IllicitCluster& cluster) const {
  if (cluster.edges.empty()) {
    throw MetricsError("ClusterScorer: cluster has no edges");
  }
  // Instantiate the cluster on synthetic accounts; features of context edges
  // cannot change because the account sets are disjoint.
  TransactionLog mini;
  for (const auto& e : cluster.edges) {
    Transaction tx;
    tx.timestamp = anchor_ + e.rel_time;
    tx.from = {"XC", "r" + std::to_string(e.from_role)};
    tx.to = {"XC", "r" + std::to_string(e.to_role)};
    tx.amount_paid = tx.amount_received = e.amount;
    tx.payment_currency = tx.receiving_currency = currency_;
    tx.payment_format = PaymentFormat::transfer;
    tx.is_laundering = true;
    mini.transactions.push_back(std::move(tx));
  }
  std::stable_sort(mini.transactions.begin(), mini.transactions.end(),
                   [](const Transaction& a, const Transaction& b) {
                     return a.timestamp < b.timestamp;
                   });
  FeatureExtractor extractor(mini);
  std::vector<double> scores = context_scores_;
  std::vector<uint8_t> labels(context_scores_.size(), 0);
  for (std::size_t i = 0; i < mini.transactions.size(); ++i) {
    scores.push_back(model_.score(extractor.extract(i)));
    labels.push_back(1);
  }
  return compute_metrics(scores, labels, model_.decision_threshold, weights_);
}

double ClusterScorer::composite(const IllicitCluster& cluster) const {
  return score(cluster).composite;
}

// ---------------------------------------------------------------------------
// GRPO core
// ---------------------------------------------------------------------------

double step_reward(double s_pre, double s_post, bool valid, const GrpoConfig& cfg) {
  if (!valid) return cfg.invalid_penalty;
  return cfg.lambda_mon * (s_pre - s_post);
}

namespace {

// Instantiates a grid cell into a concrete EditAction, drawing targets
// uniformly from feasible candidates.
EditAction instantiate(const GridAction& g, const IllicitCluster& cluster,
                       RngStream& rng) {
  EditAction a;
  a.kind = g.kind;
  const int n_edges = static_cast<int>(cluster.edges.size());
  switch (g.kind) {
    case EditKind::intermediary_injection: {
      a.hops = g.hops;
      if (n_edges > 0) {
        a.edge_index = static_cast<int>(rng.uniform_int(0, n_edges - 1));
      }
      break;
    }
    case EditKind::account_splitting: {
      a.split_k = g.split_k;
      std::vector<int> candidates;
      for (const auto& n : cluster.nodes) {
        for (const auto& e : cluster.edges) {
          if (e.from_role == n.role_id) {
            candidates.push_back(n.role_id);
            break;
          }
        }
      }
      if (!candidates.empty()) {
        a.role = candidates[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int64_t>(candidates.size()) - 1))];
      }
      break;
    }
    case EditKind::account_merging: {
      auto pairs = merge_candidates(cluster, 3);
      if (g.merge_rank >= 0 && g.merge_rank < static_cast<int>(pairs.size())) {
        a.role_a = pairs[g.merge_rank].first;
        a.role_b = pairs[g.merge_rank].second;
      }
      break;
    }
    case EditKind::transaction_adjustment: {
      if (n_edges > 0) {
        a.edge_index = static_cast<int>(rng.uniform_int(0, n_edges - 1));
        a.amount_delta =
            round_cents(cluster.edges[a.edge_index].amount * g.amount_pct);
        a.time_delta = g.time_delta;
      }
      break;
    }
  }
  return a;
}

}  // namespace

std::vector<Trajectory> sample_trajectories(const Policy& policy,
                                            const IllicitCluster& cluster,
                                            const ClusterScorer& scorer,
                                            const GrpoConfig& cfg, RngStream rng,
                                            BestVariant* best) {
  if (!check_sanity(cluster).empty()) {
    throw GenerationError("sample_trajectories: seed cluster fails sanity");
  }
  std::vector<Trajectory> out;
  out.reserve(cfg.group_size);
  const double seed_composite = scorer.composite(cluster);
  if (best != nullptr && best->cluster.edges.empty()) {
    best->cluster = cluster;
    best->composite = seed_composite;
  }
  for (int k = 0; k < cfg.group_size; ++k) {
    RngStream traj_rng = rng.fork(static_cast<uint64_t>(k));
    Trajectory traj;
    IllicitCluster state = cluster;
    double s_pre = seed_composite;
    int consecutive_invalid = 0;
    for (int t = 0; t < cfg.t_max; ++t) {
      if (state.budget_used >= cfg.budget.max_edits) break;
      TrajectoryStep step;
      step.state_features = cluster_features(state, cfg.budget);
      const std::vector<double> p = policy.probs(step.state_features);
      RngStream step_rng = traj_rng.fork(static_cast<uint64_t>(t));
      step.action_index = static_cast<int>(step_rng.categorical(p));
      step.action = instantiate(policy.grid[step.action_index], state, step_rng);
      ApplyResult result = apply_action(state, step.action, cfg.budget,
                                        step_rng, cfg.edit);
      step.applied = result.applied;
      if (result.applied) {
        const double s_post = scorer.composite(result.cluster);
        step.reward = step_reward(s_pre, s_post, true, cfg);
        state = std::move(result.cluster);
        s_pre = s_post;
        consecutive_invalid = 0;
        if (best != nullptr && s_post < best->composite) {
          best->composite = s_post;
          best->cluster = state;
        }
      } else {
        step.reward = step_reward(s_pre, s_pre, false, cfg);
        ++consecutive_invalid;
      }
      traj.total_return += step.reward;
      traj.steps.push_back(std::move(step));
      if (consecutive_invalid >= cfg.invalid_termination_count) break;
    }
    traj.final_composite = s_pre;
    out.push_back(std::move(traj));
  }
  return out;
}

std::vector<double> group_advantages(std::span<const double> returns,
                                     double epsilon) {
  if (returns.size() < 2) {
    throw GenerationError("group_advantages: need K >= 2");
  }
  const double k = static_cast<double>(returns.size());
  double mu = 0.0;
  for (double g : returns) mu += g;
  mu /= k;
  double var = 0.0;
  for (double g : returns) var += (g - mu) * (g - mu);
  var /= k;
  const double sigma = std::sqrt(var);
  std::vector<double> out(returns.size());
  for (std::size_t i = 0; i < returns.size(); ++i) {
    out[i] = (returns[i] - mu) / (sigma + epsilon);
  }
  return out;
}

double policy_loss(const Policy& policy,
                   const std::vector<Trajectory>& trajectories,
                   std::span<const double> advantages) {
  double loss = 0.0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    double lp = 0.0;
    for (const auto& step : trajectories[i].steps) {
      lp += policy.log_prob(step.state_features, step.action_index);
    }
    loss -= advantages[i] * lp;
  }
  return loss / static_cast<double>(trajectories.size());
}

std::vector<std::vector<double>> policy_loss_gradient(
    const Policy& policy, const std::vector<Trajectory>& trajectories,
    std::span<const double> advantages) {
  std::vector<std::vector<double>> grad(
      policy.grid.size(), std::vector<double>(kPolicyFeatureDim, 0.0));
  const double inv_k = 1.0 / static_cast<double>(trajectories.size());
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const double a_i = advantages[i];
    if (a_i == 0.0) continue;
    for (const auto& step : trajectories[i].steps) {
      const std::vector<double> p = policy.probs(step.state_features);
      for (std::size_t b = 0; b < policy.grid.size(); ++b) {
        const double indicator = (static_cast<int>(b) == step.action_index) ? 1.0 : 0.0;
        const double coef =
            -inv_k * a_i * (indicator - p[b]) / policy.temperature;
        for (int j = 0; j < kPolicyFeatureDim; ++j) {
          grad[b][j] += coef * step.state_features[j];
        }
      }
    }
  }
  return grad;
}

Policy policy_update(const Policy& policy,
                     const std::vector<Trajectory>& trajectories,
                     std::span<const double> advantages, const GrpoConfig& cfg) {
  if (trajectories.size() != advantages.size()) {
    throw GenerationError("policy_update: trajectory/advantage size mismatch");
  }
  const auto grad = policy_loss_gradient(policy, trajectories, advantages);
  Policy next = policy;
  for (std::size_t a = 0; a < next.theta.size(); ++a) {
    for (int j = 0; j < kPolicyFeatureDim; ++j) {
      const double g = grad[a][j];
      if (!std::isfinite(g)) {
        throw GenerationError("policy_update: non-finite gradient");
      }
      next.theta[a][j] -= cfg.learning_rate * g;
    }
  }
  return next;
}

GrpoResult run_grpo(const std::vector<IllicitCluster>& seeds,
                    const ClusterScorer& scorer, const GrpoConfig& cfg,
                    uint64_t seed) {
  cfg.validate();
  if (seeds.empty()) throw GenerationError("run_grpo: need at least one seed");
  GrpoResult result;
  result.policy = Policy::init(default_action_grid(), cfg.temperature);
  std::vector<BestVariant> best(seeds.size());
  result.seed_composite.resize(seeds.size());
  for (std::size_t c = 0; c < seeds.size(); ++c) {
    best[c].cluster = seeds[c];
    best[c].composite = scorer.composite(seeds[c]);
    result.seed_composite[c] = best[c].composite;
  }

  RngStream root(seed);
  for (int it = 0; it < cfg.iterations; ++it) {
    RngStream iter_rng = root.fork("grpo.iter").fork(static_cast<uint64_t>(it));
    double sum_return = 0.0;
    double sum_composite = 0.0;
    std::size_t n_traj = 0;
    std::vector<std::vector<double>> grad(
        result.policy.grid.size(), std::vector<double>(kPolicyFeatureDim, 0.0));
    for (std::size_t c = 0; c < seeds.size(); ++c) {
      auto trajectories =
          sample_trajectories(result.policy, seeds[c], scorer, cfg,
                              iter_rng.fork(static_cast<uint64_t>(c)), &best[c]);
      std::vector<double> returns;
      returns.reserve(trajectories.size());
      for (const auto& t : trajectories) {
        returns.push_back(t.total_return);
        sum_return += t.total_return;
        sum_composite += t.final_composite;
        ++n_traj;
      }
      const auto advantages = group_advantages(returns, cfg.epsilon);
      const auto g = policy_loss_gradient(result.policy, trajectories, advantages);
      for (std::size_t a = 0; a < grad.size(); ++a) {
        for (int j = 0; j < kPolicyFeatureDim; ++j) grad[a][j] += g[a][j];
      }
    }
    const double inv_c = 1.0 / static_cast<double>(seeds.size());
    for (std::size_t a = 0; a < grad.size(); ++a) {
      for (int j = 0; j < kPolicyFeatureDim; ++j) {
        const double g = grad[a][j] * inv_c;
        if (!std::isfinite(g)) {
          throw GenerationError("run_grpo: non-finite gradient");
        }
        result.policy.theta[a][j] -= cfg.learning_rate * g;
      }
    }
    result.training_log.push_back(
        {it, sum_return / std::max<std::size_t>(n_traj, 1),
         sum_composite / std::max<std::size_t>(n_traj, 1)});
  }

  for (std::size_t c = 0; c < seeds.size(); ++c) {
    result.hardened.push_back(best[c].cluster);
    result.hardened_composite.push_back(best[c].composite);
  }
  return result;
}

IllicitCluster policy_rollout(const Policy& policy, const IllicitCluster& cluster,
                              const GrpoConfig& cfg, int steps, RngStream rng) {
  IllicitCluster state = cluster;
  for (int t = 0; t < steps; ++t) {
    if (state.budget_used >= cfg.budget.max_edits) break;
    const auto features = cluster_features(state, cfg.budget);
    const auto p = policy.probs(features);
    RngStream step_rng = rng.fork(static_cast<uint64_t>(t));
    const int idx = static_cast<int>(step_rng.categorical(p));
    EditAction action = instantiate(policy.grid[idx], state, step_rng);
    ApplyResult result = apply_action(state, action, cfg.budget, step_rng, cfg.edit);
    if (result.applied) state = std::move(result.cluster);
  }
  return state;
}

}  // namespace txgen
