#include "txgen/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace txgen {

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<int32_t, int32_t>& p) const {
    return hash_combine(static_cast<uint64_t>(p.first),
                        static_cast<uint64_t>(p.second));
  }
};

}  // namespace

UGraph daily_projection(const TransactionLog& log, int64_t day) {
  // Log is time-sorted; locate the day's range by binary search.
  const auto& txs = log.transactions;
  auto lo = std::lower_bound(txs.begin(), txs.end(), day * kSecondsPerDay,
                             [](const Transaction& tx, int64_t t) {
                               return tx.timestamp < t;
                             });
  auto hi = std::lower_bound(lo, txs.end(), (day + 1) * kSecondsPerDay,
                             [](const Transaction& tx, int64_t t) {
                               return tx.timestamp < t;
                             });
  std::unordered_map<std::string, int32_t> ids;
  std::unordered_set<std::pair<int32_t, int32_t>, PairHash> pairs;
  UGraph g;
  for (auto it = lo; it != hi; ++it) {
    auto intern = [&](const AccountRef& a) {
      auto [pos, inserted] = ids.emplace(account_key(a), static_cast<int32_t>(ids.size()));
      return pos->second;
    };
    int32_t u = intern(it->from);
    int32_t v = intern(it->to);
    if (u == v) continue;  // self-loops never enter the simple projection
    auto e = std::minmax(u, v);
    if (pairs.emplace(e.first, e.second).second) {
      g.edges.emplace_back(e.first, e.second);
    }
  }
  g.n = ids.size();
  return g;
}

namespace {

struct UnionFind {
  std::vector<int32_t> parent, rank_;
  explicit UnionFind(std::size_t n) : parent(n), rank_(n, 0) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int32_t find(int32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int32_t a, int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }
};

std::vector<int> degrees(const UGraph& g) {
  std::vector<int> deg(g.n, 0);
  for (auto [u, v] : g.edges) {
    ++deg[u];
    ++deg[v];
  }
  return deg;
}

// Core numbers by iterative peeling (bucket version of Batagelj-Zaversnik).
std::vector<int> core_numbers(const UGraph& g, const std::vector<int>& deg) {
  const std::size_t n = g.n;
  if (n == 0) return {};
  std::vector<std::vector<int32_t>> adj(n);
  for (auto [u, v] : g.edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  int maxd = *std::max_element(deg.begin(), deg.end());
  std::vector<int> d = deg;
  std::vector<int32_t> order(n);
  std::vector<int> pos(n);
  std::vector<int> bin(maxd + 2, 0);
  for (std::size_t v = 0; v < n; ++v) ++bin[d[v]];
  int start = 0;
  for (int k = 0; k <= maxd; ++k) {
    int count = bin[k];
    bin[k] = start;
    start += count;
  }
  for (std::size_t v = 0; v < n; ++v) {
    pos[v] = bin[d[v]];
    order[pos[v]] = static_cast<int32_t>(v);
    ++bin[d[v]];
  }
  for (int k = maxd; k > 0; --k) bin[k] = bin[k - 1];
  bin[0] = 0;
  std::vector<int> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    int32_t v = order[i];
    core[v] = d[v];
    for (int32_t u : adj[v]) {
      if (d[u] > d[v]) {
        int du = d[u];
        int pu = pos[u];
        int pw = bin[du];
        int32_t w = order[pw];
        if (u != w) {
          pos[u] = pw;
          pos[w] = pu;
          order[pu] = w;
          order[pw] = u;
        }
        ++bin[du];
        --d[u];
      }
    }
  }
  return core;
}

int64_t triangle_count(const UGraph& g) {
  // Count per edge via intersection of lower-ranked adjacency lists.
  std::vector<std::vector<int32_t>> adj(g.n);
  std::vector<int> deg(g.n, 0);
  for (auto [u, v] : g.edges) {
    ++deg[u];
    ++deg[v];
  }
  auto rank_less = [&](int32_t a, int32_t b) {
    return deg[a] != deg[b] ? deg[a] < deg[b] : a < b;
  };
  for (auto [u, v] : g.edges) {
    if (rank_less(u, v)) {
      adj[u].push_back(v);
    } else {
      adj[v].push_back(u);
    }
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  int64_t triangles = 0;
  for (auto [u, v] : g.edges) {
    const auto& a = adj[u];
    const auto& b = adj[v];
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] < b[j]) {
        ++i;
      } else if (a[i] > b[j]) {
        ++j;
      } else {
        ++triangles;
        ++i;
        ++j;
      }
    }
  }
  return triangles;
}

}  // namespace

DailyInvariants graph_invariants(const UGraph& g) {
  DailyInvariants inv;
  inv.active_nodes = g.n;
  inv.edge_count = g.edges.size();
  if (g.n == 0) {
    inv.n_components = 0;
    return inv;
  }

  UnionFind uf(g.n);
  for (auto [u, v] : g.edges) uf.unite(u, v);
  std::unordered_map<int32_t, std::size_t> comp_size;
  for (std::size_t v = 0; v < g.n; ++v) {
    ++comp_size[uf.find(static_cast<int32_t>(v))];
  }
  std::size_t largest = 0;
  for (const auto& [root, size] : comp_size) largest = std::max(largest, size);
  inv.n_components = static_cast<int>(comp_size.size());
  inv.gcc_ratio = static_cast<double>(largest) / static_cast<double>(g.n);

  const std::vector<int> deg = degrees(g);
  const std::vector<int> core = core_numbers(g, deg);
  int max_core = 0;
  for (int c : core) max_core = std::max(max_core, c);
  inv.max_kcore = max_core;
  std::size_t in_max_core = 0;
  for (int c : core) {
    if (c == max_core) ++in_max_core;
  }
  inv.max_core_fraction = static_cast<double>(in_max_core) / static_cast<double>(g.n);

  // Degree assortativity: Pearson correlation of endpoint degrees over the
  // 2m directed stubs (Newman's r).
  if (!g.edges.empty()) {
    double sum_x = 0.0, sum_x2 = 0.0, sum_xy = 0.0;
    for (auto [u, v] : g.edges) {
      const double du = deg[u], dv = deg[v];
      sum_x += du + dv;
      sum_x2 += du * du + dv * dv;
      sum_xy += 2.0 * du * dv;
    }
    const double m2 = 2.0 * static_cast<double>(g.edges.size());
    const double mean = sum_x / m2;
    const double var = sum_x2 / m2 - mean * mean;
    const double cov = sum_xy / m2 - mean * mean;
    if (var > 1e-12) {
      inv.assortativity = cov / var;
      inv.assortativity_defined = true;
    }
  }

  int64_t triples = 0;
  for (int d : deg) {
    triples += static_cast<int64_t>(d) * (d - 1) / 2;
  }
  if (triples > 0) {
    inv.transitivity =
        3.0 * static_cast<double>(triangle_count(g)) / static_cast<double>(triples);
  }
  return inv;
}

std::string_view to_string(TailVariable v) {
  switch (v) {
    case TailVariable::degree_unique: return "degree_unique";
    case TailVariable::degree_tx_count: return "degree_tx_count";
    case TailVariable::strength: return "strength";
    case TailVariable::amount: return "amount";
  }
  return "unknown";
}

std::array<TailSamples, 4> compute_tail_variables(const TransactionLog& log) {
  std::unordered_map<std::string, int32_t> ids;
  auto intern = [&](const AccountRef& a) {
    auto [pos, inserted] = ids.emplace(account_key(a), static_cast<int32_t>(ids.size()));
    return pos->second;
  };
  std::vector<double> strength;
  std::vector<int64_t> tx_count;
  std::vector<std::unordered_set<int32_t>> partners;
  std::vector<double> amounts;
  amounts.reserve(log.transactions.size());
  for (const Transaction& tx : log.transactions) {
    int32_t u = intern(tx.from);
    int32_t v = intern(tx.to);
    std::size_t need = ids.size();
    if (strength.size() < need) {
      strength.resize(need, 0.0);
      tx_count.resize(need, 0);
      partners.resize(need);
    }
    strength[u] += tx.amount_paid;
    strength[v] += tx.amount_received;
    ++tx_count[u];
    ++tx_count[v];
    partners[u].insert(v);
    partners[v].insert(u);
    if (tx.amount_paid > 0.0) amounts.push_back(tx.amount_paid);
  }
  std::array<TailSamples, 4> out;
  out[0].variable = TailVariable::degree_unique;
  out[1].variable = TailVariable::degree_tx_count;
  out[2].variable = TailVariable::strength;
  out[3].variable = TailVariable::amount;
  for (std::size_t i = 0; i < partners.size(); ++i) {
    if (!partners[i].empty()) {
      out[0].values.push_back(static_cast<double>(partners[i].size()));
    }
    if (tx_count[i] > 0) {
      out[1].values.push_back(static_cast<double>(tx_count[i]));
    }
    if (strength[i] > 0.0) out[2].values.push_back(strength[i]);
  }
  out[3].values = std::move(amounts);
  return out;
}

std::string xmin_mode_label(const XminMode& m) {
  if (m.kind == XminMode::Kind::automatic) return "auto";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fixed_percentile_%g", m.percentile);
  return buf;
}

double ks_distance(std::span<const double> samples, double alpha, double x_min) {
  std::vector<double> tail;
  for (double v : samples) {
    if (v >= x_min) tail.push_back(v);
  }
  if (tail.empty()) throw FitError("ks_distance: no tail samples");
  std::sort(tail.begin(), tail.end());
  const double m = static_cast<double>(tail.size());
  const double e = alpha - 1.0;
  double d = 0.0;
  for (std::size_t i = 0; i < tail.size(); ++i) {
    const double model = 1.0 - std::pow(tail[i] / x_min, -e);
    const double hi = (static_cast<double>(i) + 1.0) / m;
    const double lo = static_cast<double>(i) / m;
    d = std::max(d, std::max(std::abs(hi - model), std::abs(lo - model)));
  }
  return d;
}

namespace {

// MLE alpha and KS distance for the suffix starting at sorted index `start`,
// sharing one pass over suffix log-sums.
struct SortedFitter {
  const std::vector<double>& sorted;
  std::vector<double> suffix_log;  // suffix sums of ln(x)

  explicit SortedFitter(const std::vector<double>& s) : sorted(s) {
    suffix_log.assign(s.size() + 1, 0.0);
    for (std::size_t i = s.size(); i-- > 0;) {
      suffix_log[i] = suffix_log[i + 1] + std::log(s[i]);
    }
  }

  double alpha_at(std::size_t start) const {
    const double x_min = sorted[start];
    const double m = static_cast<double>(sorted.size() - start);
    const double log_sum = suffix_log[start] - m * std::log(x_min);
    if (log_sum <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 + m / log_sum;
  }

  double ks_at(std::size_t start, double alpha) const {
    const double x_min = sorted[start];
    const double m = static_cast<double>(sorted.size() - start);
    const double e = alpha - 1.0;
    double d = 0.0;
    for (std::size_t i = start; i < sorted.size(); ++i) {
      const double model = 1.0 - std::pow(sorted[i] / x_min, -e);
      const double rank = static_cast<double>(i - start);
      d = std::max(d, std::max(std::abs((rank + 1.0) / m - model),
                               std::abs(rank / m - model)));
    }
    return d;
  }
};

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Truncated-lognormal tail log-likelihood at (mu, sigma); samples are x >= x_min.
double lognormal_tail_loglik(std::span<const double> logs, double log_xmin,
                             double mu, double sigma) {
  const double tail_prob = 1.0 - normal_cdf((log_xmin - mu) / sigma);
  if (tail_prob <= 1e-300) return -std::numeric_limits<double>::infinity();
  double ll = 0.0;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double log_norm =
      -std::log(sigma) - 0.5 * std::log(2.0 * M_PI) - std::log(tail_prob);
  for (double lx : logs) {
    const double d = lx - mu;
    ll += log_norm - lx - d * d * inv2s2;
  }
  return ll;
}

}  // namespace

LognormalComparison compare_lognormal(std::span<const double> samples, double x_min) {
  std::vector<double> logs;
  for (double v : samples) {
    if (v >= x_min) logs.push_back(std::log(v));
  }
  LognormalComparison out;
  if (logs.size() < 30) {
    throw FitError("compare_lognormal: need at least 30 tail samples");
  }
  const std::size_t m = logs.size();
  const double log_xmin = std::log(x_min);

  // Power-law tail log-likelihood at the MLE.
  double log_sum = 0.0;
  for (double lx : logs) log_sum += lx - log_xmin;
  double alpha;
  if (log_sum <= 0.0) {
    alpha = std::numeric_limits<double>::infinity();
  } else {
    alpha = 1.0 + static_cast<double>(m) / log_sum;
  }
  std::vector<double> pl_ll(m), ln_ll(m);
  if (!std::isfinite(alpha)) {
    // Degenerate spike at x_min; lognormal wins by construction.
    out.r = -std::numeric_limits<double>::infinity();
    out.p = 0.0;
    return out;
  }
  for (std::size_t i = 0; i < m; ++i) {
    pl_ll[i] = std::log(alpha - 1.0) - log_xmin - alpha * (logs[i] - log_xmin);
  }

  // Truncated lognormal MLE via Nelder-Mead in (mu, log sigma), moment start.
  double mean = std::accumulate(logs.begin(), logs.end(), 0.0) / m;
  double var = 0.0;
  for (double lx : logs) var += (lx - mean) * (lx - mean);
  var /= std::max<std::size_t>(m - 1, 1);
  double sd = std::max(std::sqrt(var), 1e-3);
  // Bounded box keeps the optimizer off the degenerate ridge where the
  // truncated lognormal mimics a pure power law.
  const double mu_lo = mean - 30.0, mu_hi = mean + 10.0;
  const double ls_lo = std::log(1e-3), ls_hi = std::log(8.0);
  auto objective = [&](double mu, double log_sigma) {
    mu = std::clamp(mu, mu_lo, mu_hi);
    log_sigma = std::clamp(log_sigma, ls_lo, ls_hi);
    return -lognormal_tail_loglik(logs, log_xmin, mu, std::exp(log_sigma));
  };
  std::array<std::array<double, 2>, 3> simplex = {{
      {mean, std::log(sd)},
      {mean - 0.7 * sd, std::log(sd) + 0.35},
      {mean + 0.4 * sd, std::log(sd) - 0.35},
  }};
  std::array<double, 3> fval;
  for (int i = 0; i < 3; ++i) fval[i] = objective(simplex[i][0], simplex[i][1]);
  for (int iter = 0; iter < 300; ++iter) {
    std::array<int, 3> ord = {0, 1, 2};
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fval[a] < fval[b]; });
    if (std::abs(fval[ord[2]] - fval[ord[0]]) <
        1e-10 * (1.0 + std::abs(fval[ord[0]]))) {
      break;
    }
    const auto& best = simplex[ord[0]];
    const auto& good = simplex[ord[1]];
    auto& worst = simplex[ord[2]];
    double cx = 0.5 * (best[0] + good[0]);
    double cy = 0.5 * (best[1] + good[1]);
    double rx = cx + (cx - worst[0]);
    double ry = cy + (cy - worst[1]);
    double fr = objective(rx, ry);
    if (fr < fval[ord[0]]) {
      double ex = cx + 2.0 * (cx - worst[0]);
      double ey = cy + 2.0 * (cy - worst[1]);
      double fe = objective(ex, ey);
      if (fe < fr) {
        worst = {ex, ey};
        fval[ord[2]] = fe;
      } else {
        worst = {rx, ry};
        fval[ord[2]] = fr;
      }
    } else if (fr < fval[ord[1]]) {
      worst = {rx, ry};
      fval[ord[2]] = fr;
    } else {
      double kx = cx + 0.5 * (worst[0] - cx);
      double ky = cy + 0.5 * (worst[1] - cy);
      double fk = objective(kx, ky);
      if (fk < fval[ord[2]]) {
        worst = {kx, ky};
        fval[ord[2]] = fk;
      } else {
        for (int i : {ord[1], ord[2]}) {
          simplex[i][0] = best[0] + 0.5 * (simplex[i][0] - best[0]);
          simplex[i][1] = best[1] + 0.5 * (simplex[i][1] - best[1]);
          fval[i] = objective(simplex[i][0], simplex[i][1]);
        }
      }
    }
  }
  int best_i = static_cast<int>(
      std::min_element(fval.begin(), fval.end()) - fval.begin());
  out.mu = std::clamp(simplex[best_i][0], mu_lo, mu_hi);
  double log_sigma = std::clamp(simplex[best_i][1], ls_lo, ls_hi);
  out.sigma = std::exp(log_sigma);
  out.converged = std::isfinite(fval[best_i]);
  if (!out.converged) {
    throw FitError("compare_lognormal: lognormal fit did not converge");
  }

  const double tail_prob = 1.0 - normal_cdf((log_xmin - out.mu) / out.sigma);
  const double inv2s2 = 1.0 / (2.0 * out.sigma * out.sigma);
  const double log_norm = -std::log(out.sigma) - 0.5 * std::log(2.0 * M_PI) -
                          std::log(std::max(tail_prob, 1e-300));
  for (std::size_t i = 0; i < m; ++i) {
    const double d = logs[i] - out.mu;
    ln_ll[i] = log_norm - logs[i] - d * d * inv2s2;
  }

  // Vuong-style normalized ratio (Clauset et al. convention).
  double r = 0.0;
  {
    double mean_d = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      r += pl_ll[i] - ln_ll[i];
    }
    mean_d = r / m;
    double var_d = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = pl_ll[i] - ln_ll[i] - mean_d;
      var_d += d * d;
    }
    var_d /= m;
    const double sd_d = std::sqrt(std::max(var_d, 1e-300));
    const double z = r / (sd_d * std::sqrt(static_cast<double>(m)));
    out.p = std::erfc(std::abs(z) / std::sqrt(2.0));
  }
  out.r = r;
  return out;
}

TailFitReport fit_power_law(const TailSamples& samples, const XminMode& mode,
                            const TailFitOptions& options) {
  TailFitReport rep;
  rep.variable = samples.variable;
  rep.mode = mode;
  rep.n = samples.values.size();
  std::vector<double> sorted = samples.values;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.empty() || sorted.front() <= 0.0) {
    throw FitError("fit_power_law: samples must be positive and non-empty");
  }
  SortedFitter fitter(sorted);

  std::size_t start = 0;
  if (mode.kind == XminMode::Kind::fixed_percentile) {
    // Nearest-rank percentile; the tail keeps everything >= that value.
    const double q = mode.percentile;
    if (q <= 0.0 || q >= 100.0) {
      throw FitError("fit_power_law: percentile must be in (0, 100)");
    }
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(q / 100.0 * static_cast<double>(sorted.size())));
    rank = std::min(std::max<std::size_t>(rank, 1), sorted.size());
    const double x_min = sorted[rank - 1];
    start = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), x_min) - sorted.begin());
  } else {
    // Scan distinct values (quantile-subsampled above the candidate cap) and
    // keep the KS minimizer among cutoffs with enough tail mass.
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (i == 0 || sorted[i] != sorted[i - 1]) starts.push_back(i);
    }
    if (starts.size() > options.max_auto_candidates) {
      std::vector<std::size_t> picked;
      picked.reserve(options.max_auto_candidates);
      const std::size_t c = options.max_auto_candidates;
      for (std::size_t k = 0; k < c; ++k) {
        picked.push_back(starts[k * (starts.size() - 1) / (c - 1)]);
      }
      picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
      starts = std::move(picked);
    }
    double best_d = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t s : starts) {
      if (sorted.size() - s < options.min_tail) break;
      const double a = fitter.alpha_at(s);
      if (!std::isfinite(a)) continue;
      const double d = fitter.ks_at(s, a);
      if (d < best_d) {
        best_d = d;
        start = s;
        found = true;
      }
    }
    if (!found) throw FitError("fit_power_law: no feasible x_min candidate");
  }

  rep.x_min = sorted[start];
  rep.n_tail = sorted.size() - start;
  if (rep.n_tail < options.min_tail) {
    throw FitError("fit_power_law: fewer than " +
                   std::to_string(options.min_tail) + " tail samples");
  }
  rep.alpha_unclamped = fitter.alpha_at(start);
  rep.alpha = std::clamp(rep.alpha_unclamped, options.alpha_lo, options.alpha_hi);
  rep.boundary_flag = rep.alpha != rep.alpha_unclamped;
  rep.ks_d = fitter.ks_at(start, rep.alpha_unclamped);

  if (options.with_lognormal_comparison && rep.n_tail >= options.min_lr_tail &&
      std::isfinite(rep.alpha_unclamped)) {
    try {
      LognormalComparison cmp = compare_lognormal(sorted, rep.x_min);
      rep.has_lr = true;
      rep.r_loglik = cmp.r;
      rep.p_value = cmp.p;
    } catch (const FitError&) {
      rep.has_lr = false;
    }
  }
  return rep;
}

InvariantSummary summarize_invariants(const std::vector<DailyInvariants>& daily) {
  InvariantSummary s;
  s.days = daily.size();
  if (daily.empty()) return s;
  auto accum = [&](auto get, double& mean_out, double& std_out) {
    double mean = 0.0;
    std::size_t n = 0;
    for (const auto& d : daily) {
      auto v = get(d);
      if (!v.has_value()) continue;
      mean += *v;
      ++n;
    }
    if (n == 0) {
      mean_out = 0.0;
      std_out = 0.0;
      return;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& d : daily) {
      auto v = get(d);
      if (!v.has_value()) continue;
      var += (*v - mean) * (*v - mean);
    }
    var /= static_cast<double>(n);
    mean_out = mean;
    std_out = std::sqrt(var);
  };
  auto opt = [](double v) { return std::optional<double>(v); };
  accum([&](const DailyInvariants& d) { return opt(d.gcc_ratio); },
        s.mean.gcc_ratio, s.stddev.gcc_ratio);
  double mean_tmp = 0.0, std_tmp = 0.0;
  accum([&](const DailyInvariants& d) { return opt(double(d.n_components)); },
        mean_tmp, std_tmp);
  s.mean.n_components = static_cast<int>(std::lround(mean_tmp));
  s.stddev.n_components = static_cast<int>(std::lround(std_tmp));
  accum([&](const DailyInvariants& d) { return opt(double(d.max_kcore)); },
        mean_tmp, std_tmp);
  s.mean.max_kcore = static_cast<int>(std::lround(mean_tmp));
  s.stddev.max_kcore = static_cast<int>(std::lround(std_tmp));
  accum([&](const DailyInvariants& d) { return opt(d.max_core_fraction); },
        s.mean.max_core_fraction, s.stddev.max_core_fraction);
  accum(
      [&](const DailyInvariants& d) {
        return d.assortativity_defined ? std::optional<double>(d.assortativity)
                                       : std::nullopt;
      },
      s.mean.assortativity, s.stddev.assortativity);
  s.mean.assortativity_defined =
      std::any_of(daily.begin(), daily.end(),
                  [](const auto& d) { return d.assortativity_defined; });
  accum([&](const DailyInvariants& d) { return opt(d.transitivity); },
        s.mean.transitivity, s.stddev.transitivity);
  accum([&](const DailyInvariants& d) { return opt(double(d.active_nodes)); },
        mean_tmp, std_tmp);
  s.mean.active_nodes = static_cast<std::size_t>(std::lround(mean_tmp));
  accum([&](const DailyInvariants& d) { return opt(double(d.edge_count)); },
        mean_tmp, std_tmp);
  s.mean.edge_count = static_cast<std::size_t>(std::lround(mean_tmp));
  return s;
}

FidelityReport fidelity_report(const TransactionLog& log,
                               const TailFitOptions& options) {
  if (log.transactions.empty()) {
    throw FitError("fidelity_report: empty log");
  }
  FidelityReport rep;
  const int64_t first_day = day_of(log.transactions.front().timestamp);
  const int64_t last_day = day_of(log.transactions.back().timestamp);
  for (int64_t day = first_day; day <= last_day; ++day) {
    UGraph g = daily_projection(log, day);
    DailyInvariants inv = graph_invariants(g);
    inv.day = day;
    rep.daily.push_back(inv);
  }
  rep.summary = summarize_invariants(rep.daily);

  const auto tails = compute_tail_variables(log);
  const std::array<XminMode, 3> modes = {XminMode::fixed(90.0),
                                         XminMode::fixed(95.0),
                                         XminMode::automatic()};
  for (const auto& samples : tails) {
    for (const auto& mode : modes) {
      try {
        rep.tails.push_back(fit_power_law(samples, mode, options));
      } catch (const FitError&) {
        TailFitReport failed;
        failed.variable = samples.variable;
        failed.mode = mode;
        failed.n = samples.values.size();
        failed.n_tail = 0;
        rep.tails.push_back(failed);
      }
    }
  }
  return rep;
}

}  // namespace txgen
